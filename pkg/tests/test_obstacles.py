"""Obstacle sampling, hitting times, survival statistics.

The load-bearing check is the conditional survival identity: for a FIXED
path, the probability that an independent Poisson configuration of shaped
obstacles misses it up to time t equals exp(-rho * V) with V the volume of
the path's sausage built from the reflected shape. That identity is exact,
so it validates the hitting-time scan against the volume oracle with no
simulation tolerance beyond binomial noise.
"""

import math

import numpy as np
import pytest

from sausage_lab import (
    ConfigurationError,
    InsufficientDataError,
    Region,
    ResourceLimitError,
    SamplePath,
    ball,
    conditional_tail_gap,
    first_hitting_time,
    sample_obstacles,
    survival_experiment,
    voxel_oracle_volume,
    write_trials_csv,
    zero_field,
)
from sausage_lab.obstacles import TRIAL_COLUMNS, ObstacleField, default_region
from sausage_lab.rng import generator_for
from sausage_lab.sde import IntegratorConfig, integrate


def make_field(points, half_side=100.0, radius=1.0):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return ObstacleField(
        intensity_rho=1.0,
        region=Region.cube([0.0, 0.0, 0.0], half_side),
        points=pts,
        cross_section=ball(radius, 3),
        seed=(0,),
    )


def straight_path(xs, dt=0.1):
    pos = np.zeros((len(xs), 3))
    pos[:, 0] = xs
    return SamplePath(positions=pos, dt=dt, seed=0)


class TestRegion:
    def test_volume_and_cube(self):
        r = Region(lo=[0.0, -1.0, 2.0], hi=[2.0, 1.0, 5.0])
        assert r.volume == pytest.approx(2.0 * 2.0 * 3.0)
        c = Region.cube([1.0, 1.0, 1.0], 2.0)
        assert np.array_equal(c.lo, [-1.0, -1.0, -1.0])
        assert np.array_equal(c.hi, [3.0, 3.0, 3.0])
        assert c.dimension == 3

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            Region(lo=[0.0, 0.0], hi=[1.0])
        with pytest.raises(ConfigurationError):
            Region(lo=[0.0, 0.0], hi=[1.0, 0.0])
        with pytest.raises(ConfigurationError):
            Region(lo=[0.0, np.inf], hi=[1.0, 2.0])

    def test_interior_mask(self):
        r = Region.cube([0.0, 0.0, 0.0], 2.0)
        pts = np.array([
            [0.0, 0.0, 0.0],
            [1.5, 0.0, 0.0],
            [1.4, 1.4, 1.4],
            [0.0, 0.0, -1.6],
        ])
        mask = r.interior_mask(pts, margin=0.5)
        assert mask.tolist() == [True, True, True, False]


class TestSampling:
    def region(self):
        return Region.cube([0.0, 0.0, 0.0], 5.0)

    def test_deterministic(self):
        a = sample_obstacles(0.1, self.region(), ball(1.0, 3), (3, 1))
        b = sample_obstacles(0.1, self.region(), ball(1.0, 3), (3, 1))
        c = sample_obstacles(0.1, self.region(), ball(1.0, 3), (3, 2))
        assert np.array_equal(a.points, b.points)
        assert a.n_points != c.n_points or not np.array_equal(a.points, c.points)

    def test_containment(self):
        f = sample_obstacles(0.2, self.region(), ball(1.0, 3), 7)
        assert np.all(f.points >= f.region.lo)
        assert np.all(f.points <= f.region.hi)

    def test_poisson_mean(self):
        rho = 0.04  # expected 40 per field
        counts = [
            sample_obstacles(rho, self.region(), ball(1.0, 3), (9, k)).n_points
            for k in range(200)
        ]
        mean = np.mean(counts)
        expected = rho * self.region().volume
        assert abs(mean - expected) <= 3.0 * math.sqrt(expected / 200)

    def test_independent_of_path_streams(self):
        # obstacle draws are salted; the raw integrator stream for the same
        # key starts with different numbers
        f = sample_obstacles(0.1, self.region(), ball(1.0, 3), (5,))
        raw = generator_for(5).random(4)
        assert not np.allclose(f.points[0, :3], raw[:3])

    def test_resource_limit(self):
        with pytest.raises(ResourceLimitError):
            sample_obstacles(1.0, Region.cube([0.0] * 3, 300.0), ball(1.0, 3), 0)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            sample_obstacles(-1.0, self.region(), ball(1.0, 3), 0)
        with pytest.raises(ConfigurationError):
            sample_obstacles(0.1, self.region(), ball(1.0, 4), 0)


class TestFirstHittingTime:
    def test_hit_at_start(self):
        f = make_field([[0.2, 0.0, 0.0]])
        res = first_hitting_time(straight_path([0.0, 5.0]), f)
        assert res.hit and res.step_index == 0 and res.t_hit == 0.0
        assert not res.censored

    def test_hit_at_known_step_boundary_exact(self):
        # x_k = 0.5 k reaches distance exactly 1.0 from the center at k = 18;
        # contact at distance equal to the radius counts as a hit
        f = make_field([[10.0, 0.0, 0.0]])
        path = straight_path([0.5 * k for k in range(41)], dt=0.1)
        res = first_hitting_time(path, f)
        assert res.hit
        assert res.step_index == 18
        assert res.t_hit == pytest.approx(1.8)

    def test_time_censored(self):
        f = make_field(np.empty((0, 3)))
        path = straight_path([0.0, 1.0, 2.0], dt=0.1)
        res = first_hitting_time(path, f)
        assert not res.hit
        assert res.censored and not res.boundary_censored
        assert res.t_hit == pytest.approx(path.duration)
        assert res.step_index == 2

    def test_boundary_censored_at_known_step(self):
        f = ObstacleField(
            intensity_rho=1.0,
            region=Region.cube([0.0] * 3, 3.0),
            points=np.array([[50.0, 0.0, 0.0]]),
            cross_section=ball(1.0, 3),
            seed=(0,),
        )
        # margin = reach + band = 1.25, so |x| > 1.75 leaves the safe interior
        path = straight_path([0.0, 1.0, 2.0, 3.0], dt=0.1)
        res = first_hitting_time(path, f, safety_band=0.25)
        assert not res.hit
        assert res.censored and res.boundary_censored
        assert res.step_index == 2
        assert res.t_hit == pytest.approx(0.2)

    def test_hit_wins_tie_with_exit(self):
        f = ObstacleField(
            intensity_rho=1.0,
            region=Region.cube([0.0] * 3, 3.0),
            points=np.array([[2.5, 0.0, 0.0]]),
            cross_section=ball(1.0, 3),
            seed=(0,),
        )
        path = straight_path([0.0, 2.5], dt=0.1)
        res = first_hitting_time(path, f, safety_band=0.25)
        assert res.hit and res.step_index == 1

    def test_dimension_mismatch(self):
        f = make_field([[0.0, 0.0, 0.0]])
        pos = np.zeros((3, 4))
        with pytest.raises(ConfigurationError):
            first_hitting_time(SamplePath(positions=pos, dt=0.1, seed=0), f)


class TestSurvivalIdentity:
    def test_matches_reflected_sausage_volume(self):
        # fixed path; survival against fresh obstacle fields is binomial with
        # success probability exp(-rho * V(reflected sausage))
        section = ball(1.0, 3)
        cfg = IntegratorConfig(
            x0=np.zeros(3), dt=0.01, n_steps=2000, epsilon=1.0, seed=42
        )
        path = integrate(zero_field(3), cfg)
        volume = voxel_oracle_volume(path, section.reflected(), resolution=8)
        rho = 1.0 / volume
        half = float(np.max(np.abs(path.positions))) + 1.5
        region = Region.cube([0.0] * 3, half)

        n_fields = 800
        survived = 0
        for k in range(n_fields):
            obst = sample_obstacles(rho, region, section, (77, k))
            res = first_hitting_time(path, obst)
            assert not res.boundary_censored
            survived += int(not res.hit)

        p_hat = survived / n_fields
        p_exp = math.exp(-rho * volume)  # = exp(-1) by construction
        gate = 3.0 * math.sqrt(p_exp * (1.0 - p_exp) / n_fields) + 0.02 * p_exp
        assert abs(p_hat - p_exp) <= gate


class TestConditionalTailGap:
    def test_small_on_exponential_sample(self):
        times = generator_for(12).exponential(1.0, size=4000)
        assert conditional_tail_gap(times, 0.3, 0.5) < 0.05

    def test_needs_tail_data(self):
        with pytest.raises(InsufficientDataError):
            conditional_tail_gap(np.array([0.1, 0.2]), 5.0, 1.0)


class TestSurvivalExperiment:
    def run_small(self, seed=0):
        return survival_experiment(
            zero_field(3), 1.0, ball(1.0, 3), sigma=3.0,
            n_paths=40, n_obstacle_fields=2, dt=0.01,
            master_seed=seed, lambda_ref=2.0 * math.pi,
        )

    def test_small_run_accounting(self):
        s = self.run_small()
        assert s.n_trials == 80
        assert s.n_hits + s.n_censored == 80
        assert s.n_hits >= 30
        assert s.lambda_hat > 0
        assert s.scaled_times.shape == (80,)
        assert len(s.trials) == 80
        # at this density the discrete hazard exceeds the sparse-limit rate
        assert s.lambda_hat > 2.0 * math.pi

    def test_deterministic(self):
        a = self.run_small()
        b = self.run_small()
        assert a.lambda_hat == b.lambda_hat
        assert np.array_equal(a.scaled_times, b.scaled_times)

    def test_lambda_ref_required(self):
        with pytest.raises(ConfigurationError):
            survival_experiment(
                zero_field(3), 1.0, ball(1.0, 3), sigma=3.0, n_paths=5
            )

    def test_insufficient_hits(self):
        with pytest.raises(InsufficientDataError):
            survival_experiment(
                zero_field(3), 1.0, ball(1.0, 3), sigma=2.0,
                n_paths=2, n_obstacle_fields=1, dt=0.01,
                master_seed=1, lambda_ref=2.0 * math.pi,
            )

    def test_trials_csv(self, tmp_path):
        s = self.run_small()
        out = tmp_path / "trials.csv"
        write_trials_csv(s.trials, out)
        lines = out.read_text().splitlines()
        assert lines[0] == ",".join(TRIAL_COLUMNS)
        assert len(lines) == 81

    def test_json_dict(self):
        s = self.run_small()
        payload = s.to_json_dict()
        assert payload["n_trials"] == 80
        assert payload["sigma"] == 3.0

    def test_default_region_scales(self):
        r = default_region(np.zeros(3), ball(1.0, 3), 1.0, zero_field(3), 4.0)
        assert np.all(r.hi == -r.lo)
        assert r.hi[0] == pytest.approx(1.0 + 6.0 * 2.0)
