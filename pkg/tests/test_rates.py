"""Growth rates, capacities, diffusivity, sweeps.

Closed-form oracles used here:
  - ball capacity (1/2-Laplacian convention): 2 pi^{d/2} / Gamma(d/2-1) R^{d-2}
  - prolate spheroid a = b < c: 2 pi sqrt(c^2-a^2) / ln((c + sqrt(c^2-a^2))/a)
  - oblate spheroid a = b > c: 2 pi sqrt(a^2-c^2) / arccos(c/a)
  - finite-horizon ball-sausage rate of eps-Brownian motion in d = 3:
        2 pi eps^2 R + 4 eps R^2 sqrt(2 pi / T) + (4 pi R^3 / 3) / T
"""

import math

import numpy as np
import pytest

from sausage_lab import (
    ConfigurationError,
    ball,
    capacity_anisotropic,
    capacity_ball,
    custom_field,
    displacement_covariance_from_reported,
    ellipsoid_capacity,
    estimate_effective_diffusivity,
    estimate_growth_rate,
    read_sweep_csv,
    suggested_dt,
    sweep_r,
    taylor_green,
    write_sweep_csv,
    zero_field,
)
from sausage_lab import ResourceLimitError
from sausage_lab.rates import SWEEP_COLUMNS, SweepRow, _auto_stride


def exact_ball_rate(eps: float, T: float, radius: float = 1.0) -> float:
    """Finite-horizon mean sausage rate of eps-scaled Brownian motion."""
    return (
        2.0 * math.pi * eps**2 * radius
        + 4.0 * eps * radius**2 * math.sqrt(2.0 * math.pi / T)
        + (4.0 * math.pi * radius**3 / 3.0) / T
    )


class TestCapacityClosedForms:
    def test_ball_d3(self):
        assert capacity_ball(1.0, 3) == pytest.approx(2.0 * math.pi)
        assert capacity_ball(2.5, 3) == pytest.approx(5.0 * math.pi)

    def test_ball_d4(self):
        assert capacity_ball(1.0, 4) == pytest.approx(2.0 * math.pi**2)
        assert capacity_ball(2.0, 4) == pytest.approx(8.0 * math.pi**2)

    def test_ball_d5(self):
        assert capacity_ball(1.0, 5) == pytest.approx(4.0 * math.pi**2)

    def test_low_dimension_rejected(self):
        for d in (1, 2):
            with pytest.raises(ConfigurationError):
                capacity_ball(1.0, d)

    def test_sphere_limit_of_ellipsoid(self):
        for r in (0.5, 1.0, 3.0):
            assert ellipsoid_capacity([r, r, r]) == pytest.approx(
                capacity_ball(r, 3), rel=1e-12
            )

    def test_prolate_oracle(self):
        a, c = 1.0, 4.0
        f = math.sqrt(c**2 - a**2)
        expected = 2.0 * math.pi * f / math.log((c + f) / a)
        assert ellipsoid_capacity([a, a, c]) == pytest.approx(expected, rel=1e-12)

    def test_oblate_oracle(self):
        a, c = 2.0, 1.0
        f = math.sqrt(a**2 - c**2)
        expected = 2.0 * math.pi * f / math.acos(c / a)
        assert ellipsoid_capacity([a, a, c]) == pytest.approx(expected, rel=1e-12)

    def test_ellipsoid_validation(self):
        with pytest.raises(ConfigurationError):
            ellipsoid_capacity([1.0, -1.0, 1.0])
        with pytest.raises(ConfigurationError):
            ellipsoid_capacity([1.0, 1.0])


class TestReportedConvention:
    def test_adapter_values(self):
        a = displacement_covariance_from_reported(
            np.diag([0.0942, 0.0942, 0.03125])
        )
        assert np.allclose(np.diag(a), [0.3768, 0.3768, 0.0625])
        assert np.allclose(a, np.diag(np.diag(a)))

    def test_adapter_accepts_vector(self):
        a = displacement_covariance_from_reported([0.1, 0.2, 0.05])
        assert np.allclose(np.diag(a), [0.4, 0.8, 0.1])

    def test_adapter_rejects_off_diagonal(self):
        bad = np.array([[0.1, 0.01, 0.0], [0.01, 0.1, 0.0], [0.0, 0.0, 0.1]])
        with pytest.raises(ConfigurationError):
            displacement_covariance_from_reported(bad)

    def test_adapter_rejects_nonpositive(self):
        with pytest.raises(ConfigurationError):
            displacement_covariance_from_reported([0.1, -0.1, 0.2])

    def test_reference_anisotropic_limit(self):
        # reported horizontal 0.0942 and vertical eps^2/2 at eps = 0.25 give
        # a closed-form capacity limit; frozen from the ellipsoid formula
        cov = displacement_covariance_from_reported(
            np.diag([0.0942, 0.0942, 0.03125])
        )
        diag = np.diag(cov)
        value = math.sqrt(float(np.prod(diag))) * ellipsoid_capacity(1.0 / np.sqrt(diag))
        assert value == pytest.approx(1.3976136239258614, rel=1e-9)


class TestGrowthRate:
    def test_short_horizon_rejected(self):
        with pytest.raises(ConfigurationError):
            estimate_growth_rate(zero_field(3), 0.25, ball(1.0, 3), T=50.0)

    def test_matches_exact_rate_of_pure_noise(self):
        res = estimate_growth_rate(
            zero_field(3), 0.25, ball(1.0, 3),
            T=150.0, dt=0.01, m=4, n_offsets=2000,
            n_realizations=6, master_seed=14,
        )
        expected = exact_ball_rate(0.25, 150.0)
        assert res.gamma_hat == pytest.approx(expected, rel=0.10)
        assert abs(res.gamma_hat - expected) <= 3.0 * res.std_error + 0.02 * expected

    def test_mean_of_realizations(self):
        res = estimate_growth_rate(
            zero_field(3), 0.3, ball(1.0, 3),
            T=120.0, dt=0.01, m=3, n_offsets=500,
            n_realizations=4, master_seed=2,
        )
        assert res.gamma_hat == np.mean(res.per_realization)
        assert res.per_realization.shape == (4,)
        assert res.std_error > 0

    def test_deterministic(self):
        kw = dict(T=120.0, dt=0.01, m=3, n_offsets=500, n_realizations=2, master_seed=5)
        a = estimate_growth_rate(zero_field(3), 0.25, ball(1.0, 3), **kw)
        b = estimate_growth_rate(zero_field(3), 0.25, ball(1.0, 3), **kw)
        assert a.gamma_hat == b.gamma_hat
        assert np.array_equal(a.per_realization, b.per_realization)

    def test_json_dict(self):
        res = estimate_growth_rate(
            zero_field(3), 0.25, ball(1.0, 3),
            T=110.0, dt=0.01, m=2, n_offsets=200, n_realizations=1, master_seed=0,
        )
        payload = res.to_json_dict()
        assert payload["gamma_hat"] == res.gamma_hat
        assert payload["n_realizations"] == 1
        assert len(payload["per_realization"]) == 1


class TestDiffusivity:
    def test_pure_noise_rates(self):
        eps = 0.25
        res = estimate_effective_diffusivity(
            zero_field(3), eps, T=100.0, dt=0.01, n_realizations=2000, master_seed=8
        )
        # displacement convention: E|X^1_T|^2 = eps^2 T for pure noise
        assert res.msd_rate == pytest.approx(eps**2, rel=0.10)
        assert res.alpha_hat == res.msd_rate / 4.0
        # generator convention stored in the reporting matrix: eps^2/2 exactly
        assert res.a_bar[2, 2] == eps**2 / 2.0
        assert res.a_bar[0, 0] == res.alpha_hat
        # the third displacement-covariance diagonal is eps^2 (both
        # conventions are exposed: covariance carries the displacement rate)
        assert res.covariance[2, 2] == pytest.approx(eps**2, rel=0.10)

    def test_cellular_drift_raises_horizontal_rate(self):
        eps = 0.25
        res = estimate_effective_diffusivity(
            taylor_green(), eps, T=200.0, dt=0.01, n_realizations=300, master_seed=9
        )
        # advection enhances horizontal spreading well past bare diffusion
        assert res.msd_rate > 2.0 * eps**2
        assert res.a_bar is not None
        assert res.a_bar[2, 2] == eps**2 / 2.0

    def test_callable_field_gets_no_reporting_matrix(self):
        f = custom_field(
            lambda x: np.zeros_like(x), dimension=3, period=(1.0,) * 3, validate=False
        )
        res = estimate_effective_diffusivity(
            f, 0.5, T=100.0, dt=0.01, n_realizations=50, master_seed=1
        )
        assert res.a_bar is None
        assert res.covariance.shape == (3, 3)

    def test_needs_two_realizations(self):
        with pytest.raises(ConfigurationError):
            estimate_effective_diffusivity(
                zero_field(3), 0.25, T=100.0, n_realizations=1
            )


class TestAnisotropicCapacity:
    def test_isotropic_cross_checks_agree(self):
        cap = capacity_anisotropic(
            np.eye(3), ball(1.0, 3), T=150.0, dt=0.01, m=4,
            n_offsets=2000, n_realizations=4, master_seed=3,
        )
        assert cap.theory_limit == pytest.approx(2.0 * math.pi, rel=1e-12)
        assert cap.isotropic_reference == pytest.approx(cap.theory_limit, rel=1e-12)
        # finite horizon sits above the limit by the surface term
        expected = exact_ball_rate(1.0, 150.0)
        assert cap.value == pytest.approx(expected, rel=0.15)

    def test_scaled_isotropic_example(self):
        # sqrt(det a) * cap(R / sqrt(s)) collapses to 2 pi R s for a = s * I
        cap = capacity_anisotropic(
            0.25 * np.eye(3), ball(1.0, 3), T=120.0, dt=0.01, m=4,
            n_offsets=1000, n_realizations=2, master_seed=4,
        )
        assert cap.theory_limit == pytest.approx(0.5 * math.pi, rel=1e-12)
        assert cap.isotropic_reference == pytest.approx(0.5 * math.pi, rel=1e-12)

    def test_diagonal_gets_theory_no_iso_reference(self):
        cap = capacity_anisotropic(
            np.diag([1.0, 1.0, 0.25]), ball(1.0, 3), T=120.0, dt=0.01, m=3,
            n_offsets=500, n_realizations=2, master_seed=5,
        )
        assert cap.theory_limit is not None
        assert cap.isotropic_reference is None

    def test_invalid_covariance_rejected(self):
        with pytest.raises(ConfigurationError):
            capacity_anisotropic(np.diag([1.0, 1.0, -0.1]), ball(1.0, 3), T=120.0)
        bad = np.array([[1.0, 0.5, 0.0], [0.4, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(ConfigurationError):
            capacity_anisotropic(bad, ball(1.0, 3), T=120.0)

    def test_deterministic(self):
        kw = dict(T=120.0, dt=0.01, m=3, n_offsets=400, n_realizations=2, master_seed=6)
        a = capacity_anisotropic(np.eye(3), ball(1.0, 3), **kw)
        b = capacity_anisotropic(np.eye(3), ball(1.0, 3), **kw)
        assert a.value == b.value

    def test_four_dim_ball_cross_check(self):
        # independent check of the d = 4 closed form 2 pi^2 R^2. Recorded
        # spacing shrinks the effective radius by about 0.58 sqrt(dt), so the
        # simulated value sits a few percent low; 10% still separates the
        # correct coefficient from any neighboring Gamma-function slip.
        cap = capacity_anisotropic(
            np.eye(4), ball(1.0, 4), T=400.0, dt=0.002, m=3,
            n_offsets=1500, n_realizations=6, master_seed=11,
        )
        assert cap.theory_limit is None
        assert cap.value == pytest.approx(2.0 * math.pi**2, rel=0.10)


class TestSuggestedDt:
    def test_zero_field_gets_cap(self):
        assert suggested_dt(zero_field(3)) == pytest.approx(0.1)

    def test_scaled_cellular_flow(self):
        f = taylor_green().with_scale(50.0)
        # cell size (2 pi / 50) crossed at the speed bound, split into 15
        expected = (2.0 * math.pi / 50.0) / f.max_speed() / 15.0
        assert suggested_dt(f) == pytest.approx(expected)

    def test_never_exceeds_cap(self):
        f = taylor_green().with_scale(0.001)
        assert suggested_dt(f) <= 0.1


class TestStrideAndBudget:
    def test_no_stride_needed(self):
        assert _auto_stride(100_000) == 1

    def test_even_split(self):
        assert _auto_stride(400_000) == 2

    def test_smallest_divisor_above_target(self):
        # 600001 = 19 * 31579; nothing smaller than 19 divides it
        assert _auto_stride(600_001) == 19

    def test_unfactorable_step_count_rejected(self):
        # 2000006 = 2 * 1000003 with 1000003 prime: no divisor near the target
        with pytest.raises(ConfigurationError):
            _auto_stride(2_000_006)

    def test_step_budget_enforced(self):
        with pytest.raises(ResourceLimitError):
            estimate_growth_rate(
                zero_field(3), 0.25, ball(1.0, 3), T=100.0, dt=1e-9
            )


class TestSweep:
    def rows(self):
        return [
            SweepRow(r=0.5, gamma_hat=0.4, std_error=0.01, n_realizations=2,
                     T=100.0, dt=0.01, m=4, J=100, eps=0.25, seed=0),
            SweepRow(r=2.0, gamma_hat=0.9, std_error=0.02, n_realizations=2,
                     T=100.0, dt=0.005, m=4, J=100, eps=0.25, seed=0),
        ]

    def test_csv_round_trip(self, tmp_path):
        f = tmp_path / "s.csv"
        write_sweep_csv(self.rows(), f)
        back = read_sweep_csv(f)
        assert [row.as_list() for row in back] == [row.as_list() for row in self.rows()]
        header = f.read_text().splitlines()[0]
        assert header == ",".join(SWEEP_COLUMNS)

    def test_bad_header_rejected(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("r,gamma\n1,2\n")
        with pytest.raises(ConfigurationError):
            read_sweep_csv(f)

    def test_sweep_runs_and_orders_rows(self, tmp_path):
        f = tmp_path / "sweep.csv"
        res = sweep_r(
            zero_field(3), 0.25, ball(1.0, 3), [1.0, 0.25],
            T=110.0, dt=0.01, m=3, n_offsets=300, n_realizations=2,
            master_seed=7, csv_path=f,
        )
        assert [row.r for row in res.rows] == [0.25, 1.0]
        assert res.errors == []
        assert [row.r for row in read_sweep_csv(f)] == [0.25, 1.0]

    def test_resume_skips_existing_rows(self, tmp_path):
        f = tmp_path / "sweep.csv"
        planted = SweepRow(r=0.5, gamma_hat=123.456, std_error=0.0, n_realizations=1,
                           T=110.0, dt=0.01, m=3, J=300, eps=0.25, seed=7)
        write_sweep_csv([planted], f)
        res = sweep_r(
            zero_field(3), 0.25, ball(1.0, 3), [0.5, 1.0],
            T=110.0, dt=0.01, m=3, n_offsets=300, n_realizations=2,
            master_seed=7, csv_path=f, resume=True,
        )
        stored = {row.r: row.gamma_hat for row in read_sweep_csv(f)}
        # the planted value survives untouched, proving r=0.5 was skipped
        assert stored[0.5] == 123.456
        assert 1.0 in stored
        assert [row.r for row in res.rows] == [0.5, 1.0]

    def test_per_row_errors_recorded_and_sweep_continues(self, tmp_path):
        # an absurd rescaling needs more Euler steps than the resource guard
        # allows; the row fails, later rows still complete
        res = sweep_r(
            taylor_green(), 0.25, ball(1.0, 3), [1e9, 1.0],
            T=110.0, dt=0.01, m=3, n_offsets=200, n_realizations=1,
            master_seed=3,
        )
        assert [row.r for row in res.rows] == [1.0]
        assert len(res.errors) == 1
        assert res.errors[0][0] == 1e9

    def test_rejects_bad_r_values(self):
        with pytest.raises(ConfigurationError):
            sweep_r(zero_field(3), 0.25, ball(1.0, 3), [], T=110.0)
        with pytest.raises(ConfigurationError):
            sweep_r(zero_field(3), 0.25, ball(1.0, 3), [-1.0], T=110.0)
