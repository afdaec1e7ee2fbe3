"""Asymptotic quantities: growth rates, capacities, effective diffusivity.

Conventions
-----------
All capacity values use the generator (1/2) Laplacian normalization, under
which the unit ball in d = 3 has capacity 2*pi and a Brownian sausage grows
at exactly the capacity of its cross-section.

``capacity_anisotropic`` takes the covariance of the displacement per unit
time: a Gaussian path with cov(X_t - X_0) = a_bar * t. Effective-diffusivity
tables are often reported in a mixed normalization instead (horizontal
entries alpha with E|X^1_t|^2 = 4*alpha*t, vertical entry kappa with
E|X^3_t|^2 = 2*kappa*t, stored as eps^2/2);
``displacement_covariance_from_reported`` converts such a diagonal matrix
into the displacement covariance (multiply horizontal entries by 4, the last
entry by 2). Both conventions carry tests.

Finite-horizon bias: the mean sausage volume per unit time exceeds its limit
by O(T^-1/2) (the surface term has not decayed), so estimates at moderate T
sit a few percent high. Tolerances in downstream checks budget for this.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import elliprf

from .errors import ConfigurationError, ResourceLimitError
from .fields import VelocityField
from .rng import NoiseSource
from .sausage import CrossSection, SausageEstimate, estimate_volume
from .sde import MAX_DT, IntegratorConfig, SamplePath, integrate_batch, integrate_finals

__all__ = [
    "GrowthRateResult",
    "DiffusivityResult",
    "CapacityResult",
    "SweepRow",
    "SweepResult",
    "estimate_growth_rate",
    "estimate_effective_diffusivity",
    "capacity_ball",
    "ellipsoid_capacity",
    "capacity_anisotropic",
    "displacement_covariance_from_reported",
    "suggested_dt",
    "sweep_r",
    "write_sweep_csv",
    "read_sweep_csv",
    "SWEEP_COLUMNS",
]

_MIN_HORIZON = 100.0  # shorter runs are dominated by the surface term
_MAX_STORED = 200_000  # recorded points per path before striding kicks in
_MAX_TOTAL_STEPS = 10_000_000_000  # Euler steps per estimate before refusing
_GROUP_FLOATS = 25_000_000  # position floats held in memory per batch
_CELL_CROSSING_FRACTION = 15.0  # steps per advective cell crossing

SWEEP_COLUMNS = (
    "r",
    "gamma_hat",
    "std_error",
    "n_realizations",
    "T",
    "dt",
    "m",
    "J",
    "eps",
    "seed",
)


def _env_workers() -> int:
    try:
        w = int(os.environ.get("SAUSAGE_LAB_WORKERS", "1"))
    except ValueError:
        return 1
    return max(1, w)


def _map_indexed(fn, items):
    """Map preserving order; threads only when workers > 1. Results identical
    either way since every item is independent."""
    w = _env_workers()
    if w <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))


def _steps_for(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ConfigurationError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def _auto_stride(n_steps: int) -> int:
    """Smallest divisor of n_steps keeping recorded points under the cap."""
    want = math.ceil(n_steps / _MAX_STORED)
    if want <= 1:
        return 1
    for s in range(want, min(n_steps, 20 * want) + 1):
        if n_steps % s == 0:
            return s
    raise ConfigurationError(
        f"n_steps={n_steps} has no recording stride near {want}; "
        "choose a horizon with a rounder step count"
    )


@dataclass(frozen=True, eq=False)
class GrowthRateResult:
    """Mean sausage growth rate over independent realizations.

    gamma_hat is the mean of per_realization; std_error is the standard
    error of that mean (for a single realization, the sampling error of the
    volume estimate).
    """

    gamma_hat: float
    std_error: float
    per_realization: np.ndarray
    epsilon: float
    scale_r: float
    cross_section: CrossSection
    T: float
    dt: float
    m: int
    J: int
    n_realizations: int
    master_seed: int
    store_stride: int

    def to_json_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "std_error": self.std_error,
            "per_realization": [float(g) for g in self.per_realization],
            "epsilon": self.epsilon,
            "scale_r": self.scale_r,
            "cross_section": self.cross_section.describe(),
            "T": self.T,
            "dt": self.dt,
            "m": self.m,
            "J": self.J,
            "n_realizations": self.n_realizations,
            "master_seed": self.master_seed,
        }


def estimate_growth_rate(
    field: VelocityField,
    epsilon: float,
    section: CrossSection,
    T: float,
    dt: float = 0.01,
    m: int = 4,
    n_offsets: int = 10_000,
    n_realizations: int = 1,
    master_seed: int = 0,
    x0=None,
    store_stride: int | None = None,
) -> GrowthRateResult:
    """Estimate the asymptotic volume growth rate |S_T| / T.

    Runs n_realizations independent integrations (stream i keyed
    (master_seed, i)), applies the cell-refinement volume estimator to each
    recorded path (offset stream keyed (master_seed + i)), and averages. The
    estimate sits above the T -> infinity limit by a surface term of order
    T^-1/2; T below 100 is rejected as meaningless for a rate.

    store_stride records every k-th point when the Euler step is much finer
    than the geometry needs; None picks one automatically.
    """
    if T < _MIN_HORIZON:
        raise ConfigurationError(f"T must be >= {_MIN_HORIZON} for a growth rate")
    if n_realizations < 1:
        raise ConfigurationError("n_realizations must be >= 1")
    n_steps = _steps_for(T, dt)
    if n_steps * n_realizations > _MAX_TOTAL_STEPS:
        raise ResourceLimitError(
            f"{n_steps} steps x {n_realizations} realizations exceeds the "
            f"{_MAX_TOTAL_STEPS:.0e} step budget; coarsen dt or shorten T"
        )
    stride = _auto_stride(n_steps) if store_stride is None else int(store_stride)
    if stride < 1 or n_steps % stride != 0:
        raise ConfigurationError("store_stride must divide the step count")
    d = field.dimension
    start = np.zeros(d) if x0 is None else np.asarray(x0, dtype=np.float64)
    cfg = IntegratorConfig(
        x0=start, dt=dt, n_steps=n_steps, epsilon=epsilon, seed=master_seed
    )

    recorded = n_steps // stride + 1
    group = max(1, min(n_realizations, _GROUP_FLOATS // (recorded * d)))
    gammas = np.empty(n_realizations)
    solo_se = 0.0
    done = 0
    while done < n_realizations:
        g = min(group, n_realizations - done)
        paths = integrate_batch(field, cfg, g, store_stride=stride, first_realization=done)

        def one(i):
            sp = SamplePath(positions=paths[i], dt=dt * stride, seed=master_seed)
            return estimate_volume(
                sp, section, m=m, n_offsets=n_offsets, seed=master_seed + done + i
            )

        for i, est in enumerate(_map_indexed(one, list(range(g)))):
            gammas[done + i] = est.gamma_hat
            solo_se = est.gamma_std_error
        done += g

    gamma_hat = float(np.mean(gammas))
    if n_realizations >= 2:
        std_error = float(np.std(gammas, ddof=1) / math.sqrt(n_realizations))
    else:
        std_error = float(solo_se)
    return GrowthRateResult(
        gamma_hat=gamma_hat,
        std_error=std_error,
        per_realization=gammas,
        epsilon=float(epsilon),
        scale_r=field.scale_r,
        cross_section=section,
        T=float(T),
        dt=float(dt),
        m=int(m),
        J=int(n_offsets),
        n_realizations=int(n_realizations),
        master_seed=int(master_seed),
        store_stride=stride,
    )


@dataclass(frozen=True, eq=False)
class DiffusivityResult:
    """Effective diffusivity from single-horizon displacements.

    alpha_hat is the reported horizontal coefficient: the mean of
    |X^1_T - x^1_0|^2 / T over realizations divided by 4 (the convention
    E|X^1_t|^2 = 4*alpha*t). msd_rate is the undivided mean-square rate, and
    covariance is the full uncentered displacement covariance per unit time,
    whose last diagonal entry is eps^2 for drifts with no vertical component.

    a_bar is the reporting-convention matrix diag(alpha_hat, alpha_hat,
    eps^2/2), assembled only when the drift is confined to the first two of
    three coordinates; feed it through
    displacement_covariance_from_reported before using it as a displacement
    covariance.
    """

    alpha_hat: float
    std_error: float
    msd_rate: float
    covariance: np.ndarray
    a_bar: np.ndarray | None
    epsilon: float
    T: float
    dt: float
    n_realizations: int
    master_seed: int

    def to_json_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "std_error": self.std_error,
            "msd_rate": self.msd_rate,
            "covariance": self.covariance.tolist(),
            "a_bar": None if self.a_bar is None else self.a_bar.tolist(),
            "epsilon": self.epsilon,
            "T": self.T,
            "dt": self.dt,
            "n_realizations": self.n_realizations,
            "master_seed": self.master_seed,
        }


def _drift_is_horizontal(field: VelocityField) -> bool:
    """True when the drift provably has no component past the first two axes."""
    if field.dimension != 3:
        return False
    coeffs = field.kernel_coefficients()
    if coeffs is None:
        return False
    _, ac, asin = coeffs
    if ac.shape[0] == 0:
        return True
    return bool(np.all(ac[:, 2:] == 0.0) and np.all(asin[:, 2:] == 0.0))


def estimate_effective_diffusivity(
    field: VelocityField,
    epsilon: float,
    T: float,
    dt: float = 0.01,
    n_realizations: int = 1000,
    master_seed: int = 0,
    x0=None,
) -> DiffusivityResult:
    """Monte Carlo effective diffusivity at a single horizon T.

    Uses final displacements only (no time averaging): realization i is the
    stream (master_seed, i), identical to what integrate would produce.
    """
    if n_realizations < 2:
        raise ConfigurationError("n_realizations must be >= 2")
    n_steps = _steps_for(T, dt)
    d = field.dimension
    start = np.zeros(d) if x0 is None else np.asarray(x0, dtype=np.float64)
    cfg = IntegratorConfig(
        x0=start, dt=dt, n_steps=n_steps, epsilon=epsilon, seed=master_seed
    )
    finals = integrate_finals(field, cfg, n_realizations)
    disp = finals - start
    sq1 = disp[:, 0] ** 2 / T
    msd_rate = float(np.mean(sq1))
    alpha_hat = msd_rate / 4.0
    std_error = float(np.std(sq1, ddof=1) / math.sqrt(n_realizations) / 4.0)
    covariance = disp.T @ disp / (n_realizations * T)
    a_bar = None
    if _drift_is_horizontal(field):
        a_bar = np.diag([alpha_hat, alpha_hat, epsilon**2 / 2.0])
    return DiffusivityResult(
        alpha_hat=alpha_hat,
        std_error=std_error,
        msd_rate=msd_rate,
        covariance=covariance,
        a_bar=a_bar,
        epsilon=float(epsilon),
        T=float(T),
        dt=float(dt),
        n_realizations=int(n_realizations),
        master_seed=int(master_seed),
    )


def capacity_ball(radius: float, dimension: int = 3) -> float:
    """Closed-form capacity of a ball, 1/2-Laplacian convention.

    2 * pi^(d/2) / Gamma(d/2 - 1) * radius^(d-2); equals 2*pi*radius in
    d = 3. Transient dimensions only (d >= 3); the d = 4 form is
    cross-checked against a Brownian-sausage simulation in the test suite
    before being relied on.
    """
    if dimension < 3:
        raise ConfigurationError("capacity requires dimension >= 3")
    if not (radius > 0):
        raise ConfigurationError("radius must be > 0")
    d = int(dimension)
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2 - 1) * radius ** (d - 2)


def ellipsoid_capacity(semi_axes) -> float:
    """Capacity of a triaxial ellipsoid in d = 3, same convention.

    2*pi / R_F(a^2, b^2, c^2) with Carlson's symmetric elliptic integral
    R_F; reduces to 2*pi*R for a sphere and matches the classical
    f / ln((c+f)/a) form for prolate spheroids.
    """
    axes = np.asarray(semi_axes, dtype=np.float64)
    if axes.shape != (3,) or np.any(axes <= 0) or not np.all(np.isfinite(axes)):
        raise ConfigurationError("semi_axes must be three positive numbers")
    return float(2.0 * math.pi / elliprf(axes[0] ** 2, axes[1] ** 2, axes[2] ** 2))


def displacement_covariance_from_reported(a_bar) -> np.ndarray:
    """Reported diffusivity table -> displacement covariance per unit time.

    Input: a diagonal matrix (or diagonal vector) whose first d-1 entries are
    alpha values in the E|X^i_t|^2 = 4*alpha*t convention and whose last
    entry is in the generator convention (eps^2/2 for a vertical Brownian
    coordinate, i.e. half the displacement rate). Output: diag(4*alpha, ...,
    4*alpha, 2*last), the covariance a with cov(X_t - X_0) = a*t that
    reproduces those statistics.
    """
    a = np.asarray(a_bar, dtype=np.float64)
    if a.ndim == 1:
        diag = a.copy()
    elif a.ndim == 2 and a.shape[0] == a.shape[1]:
        off = a - np.diag(np.diag(a))
        if np.any(np.abs(off) > 1e-12 * max(1.0, float(np.max(np.abs(a))))):
            raise ConfigurationError("reported diffusivity must be diagonal")
        diag = np.diag(a).copy()
    else:
        raise ConfigurationError("a_bar must be a vector or square matrix")
    if diag.size < 2 or np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise ConfigurationError("diagonal entries must be positive and finite")
    out = diag * 4.0
    out[-1] = diag[-1] * 2.0
    return np.diag(out)


@dataclass(frozen=True, eq=False)
class CapacityResult:
    """Simulated anisotropic capacity with closed-form cross-checks.

    value is the mean sausage rate of the Gaussian paths; theory_limit is
    the closed-form T -> infinity value (diagonal covariance, 3-d ball
    sections only, via the ellipsoid formula); isotropic_reference is the
    scalar-covariance cross-check sqrt(det a) * capacity of the rescaled
    ball, present only when the covariance is isotropic. Finite-T values sit
    above theory_limit by the usual surface term.
    """

    value: float
    std_error: float
    per_realization: np.ndarray
    theory_limit: float | None
    isotropic_reference: float | None
    covariance: np.ndarray
    cross_section: CrossSection
    T: float
    dt: float
    m: int
    J: int
    n_realizations: int
    master_seed: int

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "per_realization": [float(g) for g in self.per_realization],
            "theory_limit": self.theory_limit,
            "isotropic_reference": self.isotropic_reference,
            "covariance": self.covariance.tolist(),
            "cross_section": self.cross_section.describe(),
            "T": self.T,
            "dt": self.dt,
            "m": self.m,
            "J": self.J,
            "n_realizations": self.n_realizations,
            "master_seed": self.master_seed,
        }


def _check_covariance(cov, dimension: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(cov, dtype=np.float64)
    if a.ndim == 1:
        a = np.diag(a)
    if a.shape != (dimension, dimension):
        raise ConfigurationError(f"covariance must be {dimension}x{dimension}")
    if not np.all(np.isfinite(a)):
        raise ConfigurationError("covariance must be finite")
    if np.any(np.abs(a - a.T) > 1e-12 * max(1.0, float(np.max(np.abs(a))))):
        raise ConfigurationError("covariance must be symmetric")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("covariance must be positive definite") from exc
    return a, chol


def capacity_anisotropic(
    a_bar,
    section: CrossSection,
    T: float = 1000.0,
    dt: float = 0.01,
    m: int = 4,
    n_offsets: int = 10_000,
    n_realizations: int = 16,
    master_seed: int = 0,
) -> CapacityResult:
    """Capacity of a section under anisotropic Brownian motion, by simulation.

    Simulates paths with pure Gaussian increments of covariance a_bar * dt
    (a_bar is the displacement covariance per unit time), runs the sausage
    estimator on each, and averages |S_T|/T. For diagonal covariance and a
    3-d ball the closed-form limit sqrt(det a) * (ellipsoid capacity) is
    attached for comparison.
    """
    d = section.dimension
    cov, chol = _check_covariance(a_bar, d)
    if T < _MIN_HORIZON:
        raise ConfigurationError(f"T must be >= {_MIN_HORIZON} for a capacity estimate")
    if n_realizations < 1:
        raise ConfigurationError("n_realizations must be >= 1")
    n_steps = _steps_for(T, dt)
    stride = _auto_stride(n_steps)
    # strided recording subsamples the Gaussian skeleton; increments over the
    # recorded grid still have covariance a_bar * (stride * dt)
    rec = n_steps // stride
    scale = chol * math.sqrt(dt * stride)

    def one(i):
        src = NoiseSource(int(master_seed), i)
        steps = src.normals((rec, d)) @ scale.T
        positions = np.empty((rec + 1, d))
        positions[0] = 0.0
        np.cumsum(steps, axis=0, out=positions[1:])
        sp = SamplePath(positions=positions, dt=dt * stride, seed=master_seed)
        return estimate_volume(sp, section, m=m, n_offsets=n_offsets, seed=master_seed + i)

    estimates = _map_indexed(one, list(range(int(n_realizations))))
    gammas = np.array([e.gamma_hat for e in estimates])
    value = float(np.mean(gammas))
    if len(gammas) >= 2:
        std_error = float(np.std(gammas, ddof=1) / math.sqrt(len(gammas)))
    else:
        std_error = float(estimates[0].gamma_std_error)

    theory = None
    iso_ref = None
    diag = np.diag(cov)
    is_diag = bool(np.all(np.abs(cov - np.diag(diag)) <= 1e-12 * max(1.0, float(np.max(np.abs(cov))))))
    if is_diag and section.shape == "ball" and d == 3:
        semi = section.radius / np.sqrt(diag)
        theory = float(np.sqrt(np.prod(diag)) * ellipsoid_capacity(semi))
        if np.allclose(diag, diag[0], rtol=1e-12):
            c = float(diag[0])
            iso_ref = float(
                math.sqrt(c**d) * capacity_ball(section.radius / math.sqrt(c), d)
            )
    return CapacityResult(
        value=value,
        std_error=std_error,
        per_realization=gammas,
        theory_limit=theory,
        isotropic_reference=iso_ref,
        covariance=cov,
        cross_section=section,
        T=float(T),
        dt=float(dt),
        m=int(m),
        J=int(n_offsets),
        n_realizations=int(n_realizations),
        master_seed=int(master_seed),
    )


def suggested_dt(field: VelocityField, cap: float = MAX_DT) -> float:
    """Euler step resolving the advective cell crossing of a scaled field.

    The fastest feature of v^(r) is crossed in (period / r) / max-speed time
    units; the suggested step divides that by a fixed factor. Fields with no
    drift get the cap.
    """
    vmax = field.max_speed()
    if vmax <= 0:
        return cap
    cell = min(field.period) / field.scale_r
    return min(cap, cell / vmax / _CELL_CROSSING_FRACTION)


@dataclass(frozen=True, eq=False)
class SweepRow:
    r: float
    gamma_hat: float
    std_error: float
    n_realizations: int
    T: float
    dt: float
    m: int
    J: int
    eps: float
    seed: int

    def as_list(self) -> list:
        return [getattr(self, c) for c in SWEEP_COLUMNS]


@dataclass(frozen=True, eq=False)
class SweepResult:
    rows: list[SweepRow]
    errors: list[tuple[float, str]]


def write_sweep_csv(rows, path) -> None:
    """Write sweep rows with the fixed column order, sorted by r."""
    path = Path(path)
    ordered = sorted(rows, key=lambda row: row.r)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in ordered:
            writer.writerow(row.as_list())


def _append_sweep_row(row: SweepRow, path: Path) -> None:
    new = not path.exists()
    with path.open("a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(SWEEP_COLUMNS)
        writer.writerow(row.as_list())


def read_sweep_csv(path) -> list[SweepRow]:
    """Read a sweep table; validates the header columns."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SWEEP_COLUMNS:
            raise ConfigurationError(
                f"sweep CSV must have columns {','.join(SWEEP_COLUMNS)}"
            )
        rows = []
        for rec in reader:
            if not rec:
                continue
            rows.append(
                SweepRow(
                    r=float(rec[0]),
                    gamma_hat=float(rec[1]),
                    std_error=float(rec[2]),
                    n_realizations=int(rec[3]),
                    T=float(rec[4]),
                    dt=float(rec[5]),
                    m=int(rec[6]),
                    J=int(rec[7]),
                    eps=float(rec[8]),
                    seed=int(rec[9]),
                )
            )
    return rows


def sweep_r(
    field: VelocityField,
    epsilon: float,
    section: CrossSection,
    r_values,
    T: float = 1000.0,
    dt: float = 0.01,
    m: int = 4,
    n_offsets: int = 10_000,
    n_realizations: int = 4,
    master_seed: int = 0,
    csv_path=None,
    resume: bool = False,
) -> SweepResult:
    """Growth-rate estimates across spatial rescalings r.

    Each row rescales the base field by r and picks an Euler step fine enough
    for the advective features at that scale (never coarser than dt). Rows
    are computed in ascending r; per-row failures are recorded and the sweep
    continues. With csv_path the table is appended row by row (crash-safe)
    and rewritten sorted at the end; resume=True skips r values already
    present in the file.
    """
    rs = sorted(float(r) for r in r_values)
    if not rs or any(r <= 0 for r in rs):
        raise ConfigurationError("r_values must be positive and nonempty")
    rows: list[SweepRow] = []
    errors: list[tuple[float, str]] = []
    path = Path(csv_path) if csv_path is not None else None
    if path is not None and path.exists():
        if resume:
            rows = read_sweep_csv(path)
        else:
            path.unlink()
    done_r = {row.r for row in rows}

    for r in rs:
        if any(abs(r - dr) <= 1e-9 * max(1.0, r) for dr in done_r):
            continue
        try:
            scaled = field.with_scale(r)
            dt_r = suggested_dt(scaled, cap=dt)
            n = math.ceil(T / dt_r)
            stride = max(1, math.ceil(n / _MAX_STORED))
            n = math.ceil(n / stride) * stride
            dt_r = T / n
            res = estimate_growth_rate(
                scaled,
                epsilon,
                section,
                T=T,
                dt=dt_r,
                m=m,
                n_offsets=n_offsets,
                n_realizations=n_realizations,
                master_seed=master_seed,
                store_stride=stride,
            )
            row = SweepRow(
                r=r,
                gamma_hat=res.gamma_hat,
                std_error=res.std_error,
                n_realizations=n_realizations,
                T=T,
                dt=dt_r,
                m=m,
                J=n_offsets,
                eps=float(epsilon),
                seed=int(master_seed),
            )
            rows.append(row)
            done_r.add(r)
            if path is not None:
                _append_sweep_row(row, path)
        except Exception as exc:  # noqa: BLE001 - per-row isolation is the contract
            errors.append((r, f"{type(exc).__name__}: {exc}"))

    rows = sorted(rows, key=lambda row: row.r)
    if path is not None:
        write_sweep_csv(rows, path)
    return SweepResult(rows=rows, errors=errors)
