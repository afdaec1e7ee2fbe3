"""Periodic incompressible velocity fields.

A field describes a base drift ``b`` with a rectangular period cell together
with a spatial rescaling ``scale_r`` and a scalar ``amplitude``. The drift the
integrator actually uses is

    v(x) = amplitude * scale_r * b(scale_r * x)

so ``scale_r = r`` shrinks the period cell by ``1/r`` while speeding the flow
up by ``r``, which keeps the product (cell size) * (turnover rate) balanced.
``amplitude`` is a plain multiplicative factor.

Built-in kinds:

``zero``
    b(x) = 0 in any dimension.
``taylor-green``
    dimension 3, period 2*pi per axis,
    b(x) = (-sin(x0) cos(x1), cos(x0) sin(x1), 0).
``fourier``
    a finite trigonometric sum with integer wave vectors on the period cell;
    loadable from a JSON file.
``custom``
    an arbitrary Python callable (slower integration path).

Fields constructed from files or callables are validated numerically at
registration: maximum central-difference divergence and maximum component mean
over the period cell must both be small. The checks exercise the base field,
which suffices because scaling multiplies the divergence by a constant.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, FieldValidationError

__all__ = [
    "VelocityField",
    "zero_field",
    "taylor_green",
    "fourier_field",
    "custom_field",
    "load_field_file",
    "resolve_field",
    "check_divergence_free",
    "check_mean_zero",
    "validate_field",
]

_KINDS = ("zero", "taylor-green", "fourier", "custom")

# registration-time tolerances for numerical field checks
_DIV_TOL = 1e-3
_MEAN_TOL = 1e-3
_DIV_STEP = 1e-4
_DIV_SAMPLES = 10_000
_MEAN_NODES = 100_000


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Immutable velocity field description.

    Attributes
    ----------
    kind : str
        One of ``zero``, ``taylor-green``, ``fourier``, ``custom``.
    dimension : int
        Ambient dimension d >= 1.
    period : tuple of float
        Period of the base field along each coordinate.
    scale_r : float
        Spatial rescaling r > 0 applied as amplitude*r*b(r*x).
    amplitude : float
        Scalar multiplier, default 1.
    wave_vectors, cos_amps, sin_amps : ndarray or None
        Mode data for ``fourier`` (and the internal trigonometric form of
        ``taylor-green``). Shapes (M, d).
    custom_eval : callable or None
        Base-field callable for ``custom``; maps (n, d) -> (n, d).
    """

    kind: str
    dimension: int
    period: tuple[float, ...]
    scale_r: float = 1.0
    amplitude: float = 1.0
    wave_vectors: np.ndarray | None = None
    cos_amps: np.ndarray | None = None
    sin_amps: np.ndarray | None = None
    custom_eval: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown field kind {self.kind!r}")
        if self.dimension < 1:
            raise ConfigurationError("dimension must be >= 1")
        if not (self.scale_r > 0) or not math.isfinite(self.scale_r):
            raise ConfigurationError("scale_r must be finite and > 0")
        if not math.isfinite(self.amplitude):
            raise ConfigurationError("amplitude must be finite")
        if len(self.period) != self.dimension:
            raise ConfigurationError("period must have one entry per coordinate")
        if any(p <= 0 or not math.isfinite(p) for p in self.period):
            raise ConfigurationError("period entries must be finite and > 0")

    # base field, unscaled

    def eval_base(self, x: np.ndarray) -> np.ndarray:
        """Evaluate b at points x of shape (d,) or (n, d)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dimension:
            raise ConfigurationError(
                f"points have dimension {pts.shape[1]}, field has {self.dimension}"
            )
        if self.kind == "zero":
            out = np.zeros_like(pts)
        elif self.kind == "taylor-green":
            out = np.zeros_like(pts)
            out[:, 0] = -np.sin(pts[:, 0]) * np.cos(pts[:, 1])
            out[:, 1] = np.cos(pts[:, 0]) * np.sin(pts[:, 1])
        elif self.kind == "fourier":
            out = self._eval_fourier(pts)
        else:
            out = np.asarray(self.custom_eval(pts), dtype=np.float64)
            if out.shape != pts.shape:
                raise FieldValidationError(
                    f"custom eval returned shape {out.shape}, expected {pts.shape}"
                )
        return out[0] if single else out

    def _eval_fourier(self, pts: np.ndarray) -> np.ndarray:
        # phases from the fractional cell position keep the sum periodic to
        # roundoff even far from the origin
        u = pts / np.asarray(self.period)
        u = u - np.floor(u)
        theta = 2.0 * np.pi * (u @ self.wave_vectors.T)  # (n, M)
        return np.cos(theta) @ self.cos_amps + np.sin(theta) @ self.sin_amps

    def eval(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the scaled drift amplitude*r*b(r*x)."""
        x = np.asarray(x, dtype=np.float64)
        return (self.amplitude * self.scale_r) * self.eval_base(self.scale_r * x)

    # derived variants

    def with_scale(self, r: float) -> "VelocityField":
        """Same base field with scale_r set to r."""
        return dataclasses.replace(self, scale_r=float(r))

    def with_amplitude(self, a: float) -> "VelocityField":
        return dataclasses.replace(self, amplitude=float(a))

    # integrator support

    def kernel_coefficients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
        """Trigonometric form (W, AC, AS) of the base field, or None.

        b(x) = sum_m AC[m]*cos(W[m].x) + AS[m]*sin(W[m].x). Returns None for
        ``custom`` fields, which integrate through the callable path.
        """
        d = self.dimension
        if self.kind == "zero":
            z = np.zeros((0, d))
            return z, z.copy(), z.copy()
        if self.kind == "taylor-green":
            w = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0]])
            ac = np.zeros((2, 3))
            asin = np.array([[-0.5, 0.5, 0.0], [-0.5, -0.5, 0.0]])
            return w, ac, asin
        if self.kind == "fourier":
            w = 2.0 * np.pi * self.wave_vectors / np.asarray(self.period)
            return w, self.cos_amps.copy(), self.sin_amps.copy()
        return None

    def max_speed(self) -> float:
        """Upper bound on |v| for the scaled drift."""
        coeffs = self.kernel_coefficients()
        if coeffs is None:
            # probe the callable over one period cell
            gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(0)))
            pts = gen.random((4096, self.dimension)) * np.asarray(self.period)
            bound = float(np.max(np.linalg.norm(self.eval_base(pts), axis=1)))
            bound *= 1.5  # sampled bound, padded
        else:
            _, ac, asin = coeffs
            comp = np.sum(np.abs(ac), axis=0) + np.sum(np.abs(asin), axis=0)
            bound = float(np.linalg.norm(comp))
        return abs(self.amplitude) * self.scale_r * bound

    def describe(self) -> str:
        parts = [self.kind, f"d={self.dimension}"]
        if self.scale_r != 1.0:
            parts.append(f"r={self.scale_r:g}")
        if self.amplitude != 1.0:
            parts.append(f"amp={self.amplitude:g}")
        if self.kind == "fourier":
            parts.append(f"modes={len(self.wave_vectors)}")
        return f"{parts[0]}({', '.join(parts[1:])})"


def zero_field(dimension: int = 3) -> VelocityField:
    """Zero drift in the given dimension."""
    return VelocityField(kind="zero", dimension=dimension, period=(1.0,) * dimension)


def taylor_green() -> VelocityField:
    """Three-dimensional cellular flow with closed streamlines.

    b(x) = (-sin(x0) cos(x1), cos(x0) sin(x1), 0), period 2*pi per axis,
    divergence free, mean zero.
    """
    return VelocityField(
        kind="taylor-green", dimension=3, period=(2.0 * np.pi,) * 3
    )


def fourier_field(
    wave_vectors,
    cos_amps=None,
    sin_amps=None,
    period=1.0,
    validate: bool = True,
) -> VelocityField:
    """Trigonometric field from integer wave vectors and amplitude vectors.

    b(x) = sum_m cos_amps[m]*cos(2*pi*k_m.u) + sin_amps[m]*sin(2*pi*k_m.u)
    with u = x/period componentwise. Divergence freedom requires each
    amplitude vector to be orthogonal to k_m/period, which validation checks
    numerically.
    """
    k = np.asarray(wave_vectors, dtype=np.float64)
    if k.ndim != 2:
        raise ConfigurationError("wave_vectors must have shape (M, d)")
    m, d = k.shape
    if not np.allclose(k, np.round(k)):
        raise ConfigurationError("wave vectors must be integers")
    ac = np.zeros((m, d)) if cos_amps is None else np.asarray(cos_amps, dtype=np.float64)
    asin = np.zeros((m, d)) if sin_amps is None else np.asarray(sin_amps, dtype=np.float64)
    if ac.shape != (m, d) or asin.shape != (m, d):
        raise ConfigurationError("amplitude arrays must have shape (M, d)")
    if np.isscalar(period):
        per = (float(period),) * d
    else:
        per = tuple(float(p) for p in period)
    field = VelocityField(
        kind="fourier",
        dimension=d,
        period=per,
        wave_vectors=np.round(k),
        cos_amps=ac,
        sin_amps=asin,
    )
    if validate:
        validate_field(field)
    return field


def custom_field(
    fn: Callable[[np.ndarray], np.ndarray],
    dimension: int,
    period,
    validate: bool = True,
) -> VelocityField:
    """Wrap a callable base field. fn maps (n, d) arrays to (n, d) arrays."""
    if np.isscalar(period):
        per = (float(period),) * dimension
    else:
        per = tuple(float(p) for p in period)
    field = VelocityField(
        kind="custom", dimension=dimension, period=per, custom_eval=fn
    )
    if validate:
        validate_field(field)
    return field


def load_field_file(path) -> VelocityField:
    """Load a trigonometric field from a JSON file.

    Schema::

        {
          "dimension": 3,
          "period": 6.283185307179586,          # scalar or list
          "modes": [
            {"k": [1, 1, 0], "sin": [-0.5, 0.5, 0.0]},
            {"k": [1, -1, 0], "cos": [0, 0, 0], "sin": [-0.5, -0.5, 0.0]}
          ]
        }

    Omitted "cos"/"sin" entries default to zero vectors.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON in field file {path}: {exc}") from exc
    try:
        d = int(data["dimension"])
        modes = data["modes"]
        period = data.get("period", 1.0)
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"field file {path} missing {exc}") from exc
    if not modes:
        raise ConfigurationError("field file must define at least one mode")
    kvecs, ac, asin = [], [], []
    try:
        for mode in modes:
            kvecs.append(mode["k"])
            ac.append(mode.get("cos", [0.0] * d))
            asin.append(mode.get("sin", [0.0] * d))
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(
            f"field file {path}: each mode needs a 'k' wave vector"
        ) from exc
    return fourier_field(kvecs, ac, asin, period=period)


def resolve_field(name: str, dimension: int = 3) -> VelocityField:
    """Field from a CLI-style identifier: a kind name or a JSON file path."""
    if name == "zero":
        return zero_field(dimension)
    if name == "taylor-green":
        return taylor_green()
    if name.startswith("custom:"):
        return load_field_file(name[len("custom:") :])
    if name.endswith(".json"):
        return load_field_file(name)
    raise ConfigurationError(
        f"unknown field {name!r}: expected 'zero', 'taylor-green', "
        "'custom:<file>.json', or a .json path"
    )


def check_divergence_free(
    field: VelocityField,
    n_samples: int = _DIV_SAMPLES,
    h: float = _DIV_STEP,
    seed: int = 0,
) -> float:
    """Max |div b| over random points of the period cell, central differences."""
    d = field.dimension
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 7))))
    pts = gen.random((n_samples, d)) * np.asarray(field.period)
    div = np.zeros(n_samples)
    for k in range(d):
        shift = np.zeros(d)
        shift[k] = h
        div += (field.eval_base(pts + shift)[:, k] - field.eval_base(pts - shift)[:, k]) / (
            2.0 * h
        )
    return float(np.max(np.abs(div)))


def check_mean_zero(field: VelocityField, n_nodes: int = _MEAN_NODES) -> float:
    """Max |mean of b_k| over the period cell, low-discrepancy quadrature."""
    sampler = qmc.Halton(d=field.dimension, scramble=False)
    u = sampler.random(n_nodes)
    pts = u * np.asarray(field.period)
    return float(np.max(np.abs(field.eval_base(pts).mean(axis=0))))


def validate_field(field: VelocityField) -> dict:
    """Run structural checks; raise FieldValidationError on failure.

    Returns {"max_divergence": float, "max_mean": float} on success.
    """
    max_div = check_divergence_free(field)
    if not np.isfinite(max_div) or max_div > _DIV_TOL:
        raise FieldValidationError(
            f"field is not divergence free: max |div| = {max_div:.3e} > {_DIV_TOL}"
        )
    max_mean = check_mean_zero(field)
    if not np.isfinite(max_mean) or max_mean > _MEAN_TOL:
        raise FieldValidationError(
            f"field does not average to zero: max |mean| = {max_mean:.3e} > {_MEAN_TOL}"
        )
    return {"max_divergence": max_div, "max_mean": max_mean}
