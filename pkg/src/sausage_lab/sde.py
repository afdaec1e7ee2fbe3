"""Euler scheme for dX = v(X) dt + eps dW and path persistence.

Noise layout
------------
Realization i under master seed s consumes the Philox stream keyed by (s, i),
drawn in chunks whose size never affects the values. ``integrate`` is the
single-path view of the same machinery: it uses realization index 0, so the
path it returns is bit-identical to the first row of a batched run with the
same seed. Step n uses the drift evaluated at the state after step n-1:

    X_{n+1} = X_n + v(X_n) dt + eps sqrt(dt) xi_n.

A non-finite coordinate aborts integration with IntegrationDivergedError
carrying the 1-based step index.

File format
-----------
``save_path`` writes a little-endian binary file: magic ``SLPATH01`` (8
bytes), uint32 dimension, uint64 step count N, float64 recording step dt,
uint64 seed, then the (d, N+1) position array in coordinate-major float64
(all positions of coordinate 0, then coordinate 1, ...).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import advance_trig
from .errors import ConfigurationError, IntegrationDivergedError
from .fields import VelocityField
from .rng import NoiseSource

__all__ = [
    "IntegratorConfig",
    "SamplePath",
    "integrate",
    "integrate_strided",
    "integrate_batch",
    "integrate_finals",
    "integrate_coupled_pair",
    "save_path",
    "load_path",
]

# hard cap on the Euler step: larger steps distort cellular flows badly
MAX_DT = 0.1

# floats per noise buffer; chunking is invisible in the results
_CHUNK_FLOATS = 4_000_000

_MAGIC = b"SLPATH01"
_HEADER = struct.Struct("<8sIQdQ")


@dataclass(frozen=True, eq=False)
class IntegratorConfig:
    """Parameters of one integration run.

    x0 : starting point, shape (d,).
    dt : Euler step, 0 < dt <= 0.1.
    n_steps : number of steps N; the horizon is T = N * dt.
    epsilon : noise strength, >= 0.
    seed : master seed for the noise streams.
    """

    x0: np.ndarray
    dt: float
    n_steps: int
    epsilon: float
    seed: int

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=np.float64).copy()
        if x0.ndim != 1 or x0.size < 1:
            raise ConfigurationError("x0 must be a 1-d point")
        if not np.all(np.isfinite(x0)):
            raise ConfigurationError("x0 must be finite")
        object.__setattr__(self, "x0", x0)
        if not (0.0 < self.dt <= MAX_DT) or not math.isfinite(self.dt):
            raise ConfigurationError(f"dt must be in (0, {MAX_DT}]")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigurationError("n_steps must be a positive integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if self.epsilon < 0 or not math.isfinite(self.epsilon):
            raise ConfigurationError("epsilon must be finite and >= 0")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def dimension(self) -> int:
        return self.x0.size

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Recorded trajectory: positions[n] is the state after n recorded steps.

    dt is the spacing of the recorded grid, which equals the integration step
    unless the path was recorded with a stride.
    """

    positions: np.ndarray
    dt: float
    seed: int

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ConfigurationError("positions must have shape (N+1, d)")
        object.__setattr__(self, "positions", pos)
        # recording spacing may exceed the Euler cap (strided paths), but
        # must still be a positive time step
        if not (self.dt > 0.0) or not math.isfinite(self.dt):
            raise ConfigurationError("dt must be finite and > 0")

    @property
    def n_steps(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt


def _check_field(field: VelocityField, cfg: IntegratorConfig):
    if field.dimension != cfg.dimension:
        raise ConfigurationError(
            f"field dimension {field.dimension} != x0 dimension {cfg.dimension}"
        )


def _effective_coefficients(field: VelocityField):
    """Kernel mode arrays with scaling folded in, or None for callables."""
    coeffs = field.kernel_coefficients()
    if coeffs is None:
        return None
    w, ac, asin = coeffs
    factor = field.amplitude * field.scale_r
    return (
        np.ascontiguousarray(field.scale_r * w),
        np.ascontiguousarray(factor * ac),
        np.ascontiguousarray(factor * asin),
    )


def _engine(
    field: VelocityField,
    cfg: IntegratorConfig,
    n_realizations: int,
    stride: int,
    first_realization: int = 0,
):
    """Advance n_realizations independent rows; return (stored, finals).

    Row i consumes the stream keyed (cfg.seed, first_realization + i), so a
    large ensemble can be run in memory-bounded groups without changing any
    values. stride > 0 records every stride-th state into an
    (R, N//stride, d) array; stride <= 0 records nothing. n_steps must be
    divisible by a positive stride.
    """
    _check_field(field, cfg)
    R = int(n_realizations)
    if R < 1:
        raise ConfigurationError("n_realizations must be >= 1")
    d = cfg.dimension
    N = cfg.n_steps
    if stride > 0 and N % stride != 0:
        raise ConfigurationError("n_steps must be divisible by the recording stride")
    K = N // stride if stride > 0 else 0
    out = np.empty((R, K, d))
    pos = np.tile(cfg.x0, (R, 1))
    coeffs = _effective_coefficients(field)
    noise_scale = cfg.epsilon * math.sqrt(cfg.dt)
    chunk = max(1, min(N, _CHUNK_FLOATS // (R * d)))
    sources = [NoiseSource(cfg.seed, first_realization + i) for i in range(R)]
    drift_factor = field.amplitude * field.scale_r

    n0 = 0
    while n0 < N:
        b = min(chunk, N - n0)
        noise = np.empty((R, b, d))
        for i, src in enumerate(sources):
            noise[i] = src.normals((b, d))
        if coeffs is not None:
            w, ac, asin = coeffs
            bad, step = advance_trig(
                pos, w, ac, asin, cfg.dt, noise_scale, noise, out, stride, n0
            )
            if bad >= 0:
                raise IntegrationDivergedError(step, bad)
        else:
            for n in range(b):
                v = drift_factor * field.eval_base(field.scale_r * pos)
                pos += v * cfg.dt + noise_scale * noise[:, n, :]
                step = n0 + n + 1
                finite = np.isfinite(pos).all(axis=1)
                if not finite.all():
                    raise IntegrationDivergedError(step, int(np.argmin(finite)))
                if stride > 0 and step % stride == 0:
                    out[:, step // stride - 1, :] = pos
        n0 += b
    return out, pos


def integrate(field: VelocityField, cfg: IntegratorConfig) -> SamplePath:
    """Integrate one trajectory, recording every step."""
    stored, _ = _engine(field, cfg, 1, 1)
    positions = np.concatenate([cfg.x0[None, :], stored[0]], axis=0)
    return SamplePath(positions=positions, dt=cfg.dt, seed=cfg.seed)


def integrate_strided(field: VelocityField, cfg: IntegratorConfig, stride: int) -> SamplePath:
    """Integrate one trajectory, recording every stride-th step.

    The returned path has recording step stride * cfg.dt and covers the same
    horizon. Useful when the Euler step must be much finer than the spatial
    resolution the path will be used at.
    """
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")
    stored, _ = _engine(field, cfg, 1, int(stride))
    positions = np.concatenate([cfg.x0[None, :], stored[0]], axis=0)
    return SamplePath(positions=positions, dt=cfg.dt * stride, seed=cfg.seed)


def integrate_batch(
    field: VelocityField,
    cfg: IntegratorConfig,
    n_realizations: int,
    store_stride: int = 1,
    first_realization: int = 0,
) -> np.ndarray:
    """Integrate independent realizations; realization i uses stream (seed, i).

    Returns positions of shape (R, K+1, d) with K = n_steps // store_stride;
    row [:, 0] is x0. Bit-identical to stacking single runs with the same
    seeds; first_realization shifts the stream indices so an ensemble can be
    produced in groups.
    """
    if store_stride < 1:
        raise ConfigurationError("store_stride must be >= 1")
    stored, _ = _engine(
        field, cfg, n_realizations, int(store_stride), int(first_realization)
    )
    R, K, d = stored.shape
    full = np.empty((R, K + 1, d))
    full[:, 0, :] = cfg.x0
    full[:, 1:, :] = stored
    return full


def integrate_finals(
    field: VelocityField,
    cfg: IntegratorConfig,
    n_realizations: int,
    first_realization: int = 0,
) -> np.ndarray:
    """Final states only, shape (R, d). Same streams as integrate_batch."""
    _, finals = _engine(field, cfg, n_realizations, 0, int(first_realization))
    return finals


def integrate_coupled_pair(
    field: VelocityField, cfg: IntegratorConfig, r: float
) -> tuple[SamplePath, SamplePath]:
    """Matched-noise pair linking the base drift to its rescaling by r.

    The fast path starts at r * x0 and takes N * r^2 steps of size dt under
    the given field. The slow path starts at x0 and takes the N steps
    described by cfg under the field rescaled by r, driven by the same
    underlying noise aggregated in blocks: slow increment n uses
    (sum of the r^2 fast normals of block n) / r, which is again standard
    normal. For the zero field this makes the slow path equal to
    (fast path sampled every r^2 steps) / r up to roundoff; for nonzero
    drifts the two stay equal in law, which is what the swept-volume scaling
    comparison needs.

    Returns (fast, slow). r^2 must be a positive integer so the noise blocks
    align with the grid; keep N * r^2 modest since both paths record every
    step.
    """
    if not (r > 0) or not math.isfinite(r):
        raise ConfigurationError("r must be positive")
    r = float(r)
    block = r * r
    if abs(block - round(block)) > 1e-9 or round(block) < 1:
        raise ConfigurationError("r^2 must be a positive integer for exact coupling")
    block = int(round(block))
    _check_field(field, cfg)
    d = cfg.dimension
    N = cfg.n_steps
    M = N * block

    fast_field = field
    slow_field = field.with_scale(r * field.scale_r)
    fast_pos = np.ascontiguousarray(r * cfg.x0)[None, :].copy()
    slow_pos = cfg.x0[None, :].copy()
    fast_out = np.empty((1, M, d))
    slow_out = np.empty((1, N, d))
    cf = _effective_coefficients(fast_field)
    cs = _effective_coefficients(slow_field)
    if cf is None or cs is None:
        raise ConfigurationError("coupled pairs require a trigonometric field")
    noise_scale = cfg.epsilon * math.sqrt(cfg.dt)
    src = NoiseSource(cfg.seed, 0)

    # chunk over whole blocks of r^2 fast steps
    blocks_per_chunk = max(1, _CHUNK_FLOATS // (block * d))
    done = 0
    while done < N:
        q = min(blocks_per_chunk, N - done)
        noise = src.normals((1, q * block, d))
        bad, step = advance_trig(
            fast_pos, cf[0], cf[1], cf[2], cfg.dt, noise_scale,
            noise, fast_out, 1, done * block,
        )
        if bad >= 0:
            raise IntegrationDivergedError(step, 0)
        agg = noise.reshape(1, q, block, d).sum(axis=2) / r
        bad, step = advance_trig(
            slow_pos, cs[0], cs[1], cs[2], cfg.dt, noise_scale,
            agg, slow_out, 1, done,
        )
        if bad >= 0:
            raise IntegrationDivergedError(step, 0)
        done += q

    fast = SamplePath(
        positions=np.concatenate([r * cfg.x0[None, :], fast_out[0]], axis=0),
        dt=cfg.dt,
        seed=cfg.seed,
    )
    slow = SamplePath(
        positions=np.concatenate([cfg.x0[None, :], slow_out[0]], axis=0),
        dt=cfg.dt,
        seed=cfg.seed,
    )
    return fast, slow


def save_path(path: SamplePath, file) -> None:
    """Write a path in the coordinate-major binary format."""
    file = Path(file)
    pos = path.positions
    header = _HEADER.pack(
        _MAGIC, pos.shape[1], pos.shape[0] - 1, float(path.dt), int(path.seed)
    )
    payload = np.ascontiguousarray(pos.T, dtype="<f8").tobytes()
    file.write_bytes(header + payload)


def load_path(file) -> SamplePath:
    """Read a path written by save_path."""
    raw = Path(file).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigurationError("path file too short for its header")
    magic, d, n, dt, seed = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ConfigurationError("not a path file (bad magic)")
    expect = _HEADER.size + d * (n + 1) * 8
    if len(raw) != expect:
        raise ConfigurationError(
            f"path file length {len(raw)} does not match header (expected {expect})"
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    positions = np.ascontiguousarray(flat.reshape(d, n + 1).T)
    return SamplePath(positions=positions, dt=float(dt), seed=int(seed))
