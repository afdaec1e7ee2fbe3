"""Swept-volume (sausage) geometry and volume estimation.

The sausage of a path X with cross-section K is the union of translates
K + X_n over the recorded points. Its volume is estimated in three stages:

1. bound: an axis cube centered at the start point whose side covers the
   largest coordinate excursion plus the section extent;
2. refine: subdivide the cube m times, keeping only cells that actually meet
   the sausage (exact cell tests, with candidate lists shrinking down the
   tree);
3. sample: throw J shared uniform offsets into every kept cell and count
   membership hits with a nearest-neighbor index.

The estimate is V_hat = J^-1 (L/2^m)^d sum of hits, and the derived rate is
gamma_hat = V_hat / T. Everything is deterministic given (path, section, m,
J, seed), and the sampling works in path-relative coordinates, so translating
the whole path changes nothing, bit for bit.

A voxel counter provides an independent check of the same volume by a
different discretization.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import paint_balls_3d, paint_boxes_3d
from .errors import ConfigurationError, DegenerateInputError, ResourceLimitError
from .sde import SamplePath

__all__ = [
    "CrossSection",
    "ball",
    "box",
    "SausageIndex",
    "bounding_cube",
    "CellRefinement",
    "refine_cells",
    "SausageEstimate",
    "estimate_volume",
    "voxel_oracle_volume",
]

# practical caps; larger requests raise ResourceLimitError
_MAX_SAMPLES = 100_000_000  # final cells times offsets per estimate
_MAX_VOXELS = 2**31

_VOL_SALT = 1_000_003  # stream namespace for sampling offsets
_QUERY_CHUNK = 500_000


def _workers() -> int:
    """Thread count for index queries; never affects results."""
    try:
        w = int(os.environ.get("SAUSAGE_LAB_WORKERS", "1"))
    except ValueError:
        return 1
    return w if w != 0 else 1


@dataclass(frozen=True, eq=False)
class CrossSection:
    """Compact convex cross-section: a euclidean ball or an axis box."""

    shape: str
    dimension: int
    radius: float = 0.0
    half_widths: np.ndarray | None = None

    def __post_init__(self):
        if self.shape not in ("ball", "box"):
            raise ConfigurationError("shape must be 'ball' or 'box'")
        if self.dimension < 1:
            raise ConfigurationError("dimension must be >= 1")
        if self.shape == "ball":
            if not (self.radius > 0) or not math.isfinite(self.radius):
                raise ConfigurationError("ball radius must be finite and > 0")
        else:
            hw = np.asarray(self.half_widths, dtype=np.float64)
            if hw.shape != (self.dimension,):
                raise ConfigurationError("half_widths must have shape (d,)")
            if not np.all(np.isfinite(hw)) or np.any(hw <= 0):
                raise ConfigurationError("half widths must be finite and > 0")
            object.__setattr__(self, "half_widths", hw)

    @property
    def coordinate_extents(self) -> np.ndarray:
        """Half-extent along each axis (the largest |y_k| over the section)."""
        if self.shape == "ball":
            return np.full(self.dimension, self.radius)
        return self.half_widths

    @property
    def bounding_coordinate_radius(self) -> float:
        return float(np.max(self.coordinate_extents))

    @property
    def volume(self) -> float:
        if self.shape == "ball":
            d = self.dimension
            return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius**d
        return float(np.prod(2.0 * self.half_widths))

    def reflected(self) -> "CrossSection":
        """The point reflection {-y : y in K}; identity for balls and boxes.

        Kept explicit so the obstacle-rate relation stays correct if an
        asymmetric shape is ever added.
        """
        return self

    def describe(self) -> str:
        if self.shape == "ball":
            return f"ball(R={self.radius:g}, d={self.dimension})"
        return f"box(hw={np.array2string(self.half_widths, precision=4)})"


def ball(radius: float = 1.0, dimension: int = 3) -> CrossSection:
    """Euclidean ball of the given radius."""
    return CrossSection(shape="ball", dimension=dimension, radius=float(radius))


def box(half_widths) -> CrossSection:
    """Axis-aligned box with the given half-widths per coordinate."""
    hw = np.asarray(half_widths, dtype=np.float64)
    return CrossSection(shape="box", dimension=hw.size, half_widths=hw)


class SausageIndex:
    """Nearest-neighbor membership index for a union of section translates.

    Ball sections query euclidean distance to the centers; box sections query
    Chebyshev distance in coordinates scaled by the half-widths. Membership is
    decided by an exact closed-set comparison after the index lookup, so the
    small search-radius slack never changes answers.
    """

    def __init__(self, points: np.ndarray, section: CrossSection):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != section.dimension:
            raise ConfigurationError("points must have shape (N, d) matching the section")
        self.section = section
        self.n_points = points.shape[0]
        if section.shape == "ball":
            self._tree = cKDTree(points)
            self._p = 2.0
            self._cut = section.radius
            self._scale = None
        else:
            self._scale = section.half_widths
            self._tree = cKDTree(points / self._scale)
            self._p = np.inf
            self._cut = 1.0

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean membership for query points of shape (n, d)."""
        q = np.asarray(pts, dtype=np.float64)
        if self._scale is not None:
            q = q / self._scale
        dist, _ = self._tree.query(
            q,
            k=1,
            p=self._p,
            distance_upper_bound=self._cut * (1.0 + 1e-9),
            workers=_workers(),
        )
        return dist <= self._cut


def bounding_cube(path: SamplePath, section: CrossSection) -> tuple[np.ndarray, float]:
    """Axis cube (center, side) sure to contain the sausage.

    Centered at the start point x0, side 2 * (R_K + R_X) where R_K is the
    section's largest half-extent and R_X the largest coordinate excursion
    |X_n^k - x0^k| over the path.
    """
    if path.dimension != section.dimension:
        raise ConfigurationError("path and section dimensions differ")
    x0 = path.positions[0]
    excursion = float(np.max(np.abs(path.positions - x0)))
    side = 2.0 * (section.bounding_coordinate_radius + excursion)
    if side <= 0:
        raise DegenerateInputError("bounding cube has zero side")
    return x0.copy(), side


def _cell_hits(points: np.ndarray, lo: np.ndarray, hi: np.ndarray, section: CrossSection):
    """Which points have a section translate meeting the cell [lo, hi]."""
    clipped = np.clip(points, lo, hi)
    if section.shape == "ball":
        gap2 = np.sum((clipped - points) ** 2, axis=1)
        return gap2 <= section.radius**2
    gap = np.abs(clipped - points)
    return np.all(gap <= section.half_widths, axis=1)


@dataclass(frozen=True, eq=False)
class CellRefinement:
    """Cells of the subdivided bounding cube that meet the sausage.

    centers has shape (I, d) in canonical lexicographic order; side is the
    cell side L / 2^level; level_counts[l-1] is the kept-cell count after l
    subdivisions.
    """

    centers: np.ndarray
    side: float
    cube_center: np.ndarray
    cube_side: float
    level: int
    level_counts: tuple[int, ...]

    @property
    def n_cells(self) -> int:
        return self.centers.shape[0]

    @property
    def covering_volume(self) -> float:
        return self.n_cells * self.side**self.centers.shape[1]


def refine_cells(path: SamplePath, section: CrossSection, m: int) -> CellRefinement:
    """Subdivide the bounding cube m times, keeping cells meeting the sausage.

    Each level splits every kept cell into 2^d children; a child survives when
    at least one of its parent's candidate path points has a translate meeting
    it, so candidate lists shrink as cells get smaller. Cell tests are exact
    clamped-distance comparisons (euclidean for balls, per-axis for boxes), so
    the kept cells cover the sausage with nothing missing and nothing
    unreachable retained.
    """
    if m < 0:
        raise ConfigurationError("m must be >= 0")
    center, side = bounding_cube(path, section)
    d = section.dimension
    pts = path.positions
    origin = center - side / 2.0
    all_idx = np.arange(pts.shape[0], dtype=np.int32)

    cells = [(np.zeros(d, dtype=np.int64), all_idx)]
    counts = []
    for level in range(1, m + 1):
        cell_side = side / (1 << level)
        nxt = []
        for coord, cand in cells:
            sub = pts[cand]
            base = 2 * coord
            for child in range(1 << d):
                offs = np.array([(child >> k) & 1 for k in range(d)], dtype=np.int64)
                cc = base + offs
                lo = origin + cc * cell_side
                hi = lo + cell_side
                keep = _cell_hits(sub, lo, hi, section)
                if keep.any():
                    nxt.append((cc, cand[keep]))
        cells = nxt
        counts.append(len(cells))

    coords = np.array([c for c, _ in cells], dtype=np.int64).reshape(len(cells), d)
    order = np.lexsort(coords.T[::-1])
    coords = coords[order]
    cell_side = side / (1 << m)
    centers = origin + (coords + 0.5) * cell_side
    return CellRefinement(
        centers=centers,
        side=cell_side,
        cube_center=center,
        cube_side=side,
        level=m,
        level_counts=tuple(counts),
    )


@dataclass(frozen=True, eq=False)
class SausageEstimate:
    """Monte Carlo sausage volume estimate and derived growth rate.

    v_hat : volume estimate; T : path duration; gamma_hat = v_hat / T;
    m, J : subdivision depth and offsets per cell; I : retained cells;
    L : bounding-cube side; std_error : binomial standard error of v_hat
    (offsets are shared across cells, so this is an approximation);
    gamma_std_error = std_error / T.
    """

    v_hat: float
    std_error: float
    gamma_hat: float
    gamma_std_error: float
    T: float
    m: int
    J: int
    I: int
    L: float
    cell_side: float
    level_counts: tuple[int, ...]
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "v_hat": self.v_hat,
            "gamma_hat": self.gamma_hat,
            "T": self.T,
            "m": self.m,
            "J": self.J,
            "I": self.I,
            "L": self.L,
            "std_error": self.std_error,
            "seed": self.seed,
        }


def estimate_volume(
    path: SamplePath,
    section: CrossSection,
    m: int = 4,
    n_offsets: int = 10_000,
    seed: int = 0,
) -> SausageEstimate:
    """Estimate the sausage volume of a recorded path.

    The same n_offsets uniform offsets in [-1/2, 1/2)^d (scaled by the cell
    side) are reused in every kept cell. The hit count is an integer, so the
    result does not depend on evaluation order or thread count. All geometry
    is computed relative to the start point, so a translated path gives the
    identical estimate.
    """
    from .rng import generator_for

    if n_offsets < 1:
        raise DegenerateInputError("n_offsets must be >= 1")
    # path-relative coordinates make translation invariance exact
    rel = SamplePath(
        positions=path.positions - path.positions[0], dt=path.dt, seed=path.seed
    )
    refinement = refine_cells(rel, section, m)
    I = refinement.n_cells
    J = int(n_offsets)
    if I * J > _MAX_SAMPLES:
        raise ResourceLimitError(
            f"{I} cells x {J} offsets exceeds the sampling cap {_MAX_SAMPLES}"
        )
    d = section.dimension
    gen = generator_for(int(seed), _VOL_SALT)
    offsets = (gen.random((J, d)) - 0.5) * refinement.side

    index = SausageIndex(rel.positions, section)
    total_hits = 0
    cells_per_chunk = max(1, _QUERY_CHUNK // J)
    for start in range(0, I, cells_per_chunk):
        centers = refinement.centers[start : start + cells_per_chunk]
        queries = (centers[:, None, :] + offsets[None, :, :]).reshape(-1, d)
        total_hits += int(np.count_nonzero(index.contains(queries)))

    cell_vol = refinement.side**d
    v_hat = cell_vol * total_hits / J
    p_hat = total_hits / (I * J)
    std_error = cell_vol * math.sqrt(I * p_hat * (1.0 - p_hat) / J)
    T = path.duration
    return SausageEstimate(
        v_hat=v_hat,
        std_error=std_error,
        gamma_hat=v_hat / T if T > 0 else math.nan,
        gamma_std_error=std_error / T if T > 0 else math.nan,
        T=T,
        m=int(m),
        J=J,
        I=I,
        L=refinement.cube_side,
        cell_side=refinement.side,
        level_counts=refinement.level_counts,
        seed=int(seed),
    )


def _paint_generic(grid, points, section, lo, h):
    """Reference voxel painter for any dimension (plain numpy)."""
    d = points.shape[1]
    shape = grid.shape
    ext = section.coordinate_extents
    for p in points:
        ia = np.maximum(np.ceil((p - ext - lo) / h - 0.5).astype(np.int64), 0)
        ib = np.minimum(
            np.floor((p + ext - lo) / h - 0.5).astype(np.int64),
            np.array(shape) - 1,
        )
        if np.any(ib < ia):
            continue
        axes = [lo[k] + (np.arange(ia[k], ib[k] + 1) + 0.5) * h - p[k] for k in range(d)]
        region = tuple(slice(ia[k], ib[k] + 1) for k in range(d))
        if section.shape == "box":
            grid[region] = 1
        else:
            acc = np.zeros([a.size for a in axes])
            for k in range(d):
                sh = [1] * d
                sh[k] = axes[k].size
                acc = acc + (axes[k] ** 2).reshape(sh)
            grid[region] |= (acc <= section.radius**2).astype(np.uint8)


def voxel_oracle_volume(
    path: SamplePath, section: CrossSection, resolution: int = 8
) -> float:
    """Pixel-counting check of the sausage volume.

    Splits the bounding cube into voxels of side L / 2^resolution and counts
    voxel centers covered by any translate. Independent of the Monte Carlo
    estimator; the discretization error shrinks like the voxel side times the
    sausage surface area. Features smaller than a voxel can be missed
    entirely, which bounds the useful radius from below at a given
    resolution.
    """
    if resolution < 1:
        raise ConfigurationError("resolution must be >= 1")
    d = path.dimension
    n = 1 << int(resolution)
    if float(n) ** d > _MAX_VOXELS:
        raise ResourceLimitError(
            f"2^{resolution} voxels per axis in d={d} exceeds the cap {_MAX_VOXELS}"
        )
    center, side = bounding_cube(path, section)
    h = side / n
    lo = center - side / 2.0
    pts = np.ascontiguousarray(path.positions)
    grid = np.zeros((n,) * d, dtype=np.uint8)
    if d == 3:
        if section.shape == "ball":
            paint_balls_3d(grid, pts, section.radius, lo[0], lo[1], lo[2], h)
        else:
            hw = section.half_widths
            paint_boxes_3d(grid, pts, hw[0], hw[1], hw[2], lo[0], lo[1], lo[2], h)
    else:
        _paint_generic(grid, pts, section, lo, h)
    return float(np.count_nonzero(grid)) * h**d
