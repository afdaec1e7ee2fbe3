"""Compiled inner loops: trajectory stepping and voxel painting.

Everything here is deterministic given its inputs. The stepping kernel works
for any drift expressed as a finite trigonometric sum, which covers the zero
field (no modes), the cellular flow (two modes), and file-defined fields.
Summation order is fixed so results are bit-reproducible.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def advance_trig(pos, w, ac, asin, dt, noise_scale, noise, out, stride, n0):
    """Advance every row of pos through the steps contained in noise.

    pos : (R, d) current positions, updated in place.
    w, ac, asin : (M, d) angle vectors and amplitudes of the effective drift
        v(x) = sum_m ac[m]*cos(w[m].x) + asin[m]*sin(w[m].x)
        (scaling factors already folded in by the caller).
    dt : time step.
    noise_scale : eps * sqrt(dt).
    noise : (R, B, d) standard normal increments for this chunk.
    out : (R, K, d) recorded positions. The state after global step s
        (1-based) is written to out[:, s // stride - 1] when s is a multiple
        of stride. stride <= 0 disables recording.
    n0 : number of global steps taken before this chunk.

    Returns (realization, step) for the first non-finite state, or (-1, -1).
    """
    R, B, d = noise.shape
    M = w.shape[0]
    v = np.empty(d)
    for i in range(R):
        p = pos[i]
        for n in range(B):
            for k in range(d):
                v[k] = 0.0
            for m in range(M):
                th = 0.0
                for k in range(d):
                    th += w[m, k] * p[k]
                c = math.cos(th)
                s = math.sin(th)
                for k in range(d):
                    v[k] += ac[m, k] * c + asin[m, k] * s
            ok = True
            for k in range(d):
                p[k] = p[k] + v[k] * dt + noise_scale * noise[i, n, k]
                if not math.isfinite(p[k]):
                    ok = False
            step = n0 + n + 1
            if not ok:
                return i, step
            if stride > 0 and step % stride == 0:
                j = step // stride - 1
                for k in range(d):
                    out[i, j, k] = p[k]
    return -1, -1


@njit(cache=True)
def paint_balls_3d(grid, centers, radius, lo0, lo1, lo2, h):
    """Mark voxels whose centers lie within radius of any center point.

    grid : (n0, n1, n2) uint8, voxel (i0,i1,i2) has center lo + (i+0.5)*h.
    """
    n0, n1, n2 = grid.shape
    r2 = radius * radius
    for idx in range(centers.shape[0]):
        c0 = centers[idx, 0]
        c1 = centers[idx, 1]
        c2 = centers[idx, 2]
        i0a = int(math.ceil((c0 - radius - lo0) / h - 0.5))
        i0b = int(math.floor((c0 + radius - lo0) / h - 0.5))
        if i0a < 0:
            i0a = 0
        if i0b > n0 - 1:
            i0b = n0 - 1
        for i0 in range(i0a, i0b + 1):
            dx0 = lo0 + (i0 + 0.5) * h - c0
            rem0 = r2 - dx0 * dx0
            if rem0 < 0.0:
                continue
            w1 = math.sqrt(rem0)
            i1a = int(math.ceil((c1 - w1 - lo1) / h - 0.5))
            i1b = int(math.floor((c1 + w1 - lo1) / h - 0.5))
            if i1a < 0:
                i1a = 0
            if i1b > n1 - 1:
                i1b = n1 - 1
            for i1 in range(i1a, i1b + 1):
                dx1 = lo1 + (i1 + 0.5) * h - c1
                rem1 = rem0 - dx1 * dx1
                if rem1 < 0.0:
                    continue
                w2 = math.sqrt(rem1)
                i2a = int(math.ceil((c2 - w2 - lo2) / h - 0.5))
                i2b = int(math.floor((c2 + w2 - lo2) / h - 0.5))
                if i2a < 0:
                    i2a = 0
                if i2b > n2 - 1:
                    i2b = n2 - 1
                if i2b >= i2a:
                    grid[i0, i1, i2a : i2b + 1] = 1


@njit(cache=True)
def paint_boxes_3d(grid, centers, hw0, hw1, hw2, lo0, lo1, lo2, h):
    """Mark voxels whose centers lie in an axis box around any center point."""
    n0, n1, n2 = grid.shape
    for idx in range(centers.shape[0]):
        i0a = int(math.ceil((centers[idx, 0] - hw0 - lo0) / h - 0.5))
        i0b = int(math.floor((centers[idx, 0] + hw0 - lo0) / h - 0.5))
        i1a = int(math.ceil((centers[idx, 1] - hw1 - lo1) / h - 0.5))
        i1b = int(math.floor((centers[idx, 1] + hw1 - lo1) / h - 0.5))
        i2a = int(math.ceil((centers[idx, 2] - hw2 - lo2) / h - 0.5))
        i2b = int(math.floor((centers[idx, 2] + hw2 - lo2) / h - 0.5))
        if i0a < 0:
            i0a = 0
        if i1a < 0:
            i1a = 0
        if i2a < 0:
            i2a = 0
        if i0b > n0 - 1:
            i0b = n0 - 1
        if i1b > n1 - 1:
            i1b = n1 - 1
        if i2b > n2 - 1:
            i2b = n2 - 1
        if i0b >= i0a and i1b >= i1a and i2b >= i2a:
            grid[i0a : i0b + 1, i1a : i1b + 1, i2a : i2b + 1] = 1
