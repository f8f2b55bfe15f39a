"""Distribution diagnostics: Hartigan's dip test and Gaussian kernel densities."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .errors import DataError

DEFAULT_BANDWIDTH = 0.15
DEFAULT_GRID_POINTS = 512
DEFAULT_GRID_POINTS_2D = 128
GRID_PAD = 4.0


# --------------------------------------------------------------------------
# Dip statistic
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _dip_sorted(x):
    """Dip of a sorted sample (Hartigan & Hartigan, AS 217 as revised by Maechler).

    Works on ``2n * dip`` internally; a sample that cannot be fitted better
    than one ECDF step keeps the floor value 1, i.e. ``1 / (2n)``.
    """
    n = x.shape[0]
    dip = 1.0
    if n < 2 or x[n - 1] == x[0]:
        return dip / (2.0 * n)

    # predecessor links of the greatest convex minorant and successor links
    # of the least concave majorant over the whole sample
    mn = np.zeros(n, dtype=np.int64)
    for j in range(1, n):
        mn[j] = j - 1
        while True:
            a = mn[j]
            b = mn[a]
            if a == 0 or (x[j] - x[a]) * (a - b) < (x[a] - x[b]) * (j - a):
                break
            mn[j] = b
    mj = np.zeros(n, dtype=np.int64)
    mj[n - 1] = n - 1
    for k in range(n - 2, -1, -1):
        mj[k] = k + 1
        while True:
            a = mj[k]
            b = mj[a]
            if a == n - 1 or (x[k] - x[a]) * (a - b) < (x[a] - x[b]) * (k - a):
                break
            mj[k] = b

    gcm = np.zeros(n + 1, dtype=np.int64)
    lcm = np.zeros(n + 1, dtype=np.int64)
    low, high = 0, n - 1
    while True:
        # touch points of the GCM on [low, high], from high down to low
        gcm[0] = high
        i = 0
        while gcm[i] > low:
            gcm[i + 1] = mn[gcm[i]]
            i += 1
        ig = i
        l_gcm = i
        ix = ig - 1
        # touch points of the LCM on [low, high], from low up to high
        lcm[0] = low
        i = 0
        while lcm[i] < high:
            lcm[i + 1] = mj[lcm[i]]
            i += 1
        ih = i
        l_lcm = i
        iv = 1

        # largest vertical gap between the two hulls over the modal interval
        d = 0.0
        if l_gcm != 1 or l_lcm != 1:
            while True:
                gx = gcm[ix]
                lv = lcm[iv]
                if gx > lv:
                    g1 = gcm[ix + 1]
                    dx = (lv - g1 + 1) - (x[lv] - x[g1]) * (gx - g1) / (x[gx] - x[g1])
                    iv += 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv - 1
                else:
                    l1 = lcm[iv - 1]
                    dx = (x[gx] - x[l1]) * (lv - l1) / (x[lv] - x[l1]) - (gx - l1 - 1)
                    ix -= 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv
                if ix < 0:
                    ix = 0
                if iv > l_lcm:
                    iv = l_lcm
                if gcm[ix] == lcm[iv]:
                    break
        else:
            d = 1.0
        if d < dip:
            break

        # dips of the convex minorant left of the modal interval ...
        dip_l = 0.0
        for j in range(ig, l_gcm):
            best = 1.0
            jb = gcm[j + 1]
            je = gcm[j]
            if je - jb > 1 and x[je] != x[jb]:
                slope = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (jj - jb + 1) - (x[jj] - x[jb]) * slope
                    if t > best:
                        best = t
            if best > dip_l:
                dip_l = best
        # ... and of the concave majorant right of it
        dip_u = 0.0
        for j in range(ih, l_lcm):
            best = 1.0
            jb = lcm[j]
            je = lcm[j + 1]
            if je - jb > 1 and x[je] != x[jb]:
                slope = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (x[jj] - x[jb]) * slope - (jj - jb - 1)
                    if t > best:
                        best = t
            if best > dip_u:
                dip_u = best
        new = dip_u if dip_u > dip_l else dip_l
        if new > dip:
            dip = new

        if low == gcm[ig] and high == lcm[ih]:
            break
        low = gcm[ig]
        high = lcm[ih]
    return dip / (2.0 * n)


def dip_statistic(sample) -> float:
    """Hartigan's dip: sup-distance from the ECDF to the nearest unimodal CDF.

    Ranges over ``[1/(2n), 1/4]``.  Requires at least 4 finite observations.
    """
    x = np.sort(np.asarray(sample, dtype=np.float64).ravel())
    if x.size < 4:
        raise DataError(f"dip test needs at least 4 observations, got {x.size}")
    if not np.isfinite(x).all():
        raise DataError("dip test sample contains non-finite values")
    return float(_dip_sorted(x))


@dataclass(frozen=True)
class DipResult:
    n: int
    dip: float
    p_value: float
    B: int
    seed: int

    def to_dict(self) -> dict:
        return {"n": self.n, "dip": self.dip, "p_value": self.p_value, "B": self.B, "seed": self.seed}


def _replicate_dips(n: int, lo: int, hi: int, seed: int) -> np.ndarray:
    out = np.empty(hi - lo)
    for b in range(lo, hi):
        u = np.random.default_rng([seed, b]).random(n)
        u.sort()
        out[b - lo] = _dip_sorted(u)
    return out


@lru_cache(maxsize=16)
def _null_dips(n: int, B: int, seed: int, threads: int) -> np.ndarray:
    # replicate b always draws from the stream (seed, b): the result does not
    # depend on how replicates are split across workers
    if threads <= 1 or B < 2 * threads:
        dips = _replicate_dips(n, 0, B, seed)
    else:
        edges = np.linspace(0, B, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            parts = pool.map(lambda ab: _replicate_dips(n, ab[0], ab[1], seed), zip(edges[:-1], edges[1:]))
            dips = np.concatenate(list(parts))
    dips.flags.writeable = False
    return dips


def null_dip_distribution(n: int, B: int = 2000, seed: int = 0, threads: int = 1) -> np.ndarray:
    """Dips of ``B`` seeded uniform(0, 1) samples of size ``n``."""
    return _null_dips(int(n), int(B), int(seed), max(1, int(threads)))


def dip_pvalue(sample, B: int = 2000, seed: int = 0, threads: int = 1) -> DipResult:
    """Monte Carlo dip test against the uniform null.

    ``p = (1 + #{b : dip_b >= dip}) / (B + 1)`` where ``dip_b`` is the dip
    of the ``b``-th uniform(0, 1) sample of the same size, drawn from the
    generator seeded with ``(seed, b)``.
    """
    if B < 100:
        raise ValueError(f"B must be >= 100, got {B}")
    x = np.asarray(sample, dtype=np.float64).ravel()
    dip = dip_statistic(x)
    null = null_dip_distribution(x.size, B, seed, threads)
    exceed = int(np.count_nonzero(null >= dip))
    return DipResult(n=int(x.size), dip=dip, p_value=(1 + exceed) / (B + 1), B=int(B), seed=int(seed))


# --------------------------------------------------------------------------
# Kernel densities
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(_trapezoid(self.density, self.grid))

    def mode(self) -> float:
        return float(self.grid[np.argmax(self.density)])


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """``density[i, j]`` is the joint density at ``(x_grid[i], y_grid[j])``."""

    x_grid: np.ndarray
    y_grid: np.ndarray
    density: np.ndarray
    bandwidths: tuple[float, float]


def default_grid(sample, bandwidth: float, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    return np.linspace(x.min() - GRID_PAD * bandwidth, x.max() + GRID_PAD * bandwidth, points)


_trapezoid = getattr(np, "trapezoid", None) or np.trapz
_CHUNK = 4096
_NORM = 1.0 / math.sqrt(2.0 * math.pi)


def _kernel_matrix(points: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    z = (grid[None, :] - points[:, None]) / h
    return np.exp(-0.5 * z * z) * (_NORM / h)


def _check_bandwidth(h: float) -> float:
    h = float(h)
    if not h > 0 or not math.isfinite(h):
        raise ValueError(f"bandwidth must be a positive finite number, got {h}")
    return h


def kde_1d(sample, bandwidth: float = DEFAULT_BANDWIDTH, grid=None) -> DensityCurve:
    """Gaussian kernel density ``(1/(n h)) sum_i phi((x - x_i) / h)`` on ``grid``.

    The default grid has 512 points over ``[min - 4h, max + 4h]``.
    """
    h = _check_bandwidth(bandwidth)
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise DataError("KDE needs a non-empty sample")
    g = default_grid(x, h) if grid is None else np.asarray(grid, dtype=float)
    if g.size > 1 and (np.diff(g) <= 0).any():
        raise ValueError("grid must be strictly ascending")
    total = np.zeros(g.size)
    for lo in range(0, x.size, _CHUNK):
        total += _kernel_matrix(x[lo : lo + _CHUNK], g, h).sum(axis=0)
    return DensityCurve(g, total / x.size, h)


def kde_2d(
    x,
    y,
    bandwidths: tuple[float, float] = (DEFAULT_BANDWIDTH, DEFAULT_BANDWIDTH),
    x_grid=None,
    y_grid=None,
) -> DensityGrid:
    """Product-Gaussian kernel density of paired samples on a rectangular grid."""
    hx, hy = (_check_bandwidth(b) for b in bandwidths)
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise DataError(f"x and y lengths differ ({x.size} vs {y.size})")
    if x.size == 0:
        raise DataError("KDE needs a non-empty sample")
    gx = default_grid(x, hx, DEFAULT_GRID_POINTS_2D) if x_grid is None else np.asarray(x_grid, dtype=float)
    gy = default_grid(y, hy, DEFAULT_GRID_POINTS_2D) if y_grid is None else np.asarray(y_grid, dtype=float)
    dens = np.zeros((gx.size, gy.size))
    for lo in range(0, x.size, _CHUNK):
        kx = _kernel_matrix(x[lo : lo + _CHUNK], gx, hx)
        ky = _kernel_matrix(y[lo : lo + _CHUNK], gy, hy)
        dens += kx.T @ ky
    return DensityGrid(gx, gy, dens / x.size, (hx, hy))
