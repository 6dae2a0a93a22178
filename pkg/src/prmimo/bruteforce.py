"""Exhaustive grid search over all Tx/Rx polarization angles.

Every element angle is stepped over ``[0, 180)`` degrees (``p`` and ``-p``
are equivalent), and the waterfilling capacity is evaluated at every grid
point. Both the best and the worst configuration are reported.

For a 2x2 array the search runs in a compiled kernel. There the capacity
depends on the effective channel only through ``a = ||H||_F^2`` and
``b = |det H|^2``, and ``2^C`` has the closed form

* ``(P b + a)^2 / (4 b)``       when both eigenmodes are active,
* ``1 + P lambda_max``          otherwise.

``2^C`` increases with ``a`` and is quasi-convex in ``b``, so an upper
bound over a block of the grid follows from the block's largest column
energies (Hadamard bound on ``b``). Blocks whose bound cannot beat the
incumbent are skipped. The result is still the exact grid optimum; only
provably non-improving points are left unevaluated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numba
import numpy as np

from .channel import ChannelTensor, PolarizationConfig, effective_channel_batch
from .coding import channel_capacity

__all__ = ["BruteForceError", "BruteForceResult", "brute_force_joint", "grid_angles_deg", "sweep_side"]

MAX_GRID_POINTS = 10**8
MAX_GRID_POINTS_2X2 = 2 * 10**9


class BruteForceError(ValueError):
    pass


@dataclass(frozen=True)
class BruteForceResult:
    best_config: PolarizationConfig
    best_capacity: float
    worst_config: PolarizationConfig
    worst_capacity: float

    def __iter__(self):
        return iter((self.best_config, self.best_capacity, self.worst_config, self.worst_capacity))


def grid_angles_deg(step_deg: float) -> np.ndarray:
    n = 180.0 / step_deg if step_deg > 0 else 0.5
    if abs(n - round(n)) > 1e-9:
        raise BruteForceError(f"step {step_deg} deg must divide 180 evenly")
    return np.arange(int(round(n))) * step_deg


@numba.njit(cache=True, inline="always")
def _pow2_capacity(a, b, p):
    disc = 0.25 * a * a - b
    if disc < 0.0:
        disc = 0.0
    sq = math.sqrt(disc)
    if p * b > 2.0 * sq:
        return (p * b + a) ** 2 / (4.0 * b)
    return 1.0 + p * (0.5 * a + sq)


@numba.njit(cache=True)
def _upper(a_max, b_max, p):
    b = min(b_max, 0.25 * a_max * a_max)
    return max(1.0 + p * a_max, _pow2_capacity(a_max, b, p))


@numba.njit(cache=True)
def _search_2x2(e, p):
    """Branch-and-bound over the full 4-D grid.

    ``e[i, j, r, t]`` is the effective gain of Rx i at grid angle r and
    Tx j at grid angle t. Returns (best value, best index 4-tuple, worst
    value, worst index 4-tuple) in ``2^C`` units.
    """
    n = e.shape[2]
    col = np.empty((2, n, n, n))  # col[j, r1, r2, t] = column-j energy
    for j in range(2):
        for r1 in range(n):
            for r2 in range(n):
                for t in range(n):
                    x = e[0, j, r1, t]
                    y = e[1, j, r2, t]
                    col[j, r1, r2, t] = x.real * x.real + x.imag * x.imag + y.real * y.real + y.imag * y.imag
    amax = np.empty((2, n, n))
    amin = np.empty((2, n, n))
    for j in range(2):
        for r1 in range(n):
            for r2 in range(n):
                hi = -1.0
                lo = np.inf
                for t in range(n):
                    v = col[j, r1, r2, t]
                    if v > hi:
                        hi = v
                    if v < lo:
                        lo = v
                amax[j, r1, r2] = hi
                amin[j, r1, r2] = lo

    npairs = n * n
    ub = np.empty(npairs)
    lb = np.empty(npairs)
    for r1 in range(n):
        for r2 in range(n):
            k = r1 * n + r2
            ub[k] = _upper(amax[0, r1, r2] + amax[1, r1, r2], amax[0, r1, r2] * amax[1, r1, r2], p)
            lb[k] = 1.0 + 0.5 * p * (amin[0, r1, r2] + amin[1, r1, r2])

    best = -1.0
    bi = (0, 0, 0, 0)
    for k in np.argsort(-ub, kind="mergesort"):
        if ub[k] <= best:
            break
        r1 = k // n
        r2 = k % n
        a2max = amax[1, r1, r2]
        for t1 in range(n):
            a1 = col[0, r1, r2, t1]
            if _upper(a1 + a2max, a1 * a2max, p) <= best:
                continue
            h11 = e[0, 0, r1, t1]
            h21 = e[1, 0, r2, t1]
            for t2 in range(n):
                h12 = e[0, 1, r1, t2]
                h22 = e[1, 1, r2, t2]
                d = h11 * h22 - h12 * h21
                a = a1 + col[1, r1, r2, t2]
                b = d.real * d.real + d.imag * d.imag
                v = _pow2_capacity(a, b, p)
                if v > best:
                    best = v
                    bi = (r1, r2, t1, t2)

    worst = np.inf
    wi = (0, 0, 0, 0)
    for k in np.argsort(lb, kind="mergesort"):
        if lb[k] >= worst:
            break
        r1 = k // n
        r2 = k % n
        a2min = amin[1, r1, r2]
        for t1 in range(n):
            a1 = col[0, r1, r2, t1]
            if 1.0 + 0.5 * p * (a1 + a2min) >= worst:
                continue
            h11 = e[0, 0, r1, t1]
            h21 = e[1, 0, r2, t1]
            for t2 in range(n):
                h12 = e[0, 1, r1, t2]
                h22 = e[1, 1, r2, t2]
                d = h11 * h22 - h12 * h21
                a = a1 + col[1, r1, r2, t2]
                b = d.real * d.real + d.imag * d.imag
                v = _pow2_capacity(a, b, p)
                if v < worst:
                    worst = v
                    wi = (r1, r2, t1, t2)
    return best, bi, worst, wi


def _gain_table(blocks: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``e[i, j, r, t] = p(theta_r)^T H_ij p(theta_t)`` for all grid angles."""
    c, s = np.cos(theta), np.sin(theta)
    # rows: p_rx^T H_ij -> (i, j, r, 2)
    g = c[None, None, :, None] * blocks[:, :, None, 0, :] + s[None, None, :, None] * blocks[:, :, None, 1, :]
    return g[..., 0][..., None] * c + g[..., 1][..., None] * s


def _search_generic(blocks: np.ndarray, theta: np.ndarray, snr_db: float, chunk: int = 1 << 15):
    n_r, n_t = blocks.shape[:2]
    n = len(theta)
    dims = n_t + n_r
    total = n**dims
    best, worst = -np.inf, np.inf
    best_idx = worst_idx = None
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.stack(np.unravel_index(flat, (n,) * dims), axis=-1)
        ang = theta[idx]
        h = effective_channel_batch(blocks, ang[:, :n_t], ang[:, n_t:])
        cap = channel_capacity(h, snr_db)
        k = int(np.argmax(cap))
        if cap[k] > best:
            best, best_idx = float(cap[k]), idx[k]
        k = int(np.argmin(cap))
        if cap[k] < worst:
            worst, worst_idx = float(cap[k]), idx[k]
    return best, best_idx, worst, worst_idx


def brute_force_joint(tensor: ChannelTensor, step_deg: float, snr_db: float,
                      max_points: int | None = None) -> BruteForceResult:
    """Exhaustive polarization search on a uniform angle grid.

    Parameters
    ----------
    tensor : ChannelTensor
    step_deg : float
        Grid step in degrees; must divide 180.
    snr_db : float
        Total transmit power over unit noise, in dB.
    max_points : int, optional
        Guard on the number of grid points. Defaults to 1e8, or 2e9 for the
        pruned 2x2 kernel.

    Returns
    -------
    BruteForceResult
        Unpacks as ``(best_config, best_capacity, worst_config, worst_capacity)``.
    """
    theta_deg = grid_angles_deg(step_deg)
    theta = np.deg2rad(theta_deg)
    n = len(theta)
    dims = tensor.n_t + tensor.n_r
    fast = tensor.n_t == 2 and tensor.n_r == 2
    limit = max_points if max_points is not None else (MAX_GRID_POINTS_2X2 if fast else MAX_GRID_POINTS)
    points = n**dims
    if points > limit:
        # smallest step (dividing 180) that fits the guard
        need = 180.0 / math.floor(limit ** (1.0 / dims))
        suggestion = next(s for s in (0.5, 1, 2, 3, 4, 5, 6, 9, 10, 12, 15, 18, 20, 30, 45, 60, 90, 180)
                          if s >= need)
        raise BruteForceError(
            f"grid has {points:.3g} points (limit {limit:.3g}); use step_deg >= {suggestion}"
        )
    p = 10.0 ** (snr_db / 10.0)
    if fast:
        e = _gain_table(tensor.blocks, theta)
        best_v, bi, worst_v, wi = _search_2x2(e, p)
        best_cfg = PolarizationConfig(theta[[bi[2], bi[3]]], theta[[bi[0], bi[1]]])
        worst_cfg = PolarizationConfig(theta[[wi[2], wi[3]]], theta[[wi[0], wi[1]]])
        return BruteForceResult(best_cfg, math.log2(best_v), worst_cfg, math.log2(worst_v))
    best, bidx, worst, widx = _search_generic(tensor.blocks, theta, snr_db)
    n_t = tensor.n_t
    return BruteForceResult(
        PolarizationConfig(theta[bidx[:n_t]], theta[bidx[n_t:]]), best,
        PolarizationConfig(theta[widx[:n_t]], theta[widx[n_t:]]), worst,
    )


def sweep_side(tensor: ChannelTensor, fixed: np.ndarray, side: str, step_deg: float, snr_db: float):
    """Capacity over a grid of one side's angles with the other side fixed.

    Returns ``(angle_grid, capacities)`` with ``angle_grid`` of shape
    ``(points, n_side)`` in degrees.
    """
    theta_deg = grid_angles_deg(step_deg)
    n_side = tensor.n_t if side == "tx" else tensor.n_r
    grid = np.array(list(itertools.product(theta_deg, repeat=n_side)))
    ang = np.deg2rad(grid)
    fixed = np.broadcast_to(np.asarray(fixed, dtype=float), (len(grid), len(fixed)))
    if side == "tx":
        h = effective_channel_batch(tensor.blocks, ang, fixed)
    elif side == "rx":
        h = effective_channel_batch(tensor.blocks, fixed, ang)
    else:
        raise BruteForceError("side must be 'tx' or 'rx'")
    return grid, channel_capacity(h, snr_db)
