"""Polarization pre/post-coding and SVD waterfilling capacity.

The sum of squared singular values of the effective channel splits into
one quadratic form per Tx element (column sums of ``|h_eff|^2``) or per Rx
element (row sums). Each quadratic form is governed by a 2x2 Hermitian
"polarization-determinant" matrix, and its maximizer over real unit
vectors is the dominant eigenvector of that matrix's real part.
Alternating the Tx and Rx updates gives the joint coder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .channel import ChannelTensor, PolarizationConfig, canonical_angle, effective_channel_batch
from .linalg import DEGENERATE_TOL, dominant_angle, eig2_symmetric_part, sq_singular_values

__all__ = [
    "CodingError",
    "Side",
    "PolarizationDeterminantMatrix",
    "WaterfillingAllocation",
    "JointCodingResult",
    "tx_pd_matrix",
    "rx_pd_matrix",
    "optimal_polarization",
    "waterfill",
    "capacity",
    "jensen_capacity_bound",
    "waterfill_capacity",
    "channel_capacity",
    "joint_coding",
    "joint_coding_batch",
    "tx_only_coding_batch",
]

DEFAULT_ITERATIONS = 5
DEFAULT_TOLERANCE = 1e-3


class CodingError(ValueError):
    pass


class Side(Enum):
    TX = "tx"
    RX = "rx"


@dataclass(frozen=True)
class PolarizationDeterminantMatrix:
    matrix: np.ndarray
    side: Side
    index: int


@dataclass(frozen=True)
class WaterfillingAllocation:
    powers: np.ndarray
    threshold: float
    noise_power: float
    total_power: float


@dataclass
class JointCodingResult:
    final_config: PolarizationConfig
    iterations_used: int
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = False
    angle_history: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list, repr=False)


def tx_pd_matrix(tensor: ChannelTensor, rx_angles, j: int) -> PolarizationDeterminantMatrix:
    """Tx polarization-determinant matrix ``sum_i H_ij^H p_i p_i^T H_ij``.

    ``j`` is a 0-based Tx index.
    """
    rx_angles = np.asarray(rx_angles, dtype=float)
    if not 0 <= j < tensor.n_t:
        raise CodingError(f"Tx index {j} out of range for n_t={tensor.n_t}")
    if rx_angles.shape != (tensor.n_r,):
        raise CodingError("rx_angles length must equal n_r")
    m = np.zeros((2, 2), dtype=complex)
    for i in range(tensor.n_r):
        p = np.array([math.cos(rx_angles[i]), math.sin(rx_angles[i])])
        h = tensor.blocks[i, j]
        m += h.conj().T @ np.outer(p, p) @ h
    return PolarizationDeterminantMatrix(m, Side.TX, j)


def rx_pd_matrix(tensor: ChannelTensor, tx_angles, i: int) -> PolarizationDeterminantMatrix:
    """Rx polarization-determinant matrix ``sum_j H_ij p_j p_j^T H_ij^H``.

    ``i`` is a 0-based Rx index.
    """
    tx_angles = np.asarray(tx_angles, dtype=float)
    if not 0 <= i < tensor.n_r:
        raise CodingError(f"Rx index {i} out of range for n_r={tensor.n_r}")
    if tx_angles.shape != (tensor.n_t,):
        raise CodingError("tx_angles length must equal n_t")
    m = np.zeros((2, 2), dtype=complex)
    for j in range(tensor.n_t):
        p = np.array([math.cos(tx_angles[j]), math.sin(tx_angles[j])])
        h = tensor.blocks[i, j]
        m += h @ np.outer(p, p) @ h.conj().T
    return PolarizationDeterminantMatrix(m, Side.RX, i)


def optimal_polarization(pd: PolarizationDeterminantMatrix | np.ndarray) -> float:
    """Angle in ``[-pi/2, pi/2)`` maximizing ``p^T pd p`` over real unit ``p``."""
    m = pd.matrix if isinstance(pd, PolarizationDeterminantMatrix) else pd
    e2 = eig2_symmetric_part(m).e2
    return float(canonical_angle(math.atan2(e2[1], e2[0])))


def waterfill(sv_squared, noise_power: float = 1.0, total_power: float = 1.0) -> WaterfillingAllocation:
    """Capacity-maximizing power allocation over eigenmodes.

    Iterative removal: assume every mode is active, solve the water level,
    drop modes that would receive negative power and repeat.

    Parameters
    ----------
    sv_squared : array_like
        Squared singular values (eigenmode gains), in any order.
    noise_power, total_power : float
        Noise variance and total transmit power, both positive.

    Returns
    -------
    WaterfillingAllocation
        ``powers`` is aligned with the input order.
    """
    g = np.asarray(sv_squared, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise CodingError("sv_squared must be a non-empty 1-D array")
    if noise_power <= 0 or total_power <= 0:
        raise CodingError("noise_power and total_power must be positive")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise CodingError("sv_squared must be finite and non-negative")
    if not np.any(g > 0):
        raise CodingError("no eigenmode has positive gain")

    active = g > 0
    while True:
        inv = noise_power / g[active]
        level = (total_power + inv.sum()) / active.sum()
        powers = np.zeros_like(g)
        powers[active] = level - inv
        if np.all(powers[active] >= 0):
            break
        active &= powers > 0
    return WaterfillingAllocation(powers, float(level), noise_power, total_power)


def capacity(sv_squared, alloc: WaterfillingAllocation) -> float:
    """Sum rate ``sum_k log2(1 + P_k sigma_k^2 / sigma_n^2)`` in bits/s/Hz."""
    g = np.asarray(sv_squared, dtype=float)
    p = np.asarray(alloc.powers, dtype=float)
    if g.shape != p.shape:
        raise CodingError("sv_squared and allocation differ in length")
    return float(np.sum(np.log2(1.0 + p * g / alloc.noise_power)))


def jensen_capacity_bound(sv_squared, noise_power: float, threshold: float) -> float:
    """High-SNR Jensen upper bound ``R log2(eps/sigma_n^2 * sum(sigma^2) / R)``.

    Only defined when every mode is active under the water level.
    """
    g = np.asarray(sv_squared, dtype=float)
    g = g[g > 0]
    if g.size == 0:
        raise CodingError("no eigenmode has positive gain")
    if np.any(threshold - noise_power / g <= 0):
        raise CodingError("an eigenmode is inactive; the bound assumes all modes active")
    r = g.size
    return float(r * math.log2(threshold / noise_power * g.sum() / r))


def waterfill_capacity(sv_squared: np.ndarray, total_power, noise_power: float = 1.0) -> np.ndarray:
    """Vectorized waterfilling capacity.

    ``sv_squared`` has shape ``(..., R)``; ``total_power`` broadcasts against
    the leading axes. Returns capacities in bits/s/Hz.
    """
    g = -np.sort(-np.asarray(sv_squared, dtype=float), axis=-1)
    p = np.asarray(total_power, dtype=float)
    r = g.shape[-1]
    with np.errstate(divide="ignore"):
        inv = np.where(g > 0, noise_power / g, np.inf)
    k = np.arange(1, r + 1)
    csum = np.cumsum(inv, axis=-1)
    level = (p[..., None] + csum) / k
    # active set is a prefix of the sorted modes: largest k with level_k > inv_k
    ok = level > inv
    n_active = np.maximum(ok.sum(axis=-1), 1)
    lev = np.take_along_axis(level, (n_active - 1)[..., None], axis=-1)
    powers = np.where(k <= n_active[..., None], np.maximum(lev - inv, 0.0), 0.0)
    with np.errstate(invalid="ignore"):
        terms = np.where(powers > 0, np.log2(1.0 + powers * g / noise_power), 0.0)
    return terms.sum(axis=-1)


def channel_capacity(h_eff, snr_db, noise_power: float = 1.0) -> np.ndarray:
    """Waterfilling capacity of (stacked) effective channels.

    Total power is ``10^(snr_db/10)`` with unit noise, independent of the
    number of antennas.
    """
    g = sq_singular_values(h_eff)
    p = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0) * noise_power
    return waterfill_capacity(g, np.broadcast_to(p, g.shape[:-1]), noise_power)


def _frobenius_sq_batch(m: np.ndarray) -> np.ndarray:
    return np.sum(m.real**2 + m.imag**2, axis=(-2, -1))


def _step_angle(m00, m11, m01, u00, u11, u01):
    """Dominant angle of ``m``; if ``m`` is degenerate, of the fallback ``u``.

    A degenerate ``m`` makes the objective flat in this angle (e.g. a zero
    matrix when the other side sees no power), so any choice keeps the
    ascent; the polarization-averaged ``u`` avoids stalling there.
    """
    gap = np.hypot(m00 - m11, 2.0 * m01)
    theta = np.where(gap <= DEGENERATE_TOL, dominant_angle(u00, u11, u01), dominant_angle(m00, m11, m01))
    return canonical_angle(theta)


def _tx_step(blocks: np.ndarray, rx: np.ndarray) -> np.ndarray:
    cr, sr = np.cos(rx)[..., :, None], np.sin(rx)[..., :, None]
    # q_ij = p_rx,i^T H_ij  -> components along Tx v and h ports
    q0 = cr * blocks[..., 0, 0] + sr * blocks[..., 1, 0]
    q1 = cr * blocks[..., 0, 1] + sr * blocks[..., 1, 1]
    m00 = np.sum(q0.real**2 + q0.imag**2, axis=-2)
    m11 = np.sum(q1.real**2 + q1.imag**2, axis=-2)
    m01 = np.sum(q0.real * q1.real + q0.imag * q1.imag, axis=-2)
    # fallback: sum_i Re(H_ij^H H_ij)
    a = np.abs(blocks) ** 2
    u00 = np.sum(a[..., 0, 0] + a[..., 1, 0], axis=-2)
    u11 = np.sum(a[..., 0, 1] + a[..., 1, 1], axis=-2)
    u01 = np.sum((blocks[..., 0, 0].conj() * blocks[..., 0, 1]
                  + blocks[..., 1, 0].conj() * blocks[..., 1, 1]).real, axis=-2)
    return _step_angle(m00, m11, m01, u00, u11, u01)


def _rx_step(blocks: np.ndarray, tx: np.ndarray) -> np.ndarray:
    ct, st = np.cos(tx)[..., None, :], np.sin(tx)[..., None, :]
    # r_ij = H_ij p_tx,j -> components along Rx v and h ports
    r0 = blocks[..., 0, 0] * ct + blocks[..., 0, 1] * st
    r1 = blocks[..., 1, 0] * ct + blocks[..., 1, 1] * st
    m00 = np.sum(r0.real**2 + r0.imag**2, axis=-1)
    m11 = np.sum(r1.real**2 + r1.imag**2, axis=-1)
    m01 = np.sum(r0.real * r1.real + r0.imag * r1.imag, axis=-1)
    # fallback: sum_j Re(H_ij H_ij^H)
    a = np.abs(blocks) ** 2
    u00 = np.sum(a[..., 0, 0] + a[..., 0, 1], axis=-1)
    u11 = np.sum(a[..., 1, 0] + a[..., 1, 1], axis=-1)
    u01 = np.sum((blocks[..., 0, 0] * blocks[..., 1, 0].conj()
                  + blocks[..., 0, 1] * blocks[..., 1, 1].conj()).real, axis=-1)
    return _step_angle(m00, m11, m01, u00, u11, u01)


def _angle_change(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.abs(canonical_angle(a - b))
    return d


def joint_coding_batch(
    blocks: np.ndarray,
    max_iterations: int = DEFAULT_ITERATIONS,
    tolerance: float | None = None,
    record: bool = False,
):
    """Alternating Tx/Rx polarization updates on stacked channel tensors.

    Parameters
    ----------
    blocks : ndarray, shape (..., n_r, n_t, 2, 2)
    max_iterations : int
        Number of full (Tx sweep then Rx sweep) iterations.
    tolerance : float or None
        Stop an instance once its largest angle change over a full
        iteration drops below this value (radians). ``None`` runs exactly
        ``max_iterations`` iterations.
    record : bool
        Also return per-half-step objectives and angle history.

    Returns
    -------
    tx, rx : ndarray
        Final angles, shapes ``(..., n_t)`` and ``(..., n_r)``.
    iterations : ndarray of int
    converged : ndarray of bool
    trace : list of (objective, tx, rx) per half-step, only if ``record``.
    """
    blocks = np.asarray(blocks, dtype=complex)
    lead = blocks.shape[:-4]
    n_r, n_t = blocks.shape[-4:-2]
    tx = np.zeros(lead + (n_t,))
    rx = np.zeros(lead + (n_r,))
    iterations = np.zeros(lead, dtype=int)
    converged = np.zeros(lead, dtype=bool)
    trace = []
    for _ in range(max_iterations):
        live = ~converged
        new_tx = np.where(live[..., None], _tx_step(blocks, rx), tx)
        if record:
            trace.append((_frobenius_sq_batch(effective_channel_batch(blocks, new_tx, rx)),
                          new_tx.copy(), rx.copy()))
        new_rx = np.where(live[..., None], _rx_step(blocks, new_tx), rx)
        if record:
            trace.append((_frobenius_sq_batch(effective_channel_batch(blocks, new_tx, new_rx)),
                          new_tx.copy(), new_rx.copy()))
        iterations = iterations + live
        if tolerance is not None:
            change = np.maximum(
                _angle_change(new_tx, tx).max(axis=-1, initial=0.0),
                _angle_change(new_rx, rx).max(axis=-1, initial=0.0),
            )
            converged = converged | (live & (change < tolerance))
        tx, rx = new_tx, new_rx
        if tolerance is not None and np.all(converged):
            break
    if record:
        return tx, rx, iterations, converged, trace
    return tx, rx, iterations, converged


def joint_coding(
    tensor: ChannelTensor,
    max_iterations: int = DEFAULT_ITERATIONS,
    tolerance: float | None = DEFAULT_TOLERANCE,
) -> JointCodingResult:
    """Joint polarization pre/post-coding for one channel tensor.

    Starts from all-vertical polarization at both ends and alternates a
    full Tx sweep with a full Rx sweep, each element taking the dominant
    eigenvector of its polarization-determinant matrix. The Frobenius
    objective is recorded after every half-step and never decreases.
    """
    if max_iterations < 1:
        raise CodingError("max_iterations must be >= 1")
    tx, rx, its, conv, trace = joint_coding_batch(
        tensor.blocks, max_iterations, tolerance, record=True
    )
    return JointCodingResult(
        final_config=PolarizationConfig(tx, rx),
        iterations_used=int(its),
        objective_trace=[float(t[0]) for t in trace],
        converged=bool(conv),
        angle_history=[(t[1], t[2]) for t in trace],
    )


def tx_only_coding_batch(blocks: np.ndarray):
    """Tx polarization precoding alone, with the Rx left vertical."""
    blocks = np.asarray(blocks, dtype=complex)
    lead = blocks.shape[:-4]
    rx = np.zeros(lead + (blocks.shape[-4],))
    return _tx_step(blocks, rx), rx
