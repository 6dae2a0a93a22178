"""Hybrid Tx antenna selection with MRT over polarization-reconfigurable arrays.

For each candidate subset of ``l_t`` Tx elements the partial effective
channel is ``n_r x l_t``; with MRT at the Tx and MRC at the Rx the
post-combining SNR scale is the largest eigenvalue of ``H H^H``. Three ways
of choosing the polarization are supported:

* ``EW``     - joint coding re-run on every candidate subset,
* ``GLOBAL`` - joint coding once on the full array, reused for every subset,
* ``RANDOM`` - uniformly random angles (conventional HS/MRT baseline).

Subset indices are 1-based in :class:`SelectionIndexSet` (matching the
usual antenna numbering); array slicing uses the 0-based ``positions``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .channel import ChannelTensor, PolarizationConfig, effective_channel, effective_channel_batch
from .coding import DEFAULT_ITERATIONS, joint_coding_batch
from .linalg import frobenius_sq, max_sq_singular_value

__all__ = [
    "SelectionError",
    "Scheme",
    "SelectionIndexSet",
    "PartialEffectiveChannel",
    "SelectionOutcome",
    "MAX_TX",
    "enumerate_subsets",
    "partial_effective",
    "effective_snr",
    "snr_bounds",
    "dominant_weights",
    "select_ew",
    "select_global",
    "select_random_pol",
    "select_all_schemes",
]

MAX_TX = 16


class SelectionError(ValueError):
    pass


class Scheme(str, Enum):
    EW = "EW"
    GLOBAL = "Global"
    RANDOM = "RandomPol"


@dataclass(frozen=True)
class SelectionIndexSet:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise SelectionError("empty subset")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise SelectionError(f"indices must be strictly increasing: {idx}")
        if idx[0] < 1:
            raise SelectionError("indices are 1-based")
        object.__setattr__(self, "indices", idx)

    @property
    def positions(self) -> list[int]:
        return [i - 1 for i in self.indices]

    def __len__(self):
        return len(self.indices)

    def __str__(self):
        return ";".join(str(i) for i in self.indices)


@dataclass(frozen=True)
class PartialEffectiveChannel:
    matrix: np.ndarray
    subset: SelectionIndexSet
    config: PolarizationConfig


@dataclass(frozen=True)
class SelectionOutcome:
    best_subset: SelectionIndexSet
    effective_snr: float
    scheme: Scheme
    config_used: PolarizationConfig
    bounds: tuple[float, float]
    partial: PartialEffectiveChannel

    def csv_row(self, realization_id) -> list:
        lo, hi = self.bounds
        return [realization_id, self.scheme.value, len(self.best_subset),
                str(self.best_subset), self.effective_snr, lo, hi]


CSV_HEADER = ["realization", "scheme", "l_t", "indices", "effective_snr", "lower_bound", "upper_bound"]


@lru_cache(maxsize=None)
def _subset_positions(n_t: int, l_t: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n_t), l_t)), dtype=int)


def enumerate_subsets(n_t: int, l_t: int) -> list[SelectionIndexSet]:
    """All ``C(n_t, l_t)`` subsets in lexicographic order."""
    _check_sizes(n_t, l_t)
    return [SelectionIndexSet(tuple(p + 1)) for p in _subset_positions(n_t, l_t)]


def _check_sizes(n_t: int, l_t: int) -> None:
    if not 1 <= l_t <= n_t:
        raise SelectionError(f"need 1 <= l_t <= n_t, got l_t={l_t}, n_t={n_t}")
    if n_t > MAX_TX:
        raise SelectionError(f"n_t={n_t} exceeds the exhaustive-search cap of {MAX_TX}")


def partial_effective(tensor: ChannelTensor, config: PolarizationConfig,
                      subset: SelectionIndexSet) -> PartialEffectiveChannel:
    if subset.indices[-1] > tensor.n_t:
        raise SelectionError(f"subset {subset} out of range for n_t={tensor.n_t}")
    full = effective_channel(tensor, config)
    return PartialEffectiveChannel(full[:, subset.positions], subset, config)


def effective_snr(partial: PartialEffectiveChannel | np.ndarray) -> float:
    """Largest squared singular value of a partial effective channel."""
    m = partial.matrix if isinstance(partial, PartialEffectiveChannel) else np.asarray(partial)
    return float(max_sq_singular_value(m))


def snr_bounds(partial: PartialEffectiveChannel | np.ndarray) -> tuple[float, float]:
    """Eigenvalue bounds ``(F / min(l_t, n_r), F)`` with ``F`` the Frobenius square."""
    m = partial.matrix if isinstance(partial, PartialEffectiveChannel) else np.asarray(partial)
    upper = frobenius_sq(m)
    return upper / min(m.shape), upper


def dominant_weights(partial: PartialEffectiveChannel | np.ndarray):
    """Unit-norm MRT weights ``u`` (Tx) and MRC weights ``w`` (Rx).

    ``w^H H u`` equals the largest singular value.
    """
    m = partial.matrix if isinstance(partial, PartialEffectiveChannel) else np.asarray(partial)
    left, s, right_h = np.linalg.svd(m)
    return right_h[0].conj(), left[:, 0], float(s[0])


def _best(snrs: np.ndarray) -> int:
    # argmax keeps the first (lexicographically smallest) subset on ties
    return int(np.argmax(snrs))


def _outcome(tensor, subset_pos, matrices, snrs, scheme, tx, rx) -> SelectionOutcome:
    k = _best(snrs)
    frob = np.sum(np.abs(matrices) ** 2, axis=(-2, -1))
    upper = float(frob.max())
    lower = upper / min(matrices.shape[-2:])
    subset = SelectionIndexSet(tuple(subset_pos[k] + 1))
    if tx.ndim == 2:
        # per-subset configs only cover the selected elements; unselected stay vertical
        full_tx = np.zeros(tensor.n_t)
        full_tx[subset.positions] = tx[k]
        cfg = PolarizationConfig(full_tx, rx[k])
    else:
        cfg = PolarizationConfig(tx, rx)
    partial = PartialEffectiveChannel(matrices[k], subset, cfg)
    return SelectionOutcome(subset, float(snrs[k]), scheme, cfg, (lower, upper), partial)


def _ew_arrays(blocks: np.ndarray, l_t: int, iterations: int):
    n_t = blocks.shape[-3]
    pos = _subset_positions(n_t, l_t)
    sub = blocks[..., :, pos, :, :]              # (..., n_r, K, l_t, 2, 2)
    sub = np.ascontiguousarray(np.moveaxis(sub, -4, -5))  # (..., K, n_r, l_t, 2, 2)
    tx, rx, _, _ = joint_coding_batch(sub, iterations)
    mats = effective_channel_batch(sub, tx, rx)  # (..., K, n_r, l_t)
    return pos, mats, max_sq_singular_value(mats), tx, rx


def _fixed_config_arrays(blocks: np.ndarray, l_t: int, tx, rx):
    n_t = blocks.shape[-3]
    pos = _subset_positions(n_t, l_t)
    full = effective_channel_batch(blocks, tx, rx)   # (..., n_r, n_t)
    mats = np.ascontiguousarray(np.moveaxis(full[..., :, pos], -3, -2))  # (..., K, n_r, l_t)
    return pos, mats, max_sq_singular_value(mats)


def select_ew(tensor: ChannelTensor, l_t: int, iterations: int = DEFAULT_ITERATIONS) -> SelectionOutcome:
    """Element-wise scheme: joint coding on every candidate subset, then select."""
    _check_sizes(tensor.n_t, l_t)
    pos, mats, snrs, tx, rx = _ew_arrays(tensor.blocks, l_t, iterations)
    return _outcome(tensor, pos, mats, snrs, Scheme.EW, tx, rx)


def select_global(tensor: ChannelTensor, l_t: int, iterations: int = DEFAULT_ITERATIONS) -> SelectionOutcome:
    """Global scheme: joint coding once on the full array, then select."""
    _check_sizes(tensor.n_t, l_t)
    tx, rx, _, _ = joint_coding_batch(tensor.blocks, iterations)
    pos, mats, snrs = _fixed_config_arrays(tensor.blocks, l_t, tx, rx)
    return _outcome(tensor, pos, mats, snrs, Scheme.GLOBAL, tx, rx)


def random_angles(rng: np.random.Generator, n_t: int, n_r: int):
    """Uniform angles on ``[-pi, pi)`` for Tx then Rx elements."""
    tx = rng.uniform(-math.pi, math.pi, n_t)
    rx = rng.uniform(-math.pi, math.pi, n_r)
    return tx, rx


def select_random_pol(tensor: ChannelTensor, l_t: int, rng: np.random.Generator | int) -> SelectionOutcome:
    """Conventional HS/MRT: random polarization, exhaustive subset selection."""
    _check_sizes(tensor.n_t, l_t)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.Philox(key=int(rng)))
    tx, rx = random_angles(rng, tensor.n_t, tensor.n_r)
    pos, mats, snrs = _fixed_config_arrays(tensor.blocks, l_t, tx, rx)
    return _outcome(tensor, pos, mats, snrs, Scheme.RANDOM, tx, rx)


def select_all_schemes(blocks: np.ndarray, l_t_values, tx_random, rx_random,
                       iterations: int = DEFAULT_ITERATIONS) -> dict:
    """Batched selection over stacked tensors for several ``l_t``.

    Returns ``{l_t: {scheme: (snr, subset_index, upper_bound, matrix)}}``
    with arrays over the leading (realization) axes. ``subset_index`` indexes
    the lexicographic subset list for that ``l_t``, ``upper_bound`` is the
    best Frobenius square over all subsets of that scheme and ``matrix`` is
    the selected partial channel.
    """
    blocks = np.asarray(blocks, dtype=complex)
    n_r, n_t = blocks.shape[-4:-2]
    g_tx, g_rx, _, _ = joint_coding_batch(blocks, iterations)
    out = {}
    for l_t in l_t_values:
        _check_sizes(n_t, l_t)
        res = {}
        _, mats, snrs, _, _ = _ew_arrays(blocks, l_t, iterations)
        res[Scheme.EW] = _reduce(mats, snrs)
        _, mats, snrs = _fixed_config_arrays(blocks, l_t, g_tx, g_rx)
        res[Scheme.GLOBAL] = _reduce(mats, snrs)
        _, mats, snrs = _fixed_config_arrays(blocks, l_t, tx_random, rx_random)
        res[Scheme.RANDOM] = _reduce(mats, snrs)
        out[l_t] = res
    return out


def _reduce(mats: np.ndarray, snrs: np.ndarray):
    k = np.argmax(snrs, axis=-1)
    best = np.take_along_axis(snrs, k[..., None], axis=-1)[..., 0]
    frob = np.sum(mats.real**2 + mats.imag**2, axis=(-2, -1))
    best_mat = np.take_along_axis(mats, k[..., None, None, None], axis=-3)[..., 0, :, :]
    return best, k, frob.max(axis=-1), best_mat
