"""Dual-polarized flat-fading channel tensors and effective channels.

A channel tensor holds one 2x2 polarization-basis matrix per (Rx i, Tx j)
element pair::

    H_ij = [[h_vv, h_vh],
            [h_hv, h_hh]]

where ``h_xy`` is the gain from the y-polarized Tx port to the x-polarized
Rx port. It is stored as a complex array of shape ``(n_r, n_t, 2, 2)``.
A polarization-reconfigurable element with angle ``theta`` uses the real
unit vector ``(cos theta, sin theta)``, and the baseband sees

    h_eff[i, j] = p_rx[i]^T H_ij p_tx[j].
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ChannelError",
    "ChannelGenConfig",
    "ChannelTensor",
    "PolarizationConfig",
    "realization_rng",
    "generate_channel",
    "polarization_vector",
    "polarization_vectors",
    "canonical_angle",
    "effective_channel",
    "effective_channel_batch",
    "effective_element_expanded",
]


class ChannelError(ValueError):
    pass


def canonical_angle(theta):
    """Reduce angles modulo pi into ``[-pi/2, pi/2)``.

    ``p`` and ``-p`` give the same squared envelope, so angles are only
    meaningful modulo pi.
    """
    theta = np.asarray(theta, dtype=float)
    out = np.mod(theta + 0.5 * np.pi, np.pi) - 0.5 * np.pi
    # mod can land exactly on +pi/2 through rounding
    out = np.where(out >= 0.5 * np.pi, out - np.pi, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChannelGenConfig:
    n_t: int
    n_r: int
    xpd_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise ChannelError("n_t and n_r must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ChannelError("seed must be a 64-bit unsigned integer")

    @property
    def cross_pol_variance(self) -> float:
        if math.isinf(self.xpd_db) and self.xpd_db > 0:
            return 0.0
        return 10.0 ** (-self.xpd_db / 10.0)


@dataclass(frozen=True, eq=False)
class ChannelTensor:
    """Grid of 2x2 polarization-basis matrices, ``blocks[i, j]`` for Rx i, Tx j."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=complex)
        if b.ndim != 4 or b.shape[2:] != (2, 2) or b.shape[0] < 1 or b.shape[1] < 1:
            raise ChannelError(f"blocks must have shape (n_r, n_t, 2, 2), got {b.shape}")
        if not np.all(np.isfinite(b)):
            raise ChannelError("channel tensor contains non-finite entries")
        object.__setattr__(self, "blocks", b)

    @property
    def n_r(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_t(self) -> int:
        return self.blocks.shape[1]

    def columns(self, indices) -> "ChannelTensor":
        """Restrict to the Tx elements in ``indices`` (0-based)."""
        return ChannelTensor(self.blocks[:, list(indices)])

    def __eq__(self, other):
        if not isinstance(other, ChannelTensor):
            return NotImplemented
        return self.blocks.shape == other.blocks.shape and np.array_equal(
            self.blocks, other.blocks
        )

    # -- serialization -------------------------------------------------
    CSV_HEADER = (
        "i", "j",
        "hvv_re", "hvv_im", "hvh_re", "hvh_im",
        "hhv_re", "hhv_im", "hhh_re", "hhh_im",
    )

    def to_rows(self) -> list[list]:
        rows = []
        for i in range(self.n_r):
            for j in range(self.n_t):
                b = self.blocks[i, j]
                vals = [b[0, 0], b[0, 1], b[1, 0], b[1, 1]]
                row = [i, j]
                for v in vals:
                    row += [float(v.real), float(v.imag)]
                rows.append(row)
        return rows

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for row in self.to_rows():
            w.writerow([row[0], row[1]] + [repr(x) for x in row[2:]])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_rows(cls, rows) -> "ChannelTensor":
        rows = [list(r) for r in rows]
        if not rows:
            raise ChannelError("no rows")
        n_r = max(int(r[0]) for r in rows) + 1
        n_t = max(int(r[1]) for r in rows) + 1
        if len(rows) != n_r * n_t:
            raise ChannelError("rows do not cover a full n_r x n_t grid")
        blocks = np.zeros((n_r, n_t, 2, 2), dtype=complex)
        for r in rows:
            i, j = int(r[0]), int(r[1])
            v = [float(x) for x in r[2:10]]
            blocks[i, j] = [[v[0] + 1j * v[1], v[2] + 1j * v[3]],
                            [v[4] + 1j * v[5], v[6] + 1j * v[7]]]
        return cls(blocks)

    @classmethod
    def from_csv(cls, source) -> "ChannelTensor":
        """Parse CSV text, or a path to a CSV file."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            source = Path(source).read_text()
        reader = csv.reader(io.StringIO(source))
        header = next(reader)
        if tuple(header) != cls.CSV_HEADER:
            raise ChannelError(f"unexpected header {header}")
        return cls.from_rows(reader)

    def to_json(self) -> str:
        return json.dumps({"n_r": self.n_r, "n_t": self.n_t,
                           "columns": list(self.CSV_HEADER), "rows": self.to_rows()})

    @classmethod
    def from_json(cls, text: str) -> "ChannelTensor":
        data = json.loads(text)
        tensor = cls.from_rows(data["rows"])
        if (tensor.n_r, tensor.n_t) != (data["n_r"], data["n_t"]):
            raise ChannelError("dimension fields disagree with rows")
        return tensor


@dataclass(frozen=True)
class PolarizationConfig:
    """Per-element polarization angles in radians."""

    tx_angles: np.ndarray
    rx_angles: np.ndarray
    canonical: bool = field(default=True, repr=False)

    def __post_init__(self):
        tx = np.atleast_1d(np.asarray(self.tx_angles, dtype=float))
        rx = np.atleast_1d(np.asarray(self.rx_angles, dtype=float))
        if tx.ndim != 1 or rx.ndim != 1:
            raise ChannelError("angle arrays must be 1-D")
        if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))):
            raise ChannelError("angles must be finite")
        if self.canonical:
            tx, rx = canonical_angle(tx), canonical_angle(rx)
        object.__setattr__(self, "tx_angles", np.atleast_1d(tx))
        object.__setattr__(self, "rx_angles", np.atleast_1d(rx))

    @classmethod
    def vertical(cls, n_t: int, n_r: int) -> "PolarizationConfig":
        return cls(np.zeros(n_t), np.zeros(n_r))

    @property
    def n_t(self) -> int:
        return len(self.tx_angles)

    @property
    def n_r(self) -> int:
        return len(self.rx_angles)


def realization_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for one Monte Carlo realization.

    The Philox key is ``seed XOR index``, so any realization can be
    regenerated on its own, whatever the worker layout.
    """
    key = (int(seed) ^ int(index)) & (2**64 - 1)
    return np.random.Generator(np.random.Philox(key=key))


def _complex_normal(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return math.sqrt(variance / 2.0) * (z[..., 0] + 1j * z[..., 1])


def generate_channel(cfg: ChannelGenConfig, rng: np.random.Generator | None = None) -> ChannelTensor:
    """Draw an i.i.d. Rayleigh dual-polarized channel tensor.

    Co-polar gains (vv, hh) are CN(0, 1); cross-polar gains (vh, hv) are
    CN(0, 10^(-XPD/10)). Without an explicit ``rng`` the draw is keyed by
    ``cfg.seed`` alone.
    """
    if rng is None:
        rng = realization_rng(cfg.seed, 0)
    shape = (cfg.n_r, cfg.n_t)
    blocks = _complex_normal(rng, shape + (2, 2), 1.0)
    blocks[..., 0, 1] *= math.sqrt(cfg.cross_pol_variance)
    blocks[..., 1, 0] *= math.sqrt(cfg.cross_pol_variance)
    return ChannelTensor(blocks)


def polarization_vector(theta: float) -> np.ndarray:
    """Real unit polarization vector ``(cos theta, sin theta)``."""
    if not math.isfinite(theta):
        raise ChannelError("angle must be finite")
    return np.array([math.cos(theta), math.sin(theta)])


def polarization_vectors(theta) -> np.ndarray:
    """Vectorized :func:`polarization_vector`; output shape ``theta.shape + (2,)``."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def effective_channel_batch(blocks: np.ndarray, tx_angles, rx_angles) -> np.ndarray:
    """Effective channels for stacked tensors.

    ``blocks`` has shape ``(..., n_r, n_t, 2, 2)``, ``tx_angles`` ``(..., n_t)``
    and ``rx_angles`` ``(..., n_r)``; returns ``(..., n_r, n_t)``.
    """
    ct, st = np.cos(tx_angles), np.sin(tx_angles)
    cr, sr = np.cos(rx_angles), np.sin(rx_angles)
    # H p_tx, column by column
    v = blocks[..., 0, 0] * ct[..., None, :] + blocks[..., 0, 1] * st[..., None, :]
    h = blocks[..., 1, 0] * ct[..., None, :] + blocks[..., 1, 1] * st[..., None, :]
    return cr[..., :, None] * v + sr[..., :, None] * h


def effective_channel(tensor: ChannelTensor, config: PolarizationConfig) -> np.ndarray:
    """Effective ``n_r x n_t`` channel matrix for one polarization configuration."""
    if config.n_t != tensor.n_t or config.n_r != tensor.n_r:
        raise ChannelError(
            f"config is {config.n_r}x{config.n_t} but tensor is {tensor.n_r}x{tensor.n_t}"
        )
    return effective_channel_batch(tensor.blocks, config.tx_angles, config.rx_angles)


def effective_element_expanded(block, theta_tx: float, theta_rx: float) -> complex:
    """Scalar four-term expansion of one effective-channel element.

    Written out term by term so it can serve as an independent check on the
    matrix form used by :func:`effective_channel`.
    """
    b = np.asarray(block, dtype=complex)
    hvv, hvh, hhv, hhh = b[0, 0], b[0, 1], b[1, 0], b[1, 1]
    cj, sj = math.cos(theta_tx), math.sin(theta_tx)
    ci, si = math.cos(theta_rx), math.sin(theta_rx)
    beta1 = hvv * cj * ci
    beta2 = hhv * si * cj
    beta3 = hvh * ci * sj
    beta4 = hhh * sj * si
    return complex(beta1 + beta2 + beta3 + beta4)
