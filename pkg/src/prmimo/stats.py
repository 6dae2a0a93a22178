"""Link metrics and distribution tooling.

QPSK symbol error rate, single-stream capacity, the arcsine law of
``cos(Theta)`` for uniform angles, chi-square references, the ordered-SNR
joint density and empirical distribution helpers (histograms, cdfs,
Kolmogorov-Smirnov distance).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special, stats

__all__ = [
    "StatsError",
    "EmpiricalDistribution",
    "SerCurvePoint",
    "capacity_from_snr",
    "q_function",
    "ser_qpsk",
    "average_ser",
    "pdf_cos_uniform",
    "cdf_cos_uniform",
    "moments_cos_uniform",
    "chi_square_pdf",
    "chi_square_cdf",
    "ks_distance",
    "ks_test",
    "ordered_snr_joint_pdf",
    "squared_envelope_expanded",
    "snr_for_ser",
]


class StatsError(ValueError):
    pass


def capacity_from_snr(gamma, mean_snr):
    """Single-stream capacity ``log2(1 + mean_snr * gamma)``."""
    return np.log2(1.0 + np.asarray(mean_snr) * np.asarray(gamma))


def q_function(x):
    """Gaussian tail probability ``Q(x) = erfc(x / sqrt 2) / 2``."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def ser_qpsk(gamma, mean_snr):
    """Instantaneous QPSK symbol error rate at post-combining SNR ``mean_snr * gamma``."""
    q = q_function(np.sqrt(np.asarray(mean_snr) * np.asarray(gamma)))
    return 1.0 - (1.0 - q) ** 2


def average_ser(gammas, mean_snr) -> float:
    """Average of :func:`ser_qpsk` over channel realizations."""
    g = np.asarray(gammas, dtype=float)
    if g.size == 0:
        raise StatsError("need at least one realization")
    return float(np.mean(ser_qpsk(g, mean_snr)))


@dataclass(frozen=True)
class SerCurvePoint:
    mean_snr_db: float
    ser: float

    def __post_init__(self):
        if not 0.0 <= self.ser <= 1.0:
            raise StatsError("SER must lie in [0, 1]")


def snr_for_ser(snr_db, ser, target: float) -> float:
    """SNR (dB) at which a decreasing SER curve crosses ``target``.

    Linear interpolation of ``log10(SER)`` against SNR in dB.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    ser = np.asarray(ser, dtype=float)
    below = np.nonzero(ser <= target)[0]
    if below.size == 0 or below[0] == 0:
        raise StatsError("target SER is not bracketed by the sweep")
    k = below[0]
    y0, y1 = math.log10(ser[k - 1]), math.log10(max(ser[k], 1e-300))
    t = (math.log10(target) - y0) / (y1 - y0)
    return float(snr_db[k - 1] + t * (snr_db[k] - snr_db[k - 1]))


# -- angle statistics --------------------------------------------------

def pdf_cos_uniform(y):
    """Density of ``cos(Theta)`` (or ``sin(Theta)``), ``Theta ~ U(-pi, pi)``."""
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) >= 1):
        raise StatsError("density support is the open interval (-1, 1)")
    out = 1.0 / (math.pi * np.sqrt(1.0 - y * y))
    return out if out.ndim else float(out)


def cdf_cos_uniform(y):
    """Cumulative distribution ``1 - arccos(y)/pi`` of ``cos(Theta)``.

    (``arccos(y)/pi`` is the probability of exceeding ``y``.)
    """
    y = np.clip(np.asarray(y, dtype=float), -1.0, 1.0)
    return 1.0 - np.arccos(y) / math.pi


def moments_cos_uniform() -> tuple[float, float]:
    """Mean and variance of ``cos(Theta)`` for uniform ``Theta``."""
    return 0.0, 0.5


def chi_square_pdf(x, dof: int, scale: float = 1.0):
    """Chi-square density with ``dof`` degrees of freedom.

    ``scale`` is the per-dimension variance of the underlying Gaussians;
    ``scale=0.5`` describes ``|h|^2`` sums of unit-power complex gains.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise StatsError("chi-square density is supported on x >= 0")
    out = stats.chi2.pdf(x, dof, scale=scale)
    return out if out.ndim else float(out)


def chi_square_cdf(x, dof: int, scale: float = 1.0):
    return stats.chi2.cdf(np.asarray(x, dtype=float), dof, scale=scale)


def ordered_snr_joint_pdf(gammas_sorted, n_r: int) -> float:
    """Joint density of ordered per-branch SNRs.

    ``gammas_sorted`` holds ``n_t`` values; each unordered branch SNR is
    Gamma(n_r, 1) (unit-mean per Rx element). Returns 0 unless the input is
    strictly increasing.
    """
    g = np.asarray(gammas_sorted, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise StatsError("expected a non-empty 1-D array")
    if np.any(np.diff(g) <= 0) or np.any(g <= 0):
        return 0.0
    n_t = g.size
    log_terms = (n_r - 1) * np.log(g) - g - special.gammaln(n_r)
    return float(math.factorial(n_t) * math.exp(np.sum(log_terms)))


def squared_envelope_expanded(block, theta_tx: float, theta_rx: float) -> float:
    """``|p_rx^T H p_tx|^2`` written as a trigonometric series in 2*theta.

    Every term pairs one polarization-basis entry with a conjugate, which
    is what makes the squared-envelope structure of the channel gain
    visible. Used as an identity check against the direct product.
    """
    b = np.asarray(block, dtype=complex)
    a, c = b[0, 0], b[0, 1]     # vv, vh
    bb, d = b[1, 0], b[1, 1]    # hv, hh
    ct, st = math.cos(2 * theta_tx), math.sin(2 * theta_tx)
    cr, sr = math.cos(2 * theta_rx), math.sin(2 * theta_rx)
    aa, cc, b2, dd = abs(a) ** 2, abs(c) ** 2, abs(bb) ** 2, abs(d) ** 2
    re = lambda z: z.real  # noqa: E731
    total = 0.25 * (aa + cc + b2 + dd
                    + ct * (aa - cc + b2 - dd)
                    + st * 2.0 * (re(a * np.conj(c)) + re(bb * np.conj(d))))
    total += 0.25 * cr * (aa + cc - b2 - dd
                          + ct * (aa - cc - b2 + dd)
                          + st * 2.0 * (re(a * np.conj(c)) - re(bb * np.conj(d))))
    total += 0.5 * sr * (re(a * np.conj(bb)) + re(c * np.conj(d))
                         + ct * (re(a * np.conj(bb)) - re(c * np.conj(d)))
                         + st * (re(a * np.conj(d)) + re(c * np.conj(bb))))
    return float(total)


# -- empirical distributions --------------------------------------------

def freedman_diaconis_bins(samples: np.ndarray) -> int:
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = q75 - q25
    if iqr <= 0:
        return 1
    width = 2.0 * iqr / len(samples) ** (1.0 / 3.0)
    return max(1, int(math.ceil((samples.max() - samples.min()) / width)))


@dataclass
class EmpiricalDistribution:
    """Sorted samples with histogram and empirical-cdf views."""

    samples: np.ndarray
    bins: int | np.ndarray | None = None
    edges: np.ndarray = field(init=False, repr=False)
    counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if s.size == 0:
            raise StatsError("no samples")
        self.samples = s
        bins = freedman_diaconis_bins(s) if self.bins is None else self.bins
        self.counts, self.edges = np.histogram(s, bins=bins)

    @property
    def sorted(self) -> bool:
        return True

    def __len__(self):
        return self.samples.size

    def cdf(self, x):
        return np.searchsorted(self.samples, np.asarray(x, dtype=float), side="right") / self.samples.size

    def density(self) -> tuple[np.ndarray, np.ndarray]:
        """Bin centres and normalized histogram density."""
        widths = np.diff(self.edges)
        centres = 0.5 * (self.edges[1:] + self.edges[:-1])
        return centres, self.counts / (self.counts.sum() * widths)

    def mean(self) -> float:
        return float(self.samples.mean())

    def var(self) -> float:
        return float(self.samples.var())

    def to_csv(self, kind: str = "density", reference: Callable | None = None) -> str:
        """Two-column CSV (value, density) or (value, cdf); optional reference column."""
        if kind == "density":
            x, y = self.density()
        elif kind == "cdf":
            x = self.samples
            y = np.arange(1, x.size + 1) / x.size
        else:
            raise StatsError(f"unknown kind {kind!r}")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["value", kind] + (["reference"] if reference is not None else [])
        w.writerow(head)
        ref = reference(x) if reference is not None else None
        for k in range(len(x)):
            row = [repr(float(x[k])), repr(float(y[k]))]
            if ref is not None:
                row.append(repr(float(ref[k])))
            w.writerow(row)
        return buf.getvalue()


def ks_distance(emp: EmpiricalDistribution | np.ndarray, ref_cdf: Callable) -> float:
    """Sup-norm distance between the empirical cdf and ``ref_cdf``."""
    s = emp.samples if isinstance(emp, EmpiricalDistribution) else np.sort(np.asarray(emp, dtype=float))
    n = s.size
    if n < 100:
        raise StatsError(f"need at least 100 samples, got {n}")
    f = np.asarray(ref_cdf(s), dtype=float)
    k = np.arange(1, n + 1)
    return float(max(np.max(k / n - f), np.max(f - (k - 1) / n)))


def ks_test(emp: EmpiricalDistribution | np.ndarray, ref_cdf: Callable) -> tuple[float, float]:
    """KS distance and its asymptotic-exact p-value (``scipy.stats.kstwo``)."""
    d = ks_distance(emp, ref_cdf)
    n = len(emp) if isinstance(emp, EmpiricalDistribution) else np.size(emp)
    return d, float(stats.kstwo.sf(d, n))
