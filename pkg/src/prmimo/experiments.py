"""Declarative Monte Carlo experiments producing CSV-shaped result tables.

Every realization ``k`` draws its channel (then its random polarization
angles, then any symbols) from ``realization_rng(seed, k)``. Realizations
are processed in fixed-size chunks whose boundaries do not depend on the
worker count, so serial and parallel runs produce byte-identical rows.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .bruteforce import brute_force_joint, grid_angles_deg, sweep_side
from .channel import (
    ChannelGenConfig,
    ChannelTensor,
    PolarizationConfig,
    effective_channel,
    effective_channel_batch,
    generate_channel,
    realization_rng,
)
from .coding import channel_capacity, joint_coding_batch, tx_only_coding_batch
from .selection import Scheme, _subset_positions, random_angles, select_all_schemes
from .stats import (
    EmpiricalDistribution,
    capacity_from_snr,
    chi_square_pdf,
    pdf_cos_uniform,
    ser_qpsk,
    snr_for_ser,
)

__all__ = [
    "EXPERIMENTS",
    "SCHEMA_VERSION",
    "ConfigError",
    "ExperimentConfig",
    "ResultTable",
    "run_experiment",
    "horizontal_gap",
    "match_rates",
    "ser_gap",
]

SCHEMA_VERSION = 1
CHUNK = 200

EXPERIMENTS = (
    "capacity-vs-txangle",
    "capacity-vs-rxangle",
    "joint-iteration-trace",
    "capacity-cdf",
    "capacity-vs-snr",
    "hsmrt-capacity-cdf",
    "hsmrt-ser",
    "ser-montecarlo",
    "stats-histograms",
    "index-matching",
)

SCHEMES = (Scheme.EW, Scheme.GLOBAL, Scheme.RANDOM)


class ConfigError(ValueError):
    pass


def _floats(v) -> tuple[float, ...]:
    return tuple(float(x) for x in (v if isinstance(v, (list, tuple)) else [v]))


def _ints(v) -> tuple[int, ...]:
    return tuple(int(x) for x in (v if isinstance(v, (list, tuple)) else [v]))


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment description; JSON keys match the field names."""

    experiment: str
    n_t: int = 2
    n_r: int = 2
    l_t: tuple[int, ...] = (1, 2, 4, 8)
    snr_db: tuple[float, ...] = (20.0,)
    realizations: int = 1000
    grid_step_deg: float = 10.0
    iterations: int = 5
    seed: int = 0
    output_path: str | None = None
    xpd_db: float = 0.0
    antenna_counts: tuple[int, ...] = (2, 3, 4)
    symbols: int = 100_000
    samples: int = 1_000_000
    workers: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        set_ = partial(object.__setattr__, self)
        set_("l_t", _ints(self.l_t))
        set_("snr_db", _floats(self.snr_db))
        set_("antenna_counts", _ints(self.antenna_counts))
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.n_t < 1 or self.n_r < 1:
            raise ConfigError("n_t and n_r must be >= 1")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        n = 180.0 / self.grid_step_deg if self.grid_step_deg > 0 else 0.5
        if abs(n - round(n)) > 1e-9:
            raise ConfigError(f"grid_step_deg={self.grid_step_deg} must divide 180 evenly")
        if any(not 1 <= lt <= self.n_t for lt in self.l_t) and self.experiment in _SELECTION:
            raise ConfigError(f"every l_t must lie in 1..n_t={self.n_t}")
        if self.symbols < 1 or self.samples < 0 or self.workers < 1:
            raise ConfigError("symbols and workers must be >= 1, samples >= 0")

    @classmethod
    def preset(cls, experiment: str, **overrides) -> "ExperimentConfig":
        """Defaults for ``experiment`` (reference scenario sizes), then ``overrides``."""
        base = dict(_PRESETS.get(experiment, {}))
        base.update(overrides)
        return cls(experiment=experiment, **base)

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        if "experiment" not in merged:
            raise ConfigError("config must name an experiment")
        exp = merged.pop("experiment")
        return cls.preset(exp, **merged)

    @classmethod
    def from_json(cls, text: str, **overrides) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data, **overrides)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("l_t", "snr_db", "antenna_counts"):
            d[k] = list(d[k])
        return d


_SELECTION = {"hsmrt-capacity-cdf", "hsmrt-ser", "ser-montecarlo", "index-matching", "stats-histograms"}

_PRESETS = {
    "capacity-vs-txangle": dict(realizations=1, snr_db=(5.0, 30.0), grid_step_deg=1.0),
    "capacity-vs-rxangle": dict(realizations=1, snr_db=(30.0,), grid_step_deg=5.0),
    "joint-iteration-trace": dict(realizations=1, snr_db=(30.0,), grid_step_deg=5.0),
    "capacity-cdf": dict(realizations=10_000, snr_db=(5.0, 30.0), grid_step_deg=10.0),
    "capacity-vs-snr": dict(realizations=2000, snr_db=tuple(np.arange(0.0, 40.5, 0.5).tolist())),
    "hsmrt-capacity-cdf": dict(n_t=8, n_r=2, l_t=(1, 2, 4, 8), snr_db=(20.0,), realizations=1000),
    "hsmrt-ser": dict(n_t=8, n_r=2, l_t=(1, 2, 4, 8), realizations=1000,
                      snr_db=tuple(np.arange(-10.0, 30.5, 0.5).tolist())),
    "ser-montecarlo": dict(n_t=8, n_r=2, l_t=(1, 2, 5, 8), realizations=1000,
                           snr_db=tuple(np.arange(-10.0, 12.0, 2.0).tolist()), symbols=100_000),
    "stats-histograms": dict(n_t=8, n_r=2, l_t=tuple(range(1, 9)), realizations=1000),
    "index-matching": dict(n_t=8, n_r=2, l_t=(1, 4, 6), realizations=1000),
}


# -- result table -------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ResultTable:
    header: list[str]
    rows: list[list[str]] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, *values) -> None:
        if len(values) != len(self.header):
            raise ValueError(f"row has {len(values)} values, header has {len(self.header)}")
        self.rows.append([_fmt(v) for v in values])

    def column(self, name: str, where: dict | None = None) -> np.ndarray:
        """Float values of one column, optionally filtered on other columns."""
        k = self.header.index(name)
        sel = self._filter(where)
        return np.array([float(r[k]) for r in sel])

    def select(self, where: dict | None = None) -> list[list[str]]:
        return self._filter(where)

    def _filter(self, where):
        if not where:
            return self.rows
        idx = {self.header.index(c): _fmt(v) for c, v in where.items()}
        return [r for r in self.rows if all(r[i] == v for i, v in idx.items())]

    def data_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()

    def to_csv(self) -> str:
        return "# " + json.dumps(self.metadata, sort_keys=True) + "\n" + self.data_csv()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        lines = text.splitlines()
        meta = {}
        if lines and lines[0].startswith("#"):
            meta = json.loads(lines[0][1:])
            lines = lines[1:]
        reader = csv.reader(lines)
        header = next(reader)
        return cls(header, [list(r) for r in reader], meta)


# -- realization plumbing ----------------------------------------------

def _draw(n_t: int, n_r: int, xpd_db: float, seed: int, start: int, stop: int):
    """Channels and continuing generators for realizations ``start..stop-1``."""
    gen = ChannelGenConfig(n_t, n_r, xpd_db, seed)
    rngs = [realization_rng(seed, k) for k in range(start, stop)]
    blocks = np.stack([generate_channel(gen, r).blocks for r in rngs])
    tx, rx = zip(*(random_angles(r, n_t, n_r) for r in rngs))
    return blocks, np.array(tx), np.array(rx), rngs


def _chunked(fn, cfg: ExperimentConfig, total: int | None = None) -> list:
    """Apply ``fn(cfg_dict, start, stop)`` over fixed chunks; results in chunk order."""
    total = cfg.realizations if total is None else total
    bounds = [(a, min(a + CHUNK, total)) for a in range(0, total, CHUNK)]
    d = cfg.to_dict()
    if cfg.workers == 1 or len(bounds) == 1:
        return [fn(d, a, b) for a, b in bounds]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        futs = [pool.submit(fn, d, a, b) for a, b in bounds]
        return [f.result() for f in futs]


def _deg(a) -> list[float]:
    return [float(x) for x in np.rad2deg(np.asarray(a))]


# -- single-tensor angle experiments -------------------------------------

def run_capacity_vs_angle(cfg: ExperimentConfig) -> ResultTable:
    """Capacity over one side's angle grid, the other side held fixed.

    ``capacity-vs-txangle`` keeps the Rx vertical and compares the grid with
    the closed-form Tx precoding. ``capacity-vs-rxangle`` fixes the Tx at
    the grid-best joint angles and compares with joint coding.
    """
    side = "tx" if cfg.experiment == "capacity-vs-txangle" else "rx"
    n_side = cfg.n_t if side == "tx" else cfg.n_r
    table = ResultTable(["realization", "snr_db", "kind"] + [f"angle_{k + 1}_deg" for k in range(n_side)]
                        + ["capacity"])
    blocks, _, _, _ = _draw(cfg.n_t, cfg.n_r, cfg.xpd_db, cfg.seed, 0, cfg.realizations)
    for k, b in enumerate(blocks):
        tensor = ChannelTensor(b)
        for snr in cfg.snr_db:
            if side == "tx":
                fixed = np.zeros(cfg.n_r)
                tx, rx = tx_only_coding_batch(b)
                closed = PolarizationConfig(tx, rx)
                closed_angles = closed.tx_angles
                kind = "precoding"
            else:
                best = brute_force_joint(tensor, cfg.grid_step_deg, snr).best_config
                fixed = best.tx_angles
                tx, rx, _, _ = joint_coding_batch(b, cfg.iterations)
                closed = PolarizationConfig(tx, rx)
                closed_angles = closed.rx_angles
                kind = "joint"
            grid, caps = sweep_side(tensor, fixed, side, cfg.grid_step_deg, snr)
            for g, c in zip(grid, caps):
                table.add(k, snr, "grid", *g, c)
            i = int(np.argmax(caps))
            table.add(k, snr, "grid_best", *grid[i], caps[i])
            # closed-form point evaluated with the other side at its sweep value
            if side == "tx":
                h = effective_channel(tensor, PolarizationConfig(closed_angles, fixed))
            else:
                h = effective_channel(tensor, PolarizationConfig(fixed, closed_angles))
            table.add(k, snr, kind, *_deg(closed_angles), float(channel_capacity(h, snr)))
    return table


def run_joint_iteration_trace(cfg: ExperimentConfig) -> ResultTable:
    """Angles, objective and capacity after every half-step of joint coding."""
    head = ["realization", "snr_db", "iteration", "step", "objective", "capacity"]
    head += [f"tx_{j + 1}_deg" for j in range(cfg.n_t)] + [f"rx_{i + 1}_deg" for i in range(cfg.n_r)]
    table = ResultTable(head)
    blocks, _, _, _ = _draw(cfg.n_t, cfg.n_r, cfg.xpd_db, cfg.seed, 0, cfg.realizations)
    for k, b in enumerate(blocks):
        tensor = ChannelTensor(b)
        _, _, _, _, trace = joint_coding_batch(b, cfg.iterations, record=True)
        for snr in cfg.snr_db:
            for q, (obj, tx, rx) in enumerate(trace):
                cfg_q = PolarizationConfig(tx, rx)
                cap = float(channel_capacity(effective_channel(tensor, cfg_q), snr))
                table.add(k, snr, q // 2 + 1, "tx" if q % 2 == 0 else "rx", float(obj), cap,
                          *_deg(cfg_q.tx_angles), *_deg(cfg_q.rx_angles))
            best = brute_force_joint(tensor, cfg.grid_step_deg, snr)
            h = effective_channel(tensor, best.best_config)
            table.add(k, snr, 0, "grid_best", float(np.sum(np.abs(h) ** 2)), best.best_capacity,
                      *_deg(best.best_config.tx_angles), *_deg(best.best_config.rx_angles))
    return table


# -- capacity statistics -------------------------------------------------

def _capacity_chunk(d: dict, start: int, stop: int):
    blocks, rtx, rrx, _ = _draw(d["n_t"], d["n_r"], d["xpd_db"], d["seed"], start, stop)
    tx, rx, _, _ = joint_coding_batch(blocks, d["iterations"])
    h_joint = effective_channel_batch(blocks, tx, rx)
    h_rand = effective_channel_batch(blocks, rtx, rrx)
    out = {}
    for snr in d["snr_db"]:
        best, worst = [], []
        for b in blocks:
            r = brute_force_joint(ChannelTensor(b), d["grid_step_deg"], snr)
            best.append(r.best_capacity)
            worst.append(r.worst_capacity)
        out[snr] = np.stack([channel_capacity(h_joint, snr), channel_capacity(h_rand, snr),
                             np.array(best), np.array(worst)], axis=-1)
    return out


def run_capacity_cdf(cfg: ExperimentConfig) -> ResultTable:
    """Sorted capacities (empirical cdf) for joint, random, grid-best and grid-worst."""
    table = ResultTable(["snr_db", "probability", "joint", "random", "grid_best", "grid_worst"])
    parts = _chunked(_capacity_chunk, cfg)
    n = cfg.realizations
    prob = np.arange(1, n + 1) / n
    for snr in cfg.snr_db:
        caps = np.sort(np.concatenate([p[snr] for p in parts]), axis=0)
        for k in range(n):
            table.add(snr, prob[k], *caps[k])
    return table


def _vs_snr_chunk(d: dict, start: int, stop: int, n: int):
    blocks, rtx, rrx, _ = _draw(n, n, d["xpd_db"], d["seed"], start, stop)
    tx, rx, _, _ = joint_coding_batch(blocks, d["iterations"])
    ttx, trx = tx_only_coding_batch(blocks)
    mats = [effective_channel_batch(blocks, tx, rx), effective_channel_batch(blocks, ttx, trx),
            effective_channel_batch(blocks, rtx, rrx)]
    snr = np.asarray(d["snr_db"])
    # capacity sums over realizations, shape (scenario, snr)
    return np.array([[channel_capacity(m, s).sum() for s in snr] for m in mats])


def run_capacity_vs_snr(cfg: ExperimentConfig) -> ResultTable:
    """Mean capacity against SNR for joint, Tx-only and random polarization."""
    table = ResultTable(["antennas", "snr_db", "joint", "tx_only", "random"])
    for n in cfg.antenna_counts:
        parts = _chunked(partial(_vs_snr_chunk, n=n), cfg)
        mean = np.sum(parts, axis=0) / cfg.realizations
        for k, snr in enumerate(cfg.snr_db):
            table.add(n, snr, *mean[:, k])
    return table


def horizontal_gap(snr_db, reference, other, level_snr_db: float) -> float:
    """SNR (dB) that ``other`` needs beyond ``reference`` to reach the same mean capacity.

    The capacity level is ``reference`` evaluated at ``level_snr_db``; both
    curves must increase with SNR.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    level = float(np.interp(level_snr_db, snr_db, reference))
    other = np.asarray(other, dtype=float)
    if not other[0] <= level <= other[-1]:
        raise ValueError("capacity level outside the sweep of the compared curve")
    return float(np.interp(level, other, snr_db) - level_snr_db)


# -- hybrid selection -----------------------------------------------------

def _selection_chunk(d: dict, start: int, stop: int):
    blocks, rtx, rrx, _ = _draw(d["n_t"], d["n_r"], d["xpd_db"], d["seed"], start, stop)
    return select_all_schemes(blocks, d["l_t"], rtx, rrx, d["iterations"])


def _selection_results(cfg: ExperimentConfig):
    """Per ``l_t`` and scheme: (snr, subset index, upper bound, matrix) over all realizations."""
    parts = _chunked(_selection_chunk, cfg)
    return {lt: {s: tuple(np.concatenate([p[lt][s][i] for p in parts]) for i in range(4))
                 for s in SCHEMES}
            for lt in cfg.l_t}


def _subset_label(n_t: int, l_t: int, k: int) -> str:
    return ";".join(str(i + 1) for i in _subset_positions(n_t, l_t)[k])


def run_hsmrt(cfg: ExperimentConfig) -> ResultTable:
    """Effective SNR, bounds, capacity and analytic SER for EW, Global and RandomPol."""
    res = _selection_results(cfg)
    if cfg.experiment == "hsmrt-capacity-cdf":
        table = ResultTable(["realization", "l_t", "scheme", "indices", "effective_snr",
                             "lower_bound", "upper_bound", "snr_db", "capacity"])
        for lt in cfg.l_t:
            m = min(lt, cfg.n_r)
            for s in SCHEMES:
                snr, idx, upper, _ = res[lt][s]
                for k in range(cfg.realizations):
                    label = _subset_label(cfg.n_t, lt, idx[k])
                    for g in cfg.snr_db:
                        cap = capacity_from_snr(snr[k], 10.0 ** (g / 10.0))
                        table.add(k, lt, s.value, label, snr[k], upper[k] / m, upper[k], g, cap)
        return table
    table = ResultTable(["l_t", "scheme", "snr_db", "ser"])
    for lt in cfg.l_t:
        for s in SCHEMES:
            gam = res[lt][s][0]
            for g in cfg.snr_db:
                table.add(lt, s.value, g, float(np.mean(ser_qpsk(gam, 10.0 ** (g / 10.0)))))
    return table


def ser_gap(table: ResultTable, l_t: int, target: float = 1e-3,
            better: Scheme = Scheme.EW, worse: Scheme = Scheme.RANDOM) -> float:
    """SNR advantage (dB) of ``better`` over ``worse`` at SER ``target``."""
    def at(s):
        w = {"l_t": l_t, "scheme": s.value}
        return snr_for_ser(table.column("snr_db", w), table.column("ser", w), target)
    return at(worse) - at(better)


def _qpsk(rng: np.random.Generator, n: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=(n, 2))
    return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / math.sqrt(2.0)


def _ser_chunk(d: dict, start: int, stop: int):
    n_t, n_r = d["n_t"], d["n_r"]
    blocks, rtx, rrx, rngs = _draw(n_t, n_r, d["xpd_db"], d["seed"], start, stop)
    res = select_all_schemes(blocks, d["l_t"], rtx, rrx, d["iterations"])
    per = -(-d["symbols"] // d["realizations"])
    snrs = np.asarray(d["snr_db"])
    amp = np.sqrt(10.0 ** (snrs / 10.0))
    errors = {lt: np.zeros(len(snrs), dtype=np.int64) for lt in d["l_t"]}
    analytic = {lt: np.zeros(len(snrs)) for lt in d["l_t"]}
    for k, rng in enumerate(rngs):
        for lt in d["l_t"]:
            mat = res[lt][Scheme.EW][3][k]                       # (n_r, l_t)
            left, s, right_h = np.linalg.svd(mat)
            u, w = right_h[0].conj(), left[:, 0]
            sym = _qpsk(rng, per)
            z = rng.standard_normal((len(snrs), per, n_r, 2))
            noise = (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2.0)
            # y = sqrt(G) H u s + n, combined with w^H
            y = amp[:, None, None] * (mat @ u)[None, None, :] * sym[None, :, None] + noise
            r = y @ w.conj()
            det = (np.sign(r.real) + 1j * np.sign(r.imag)) / math.sqrt(2.0)
            errors[lt] += np.sum(np.abs(det - sym[None, :]) > 1e-9, axis=1)
            analytic[lt] += ser_qpsk(s[0] ** 2, amp**2)
    return errors, analytic, per * len(rngs)


def run_ser_montecarlo(cfg: ExperimentConfig) -> ResultTable:
    """QPSK over the dominant eigenmode of the EW-selected channel versus analytic SER."""
    parts = _chunked(_ser_chunk, cfg)
    table = ResultTable(["l_t", "snr_db", "symbols", "errors", "empirical_ser", "analytic_ser", "std_error"])
    total = sum(p[2] for p in parts)
    for lt in cfg.l_t:
        err = np.sum([p[0][lt] for p in parts], axis=0)
        # realizations carry equal symbol counts, so the analytic mean is unweighted
        ana = np.sum([p[1][lt] for p in parts], axis=0) / cfg.realizations
        for k, g in enumerate(cfg.snr_db):
            se = math.sqrt(ana[k] * (1.0 - ana[k]) / total)
            table.add(lt, g, total, int(err[k]), err[k] / total, ana[k], se)
    return table


def run_index_matching(cfg: ExperimentConfig) -> ResultTable:
    """Selected Tx indices per scheme and the Global/EW overlap."""
    res = _selection_results(cfg)
    table = ResultTable(["realization", "l_t", "random", "global", "ew", "matching"])
    for lt in cfg.l_t:
        pos = _subset_positions(cfg.n_t, lt)
        for k in range(cfg.realizations):
            labels = [_subset_label(cfg.n_t, lt, res[lt][s][1][k]) for s in SCHEMES]
            g = set(pos[res[lt][Scheme.GLOBAL][1][k]])
            e = set(pos[res[lt][Scheme.EW][1][k]])
            table.add(k, lt, labels[2], labels[1], labels[0], len(g & e))
    return table


def match_rates(table: ResultTable) -> dict[int, float]:
    """Mean fraction of Global-selected indices that EW also selects, per ``l_t``."""
    out = {}
    for lt in sorted({int(r[1]) for r in table.rows}):
        out[lt] = float(np.mean(table.column("matching", {"l_t": lt}) / lt))
    return out


# -- distributions ---------------------------------------------------------

CHI2_DOFS = (4, 5, 8, 12)


def _stats_chunk(d: dict, start: int, stop: int):
    blocks, rtx, rrx, _ = _draw(d["n_t"], d["n_r"], d["xpd_db"], d["seed"], start, stop)
    rand = np.abs(effective_channel_batch(blocks, rtx, rrx)) ** 2
    sel = {}
    if d["l_t"]:
        res = select_all_schemes(blocks, d["l_t"], rtx, rrx, d["iterations"])
        sel = {lt: np.abs(res[lt][Scheme.EW][3]) ** 2 for lt in d["l_t"]}
    return rand.ravel(), {lt: v.ravel() for lt, v in sel.items()}


def run_stats_histograms(cfg: ExperimentConfig) -> ResultTable:
    """Histograms of angle projections and effective-gain envelopes with references.

    Series ``cos``/``sin``: ``samples`` uniform angles on ``[-pi, pi)`` with the
    arcsine density. ``random_pol``: ``|h_eff|^2`` under random polarization
    with the 2-dof chi-square reference. ``ew_l{L}``: entries of the EW-selected
    partial channel, with chi-square references of several dofs. All
    chi-square curves use per-dimension variance 1/2 (unit-mean gains).
    """
    table = ResultTable(["series", "x", "density"])
    table.metadata["chi2_dofs"] = list(CHI2_DOFS)

    def emit(name, emp, ref=None, refs=()):
        x, y = emp.density()
        for a, b in zip(x, y):
            table.add(name, a, b)
        if ref is not None:
            for a, b in zip(x, ref(x)):
                table.add(name + "/reference", a, b)
        for dof in refs:
            for a, b in zip(x, chi_square_pdf(x, dof, 0.5)):
                table.add(f"{name}/chi2_{dof}", a, b)

    if cfg.samples > 0:
        rng = realization_rng(cfg.seed, 2**63)
        theta = rng.uniform(-math.pi, math.pi, cfg.samples)
        # closed edges keep the arcsine reference finite at every bin centre
        edges = np.linspace(-1.0, 1.0, 101)
        emit("cos", EmpiricalDistribution(np.cos(theta), edges), pdf_cos_uniform)
        emit("sin", EmpiricalDistribution(np.sin(theta), edges), pdf_cos_uniform)
    if cfg.samples > 0 or cfg.l_t:
        parts = _chunked(_stats_chunk, cfg)
        if cfg.samples > 0:
            rand = np.concatenate([p[0] for p in parts])
            emit("random_pol", EmpiricalDistribution(rand), lambda x: chi_square_pdf(x, 2, 0.5))
        for lt in cfg.l_t:
            vals = np.concatenate([p[1][lt] for p in parts])
            emit(f"ew_l{lt}", EmpiricalDistribution(vals), refs=CHI2_DOFS)
    return table


def stats_samples(cfg: ExperimentConfig):
    """Raw samples behind :func:`run_stats_histograms` (for moment and KS checks)."""
    parts = _chunked(_stats_chunk, cfg)
    rand = np.concatenate([p[0] for p in parts])
    sel = {lt: np.concatenate([p[1][lt] for p in parts]) for lt in cfg.l_t}
    return rand, sel


# -- dispatch ---------------------------------------------------------------

RUNNERS = {
    "capacity-vs-txangle": run_capacity_vs_angle,
    "capacity-vs-rxangle": run_capacity_vs_angle,
    "joint-iteration-trace": run_joint_iteration_trace,
    "capacity-cdf": run_capacity_cdf,
    "capacity-vs-snr": run_capacity_vs_snr,
    "hsmrt-capacity-cdf": run_hsmrt,
    "hsmrt-ser": run_hsmrt,
    "ser-montecarlo": run_ser_montecarlo,
    "stats-histograms": run_stats_histograms,
    "index-matching": run_index_matching,
}


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Run ``cfg.experiment``; writes the CSV when ``output_path`` is set."""
    table = RUNNERS[cfg.experiment](cfg)
    meta = dict(table.metadata)
    meta.update(config=cfg.to_dict(), version=__version__, seed=cfg.seed,
                timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
    table.metadata = meta
    if cfg.output_path:
        table.write(cfg.output_path)
    return table
