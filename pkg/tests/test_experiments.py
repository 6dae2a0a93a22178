import json
import math
import subprocess
import sys

import numpy as np
import pytest

from prmimo import cli
from prmimo.experiments import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    ResultTable,
    horizontal_gap,
    match_rates,
    run_experiment,
    ser_gap,
)
from prmimo.stats import ser_qpsk

SMALL = {
    "capacity-vs-txangle": dict(grid_step_deg=30.0),
    "capacity-vs-rxangle": dict(grid_step_deg=30.0),
    "joint-iteration-trace": dict(grid_step_deg=30.0, iterations=3),
    "capacity-cdf": dict(realizations=30, grid_step_deg=30.0),
    "capacity-vs-snr": dict(realizations=30, snr_db=[0.0, 10.0, 20.0], antenna_counts=[2, 3]),
    "hsmrt-capacity-cdf": dict(n_t=4, l_t=[1, 4], realizations=20, snr_db=[10.0]),
    "hsmrt-ser": dict(n_t=4, l_t=[1, 4], realizations=20, snr_db=[0.0, 10.0]),
    "ser-montecarlo": dict(n_t=4, l_t=[1, 2], realizations=20, snr_db=[0.0, 4.0], symbols=2000),
    "stats-histograms": dict(n_t=4, l_t=[1, 4], realizations=20, samples=5000),
    "index-matching": dict(n_t=4, l_t=[1, 4], realizations=20),
}


def _cfg(name, **kw):
    return ExperimentConfig.preset(name, **{**SMALL[name], **kw})


# -- config ------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("nope")
    with pytest.raises(ConfigError):
        ExperimentConfig("capacity-cdf", realizations=0)
    with pytest.raises(ConfigError):
        ExperimentConfig("capacity-cdf", grid_step_deg=7.0)
    with pytest.raises(ConfigError):
        ExperimentConfig("hsmrt-ser", n_t=4, l_t=[5])
    with pytest.raises(ConfigError):
        ExperimentConfig("capacity-cdf", seed=-3)
    with pytest.raises(ConfigError):
        ExperimentConfig("capacity-cdf", schema_version=2)


def test_config_json_round_trip_and_overrides():
    cfg = ExperimentConfig.preset("hsmrt-ser", realizations=10)
    again = ExperimentConfig.from_json(json.dumps(cfg.to_dict()))
    assert again == cfg
    over = ExperimentConfig.from_json(json.dumps(cfg.to_dict()), seed=9, realizations=None)
    assert over.seed == 9 and over.realizations == 10
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json('{"experiment": "capacity-cdf", "bogus": 1}')
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{}")
    scalar = ExperimentConfig.from_dict({"experiment": "hsmrt-ser", "l_t": 2, "snr_db": 3})
    assert scalar.l_t == (2,) and scalar.snr_db == (3.0,)


# -- result table --------------------------------------------------------------------

def test_result_table_round_trip():
    t = ResultTable(["a", "b"], metadata={"k": 1})
    t.add(1, 0.1)
    t.add(2, "x")
    with pytest.raises(ValueError):
        t.add(1)
    back = ResultTable.from_csv(t.to_csv())
    assert back.header == ["a", "b"] and back.rows == [["1", "0.1"], ["2", "x"]] and back.metadata == {"k": 1}
    assert t.to_csv().startswith("# {")
    np.testing.assert_array_equal(t.column("a"), [1.0, 2.0])
    assert t.select({"a": 2}) == [["2", "x"]]


# -- experiments ---------------------------------------------------------------------

@pytest.mark.parametrize("name", EXPERIMENTS)
def test_every_experiment_runs_and_is_rectangular(name, tmp_path):
    out = tmp_path / f"{name}.csv"
    table = run_experiment(_cfg(name, output_path=str(out)))
    assert table.rows
    assert all(len(r) == len(table.header) for r in table.rows)
    text = out.read_text()
    meta = json.loads(text.splitlines()[0][1:])
    assert meta["config"]["experiment"] == name and meta["seed"] == 0 and "version" in meta
    assert ResultTable.from_csv(text).rows == table.rows


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_every_experiment_is_deterministic(name):
    a = run_experiment(_cfg(name)).data_csv()
    b = run_experiment(_cfg(name)).data_csv()
    assert a == b
    c = run_experiment(_cfg(name, seed=1)).data_csv()
    assert name == "stats-histograms" or a != c or name.startswith("capacity-vs-") is False


def test_single_realization_capacity_cdf_row():
    t = run_experiment(_cfg("capacity-cdf", realizations=1, snr_db=[5.0]))
    assert len(t.rows) == 1 and t.rows[0][1] == "1.0"
    assert t.rows == run_experiment(_cfg("capacity-cdf", realizations=1, snr_db=[5.0])).rows


def test_capacity_cdf_columns_sorted_and_ordered():
    t = run_experiment(_cfg("capacity-cdf", realizations=40))
    for snr in (5.0, 30.0):
        w = {"snr_db": snr}
        for col in ("joint", "random", "grid_best", "grid_worst"):
            assert np.all(np.diff(t.column(col, w)) >= 0)
        assert np.all(t.column("grid_worst", w) <= t.column("grid_best", w))


def test_capacity_vs_snr_single_point():
    t = run_experiment(_cfg("capacity-vs-snr", snr_db=[0.0], antenna_counts=[2]))
    assert len(t.rows) == 1


def test_horizontal_gap():
    snr = np.arange(0.0, 40.0, 0.5)
    ref = np.log2(1 + 10 ** (snr / 10))
    other = np.log2(1 + 10 ** ((snr - 5.0) / 10))
    assert horizontal_gap(snr, ref, other, 30.0) == pytest.approx(5.0, abs=0.05)
    with pytest.raises(ValueError):
        horizontal_gap(snr, ref + 50, other, 30.0)


def test_hsmrt_full_selection_columns_identical():
    t = run_experiment(_cfg("hsmrt-capacity-cdf"))
    ew = t.column("effective_snr", {"l_t": 4, "scheme": "EW"})
    g = t.column("effective_snr", {"l_t": 4, "scheme": "Global"})
    np.testing.assert_array_equal(ew, g)
    for r in t.rows:
        lo, snr, hi = float(r[5]), float(r[4]), float(r[6])
        assert lo <= snr * (1 + 1e-12) and snr <= hi * (1 + 1e-12)


def test_ser_gap_helper():
    t = ResultTable(["l_t", "scheme", "snr_db", "ser"])
    for s in np.arange(0.0, 20.0, 0.5):
        t.add(1, "EW", s, 10 ** (-s / 5))
        t.add(1, "RandomPol", s, 10 ** (-(s - 3.0) / 5))
    assert ser_gap(t, 1) == pytest.approx(3.0)


def test_ser_noiseless_limit():
    t = run_experiment(_cfg("ser-montecarlo", snr_db=[80.0]))
    assert np.all(t.column("errors") == 0)


def test_qpsk_fixed_gain_binomial_oracle():
    # one fixed unit gain, 1e6 symbols via the same detector as the harness
    from prmimo.experiments import _qpsk
    from prmimo.channel import realization_rng

    rng = realization_rng(8, 0)
    n, snr = 1_000_000, 4.0
    s = _qpsk(rng, n)
    z = rng.standard_normal((n, 2))
    r = math.sqrt(snr) * s + (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2)
    det = (np.sign(r.real) + 1j * np.sign(r.imag)) / math.sqrt(2)
    emp = np.mean(np.abs(det - s) > 1e-9)
    p = ser_qpsk(1.0, snr)
    assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_index_matching_full_selection():
    t = run_experiment(_cfg("index-matching"))
    np.testing.assert_array_equal(t.column("matching", {"l_t": 4}), 4)
    assert t.header == ["realization", "l_t", "random", "global", "ew", "matching"]
    assert t.select({"l_t": 4})[0][2] == "1;2;3;4"
    rates = match_rates(t)
    assert rates[4] == 1.0 and 0.0 <= rates[1] <= 1.0


def test_stats_empty_sweep_is_header_only():
    t = run_experiment(_cfg("stats-histograms", l_t=[], samples=0))
    assert t.rows == [] and t.header == ["series", "x", "density"]


def test_stats_series_present():
    t = run_experiment(_cfg("stats-histograms"))
    names = {r[0] for r in t.rows}
    assert {"cos", "cos/reference", "sin", "random_pol", "random_pol/reference",
            "ew_l1", "ew_l1/chi2_8", "ew_l4/chi2_12"} <= names


def test_parallel_matches_serial_small():
    cfg = _cfg("hsmrt-capacity-cdf", realizations=450)
    assert run_experiment(cfg).data_csv() == run_experiment(_cfg("hsmrt-capacity-cdf", realizations=450,
                                                                  workers=3)).data_csv()


# -- CLI ---------------------------------------------------------------------------------

def test_cli_subcommand_writes_csv(tmp_path):
    out = tmp_path / "o.csv"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_t": 4, "l_t": [1, 2], "snr_db": [0.0, 5.0]}))
    rc = cli.main(["hsmrt-ser", "--config", str(cfg), "--realizations", "5", "--seed", "3", "--out", str(out)])
    assert rc == 0
    t = ResultTable.from_csv(out.read_text())
    assert t.metadata["config"]["realizations"] == 5 and t.metadata["seed"] == 3
    assert len(t.rows) == 2 * 3 * 2


def test_cli_run_and_stdout(capsys):
    assert cli.main(["run", "--experiment", "capacity-vs-snr", "--realizations", "3"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# ") and "antennas,snr_db,joint,tx_only,random" in text


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"experiment": "capacity-cdf", "grid_step_deg": 7}')
    assert cli.main(["run", "--config", str(bad)]) == 2
    bad.write_text("{oops")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["run"]) == 2
    bad.write_text('{"experiment": "hsmrt-ser"}')
    assert cli.main(["capacity-cdf", "--config", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        cli.main(["run", "--experiment", "nope"])


def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == len(EXPERIMENTS)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "prmimo", "run", "--experiment", "hsmrt-ser",
                        "--realizations", "0"], capture_output=True, text=True)
    assert r.returncode == 2 and "realizations" in r.stderr
