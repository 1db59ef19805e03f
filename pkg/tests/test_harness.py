import csv
import dataclasses as dc
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from irsmec import DiffusionConfig, SolverConfig, SystemConfig
from irsmec.cli import main
from irsmec.errors import ConfigError
from irsmec.harness import (METRICS_HEADER, ExperimentConfig, cumulative_table, dump_config,
                            emit_plot_data, load_config, near_optimal, oracle_check, parse_config,
                            parse_seeds, read_metrics, run_experiment)

from conftest import small_system

ROOT = Path(__file__).resolve().parents[1]

QUICK = """
[scenario]
num_vehicles = 3
num_elements = 4
num_slots = {slots}

[gdm]
batch = 4
hidden = 16, 16

[solver]
iterations = 5
patience = 2
drl_episodes = 5

[run]
solvers = {solvers}
seeds = {seeds}
"""


def quick(slots=4, solvers="ropsra", seeds="1"):
    return parse_config(QUICK.format(slots=slots, solvers=solvers, seeds=seeds))


def test_default_config_file_parses():
    cfg = load_config(ROOT / "configs" / "default.ini")
    assert cfg.seeds == tuple(range(20))
    assert cfg.system.channel.noise_power == pytest.approx(10 ** (-114 / 10) * 1e-3, rel=1e-12)
    assert cfg.system.channel.direct_loss == pytest.approx(1e-4, rel=1e-12)
    assert cfg.system == SystemConfig() and cfg.gdm == DiffusionConfig() and cfg.solver == SolverConfig()


def test_db_keys_convert():
    cfg = parse_config("[channel]\nnoise_power_dbm = -100\nrician_factor_db = 10\n"
                       "[scenario]\ntx_power_dbm = 30\n")
    assert cfg.system.channel.noise_power == pytest.approx(1e-13, rel=1e-12)
    assert cfg.system.channel.rician_factor == pytest.approx(10.0, rel=1e-12)
    assert cfg.system.scenario.tx_power == pytest.approx(1.0, rel=1e-12)


def test_dump_round_trip():
    cfg = parse_config("[channel]\nnoise_power_dbm = -97.5\n[gdm]\nhidden = 32, 8\n"
                       "[solver]\nphase_grid = 6\n[run]\nsolvers = gdmsg, ergops\nseeds = 3-5\n")
    text = dump_config(cfg)
    assert "# noise_power_dbm = -97.5" in text
    assert parse_config(text) == cfg


@pytest.mark.parametrize("text, field", [
    ("[scenario]\nnum_vehicles = 0\n", "num_vehicles"),
    ("[scenario]\nnum_vehicles = six\n", "scenario.num_vehicles"),
    ("[channel]\nwarp = 1\n", "channel.warp"),
    ("[bogus]\nx = 1\n", "bogus"),
    ("[game]\nw_bs = 1.5\n", "w_bs"),
    ("[channel]\nnoise_power = 1e-12\nnoise_power_dbm = -90\n", "channel.noise_power"),
    ("[run]\nseeds = a-b\n", "seeds"),
    ("[run]\nsolvers = gdmsg, magic\n", "solvers"),
    ("[run]\ncolour = red\n", "run.colour"),
])
def test_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert field in str(exc.value)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/x.ini")


@pytest.mark.parametrize("text, seeds", [("0-4", (0, 1, 2, 3, 4)), ("1,2,7", (1, 2, 7)),
                                         ("0-2, 9", (0, 1, 2, 9)), ("5", (5,))])
def test_parse_seeds(text, seeds):
    assert parse_seeds(text) == seeds


@given(st.lists(st.integers(0, 500), min_size=1, max_size=8))
def test_parse_seeds_round_trip(seeds):
    assert parse_seeds(",".join(map(str, seeds))) == tuple(seeds)


def test_near_optimal_handles_signs():
    assert near_optimal(95.0, 100.0) and not near_optimal(85.0, 100.0)
    assert near_optimal(-105.0, -100.0) and not near_optimal(-115.0, -100.0)
    assert near_optimal(0.0, 0.0)


def test_metrics_rows_and_rerun_bytes(tmp_path):
    cfg = quick(slots=10)
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b")
    rows = read_metrics(a)
    assert len(rows) == 10
    assert [r[0] for r in rows] == list(range(10))
    assert all(r[1] == "ropsra" and r[2] == 1 for r in rows)
    for name in ("metrics.csv", "trace.csv", "resolved.ini"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert parse_config((a / "resolved.ini").read_text()) == cfg


def test_trace_rows_match_iterations(tmp_path):
    cfg = quick(slots=3, solvers="gdmsg, ropsra, dopsra", seeds="0")
    out = run_experiment(cfg, tmp_path)
    with open(out / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    solvers = {r["solver"] for r in rows}
    assert solvers == {"gdmsg", "dopsra"}
    assert sum(r["solver"] == "dopsra" for r in rows) == 5
    assert all(float(r["reward"]) >= 0 for r in rows)


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ConfigError, match="out_dir"):
        run_experiment(quick(), blocker / "sub")


def test_plot_data(tmp_path):
    cfg = quick(slots=3, solvers="ropsra, ergops, rpsgora, gdmsg, dopsra", seeds="0-2")
    run = run_experiment(cfg, tmp_path / "run")
    paths = emit_plot_data(run, tmp_path / "plots")
    assert sorted(p.name for p in paths) == [f"panel_{m}.tsv" for m in ("delay", "energy", "qoe", "revenue")]
    rows = read_metrics(run)
    for metric in ("delay", "energy", "qoe", "revenue"):
        with open(tmp_path / "plots" / f"panel_{metric}.tsv") as fh:
            table = [line.rstrip("\n").split("\t") for line in fh]
        assert len(table[0]) == 11 and len(table) == 4
        col = METRICS_HEADER.index(metric)
        for solver in ("ropsra", "gdmsg"):
            i = table[0].index(f"{solver}_mean")
            for n in range(3):
                vals = [sum(r[col] for r in rows if r[1] == solver and r[2] == s and r[0] <= n)
                        for s in range(3)]
                assert float(table[n + 1][i]) == pytest.approx(np.mean(vals), rel=1e-12, abs=1e-12)
                se = float(table[n + 1][table[0].index(f"{solver}_se")])
                assert se == pytest.approx(np.std(vals, ddof=1) / math.sqrt(3), rel=1e-9, abs=1e-12)


def test_single_seed_has_zero_se(tmp_path):
    run = run_experiment(quick(slots=2), tmp_path)
    emit_plot_data(run)
    with open(tmp_path / "panel_delay.tsv") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    assert all(float(r["ropsra_se"]) == 0.0 for r in rows)


def test_cumulative_table():
    rows = [(0, "a", 0, 1.0, 0, 0, 0), (1, "a", 0, 2.0, 0, 0, 0), (0, "a", 1, 3.0, 0, 0, 0),
            (1, "a", 1, 4.0, 0, 0, 0)]
    np.testing.assert_array_equal(cumulative_table(rows, "delay")["a"], [[1, 3], [3, 7]])


def test_oracle_check_rows():
    cfg = dc.replace(quick(), gdm=DiffusionConfig(batch=8), solver=SolverConfig(iterations=10, patience=3,
                     oracle_phase_grid=4, oracle_resource_grid=4))
    rows = oracle_check(cfg, seeds=[0, 1])
    assert [r[0] for r in rows] == [0, 1]
    for _, u_o, u_g, ok in rows:
        assert u_g <= u_o + 1e-9 * abs(u_o)
        assert ok == near_optimal(u_g, u_o)


# -- CLI ---------------------------------------------------------------------------

def _write(tmp_path, text):
    p = tmp_path / "cfg.ini"
    p.write_text(text)
    return str(p)


def test_cli_run_and_plot(tmp_path, capsys):
    cfg = _write(tmp_path, QUICK.format(slots=2, solvers="ropsra", seeds="0"))
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r"), "--seeds", "0-1"]) == 0
    assert len(read_metrics(tmp_path / "r")) == 4
    assert main(["plot-data", "--in", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "panel_qoe.tsv").exists()


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "[scenario]\nnum_slots = -1\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    assert "num_slots" in capsys.readouterr().err
    assert main(["run", "--config", _write(tmp_path, QUICK.format(slots=2, solvers="x", seeds="0")),
                 "--out", str(tmp_path)]) == 2


def test_cli_runtime_error_exit_code(tmp_path, capsys):
    assert main(["plot-data", "--in", str(tmp_path / "missing")]) == 3
    assert "runtime error" in capsys.readouterr().err


def test_cli_oracle_check(tmp_path, capsys):
    text = QUICK.format(slots=1, solvers="gdmsg", seeds="0")
    text = text.replace("drl_episodes = 5\n", "drl_episodes = 5\noracle_phase_grid = 4\noracle_resource_grid = 4\n")
    assert main(["oracle-check", "--config", _write(tmp_path, text)]) == 0
    assert "near-optimal in" in capsys.readouterr().out
