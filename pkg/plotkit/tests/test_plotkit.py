import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from plotkit import (
    SchemaError,
    geo_mean_positive,
    plot_bars,
    plot_cdf,
    plot_timeseries,
    read_slots,
    read_users,
)
from plotkit.cli import main as cli_main

TINY_CONFIG = """
L = 4
ru_grid = 2x2
M = 8
K_tot_f1 = 12
K_act = 4
K_tilde = 6
tau_p = 4
T = 40
area_side = 120.0
N_init = 25
N_window = 16
n_slots = 40
V = 50
A_max = 10
scheduler_kind = pf
pilot_mode = reassign
seed = 5
"""


@pytest.fixture(scope="session")
def sim_outputs(tmp_path_factory):
    """Real report files produced through the simulator's CLI (the only
    interface plotkit depends on)."""
    root = tmp_path_factory.mktemp("simruns")
    cfg = root / "tiny.cfg"
    cfg.write_text(TINY_CONFIG)
    outs = []
    for seed in (5, 6):
        out = root / f"run{seed}"
        subprocess.run(
            [sys.executable, "-m", "cfsim.cli", "simulate", "--config", str(cfg),
             "--seed", str(seed), "--out", str(out)],
            check=True, capture_output=True,
        )
        outs.append(out)
    return outs


def write_users_csv(path: Path, rows):
    lines = ["ue_id,x,y,mu_bar_bpcu,mu_tilde_bps,activity_frac"]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestReaders:
    def test_read_users_roundtrip(self, tmp_path):
        p = write_users_csv(tmp_path / "u.csv", [(0, 1.0, 2.0, 0.5, 360.0, 0.25),
                                                 (1, 3.0, 4.0, 0.0, 0.0, 0.0)])
        table = read_users(p)
        assert table["mu_tilde_bps"].tolist() == [360.0, 0.0]
        assert table["activity_frac"].tolist() == [0.25, 0.0]

    def test_missing_column_is_named(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("ue_id,x,y,mu_bar_bpcu,activity_frac\n0,1,2,3,4\n")
        with pytest.raises(SchemaError, match="mu_tilde_bps"):
            read_users(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(SchemaError):
            read_users(p)


class TestFigures:
    def test_cdf_two_runs(self, sim_outputs, tmp_path):
        out = plot_cdf([o / "users.csv" for o in sim_outputs],
                       labels=["seed 5", "seed 6"], out=tmp_path / "cdf.png")
        assert out.exists() and out.stat().st_size > 0

    def test_cdf_constant_throughput(self, tmp_path):
        p = write_users_csv(tmp_path / "c.csv",
                            [(k, 0.0, 0.0, 0.5, 360000.0, 0.5) for k in range(8)])
        out = plot_cdf([p], labels=["flat"], out=tmp_path / "flat.png")
        assert out.exists() and out.stat().st_size > 0

    def test_cdf_with_zero_jump(self, tmp_path):
        rows = [(k, 0.0, 0.0, 0.0, 0.0, 0.0) for k in range(4)]
        rows += [(4 + k, 0.0, 0.0, 1.0, 7.2e5, 1.0) for k in range(4)]
        p = write_users_csv(tmp_path / "z.csv", rows)
        thr = read_users(p)["mu_tilde_bps"]
        assert np.mean(thr == 0) == 0.5
        out = plot_cdf([p], labels=["maxsum"], out=tmp_path / "zero.png")
        assert out.exists() and out.stat().st_size > 0

    def test_bars_three_inputs(self, sim_outputs, tmp_path):
        inputs = [sim_outputs[0] / "users.csv"] * 3
        out = plot_bars(inputs, metric="geo_mean", labels=["F=1", "F=5", "F=10"],
                        out=tmp_path / "bars.png")
        assert out.exists() and out.stat().st_size > 0

    def test_bars_min_metric(self, sim_outputs, tmp_path):
        out = plot_bars([sim_outputs[0] / "users.csv"], metric="min_thr",
                        labels=["run"], out=tmp_path / "min.png")
        assert out.exists()

    def test_bars_empty_rows_rejected(self, tmp_path):
        p = write_users_csv(tmp_path / "e.csv", [])
        with pytest.raises(ValueError):
            plot_bars([p], metric="geo_mean", labels=["x"], out=tmp_path / "e.png")

    def test_bars_unknown_metric_rejected(self, tmp_path):
        p = write_users_csv(tmp_path / "m.csv", [(0, 0, 0, 1, 1, 1)])
        with pytest.raises(ValueError):
            plot_bars([p], metric="median", labels=["x"], out=tmp_path / "m.png")

    def test_timeseries(self, sim_outputs, tmp_path):
        out = plot_timeseries([o / "slots.csv" for o in sim_outputs],
                              labels=["a", "b"], out=tmp_path / "ts.png")
        assert out.exists() and out.stat().st_size > 0

    def test_label_count_mismatch(self, sim_outputs, tmp_path):
        with pytest.raises(ValueError):
            plot_cdf([sim_outputs[0] / "users.csv"], labels=["a", "b"],
                     out=tmp_path / "x.png")


class TestAggregateAgreement:
    def test_recomputed_aggregates_match_harness(self, sim_outputs):
        for out in sim_outputs:
            users = read_users(out / "users.csv")
            slots = read_slots(out / "slots.csv")
            meta = json.loads((out / "meta.json").read_text())
            thr = users["mu_tilde_bps"]
            geo = geo_mean_positive(thr)
            # final running aggregates in slots.csv equal the report values
            assert geo == pytest.approx(slots["geo_mean"][-1], rel=1e-9)
            assert float(thr.min()) == pytest.approx(slots["min_thr"][-1], rel=1e-9, abs=1e-12)
            assert geo == pytest.approx(meta["geo_mean_bps"], rel=1e-9)
            assert float(thr.min()) == pytest.approx(meta["min_thr_bps"], rel=1e-9, abs=1e-12)
            assert float(thr.sum()) == pytest.approx(meta["sum_thr_bps"], rel=1e-9)
            assert int((thr <= 0).sum()) == meta["n_zero_throughput"]

    def test_geo_mean_positive_definition(self):
        vals = np.array([0.0, 1.0, math.e ** 2])
        assert geo_mean_positive(vals) == pytest.approx(math.e)
        assert geo_mean_positive(np.zeros(3)) == 0.0


class TestCli:
    def test_cdf_subcommand(self, sim_outputs, tmp_path, capsys):
        out = tmp_path / "cli_cdf.png"
        rc = cli_main(["cdf", "--in", str(sim_outputs[0] / "users.csv"),
                       "--labels", "run", "--out", str(out)])
        assert rc == 0
        assert out.exists()

    def test_bars_subcommand(self, sim_outputs, tmp_path):
        out = tmp_path / "cli_bars.png"
        rc = cli_main(["bars", "--in", str(sim_outputs[0] / "users.csv"),
                       "--out", str(out), "--metric", "min_thr"])
        assert rc == 0
        assert out.exists()

    def test_timeseries_subcommand(self, sim_outputs, tmp_path):
        out = tmp_path / "cli_ts.png"
        rc = cli_main(["timeseries", "--in", str(sim_outputs[0] / "slots.csv"),
                       "--out", str(out)])
        assert rc == 0
        assert out.exists()

    def test_error_exit(self, tmp_path, capsys):
        rc = cli_main(["cdf", "--in", str(tmp_path / "nope.csv"),
                       "--out", str(tmp_path / "o.png")])
        assert rc != 0
        assert "error" in capsys.readouterr().err
