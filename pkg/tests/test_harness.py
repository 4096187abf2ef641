import json

import numpy as np
import pytest

from isacsec import harness
from isacsec.cli import main
from isacsec.errors import InvalidArgument
from isacsec.harness import ExperimentSpec, ResultTable, reaudit_row, run_experiment
from isacsec.plots import plot_results, summarize
from isacsec.scenario import GeometrySpec, SystemConfig, save_config


def _stub_row(task):
    spec, scheme, point, seed = task
    return {"scheme": scheme, "sweep": spec.sweep, "point": float(point), "seed": seed, "status": "ok",
            "total_power_W": 1e-3 * point + 1e-5 * seed, "trace_Q2": 1.0 / point, "iterations": 3,
            "converged": True, "history_W": [2e-3, 1e-3], "power_ok": True, "rate_ok": True,
            "leak_ok": True, "wall_time": 0.0}


class TestSpec:
    def test_empty_grid(self):
        with pytest.raises(InvalidArgument):
            ExperimentSpec(schemes=("central",), sweep="R_info", grid=())

    @pytest.mark.parametrize("kw", [dict(grid=(3.0, 2.0)), dict(seeds=0), dict(schemes=("nope",)),
                                    dict(sweep="L"), dict(sweep="N", grid=(2.5,))])
    def test_invalid(self, kw):
        base = dict(schemes=("central",), sweep="R_info", grid=(3.0, 4.0))
        base.update(kw)
        with pytest.raises(InvalidArgument):
            ExperimentSpec(**base)

    def test_row_count(self, tmp_path, monkeypatch):
        monkeypatch.setattr(harness, "run_one", _stub_row)
        spec = ExperimentSpec(schemes=("central", "decentral"), sweep="R_info", grid=(3, 4, 5, 6), seeds=5,
                              out_dir=str(tmp_path))
        table = run_experiment(spec)
        assert len(table) == 40
        assert (tmp_path / "results.csv").exists()
        keys = [(r["scheme"], r["point"], r["seed"]) for r in table.rows]
        assert keys == sorted(keys, key=lambda k: (("central", "decentral").index(k[0]), k[1], k[2]))

    def test_point_config(self):
        base = SystemConfig.desk()
        assert harness.point_config(base, "N", 4.0, 2).N == 4
        assert harness.point_config(base, "P_max", 15.0, 0).P_max == 15.0
        assert harness.point_config(base, "mse_target", 0.3, 7).rng_seed == 7


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    spec = ExperimentSpec(schemes=("central",), sweep="R_info", grid=(4.0,), seeds=1, out_dir=str(out),
                          audit_samples=500)
    return spec, run_experiment(spec)


class TestEndToEnd:

    def test_audit_flags(self, small_run):
        _, table = small_run
        row = table.rows[0]
        assert row["status"] == "ok" and row["power_ok"] and row["rate_ok"] and row["leak_ok"]

    def test_outputs(self, small_run):
        spec, table = small_run
        from pathlib import Path

        out = Path(spec.out_dir)
        assert (out / "trace_central_4_0.jsonl").exists()
        assert (out / "solution_central_4_0.npz").exists()
        back = ResultTable.read_csv(out / "results.csv")
        assert back.rows[0]["total_power_W"] == pytest.approx(table.rows[0]["total_power_W"])

    def test_reaudit_round_trip(self, small_run):
        spec, table = small_run
        for row in table.rows:
            flags = reaudit_row(spec, row)
            assert flags == {k: row[k] for k in ("power_ok", "rate_ok", "leak_ok")}

    def test_deterministic_csv(self, small_run, tmp_path):
        spec, table = small_run
        spec2 = ExperimentSpec(**{**spec.__dict__, "out_dir": str(tmp_path)})
        table2 = run_experiment(spec2)
        table.write_csv(tmp_path / "a.csv", include_wall_time=False)
        table2.write_csv(tmp_path / "b.csv", include_wall_time=False)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_failure_recorded(self, tmp_path):
        spec = ExperimentSpec(schemes=("central",), sweep="R_info", grid=(40.0,), out_dir=str(tmp_path),
                              audit_samples=10, max_iter=2)
        with pytest.warns(RuntimeWarning):
            table = run_experiment(spec)
        assert table.rows[0]["status"] == "failed" and table.rows[0]["error"]


class TestCli:
    def test_bad_config_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["--config", str(bad), "--scheme", "central", "--sweep", "R_info", "--grid", "3",
                     "--out", str(tmp_path)]) == 2

    def test_invalid_values_exit_code(self, tmp_path):
        cfg = tmp_path / "c.json"
        save_config(cfg, SystemConfig.desk(), GeometrySpec.paper(2))
        data = json.loads(cfg.read_text())
        data["tau"] = [0.5, 0.7]
        cfg.write_text(json.dumps(data))
        assert main(["--config", str(cfg), "--scheme", "central", "--sweep", "R_info", "--grid", "3",
                     "--out", str(tmp_path)]) == 2
        assert main(["--scheme", "central", "--sweep", "R_info", "--grid", "", "--out", str(tmp_path)]) == 2

    def test_stubbed_run_with_plots(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(harness, "run_one", _stub_row)
        code = main(["--scheme", "central,decentral", "--sweep", "R_info", "--grid", "3,4", "--seeds", "2",
                     "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "power_vs_rate.png").exists() and (tmp_path / "power_vs_rate.csv").exists()
        assert (tmp_path / "mse_vs_rate.png").exists()
        assert "8/8 runs succeeded" in capsys.readouterr().out


class TestPlots:
    def _table(self):
        spec = ExperimentSpec(schemes=("baseline2",), sweep="mse_target", grid=(0.1, 0.2, 0.4), seeds=3)
        return ResultTable([_stub_row((spec, "baseline2", p, s)) for p in spec.grid for s in range(3)])

    def test_summary(self):
        stats = summarize(self._table())
        assert len(stats) == 3 and all(s["n"] == 3 for s in stats)
        np.testing.assert_allclose(stats[0]["mean"], 1e-4 + 1e-5)

    @pytest.mark.parametrize("kind", ["power_vs_mse", "mse_vs_rate", "convergence", "power_vs_pmax"])
    def test_kinds(self, kind, tmp_path):
        png, csv_path = plot_results(self._table(), kind, tmp_path)
        assert png.exists() and csv_path.read_text().count("\n") > 1

    def test_single_point(self, tmp_path):
        table = ResultTable(self._table().rows[:1])
        png, _ = plot_results(table, "power_vs_mse", tmp_path)
        assert png.exists()

    def test_missing_columns(self, tmp_path):
        with pytest.raises(InvalidArgument):
            plot_results(ResultTable([{"scheme": "x", "status": "ok"}]), "power_vs_rate", tmp_path)
        with pytest.raises(InvalidArgument):
            plot_results(ResultTable([]), "power_vs_rate", tmp_path)
        with pytest.raises(InvalidArgument):
            plot_results(self._table(), "pie", tmp_path)

    def test_sidecar_matches_rows(self, tmp_path):
        _, csv_path = plot_results(self._table(), "power_vs_mse", tmp_path, name="fig7")
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "scheme,x,mean,std,n" and len(lines) == 4
