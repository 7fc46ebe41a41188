from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from metrosim.cli import main, spearman_trend, sweep_configurations
from metrosim.config import config_to_dict, two_city_config
from metrosim.landuse import accessibility
from metrosim.world import Metropolis


def write_config(tmp_path: Path, **kwargs) -> Path:
    cfg = two_city_config(**kwargs)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(config_to_dict(cfg)), encoding="utf-8")
    return path


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


class TestRun:
    def test_artifacts_written(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=2)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg_path), "--seed", "1", "--out", str(out)]) == 0
        assert (out / "history.csv").exists()
        assert (out / "decisions.csv").exists()
        assert (out / "final_state.json").exists()
        for k in range(3):
            assert (out / f"map_step_{k}.svg").exists()

    def test_history_csv_shape(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=2)
        out = tmp_path / "out"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        rows = read_csv(out / "history.csv")
        assert len(rows) == 3
        assert list(rows[0]) == ["step", "total_accessibility", "total_travel_time", "link_count",
                                 "mayor_0_objective", "mayor_1_objective"]
        assert [r["step"] for r in rows] == ["0", "1", "2"]

    def test_decisions_csv_shape(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=2, xi=0.0)
        out = tmp_path / "out"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        rows = read_csv(out / "decisions.csv")
        assert len(rows) == 2
        assert rows[0]["level"] == "metropolitan"
        assert rows[0]["mayor_id"] == ""
        assert float(rows[0]["obj_after"]) >= float(rows[0]["obj_before"])

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=2, landuse_enabled=True)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["run", "--config", str(cfg_path), "--seed", "3", "--out", str(out_a)])
        main(["run", "--config", str(cfg_path), "--seed", "3", "--out", str(out_b)])
        for name in ("history.csv", "decisions.csv", "final_state.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_invalid_config_exits_2_and_names_field(self, tmp_path, capsys):
        cfg = config_to_dict(two_city_config())
        cfg["xi"] = 1.5
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg), encoding="utf-8")
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
        assert "xi" in capsys.readouterr().err

    def test_unwritable_out_dir_exits_3(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=1)
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory", encoding="utf-8")
        assert main(["run", "--config", str(cfg_path), "--out", str(blocker)]) == 3

    def test_steps_override_and_disable_landuse(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=6, landuse_enabled=True)
        out = tmp_path / "out"
        main(["run", "--config", str(cfg_path), "--steps", "1", "--disable-landuse", "--out", str(out)])
        rows = read_csv(out / "history.csv")
        assert len(rows) == 2
        state = json.loads((out / "final_state.json").read_text())
        densities = state["worker_density_history"]
        assert densities[0] == densities[-1]

    def test_final_state_supports_offline_recomputation(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=2)
        out = tmp_path / "out"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        dump = json.loads((out / "final_state.json").read_text())
        history = read_csv(out / "history.csv")

        from metrosim.config import config_from_dict
        from metrosim.world import grid_centroids

        cfg = config_from_dict(dump["config"])
        metropolis = Metropolis(
            config=cfg,
            workers=np.array(dump["workers"]),
            jobs=np.array(dump["jobs"]),
            territory=np.array(dump["territory"]),
            centroids=grid_centroids(cfg),
            n_mayors=len(cfg.centers),
        )
        d = np.array(dump["travel_times"])
        _, _, total_access = accessibility(metropolis, d, cfg.nu)
        logged = float(history[-1]["total_accessibility"])
        assert abs(float(total_access.sum()) - logged) <= 1e-9 * max(1.0, abs(logged))


class TestReplicate:
    def test_outputs(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=2)
        out = tmp_path / "out"
        code = main(["replicate", "--config", str(cfg_path), "--replications", "4",
                     "--base-seed", "0", "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "replicate_summary.csv")
        assert len(rows) == 1
        assert rows[0]["n"] == "4"
        assert (out / "ellipse.svg").exists()

    def test_single_replication_degenerates_to_point(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=1)
        out = tmp_path / "out"
        assert main(["replicate", "--config", str(cfg_path), "--replications", "1", "--out", str(out)]) == 0
        row = read_csv(out / "replicate_summary.csv")[0]
        assert float(row["axis_major"]) == 0.0
        assert float(row["axis_minor"]) == 0.0


class TestSweep:
    def test_row_cardinality_and_order(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=1)
        out = tmp_path / "out"
        code = main(["sweep", "--config", str(cfg_path), "--xi", "0,1",
                     "--replications", "1", "--configurations", "equal_far", "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "sweep.csv")
        assert len(rows) == 2
        assert [r["xi"] for r in rows] == ["0.0", "1.0"]
        assert (out / "trend.csv").exists()
        assert (out / "sweep.svg").exists()

    def test_all_configurations_run(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=1)
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg_path), "--xi", "0.5",
                     "--replications", "2", "--out", str(out)]) == 0
        rows = read_csv(out / "sweep.csv")
        names = sorted({r["configuration"] for r in rows})
        assert names == ["equal_far", "equal_near", "unequal_far", "unequal_near"]
        assert len(rows) == 8
        trend_rows = read_csv(out / "trend.csv")
        assert len(trend_rows) == 4

    def test_bad_xi_list_exits_2(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, steps=1)
        assert main(["sweep", "--config", str(cfg_path), "--xi", "0,2.0",
                     "--out", str(tmp_path / "o")]) == 2
        assert "xi" in capsys.readouterr().err

    def test_unknown_configuration_exits_2(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=1)
        assert main(["sweep", "--config", str(cfg_path), "--configurations", "nonsense",
                     "--out", str(tmp_path / "o")]) == 2

    def test_worker_pool_matches_sequential(self, tmp_path):
        cfg_path = write_config(tmp_path, steps=1)
        out_seq, out_par = tmp_path / "seq", tmp_path / "par"
        args = ["sweep", "--config", str(cfg_path), "--xi", "0,1", "--replications", "2",
                "--configurations", "equal_near"]
        assert main(args + ["--out", str(out_seq)]) == 0
        assert main(args + ["--out", str(out_par), "--workers", "2"]) == 0
        assert (out_seq / "sweep.csv").read_bytes() == (out_par / "sweep.csv").read_bytes()

    def test_failed_cells_recorded_and_exit_nonzero(self, tmp_path, monkeypatch, capsys):
        import metrosim.cli as cli_mod

        real_run = cli_mod.engine.run

        def flaky_run(config, seed, **kwargs):
            if seed == 1:
                raise RuntimeError("boom")
            return real_run(config, seed, **kwargs)

        monkeypatch.setattr(cli_mod.engine, "run", flaky_run)
        cfg_path = write_config(tmp_path, steps=1)
        out = tmp_path / "out"
        code = main(["sweep", "--config", str(cfg_path), "--xi", "0.5", "--replications", "2",
                     "--configurations", "equal_far", "--out", str(out)])
        assert code == 1
        rows = read_csv(out / "sweep.csv")
        assert len(rows) == 2
        failed = [r for r in rows if r["seed"] == "1"]
        assert failed[0]["total_accessibility"] == ""
        assert "boom" in capsys.readouterr().err


def test_sweep_configurations_shapes():
    base = two_city_config()
    variants = sweep_configurations(base)
    assert set(variants) == {"equal_near", "equal_far", "unequal_near", "unequal_far"}
    eq = variants["equal_far"].centers
    assert eq[0].amplitude == eq[1].amplitude
    uneq = variants["unequal_far"].centers
    assert uneq[1].amplitude > uneq[0].amplitude
    near = variants["equal_near"].centers
    far = variants["equal_far"].centers
    def separation(centers):
        (r0, c0), (r1, c1) = centers[0].position, centers[1].position
        return ((r0 - r1) ** 2 + (c0 - c1) ** 2) ** 0.5
    assert separation(near) < separation(far)


def test_spearman_trend_signs():
    assert spearman_trend([0.0, 0.25, 0.5, 0.75, 1.0], [5.0, 4.0, 3.0, 2.0, 1.0]) == pytest.approx(-1.0)
    assert spearman_trend([0.0, 0.5, 1.0], [1.0, 1.0, 1.0]) == 0.0
    assert spearman_trend([0.0, 0.5, 1.0], [1.0, 3.0, 2.0]) == pytest.approx(0.5)


def test_svgs_are_valid_xml(tmp_path):
    import xml.etree.ElementTree as ET

    cfg_path = write_config(tmp_path, steps=1)
    out = tmp_path / "out"
    main(["run", "--config", str(cfg_path), "--out", str(out)])
    main(["replicate", "--config", str(cfg_path), "--replications", "2", "--out", str(out)])
    main(["sweep", "--config", str(cfg_path), "--xi", "0,1", "--replications", "1",
          "--configurations", "equal_near", "--out", str(out)])
    for svg in out.glob("*.svg"):
        root = ET.parse(svg).getroot()
        assert root.tag.endswith("svg")
