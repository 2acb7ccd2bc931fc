import json

import numpy as np
import pytest

from plastiflow.cli import main
from plastiflow.config import parse_config
from plastiflow.errors import ConfigError
from plastiflow.output import config_hash


def base_config(**overrides):
    cfg = {
        "problem": {
            "domain": {"kind": "interval", "extent": 1.0},
            "u0": {"kind": "eigen"},
        },
        "parameters": {"b_minus": 1.0, "b_plus": 4.0},
        "solver": {"h": 0.01, "dt": "auto", "T": 0.02, "stride": 20},
        "output": {"formats": ["csv", "json"]},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestConfigParsing:
    def test_unknown_keys_rejected(self):
        cfg = base_config()
        cfg["solver"]["typo"] = 1
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config(cfg)

    def test_unknown_top_level_rejected(self):
        cfg = base_config()
        cfg["extra"] = {}
        with pytest.raises(ConfigError):
            parse_config(cfg)

    def test_missing_parameters_rejected(self):
        cfg = base_config()
        del cfg["parameters"]
        with pytest.raises(ConfigError, match="parameters"):
            parse_config(cfg)

    def test_auto_cfl_fills_dt(self):
        rc = parse_config(base_config())
        dt = rc.scheme_dt()
        assert dt == pytest.approx(0.9 * 0.01 ** 2 * 1.0 / 2.0)

    def test_expression_datum(self):
        cfg = base_config()
        cfg["problem"]["u0"] = {"kind": "expression", "formula": "sin(pi*x) * 0.5"}
        rc = parse_config(cfg)
        u0 = rc.u0()
        assert abs(u0.values.max() - 0.5) < 1e-12

    def test_hash_stable_under_reordering(self):
        a = base_config()
        b = json.loads(json.dumps(a))
        b["parameters"] = {"b_plus": 4.0, "b_minus": 1.0}  # reordered keys
        assert config_hash(a) == config_hash(b)


class TestCliExitCodes:
    def test_misaligned_grid_is_config_error(self, tmp_path, capsys):
        cfg = base_config()
        cfg["solver"]["h"] = 0.3
        path = write_config(tmp_path, cfg)
        code = main(["solve", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "does not tile" in capsys.readouterr().err

    def test_cfl_violation_is_numerical_error(self, tmp_path):
        cfg = base_config()
        cfg["solver"]["dt"] = 0.5
        path = write_config(tmp_path, cfg)
        code = main(["solve", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 3

    def test_missing_config_flag(self, tmp_path):
        assert main(["solve", "--out", str(tmp_path / "o")]) == 2

    def test_oracle_check_passes(self, tmp_path, capsys):
        code = main(["oracle-check", "--out", str(tmp_path / "o"), "--quiet"])
        assert code == 0
        report = json.loads((tmp_path / "o" / "oracle_check.json").read_text())
        assert report["all_pass"]
        assert len(report["checks"]) >= 10


class TestSolveArtifacts:
    def test_solve_writes_series_and_manifest(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "run"
        assert main(["solve", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        series = (out / "series.csv").read_text().splitlines()
        assert series[0] == "t,sup_norm,inf,projection_phi,sign_pattern"
        assert len(series) > 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config_hash"] == config_hash(base_config())
        for name in manifest["artifacts"]:
            assert (out / name).exists()

    def test_deterministic_artifacts(self, tmp_path):
        path = write_config(tmp_path, base_config())
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            assert main(["solve", "--config", str(path), "--out", str(out),
                         "--quiet"]) == 0
            outs.append(out)
        for f in sorted(outs[0].glob("*.csv")):
            assert f.read_bytes() == (outs[1] / f.name).read_bytes()

    def test_svg_format_emitted(self, tmp_path):
        cfg = base_config()
        cfg["output"]["formats"] = ["csv", "json", "svg"]
        path = write_config(tmp_path, cfg)
        out = tmp_path / "o"
        assert main(["solve", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        assert (out / "decay.svg").read_text().startswith("<svg")


class TestProjectCommand:
    def test_project_artifacts(self, tmp_path):
        cfg = base_config()
        cfg["problem"]["u0"] = {"kind": "separable", "theta": 4.0}
        path = write_config(tmp_path, cfg)
        out = tmp_path / "o"
        assert main(["project", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        rows = (out / "tilde_u0.csv").read_text().splitlines()
        assert rows[0] == "x,value"
        report = json.loads((out / "project.json").read_text())
        assert report["residual"] <= 1e-10


class TestGameCommands:
    def game_cfg(self):
        cfg = base_config()
        cfg["solver"] = {"h": 0.005, "T": 0.02}
        cfg["game"] = {"epsilon": 0.05, "n": 400, "seed": 3,
                       "start": [0.5, 0.015], "strategy": {"kind": "constant"}}
        return cfg

    def test_game_report(self, tmp_path):
        path = write_config(tmp_path, self.game_cfg())
        out = tmp_path / "o"
        assert main(["game", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        report = json.loads((out / "game.json").read_text())
        assert report["n"] == 400
        assert abs(report["estimate"]) <= 1.0
        assert report["exit_kinds"]["time"] + report["exit_kinds"]["space"] == 400

    def test_seed_flag_overrides(self, tmp_path):
        path = write_config(tmp_path, self.game_cfg())
        outs = {}
        for seed in (1, 2):
            out = tmp_path / f"s{seed}"
            assert main(["game", "--config", str(path), "--out", str(out),
                         "--seed", str(seed), "--quiet"]) == 0
            outs[seed] = json.loads((out / "game.json").read_text())["estimate"]
        assert outs[1] != outs[2]

    def test_dpp_table_export(self, tmp_path):
        cfg = self.game_cfg()
        path = write_config(tmp_path, cfg)
        out = tmp_path / "o"
        assert main(["dpp", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        meta = json.loads((out / "table.json").read_text())
        assert meta["epsilon"] == 0.05
        assert meta["K"] == 9
        slabs = sorted(out.glob("slab_*.csv"))
        assert slabs

    def test_exit_stats_report(self, tmp_path):
        cfg = self.game_cfg()
        cfg["game"].update({"epsilon": 0.01, "a": 0.3, "n": 300,
                            "start": [0.002, 1.0], "boundary_point": 0.0})
        cfg["solver"]["h"] = 0.001
        path = write_config(tmp_path, cfg)
        out = tmp_path / "o"
        assert main(["exit-stats", "--config", str(path), "--out", str(out),
                     "--quiet"]) == 0
        rep = json.loads((out / "exit_stats.json").read_text())
        assert rep["p_far"] <= 0.2


class TestAnalysisCommands:
    def test_fit_decay(self, tmp_path):
        cfg = base_config()
        cfg["solver"]["T"] = 0.4
        cfg["solver"]["stride"] = 200
        path = write_config(tmp_path, cfg)
        out = tmp_path / "o"
        assert main(["fit-decay", "--config", str(path), "--out", str(out),
                     "--quiet"]) == 0
        fit = json.loads((out / "fit.json").read_text())
        assert abs(fit["rate"] - np.pi ** 2) <= 0.05 * np.pi ** 2

    def test_bisect_theta_trace(self, tmp_path):
        cfg = base_config()
        cfg["problem"]["u0"] = {"kind": "separable", "theta": 4.0}
        cfg["solver"]["h"] = 1.0 / 64
        cfg["analysis"] = {"bracket": [2.0, 8.0], "tol_theta": 0.5, "budget": 2.0}
        path = write_config(tmp_path, cfg)
        out = tmp_path / "o"
        assert main(["bisect-theta", "--config", str(path), "--out", str(out),
                     "--quiet"]) == 0
        bracket = json.loads((out / "bracket.json").read_text())
        assert bracket["lo"] <= 4.0 <= bracket["hi"]
        assert bracket["width"] <= 0.5
        lines = (out / "bisect.csv").read_text().strip().splitlines()
        assert lines[0] == "theta,verdict,decision_time"
        assert lines[-1].startswith("# bracket,")

    def test_sweep_theta_csv(self, tmp_path):
        cfg = base_config()
        cfg["problem"]["u0"] = {"kind": "separable", "theta": 4.0}
        cfg["solver"]["h"] = 1.0 / 64
        cfg["analysis"] = {"thetas": [2.0, 6.0], "budget": 1.5}
        path = write_config(tmp_path, cfg)
        out = tmp_path / "o"
        assert main(["sweep-theta", "--config", str(path), "--out", str(out),
                     "--quiet"]) == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[1].endswith(("A", "B", "Unresolved")) or "," in lines[1]
        verdicts = [ln.split(",")[1] for ln in lines[1:]]
        assert verdicts == ["A", "B"]

    def test_limits_csv(self, tmp_path):
        cfg = base_config()
        cfg["problem"]["u0"] = {"kind": "separable", "theta": 4.0}
        cfg["solver"]["h"] = 1.0 / 50
        cfg["parameters"] = {"b_minus": 1.0, "b_plus": 1.0}
        cfg["analysis"] = {"b_minus_list": [0.2, 0.08], "times": [0.15]}
        path = write_config(tmp_path, cfg)
        out = tmp_path / "o"
        assert main(["limits", "--config", str(path), "--out", str(out),
                     "--quiet"]) == 0
        lines = (out / "limits.csv").read_text().strip().splitlines()
        assert lines[0] == "mode,parameter,time,gap"
        small = [ln for ln in lines if ln.startswith("small_b_minus")]
        gaps = [float(ln.split(",")[-1]) for ln in small]
        assert gaps[1] < gaps[0]


def test_game_and_svg_artifacts_byte_deterministic(tmp_path):
    cfg = base_config()
    cfg["solver"] = {"h": 0.005, "T": 0.02}
    cfg["game"] = {"epsilon": 0.05, "n": 300, "seed": 11,
                   "start": [0.5, 0.015], "strategy": {"kind": "constant"}}
    cfg["output"]["formats"] = ["csv", "json", "svg"]
    path = write_config(tmp_path, cfg)
    outs = []
    for tag in ("g1", "g2"):
        out = tmp_path / tag
        assert main(["game", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        assert main(["solve", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        outs.append(out)
    for name in ("game.json", "decay.svg", "series.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_output_directory_from_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = base_config()
    cfg["output"]["directory"] = str(tmp_path / "from_config")
    path = write_config(tmp_path, cfg)
    assert main(["solve", "--config", str(path), "--quiet"]) == 0
    assert (tmp_path / "from_config" / "series.csv").exists()


def test_csv_and_tiled_data_kinds(tmp_path):
    cfg = base_config()
    cfg["problem"]["u0"] = {"kind": "tiled", "theta": 4.0, "m": 2, "j": 1}
    path = write_config(tmp_path, cfg)
    out1 = tmp_path / "tiled"
    assert main(["solve", "--config", str(path), "--out", str(out1), "--quiet"]) == 0

    # round-trip the first snapshot back in as a csv datum
    snap = out1 / "snapshot_0000.csv"
    cfg2 = base_config()
    cfg2["problem"]["u0"] = {"kind": "csv", "path": str(snap)}
    path2 = write_config(tmp_path, cfg2, name="cfg2.json")
    out2 = tmp_path / "fromcsv"
    assert main(["solve", "--config", str(path2), "--out", str(out2), "--quiet"]) == 0
    first = (out2 / "snapshot_0000.csv").read_text()
    assert first == snap.read_text()
