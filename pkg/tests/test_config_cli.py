import json
import subprocess
import sys

import numpy as np
import pytest

from hexelastic.cli import main
from hexelastic.config import ConfigError, load_config
from hexelastic.geometry import MetricField


def base_config(**extra):
    doc = {
        "version": 1,
        "chart": {"x0": 0.0, "x1": 1.0, "y0": 0.0, "y1": 1.0},
        "metric": {"kind": "euclidean"},
        "epsilon": 0.25,
    }
    doc.update(extra)
    return doc


class TestLoadConfig:
    def test_minimal(self):
        cfg = load_config(base_config())
        assert cfg.epsilon == 0.25
        assert cfg.metric.is_constant
        assert cfg.bond_law.kind == "hookean"
        assert cfg.volume_law.kind == "huber"
        assert cfg.seed == 0
        # default frame is the hexagonal one
        assert cfg.frame.chart_wedge == pytest.approx(np.sqrt(3) / 2)

    def test_accepts_json_text(self):
        cfg = load_config(json.dumps(base_config(seed=7)))
        assert cfg.seed == 7

    def test_accepts_path(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(base_config()))
        assert load_config(str(p)).epsilon == 0.25

    def test_invalid_json(self):
        with pytest.raises(ConfigError) as exc:
            load_config("{not json")
        assert exc.value.path == "$"

    def test_unknown_top_level_field_rejected(self):
        with pytest.raises(ConfigError) as exc:
            load_config(base_config(typo_field=1))
        assert exc.value.path == "$.typo_field"

    def test_unknown_nested_field_rejected(self):
        doc = base_config()
        doc["chart"]["slant"] = 2
        with pytest.raises(ConfigError) as exc:
            load_config(doc)
        assert exc.value.path == "$.chart.slant"

    def test_unknown_solver_field_rejected(self):
        with pytest.raises(ConfigError) as exc:
            load_config(base_config(solver={"stepsize": 0.1}))
        assert exc.value.path == "$.solver.stepsize"

    def test_wrong_version(self):
        with pytest.raises(ConfigError) as exc:
            load_config(base_config(version=99))
        assert exc.value.path == "$.version"

    def test_missing_required_fields(self):
        doc = base_config()
        del doc["metric"]
        with pytest.raises(ConfigError) as exc:
            load_config(doc)
        assert exc.value.path == "$.metric"
        doc = base_config()
        del doc["epsilon"]
        with pytest.raises(ConfigError) as exc:
            load_config(doc)
        assert exc.value.path == "$.epsilon"

    def test_conformal_metric(self):
        cfg = load_config(
            base_config(metric={"kind": "conformal", "phi": "1 + x^2 + y^2"})
        )
        p = np.array([0.5, 0.5])
        phi = 1.5
        assert np.allclose(cfg.metric.matrix(p), phi**2 * np.eye(2))

    def test_general_metric_resolved_in_frame(self):
        # constant frame coefficients with g_aa = g_bb = 1, g_ab = -1/2 give
        # back the Euclidean chart metric for the hexagonal frame
        cfg = load_config(
            base_config(
                metric={"kind": "general", "g_aa": "1", "g_bb": "1", "g_ab": "-1/2"}
            )
        )
        p = np.array([0.3, 0.7])
        assert np.allclose(cfg.metric.matrix(p), np.eye(2), atol=1e-12)

    def test_non_spd_metric_rejected(self):
        # |g_ab| > sqrt(g_aa * g_bb) makes the frame coefficients indefinite
        with pytest.raises(ConfigError) as exc:
            load_config(
                base_config(
                    metric={"kind": "general", "g_aa": "1", "g_bb": "1", "g_ab": "2"}
                )
            )
        assert exc.value.path == "$.metric"

    def test_bad_expression_reported_with_path(self):
        with pytest.raises(ConfigError) as exc:
            load_config(base_config(metric={"kind": "conformal", "phi": "1 +* x"}))
        assert exc.value.path == "$.metric.phi"

    def test_custom_bond_law(self):
        cfg = load_config(
            base_config(bond={"kind": "custom", "expression": "(x-1)^2"})
        )
        assert cfg.bond_law.phi(2.0) == 1.0

    def test_bad_law_reported(self):
        with pytest.raises(ConfigError) as exc:
            load_config(base_config(volume={"kind": "huber", "delta": -1}))
        assert exc.value.path == "$.volume"

    def test_eps_list(self):
        cfg = load_config(base_config(eps_list=[0.2, 0.1]))
        assert cfg.eps_list == [0.2, 0.1]
        assert cfg.epsilon == 0.2

    def test_bad_eps_list(self):
        doc = base_config()
        del doc["epsilon"]
        doc["eps_list"] = [0.2, -0.1]
        with pytest.raises(ConfigError) as exc:
            load_config(doc)
        assert exc.value.path == "$.eps_list"

    def test_non_integer_seed(self):
        with pytest.raises(ConfigError) as exc:
            load_config(base_config(seed=1.5))
        assert exc.value.path == "$.seed"


@pytest.fixture()
def cfg_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(base_config()))
    return str(p)


class TestCliInProcess:
    def test_mesh(self, cfg_file, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["mesh", "--config", cfg_file, "--out", out]) == 0
        summary = json.loads((tmp_path / "out" / "mesh_summary.json").read_text())
        assert summary["epsilon"] == 0.25
        assert summary["n_triangles"] > 0
        # the full mesh file round-trips
        from hexelastic.mesh import Triangulation

        tri = Triangulation.from_json((tmp_path / "out" / "mesh.json").read_text())
        assert tri.n_triangles == summary["n_triangles"]

    def test_minimize(self, cfg_file, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["minimize", "--config", cfg_file, "--out", out]) == 0
        rep = json.loads((tmp_path / "out" / "minimize.json").read_text())
        assert rep["energy"]["total"] < 1e-10
        printed = json.loads(capsys.readouterr().out)
        assert printed["min_energy"] < 1e-10

    def test_sweep(self, cfg_file, tmp_path, capsys):
        assert (
            main(
                [
                    "sweep",
                    "--config",
                    cfg_file,
                    "--out",
                    str(tmp_path / "out"),
                    "--eps",
                    "0.25,0.2,0.125",
                ]
            )
            == 0
        )
        csv_text = (tmp_path / "out" / "sweep.csv").read_text()
        assert csv_text.splitlines()[0].startswith("epsilon,")
        assert len(csv_text.splitlines()) == 4

    def test_sweep_needs_three_scales(self, cfg_file, tmp_path, capsys):
        code = main(
            ["sweep", "--config", cfg_file, "--out", str(tmp_path / "o"), "--eps", "0.25,0.2"]
        )
        assert code == 1

    def test_validate(self, tmp_path, capsys):
        assert main(["validate", "--suite", "laws"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["passed"]

    def test_validate_appendix_small(self, capsys):
        assert main(["validate", "--suite", "appendix", "--trials", "2000"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["passed"] and len(out["suites"]) == 5

    def test_curvature_flat(self, cfg_file, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["curvature", "--config", cfg_file, "--out", out, "--grid", "3"]) == 0
        rep = json.loads((tmp_path / "out" / "curvature.json").read_text())
        assert rep["flat"]

    def test_qw_small(self, cfg_file, tmp_path, capsys):
        out = str(tmp_path / "out")
        code = main(
            ["qw", "--config", cfg_file, "--out", out, "--samples", "2", "--level", "1"]
        )
        assert code == 0
        lines = (tmp_path / "out" / "qw.csv").read_text().splitlines()
        assert lines[0].startswith("a11,")
        assert len(lines) == 3

    def test_config_error_exit_code(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(base_config(typo=1)))
        assert main(["mesh", "--config", str(p), "--out", str(tmp_path)]) == 1

    def test_output_prefix_honored(self, tmp_path, capsys):
        doc = base_config(output={"dir": str(tmp_path / "o"), "prefix": "run1_"})
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(doc))
        assert main(["mesh", "--config", str(p)]) == 0
        assert (tmp_path / "o" / "run1_mesh_summary.json").exists()

    def test_seed_override_changes_nothing_deterministic(self, cfg_file, tmp_path, capsys):
        out1 = str(tmp_path / "a")
        out2 = str(tmp_path / "b")
        main(["minimize", "--config", cfg_file, "--out", out1, "--seed", "3"])
        main(["minimize", "--config", cfg_file, "--out", out2, "--seed", "3"])
        t1 = (tmp_path / "a" / "configuration.json").read_text()
        t2 = (tmp_path / "b" / "configuration.json").read_text()
        assert t1 == t2


class TestCliSubprocess:
    def test_console_entry_point(self, cfg_file, tmp_path):
        res = subprocess.run(
            [
                sys.executable,
                "-m",
                "hexelastic.cli",
                "mesh",
                "--config",
                cfg_file,
                "--out",
                str(tmp_path / "out"),
            ],
            capture_output=True,
            text=True,
        )
        assert res.returncode == 0
        assert json.loads(res.stdout)["n_triangles"] > 0

    def test_bad_config_exit_one(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{")
        res = subprocess.run(
            [sys.executable, "-m", "hexelastic.cli", "mesh", "--config", str(p)],
            capture_output=True,
            text=True,
        )
        assert res.returncode == 1
        assert "config error" in res.stderr
