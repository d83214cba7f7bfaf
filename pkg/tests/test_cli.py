import csv
import io
import json
from pathlib import Path

import pytest

from lenspoints.cli import cmd_bounds, cmd_sharpness_demo, main, render_json, sharpness_config
from lenspoints.config import load_config, parse_config
from lenspoints.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
REPORT_KEYS = {"setting", "records", "shift_clusters", "verdict", "diagnostics", "provenance"}


def small(name, **solver):
    doc = json.loads((CONFIGS / f"{name}_l33.json").read_text())
    doc["solver"] = {**doc.get("solver", {}), "sphere_samples": 32, "tau_samples": 16,
                     "genfun_sphere_starts": 16, "genfun_t_starts": 4, **solver}
    return doc


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestConfigErrors:
    def test_json_syntax_reports_position(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "setting": {"n": 2,\n  }\n}')
        code, _, err = run(["validate", "--config", str(path)], capsys)
        assert code == 1
        assert "line 3" in err and "column" in err

    def test_schema_reports_key_path(self, tmp_path, capsys):
        doc = small("diagonal")
        doc["isotopy"][0]["duration"] = "long"
        code, _, err = run(["validate", "--config", write(tmp_path, doc)], capsys)
        assert code == 1
        assert "isotopy[0].duration" in err

    def test_missing_resonant_fields(self):
        doc = small("diagonal")
        doc["isotopy"].append({"kind": "resonant", "duration": 1.0, "amplitude": 0.1})
        with pytest.raises(ConfigError, match="isotopy"):
            parse_config(doc)

    def test_coprimality(self, tmp_path, capsys):
        doc = {"setting": {"n": 2, "k": 4, "weights": [2, 2]},
               "isotopy": [{"kind": "diagonal", "coefficients": [0.1, 0.2], "duration": 1.0}]}
        code, _, err = run(["validate", "--config", write(tmp_path, doc)], capsys)
        assert code == 1 and "not coprime" in err

    def test_invariance_congruence(self):
        doc = {"setting": {"n": 2, "k": 3, "weights": [1, 2]},
               "isotopy": [{"kind": "resonant", "amplitude": 0.1, "a": [1, 0], "b": [0, 1], "duration": 1.0}]}
        with pytest.raises(ConfigError, match=r"isotopy\[0\].*not Z/3-invariant"):
            parse_config(doc)

    def test_missing_file(self, capsys):
        code, _, err = run(["validate", "--config", "/nonexistent/cfg.json"], capsys)
        assert code == 1 and "cannot read" in err

    def test_bad_thread_count(self, capsys):
        code, _, _ = run(["validate", "--config", str(CONFIGS / "diagonal_l33.json"), "--threads", "0"], capsys)
        assert code == 1

    def test_defaults_are_echoed(self):
        cfg = load_config(CONFIGS / "diagonal_l33.json")
        resolved = cfg.to_dict()
        assert resolved["solver"]["sphere_samples"] == 128 and resolved["solver"]["tau_samples"] == 64
        assert resolved["checks"]["dg_symmetry"] == 1e-6
        assert cfg.with_seed(7).digest() != cfg.digest()


class TestValidate:
    @pytest.mark.parametrize("name", ["diagonal", "perturbed", "identity", "broken"])
    def test_catalog_passes(self, name, capsys):
        code, out, _ = run(["validate", "--config", str(CONFIGS / f"{name}_l33.json")], capsys)
        report = json.loads(out)
        assert code == 0 and report["verdict"]["status"] == "PASS"
        assert set(report) == REPORT_KEYS

    def test_corrupted_factor_is_flagged(self, capsys):
        code, out, _ = run(["validate", "--config", str(CONFIGS / "corrupted_l33.json")], capsys)
        report = json.loads(out)
        assert code == 3
        assert report["verdict"]["status"] == "FAIL"
        assert report["verdict"]["flagged_factors"] == [3]
        assert "dg_symmetry" in report["verdict"]["failed_checks"]


class TestScan:
    def test_identity_flags_degeneracy(self, capsys):
        code, out, _ = run(["scan", "--config", str(CONFIGS / "identity_l33.json")], capsys)
        report = json.loads(out)
        assert code == 0
        assert report["verdict"]["degenerate"]
        assert len(report["shift_clusters"]) == 1

    def test_unperturbed_diagonal(self, tmp_path, capsys):
        code, out, _ = run(["scan", "--config", write(tmp_path, small("diagonal"))], capsys)
        v = json.loads(out)["verdict"]
        assert code == 0 and v["status"] == "ATTENTION" and "non-isolated" in v["message"]

    def test_broken_twin_passes(self, tmp_path, capsys):
        code, out, _ = run(["scan", "--config", write(tmp_path, small("broken", sphere_samples=64))], capsys)
        v = json.loads(out)["verdict"]
        assert code == 0 and v["status"] == "PASS" and v["clusters"] == 4

    def test_tolerances_echoed_and_seed_override(self, tmp_path, capsys):
        path = write(tmp_path, small("identity"))
        _, out, _ = run(["scan", "--config", path, "--seed", "5"], capsys)
        prov = json.loads(out)["provenance"]
        assert prov["seed"] == 5
        assert prov["config"]["solver"]["seed"] == 5
        assert prov["config"]["solver"]["tol"] == 1e-8
        assert prov["config"]["checks"]["closure"] == 1e-7

    def test_csv_and_plot_data(self, tmp_path, capsys):
        doc = small("identity")
        doc["output"] = {"report": str(tmp_path / "out" / "report.json"), "plot_data": str(tmp_path / "plots")}
        code, out, _ = run(["scan", "--config", write(tmp_path, doc)], capsys)
        assert code == 0 and out == ""
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert set(report) == REPORT_KEYS
        for name in ("records.csv", "tau_histogram.csv", "residual_decay.csv"):
            assert (tmp_path / "plots" / name).stat().st_size > 0
        code, out, _ = run(["scan", "--config", write(tmp_path, small("identity")), "--format", "csv"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == len(report["records"])
        assert {"tau", "residual", "source"} <= set(rows[0])

    def test_deterministic_across_threads(self, tmp_path, capsys):
        path = write(tmp_path, small("broken"))
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        assert main(["scan", "--config", path, "--threads", "1", "--out", str(a)]) == 0
        assert main(["scan", "--config", path, "--threads", "4", "--out", str(b)]) == 0
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()


class TestCrosscheck:
    def test_linear_example(self, tmp_path, capsys):
        code, out, _ = run(["crosscheck", "--config", write(tmp_path, small("diagonal"))], capsys)
        v = json.loads(out)["verdict"]
        assert code == 0 and v["status"] == "PASS"
        assert v["unmatched_genfun"] == 0 and v["unmatched_direct"] == 0
        assert v["max_discrepancy"] <= 1e-6

    def test_corrupted_factor(self, capsys):
        code, out, _ = run(["crosscheck", "--config", str(CONFIGS / "corrupted_l33.json")], capsys)
        v = json.loads(out)["verdict"]
        assert code == 3 and v["status"] == "MISMATCH"
        assert v["flagged_factors"] == [3]


class TestIndexJump:
    @pytest.mark.parametrize("t0,t1,jump", [(0, 2, 8), (0, 1, 4), (0.5, 0.5, 0)])
    def test_diagonal(self, t0, t1, jump, capsys):
        code, out, _ = run(["index-jump", "--config", str(CONFIGS / "diagonal_l33.json"), str(t0), str(t1)], capsys)
        assert code == 0 and json.loads(out)["verdict"]["index_jump"] == jump

    def test_nonlinear_is_rejected(self, capsys):
        code, _, _ = run(["index-jump", "--config", str(CONFIGS / "perturbed_l33.json"), "0", "1"], capsys)
        assert code == 1

    def test_degenerate_endpoint(self, capsys):
        code, _, err = run(["index-jump", "--config", str(CONFIGS / "diagonal_l33.json"), "0", "0.15"], capsys)
        assert code == 2 and "degenerate" in err


class TestBounds:
    @pytest.mark.parametrize("p,n,expected", [(3, 2, (4, 8, 7, 4)), (5, 3, (6, 12, 11, 6)), (3, 1, (2, 4, 3, 2))])
    def test_values(self, p, n, expected, capsys):
        code, out, _ = run(["bounds", str(p), str(n)], capsys)
        v = json.loads(out)["verdict"]
        assert code == 0
        assert (v["cat_lens"], v["ls_bound_even"], v["ls_bound_odd"], v["shift_bound"]) == expected

    def test_even_prime(self, capsys):
        code, _, _ = run(["bounds", "2", "2"], capsys)
        assert code == 1

    def test_report_shape(self):
        report, code = cmd_bounds(7, 4)
        assert code == 0 and report["verdict"]["cat_lens"] == 8
        assert set(report) == REPORT_KEYS
        render_json(report)


class TestSharpnessDemo:
    def test_config_is_valid(self):
        for n in (1, 2, 3):
            cfg = parse_config(sharpness_config(3, n))
            assert len(cfg.steps) == n + 1

    def test_circle(self):
        report, code = cmd_sharpness_demo(3, 1)
        assert code == 0
        assert report["verdict"]["clusters"] == 2 and report["verdict"]["sharp"]

    def test_unperturbed_keeps_families(self):
        report, _ = cmd_sharpness_demo(3, 1, perturbed=False)
        assert report["verdict"]["status"] == "ATTENTION"
        assert report["verdict"]["circle_families"] == 1

    def test_too_large(self, capsys):
        code, _, _ = run(["sharpness-demo", "3", "4"], capsys)
        assert code == 1
