import json
import os

import numpy as np
import pytest

from geoconn.cli import main

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def cfg(name):
    return os.path.join(CONFIGS, name)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCheck:
    def test_flat_config_all_pass(self, capsys):
        code, out, _ = run(capsys, "check", "--config", cfg("flat_ehresmann.json"), "--deterministic")
        assert code == 0
        report = json.loads(out)
        assert report["passed"] is True
        assert all(c["passed"] for c in report["checks"])
        assert report["seed"] == 12345
        assert "tolerances" in report

    def test_zero_anchor_nonzero_coeffs_fails_with_witness(self, capsys):
        code, out, _ = run(capsys, "check", "--config", cfg("zero_anchor_nonzero_coeffs.json"), "--deterministic")
        assert code == 1
        report = json.loads(out)
        partial = next(c for c in report["checks"] if c["name"] == "partial_connection")
        assert partial["passed"] is False
        assert partial["witness"] is not None

    def test_heisenberg_algebroid_passes_with_small_hom_residual(self, capsys):
        code, out, _ = run(capsys, "check", "--config", cfg("heisenberg_lie.json"), "--deterministic")
        assert code == 0
        report = json.loads(out)
        hom = next(c for c in report["checks"] if c["name"] == "anchor_hom")
        assert hom["residual"] < 1e-9
        names = {c["name"] for c in report["checks"]}
        assert {"admissibility[0]", "partial_connection", "lift_linearity", "star_leibniz", "derivative_axioms", "bracket_defect"} <= names

    def test_deterministic_reruns_byte_identical(self, tmp_path):
        out1 = tmp_path / "a.json"
        out2 = tmp_path / "b.json"
        assert main(["check", "--config", cfg("heisenberg_lie.json"), "--deterministic", "--out", str(out1)]) == 0
        assert main(["check", "--config", cfg("heisenberg_lie.json"), "--deterministic", "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_timestamp_present_without_flag(self, capsys):
        code, out, _ = run(capsys, "check", "--config", cfg("flat_ehresmann.json"))
        assert code == 0
        assert "timestamp" in json.loads(out)

    def test_missing_config_is_config_error(self, capsys):
        code, _, err = run(capsys, "check", "--config", "/nonexistent.json")
        assert code == 2
        assert "config error" in err

    def test_invalid_expression_positioned(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({
            "schema_version": 1,
            "dims": {"n": 1, "k": 1, "l": 1},
            "box": [[-1, 1]],
            "anchor": [["x9"]],
        }))
        code, _, err = run(capsys, "check", "--config", str(bad))
        assert code == 2
        assert "$.anchor" in err and "offset" in err


class TestTransport:
    def test_scalar_exponential_matrix(self, capsys):
        code, out, _ = run(
            capsys, "transport", "--config", cfg("scalar_transport.json"), "--deterministic", "--y0", "1.0"
        )
        assert code == 0
        report = json.loads(out)
        assert report["transport_matrix"][0][0] == pytest.approx(np.exp(0.7), abs=1e-8)
        assert report["residual"] < 1e-9

    def test_inadmissible_curve_exit_code(self, capsys):
        code, _, err = run(
            capsys, "transport", "--config", cfg("scalar_transport.json"), "--curve-index", "1"
        )
        assert code == 3
        assert "residual" in err

    def test_samples_csv(self, tmp_path, capsys):
        samples = tmp_path / "lift.csv"
        code, out, _ = run(
            capsys,
            "transport",
            "--config",
            cfg("scalar_transport.json"),
            "--deterministic",
            "--samples",
            str(samples),
        )
        assert code == 0
        lines = samples.read_text().strip().splitlines()
        assert lines[0] == "t,x0,y0"
        assert len(lines) == 1002  # header + steps + 1
        last = lines[-1].split(",")
        assert float(last[0]) == pytest.approx(1.0)
        assert float(last[2]) == pytest.approx(np.exp(0.7), abs=1e-8)

    def test_csv_matrix_output(self, capsys):
        code, out, _ = run(
            capsys, "transport", "--config", cfg("scalar_transport.json"), "--format", "csv", "--deterministic"
        )
        assert code == 0
        assert out.splitlines()[0] == "m0"
        assert float(out.splitlines()[1]) == pytest.approx(np.exp(0.7), abs=1e-8)


class TestTables:
    def test_nabla_table(self, capsys):
        code, out, _ = run(capsys, "nabla", "--config", cfg("heisenberg_lie.json"), "--deterministic")
        assert code == 0
        report = json.loads(out)
        assert report["columns"] == ["x0", "x1", "x2", "component", "value"]
        assert len(report["rows"]) == 2 * 2  # two configured points, two components

    def test_curvature_table_json(self, capsys):
        code, out, _ = run(capsys, "curvature", "--config", cfg("heisenberg_lie.json"), "--deterministic")
        assert code == 0
        report = json.loads(out)
        assert report["non_tensorial_points"] == []
        assert len(report["rows"]) == 2 * 3 * 3 * 2 * 2

    def test_torsion_requires_matching_ranks(self, capsys):
        code, _, err = run(capsys, "torsion", "--config", cfg("heisenberg_lie.json"))
        assert code == 2
        assert "l == k" in err

    def test_torsion_table_csv(self, capsys):
        code, out, _ = run(
            capsys, "torsion", "--config", cfg("torsion_demo.json"), "--format", "csv", "--grid", "2", "--deterministic"
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "x0,x1,alpha,beta,lam,value,tensorial"
        assert len(lines) == 1 + 4 * 8  # 2^2 grid points, k^3 components

    def test_torsion_values_match_library(self, capsys):
        from geoconn import config as configmod
        from geoconn import torsion_components

        code, out, _ = run(capsys, "torsion", "--config", cfg("torsion_demo.json"), "--grid", "2", "--deterministic")
        assert code == 0
        report = json.loads(out)
        run_cfg = configmod.load(cfg("torsion_demo.json"))
        row = report["rows"][0]
        x = np.array(row[:2])
        comps = torsion_components(run_cfg.connection, run_cfg.structure, x)
        assert row[5] == pytest.approx(comps[row[2], row[3], row[4]])

    def test_curvature_missing_structure(self, capsys, tmp_path):
        doc = json.load(open(cfg("scalar_transport.json")))
        path = tmp_path / "nostruct.json"
        path.write_text(json.dumps(doc))
        code, _, err = run(capsys, "curvature", "--config", str(path))
        assert code == 2
        assert "structure" in err


class TestDescribe:
    def test_gallery_summary(self, capsys):
        code, out, _ = run(capsys, "describe", "--config", cfg("heisenberg_lie.json"), "--deterministic")
        assert code == 0
        report = json.loads(out)
        assert report["gallery"] == "heisenberg-lie"
        assert report["dims"] == {"n": 3, "k": 3, "l": 2}
        assert report["anchor_rank_at_center"] == 3
        assert report["anchor_hom_residual_at_center"] < 1e-9

    def test_expression_anchor_summary(self, capsys):
        code, out, _ = run(capsys, "describe", "--config", cfg("scalar_transport.json"), "--deterministic")
        assert code == 0
        report = json.loads(out)
        assert report["gallery"] is None
        assert report["curves"] == 2


def test_seed_override_recorded(capsys):
    code, out, _ = run(capsys, "check", "--config", cfg("flat_ehresmann.json"), "--seed", "7", "--deterministic")
    assert code == 0
    assert json.loads(out)["seed"] == 7


def test_general_connection_config(tmp_path, capsys):
    # Fiber-dependent coefficients through the "general" key.
    doc = {
        "schema_version": 1,
        "dims": {"n": 1, "k": 1, "l": 1},
        "box": [[-2, 2]],
        "anchor": [["1"]],
        "connection": {"general": [["y0 * x0"]]},
        "seed": 3,
    }
    path = tmp_path / "general.json"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "check", "--config", str(path), "--deterministic")
    assert code == 0
    report = json.loads(out)
    assert any(c["name"] == "partial_connection" and c["passed"] for c in report["checks"])

    from geoconn import config as configmod
    from geoconn import lift

    run_cfg = configmod.load(str(path))
    import numpy as np

    _, dy = lift(run_cfg.connection, (np.array([2.0]), np.array([3.0])), np.array([1.0]))
    assert dy[0] == 6.0  # y0 * x0 at (x, y) = (2, 3)
