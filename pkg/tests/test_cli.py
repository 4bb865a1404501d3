import csv
import json
from pathlib import Path

import pytest

from gbmo.cli import (ConfigError, Experiment, DEFAULTS, main, parse_config_text, parse_epsilons,
                      parse_field, parse_matrix)


def rows(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# ") and "config_hash=" in lines[0] and "seed=" in lines[0]
    return list(csv.DictReader(lines[1:]))


class TestParsing:
    def test_config_text(self):
        raw = parse_config_text("# comment\nfunctional.p = 3  # trailing\n\nfield=sine2d\n")
        assert raw == {"functional.p": "3", "field": "sine2d"}

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            parse_config_text("nope = 1")

    def test_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_config_text("field sine2d")

    def test_matrix(self):
        assert parse_matrix("1,0,0,1").tolist() == [[1, 0], [0, 1]]
        assert parse_matrix("1,2,3,4,5,6", (2, 3)).shape == (2, 3)
        for bad in ("1,x", "1,2,3", "", "nan,1,1,1"):
            with pytest.raises(ConfigError):
                parse_matrix(bad)

    def test_epsilons(self):
        assert parse_epsilons("1/8, 1/16") == [0.125, 0.0625]
        assert parse_epsilons("dyadic(4, 16)") == [0.25, 0.125, 0.0625]
        with pytest.raises(ConfigError):
            parse_epsilons("1/16, 1/8")

    def test_fields(self):
        assert parse_field("linear(A=[1,0,0,1])", 2.0).name == "linear"
        assert parse_field("rigid(A_skew=[0,1,-1,0], h=[1,2])", 2.0).name == "rigid"
        assert parse_field("singular(delta=1)", 2.0).params == {"delta": 1, "p": 2.0}
        assert parse_field("sine2d", 2.0).n == 2
        with pytest.raises(ConfigError):
            parse_field("unknown(1)", 2.0)
        with pytest.raises(ConfigError):
            parse_field("linear(A=foo)", 2.0)

    def test_hash_ignores_output_dir(self):
        a = Experiment(dict(DEFAULTS))
        b = Experiment({**DEFAULTS, "output.dir": "elsewhere"})
        c = Experiment({**DEFAULTS, "seed": "5"})
        assert a.hash() == b.hash() != c.hash()


class TestPsi:
    def test_identity(self, tmp_path, capsys):
        assert main(["psi", "--variant", "mean_oscillation", "--p", "2", "--cell", "cube",
                     "--matrix", "1,0,0,1", "--out", str(tmp_path)]) == 0
        (row,) = rows(tmp_path / "psi.csv")
        assert list(row) == ["variant", "p", "mode", "matrix", "psi_value"]
        assert abs(float(row["psi_value"]) - 1 / 6) <= 1e-6
        assert "0.16666666666666666" in capsys.readouterr().out

    def test_affine_inf(self, tmp_path):
        assert main(["psi", "--variant", "affine_inf", "--matrix", "3,1,0,2",
                     "--out", str(tmp_path)]) == 0
        assert float(rows(tmp_path / "psi.csv")[0]["psi_value"]) == 0

    def test_malformed_matrix(self, tmp_path, capsys):
        assert main(["psi", "--matrix", "1,,x", "--out", str(tmp_path / "o")]) == 2
        assert not (tmp_path / "o").exists()
        assert "matrix" in capsys.readouterr().err

    def test_several_matrices(self, tmp_path):
        assert main(["psi", "--matrix", "1,0,0,1; 2,0,0,2", "--out", str(tmp_path)]) == 0
        vals = [float(r["psi_value"]) for r in rows(tmp_path / "psi.csv")]
        assert vals[1] == pytest.approx(4 * vals[0])


class TestSweep:
    def test_sine(self, tmp_path):
        assert main(["sweep", "--out", str(tmp_path), "--threads", "2"]) == 0
        table = rows(tmp_path / "sweep.csv")
        assert (tmp_path / "sweep.csv").read_text().splitlines()[1] == \
            "epsilon,value,coverage,family_id,cells,seconds"
        assert len(table) == 4
        verdict = json.loads((tmp_path / "verdict.json").read_text())
        assert verdict["kind"] == "finite_limit"
        assert abs(verdict["value_or_rate"] - 0.41123) < 0.01
        assert verdict["evidence_csv_path"] == "sweep.csv" and "#" in verdict
        mirror = json.loads((tmp_path / "sweep.json").read_text())
        assert {"extrapolated_limit", "loglog_slope"} <= set(mirror)

    def test_rigid_zero(self, tmp_path):
        assert main(["sweep", "--field", "rigid(A_skew=[0,1,-1,0], h=[1,2])", "--variant",
                     "skew_inf", "--epsilons", "dyadic(4,16)", "--out", str(tmp_path)]) == 0
        v = json.loads((tmp_path / "verdict.json").read_text())
        assert v["kind"] == "zero" and v["rigid_fit"]["residual"] < 1e-7

    def test_singular_divergent(self, tmp_path):
        assert main(["sweep", "--field", "singular(delta=1)", "--set", "ambient.lo=-0.5,-0.5",
                     "--set", "ambient.hi=0.5,0.5", "--out", str(tmp_path)]) == 0
        v = json.loads((tmp_path / "verdict.json").read_text())
        assert v["kind"] == "divergent"

    def test_deterministic(self, tmp_path):
        args = ["sweep", "--epsilons", "dyadic(4,16)", "--seed", "3"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b"), "--threads", "1"]) == 0

        def strip(p):
            lines = (p / "sweep.csv").read_text().splitlines()
            return [line.rsplit(",", 1)[0] for line in lines]

        assert strip(tmp_path / "a") == strip(tmp_path / "b")

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("field = linear(A=[1,2,0,1])\nepsilons = 1/4, 1/8, 1/16\n"
                       f"output.dir = {tmp_path / 'out'}\n")
        assert main(["sweep", "--config", str(cfg)]) == 0
        vals = {float(r["value"]) for r in rows(tmp_path / "out" / "sweep.csv")}
        assert all(abs(v - 6 / 12) < 1e-12 for v in vals)

    def test_error_records_epsilon(self, tmp_path, capsys):
        code = main(["sweep", "--variant", "skew_inf", "--p", "3", "--field", "sine2d",
                     "--set", "functional.solver.max_iters=1",
                     "--set", "functional.solver.tol=1e-14", "--out", str(tmp_path)])
        assert code == 3
        assert "epsilon=0.125" in capsys.readouterr().err

    def test_dimension_mismatch(self, tmp_path):
        assert main(["sweep", "--set", "ambient.lo=0,0,0", "--set", "ambient.hi=1,1,1",
                     "--out", str(tmp_path)]) == 2


class TestCheck:
    def test_mean_oscillation(self, tmp_path):
        assert main(["check", "--out", str(tmp_path)]) == 0
        table = rows(tmp_path / "check.csv")
        assert all(r["status"] in ("pass", "info") for r in table)

    def test_trivial(self, tmp_path):
        assert main(["check", "--variant", "trivial", "--out", str(tmp_path)]) == 0
        assert all(float(r["violation"]) == 0 for r in rows(tmp_path / "check.csv"))

    def test_forced_failure(self, tmp_path):
        assert main(["check", "--tol", "1e-20", "--out", str(tmp_path)]) == 1


class TestOther:
    def test_gamma(self, tmp_path):
        assert main(["gamma", "--p", "1,2", "--out", str(tmp_path)]) == 0
        g = [float(r["gamma"]) for r in rows(tmp_path / "gamma.csv")]
        assert g == pytest.approx([0.25, 1 / 12], abs=1e-4)

    def test_characterize(self, tmp_path):
        assert main(["characterize", "--field", "singular(delta=1)", "--variant", "affine_inf",
                     "--set", "ambient.lo=-0.5,-0.5", "--set", "ambient.hi=0.5,0.5",
                     "--out", str(tmp_path)]) == 0
        v = json.loads((tmp_path / "characterize.json").read_text())
        assert v["kind"] == "divergent" and -1.3 <= v["divergence_exponent"] <= -0.7
        assert v["null_dim"] == 4

    def test_usage_errors(self, tmp_path):
        assert main([]) == 2
        assert main(["psi", "--set", "bogus=1"]) == 2
        assert main(["psi", "--threads", "0"]) == 2
        assert main(["psi", "--config", str(tmp_path / "missing.cfg")]) == 2
