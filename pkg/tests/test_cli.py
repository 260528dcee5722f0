import io
import subprocess
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from obfuskit.cli import main
from obfuskit.designer import design_mechanism
from obfuskit.errors import MassMismatch, NegativeMass, ParseError
from obfuskit.evaluator import SweepRow
from obfuskit.formats import fmt, format_instance, format_mechanism, parse_instance, parse_mechanism
from obfuskit.instances import independent_bits

DATA = resources.files("obfuskit") / "data"
BITS = str(DATA / "independent_bits.txt")
GENERIC = str(DATA / "generic_3x2x5.txt")
INFEASIBLE = str(DATA / "secret_is_data.txt")


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


class TestFormats:
    def test_fmt(self):
        assert fmt(0.1) == "0.1"
        assert fmt(-0.0) == "0"
        assert fmt(1 / 3) == "0.333333333333"
        assert fmt(float("nan")) == "nan"

    def test_instance_round_trip(self):
        j = independent_bits()
        back, notes = parse_instance(format_instance(j))
        np.testing.assert_array_equal(back.tensor, j.tensor)
        assert notes == []

    def test_renormalise_notice(self):
        j, notes = parse_instance("sizes 1 1 2\n0 0 0 0.5\n0 0 1 0.5000000001\n")
        assert abs(j.tensor.sum() - 1) <= 1e-15 and notes

    @pytest.mark.parametrize(
        "text",
        [
            "0 0 0 1\n",
            "sizes 1 1 2\n0 0 0 0.5\n0 0 0 0.5\n",
            "sizes 1 1 2\n0 0 2 1\n",
            "sizes 1 1 2\n0 0 0 abc\n",
            "sizes 1 1 2\n0 0 0\n",
        ],
    )
    def test_parse_errors(self, text):
        with pytest.raises(ParseError):
            parse_instance(text)

    def test_mass_errors(self):
        with pytest.raises(MassMismatch):
            parse_instance("sizes 1 1 2\n0 0 0 0.5\n0 0 1 0.4\n")
        with pytest.raises(NegativeMass):
            parse_instance("sizes 1 1 2\n0 0 0 1.1\n0 0 1 -0.1\n")

    def test_mechanism_round_trip(self):
        j, _ = parse_instance(Path(GENERIC).read_text())
        mech = design_mechanism(j, m=2)
        back = parse_mechanism(format_mechanism(mech))
        np.testing.assert_allclose(back.P_X_given_Z.matrix, mech.P_X_given_Z.matrix, atol=1e-12, rtol=0)
        np.testing.assert_allclose(back.P_Z_given_X.matrix, mech.P_Z_given_X.matrix, atol=1e-12, rtol=0)
        np.testing.assert_allclose(back.p_Z.values, mech.p_Z.values, atol=1e-12, rtol=0)
        assert back.epsilon == mech.epsilon and back.gains == mech.gains
        assert tuple(back.predicted) == tuple(mech.predicted)


class TestCommands:
    def test_validate(self):
        code, out, _ = run("validate", BITS, "--bits")
        assert code == 0
        assert "I(U;X) [bits]: 1" in out and "I(S;X) [bits]: 1" in out

    def test_feasibility_codes(self):
        code, out, _ = run("feasibility", BITS)
        assert code == 0 and "null_dim: 2" in out and "top_gain: 1" in out
        code, out, _ = run("feasibility", INFEASIBLE)
        assert code == 1 and "feasible: false" in out

    def test_design(self, tmp_path):
        m = tmp_path / "m.txt"
        code, out, _ = run("design", BITS, "--epsilon", "1", "--out", str(m))
        assert code == 0 and m.exists()
        assert "I(U;Z)  0.5  0.69314718056" in out
        code, _, err = run("design", INFEASIBLE)
        assert code == 1 and "InfeasibleInstance" in err

    def test_design_domain_errors(self):
        assert run("design", BITS, "--modes", "3")[0] == 2
        assert run("design", BITS, "--epsilon", "5")[0] == 2
        code, _, err = run("design", BITS, "--rate", "0")
        assert code == 0 and "warning" in err

    def test_parse_error_exit(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("sizes 1 1 2\n0 0 0 x\n")
        assert run("validate", str(bad))[0] == 3
        assert run("validate", str(tmp_path / "missing.txt"))[0] == 3
        mass = tmp_path / "mass.txt"
        mass.write_text("sizes 1 1 2\n0 0 0 0.5\n0 0 1 0.4\n")
        assert run("validate", str(mass))[0] == 2

    def test_sweep(self, tmp_path):
        code, out, _ = run("sweep", BITS, "--eps-grid", "0.001,0.1,0.01")
        lines = out.splitlines()
        assert code == 0 and lines[0] == SweepRow.CSV_HEADER and len(lines) == 4
        assert [float(line.split(",")[0]) for line in lines[1:]] == [0.1, 0.01, 0.001]

    def test_sweep_empty_grid(self):
        code, out, _ = run("sweep", BITS, "--eps-grid", "")
        assert code == 0 and out == SweepRow.CSV_HEADER + "\n"

    def test_sweep_out_of_range_row(self):
        code, out, err = run("sweep", BITS, "--eps-grid", "2,0.1")
        assert code == 0 and "nan" in out.splitlines()[1] and err

    def test_decompose(self, tmp_path):
        code, out, _ = run("decompose", BITS, "--pair", "SX")
        rows = [line.split(",") for line in out.splitlines()]
        assert code == 0 and rows[0][:2] == ["i", "sigma"]
        assert float(rows[1][1]) == pytest.approx(1.0, abs=1e-10)
        assert float(rows[1][-1]) <= 1e-10
        assert run("decompose", BITS, "--pair", "UZ")[0] == 2
        m = tmp_path / "m.txt"
        run("design", BITS, "--out", str(m))
        assert run("decompose", BITS, "--pair", "UZ", "--mechanism", str(m))[0] == 0
        assert run("decompose", str(m), "--pair", "XZ")[0] == 0
        assert run("decompose", str(m), "--pair", "SZ")[0] == 2

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "obfuskit.cli", "feasibility", BITS], capture_output=True, text=True)
        assert r.returncode == 0 and "feasible: true" in r.stdout
