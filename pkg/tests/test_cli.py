import json
import math

import jsonschema
import numpy as np
import pytest

from lindley_laplace import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


class TestGrid:
    def test_inclusive(self):
        np.testing.assert_allclose(cli.parse_grid("0:1:0.25"), [0, 0.25, 0.5, 0.75, 1])

    @pytest.mark.parametrize("text", ["0:0:1", "1:0:0.1", "0:1:0", "0:1", "a:b:c", "0:1:-1"])
    def test_rejects(self, text):
        with pytest.raises(cli.UsageError):
            cli.parse_grid(text)


class TestDensity:
    def test_csv(self, capsys):
        code, out, _ = run(capsys, "density", "--mu", "0.3", "--sigma", "1", "--x", "1",
                           "--n", "1", "--grid", "0:3:0.5")
        assert code == 0
        assert out.startswith("# schema_version=1.0.0 command=density")
        assert "atom=0.1362658965" in out
        header, rows = csv_rows(out)
        assert header == ["u", "f_1(u)"]
        assert float(rows[1][1]) == pytest.approx(math.exp(-0.8) / 2, rel=1e-15)

    def test_figure_grid_sweeps(self, capsys):
        code, out, _ = run(capsys, "density", "--mu", "0.3", "--sigma", "1", "--x", "1",
                           "--n", "2,3,5,9", "--grid", "0:5:1", "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert [r["metadata"]["n"] for r in doc["records"]] == [2, 3, 5, 9]
        code, out, _ = run(capsys, "density", "--mu", "-0.3", "--sigma", "0.5,1,2", "--x", "1",
                           "--n", "9", "--grid", "0:5:1", "--format", "json")
        doc = json.loads(out)
        assert [r["metadata"]["params"]["sigma"] for r in doc["records"]] == [0.5, 1, 2]
        assert {r["metadata"]["case"] for r in doc["records"]} == {"PosMuNegSmall/case-x+nmu<=0"}

    def test_json_validates(self, capsys):
        code, out, _ = run(capsys, "density", "--mu", "-1.2", "--sigma", "1", "--x", "1",
                           "--n", "3", "--grid", "0:2:1", "--format", "json")
        doc = json.loads(out)
        jsonschema.validate(doc, cli.load_schema())
        rec = doc["records"][0]
        assert rec["metadata"]["regime"] == "PosMuNegLarge"
        assert rec["atom"] == pytest.approx(rec["diagnostics"]["c_n"])

    @pytest.mark.parametrize("argv", [
        ["density", "--mu", "0.3", "--sigma", "1", "--n", "2", "--grid", "0:0:1"],
        ["density", "--mu", "0.3", "--sigma", "-1", "--n", "2"],
        ["density", "--mu", "0.3", "--sigma", "1", "--n", "0"],
        ["density", "--mu", "0.3", "--sigma", "1", "--x", "-1", "--n", "2"],
        ["density", "--mu", "0.3", "--sigma", "1,2", "--n", "2,3"],
        ["density", "--sigma", "1", "--n", "2"],
        ["nonsense"],
    ])
    def test_usage_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2

    def test_writes_file(self, tmp_path, capsys):
        path = tmp_path / "f.csv"
        code, out, _ = run(capsys, "density", "--mu", "0.3", "--sigma", "1", "--n", "2",
                           "--grid", "0:1:0.5", "--out", str(path))
        assert code == 0 and out == ""
        assert path.read_text().startswith("# schema_version")


class TestFet:
    def test_pmf_and_cdf(self, capsys):
        code, out, _ = run(capsys, "fet", "--mu", "0.3", "--sigma", "1", "--x", "1", "--h", "3",
                           "--nmax", "200", "--cdf")
        assert code == 0
        header, rows = csv_rows(out)
        assert header == ["n", "P(n|x)", "P(N<=n|x)"]
        assert float(rows[0][1]) == pytest.approx(math.exp(-1.7) / 2, rel=1e-15)
        assert 0.999 <= float(rows[-1][2]) <= 1 + 1e-10

    def test_zero_drift_and_mean(self, capsys):
        code, out, _ = run(capsys, "fet", "--mu", "0", "--sigma", "1", "--x", "1", "--h", "3",
                           "--nmax", "5", "--mean", "--format", "json")
        rec = json.loads(out)["records"][0]
        assert rec["metadata"]["regime"] == "FetMuZero"
        assert rec["diagnostics"]["mean"] > 1

    def test_small_scale(self, capsys):
        code, out, _ = run(capsys, "fet", "--mu", "0.3", "--sigma", "0.1", "--x", "1",
                           "--h", "3", "--nmax", "20")
        assert code == 0

    @pytest.mark.parametrize("argv", [
        ["fet", "--mu", "0", "--sigma", "1", "--h", "3", "--nmax", "0"],
        ["fet", "--mu", "0", "--sigma", "1", "--x", "3", "--h", "3"],
        ["fet", "--mu", "0", "--sigma", "1"],
    ])
    def test_usage_errors(self, capsys, argv):
        assert run(capsys, *argv)[0] == 2


class TestCompare:
    def test_density_quadrature(self, capsys):
        code, out, _ = run(capsys, "compare", "density", "--mu", "0.3", "--sigma", "1",
                           "--x", "1", "--n", "5", "--oracle", "quad")
        assert code == 0
        assert "# verdict=PASS" in out

    def test_fet_simulation(self, capsys):
        code, out, _ = run(capsys, "compare", "fet", "--mu", "-2", "--sigma", "1", "--h", "1",
                           "--oracle", "mc", "--trajectories", "1000000", "--seed", "42",
                           "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert doc["verdict"] == "PASS"
        assert doc["records"][0]["metadata"]["seed"] == 42

    def test_unknown_oracle(self, capsys):
        assert run(capsys, "compare", "fet", "--mu", "0", "--sigma", "1", "--h", "1",
                   "--oracle", "magic")[0] == 2

    def test_fet_needs_boundary(self, capsys):
        assert run(capsys, "compare", "fet", "--mu", "0", "--sigma", "1", "--oracle", "quad")[0] == 2

    def test_failed_comparison_exit_code(self, capsys):
        # a coarse grid misses the 1e-4 quadrature tolerance
        code, out, err = run(capsys, "compare", "density", "--mu", "0.3", "--sigma", "1",
                             "--x", "1", "--n", "2", "--oracle", "quad", "--delta", "0.25")
        assert code == cli.EXIT_FAIL
        assert "FAIL" in out

    def test_deterministic_across_threads(self, capsys):
        argv = ["compare", "density", "--mu", "-0.3", "--sigma", "1", "--x", "1", "--n", "3",
                "--oracle", "mc", "--trajectories", "150000", "--seed", "8"]
        outs = [run(capsys, *argv, "--threads", t)[1] for t in ("1", "4", "4")]
        assert outs[0] == outs[1] == outs[2]


class TestCusum:
    def test_mapping_reported(self, capsys):
        code, out, _ = run(capsys, "cusum", "--mu", "0", "--sigma", "1", "--theta", "0.5",
                           "--h", "3", "--x0", "0", "--nmax", "100", "--format", "json")
        assert code == 0
        rec = json.loads(out)["records"][0]
        assert rec["metadata"]["llr_location"] == pytest.approx(-0.2876821, abs=1e-7)
        assert rec["metadata"]["llr_scale"] == 0.5
        assert rec["diagnostics"]["pmf_sum"] == pytest.approx(0.3977, abs=5e-4)

    @pytest.mark.parametrize("theta", ["1.5", "0", "-0.5"])
    def test_bad_tilt(self, capsys, theta):
        assert run(capsys, "cusum", "--mu", "0", "--sigma", "1", "--theta", theta)[0] == 2


def test_schema_rejects_bad_document():
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"schema_version": "0.1", "command": "density", "records": []},
                            cli.load_schema())


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "lindley_laplace", "fet", "--mu", "2", "--sigma", "1",
                        "--h", "1", "--nmax", "2"], capture_output=True, text=True)
    assert r.returncode == 0
    _, rows = csv_rows(r.stdout)
    assert float(rows[1][1]) == pytest.approx(0.1590462, abs=1e-7)
