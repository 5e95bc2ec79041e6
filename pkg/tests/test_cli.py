

import io
import json

import pytest

from src.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


@pytest.fixture
def raw_file(tmp_path):
    def _write(text, name="sample.txt"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write


class TestFitCommand:
    """Tests for nbfit fit."""

    def test_prussian_json(self, prussian_path, capsys):
        """The frequency fixture fits to nu about 7.6072."""
        code = main(["fit", "--input", prussian_path, "--json"])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["model"] == "nb"
        assert doc["estimates"]["nu"] == pytest.approx(7.6072, abs=1e-3)
        assert doc["loglik"] == pytest.approx(-313.65, abs=0.01)
        assert doc["at_boundary"] is False

    def test_all_zero(self, raw_file, capsys):
        """All zeros take the degenerate branch."""
        code = main(["fit", "--input", raw_file("0 0 0 0"), "--json"])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["branch"] == "AllZero"
        assert doc["loglik"] == 0.0

    def test_poisson_model(self, raw_file, capsys):
        """--model poisson gives the closed-form fit."""
        code = main(["fit", "--input", raw_file("2 2 2"), "--model", "poisson", "--json"])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["estimates"]["lambda"] == 2.0

    def test_extended_model(self, raw_file, capsys):
        """--model enb falls back to the Poisson branch on underdispersed data."""
        code = main(["fit", "--input", raw_file("2 2 2"), "--model", "enb", "--json"])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["branch"] == "PoissonBranch"
        assert doc["estimates"]["p"] == 1.0

    def test_stdin(self, monkeypatch, capsys):
        """'-' reads the dataset from standard input."""
        monkeypatch.setattr("sys.stdin", io.StringIO("0 1 2 0"))
        code = main(["fit", "--input", "-", "--json"])
        assert code == EXIT_OK
        assert json.loads(capsys.readouterr().out)["input"]["n"] == 4

    def test_text_output(self, prussian_path, capsys):
        """Without --json a short table is printed."""
        assert main(["fit", "--input", prussian_path]) == EXIT_OK
        assert "loglik" in capsys.readouterr().out

    def test_bad_token(self, raw_file, capsys):
        """A negative count is a data error."""
        assert main(["fit", "--input", raw_file("1 -1")]) == EXIT_DATA

    def test_missing_file(self, tmp_path):
        """A missing file is a data error."""
        assert main(["fit", "--input", str(tmp_path / "absent.txt")]) == EXIT_DATA

    def test_empty_file(self, raw_file):
        """An empty dataset is a data error."""
        assert main(["fit", "--input", raw_file("")]) == EXIT_DATA

    def test_bad_fit_options(self, prussian_path, capsys):
        """epsilon above nu_max is a usage error."""
        code = main(["fit", "--input", prussian_path, "--nu-max", "1", "--epsilon", "2"])
        assert code == EXIT_USAGE
        assert "invalid fit options" in capsys.readouterr().err

    def test_no_command(self, capsys):
        """A missing subcommand is a usage error."""
        assert main([]) == EXIT_USAGE


class TestGofCommand:
    """Tests for nbfit gof."""

    def test_json_needs_seed(self, prussian_path, capsys):
        """--json without --seed is a usage error."""
        assert main(["gof", "--input", prussian_path, "--boot", "100", "--json"]) == EXIT_USAGE

    def test_replayable(self, prussian_path, capsys):
        """A fixed seed gives byte-identical JSON."""
        args = ["gof", "--input", prussian_path, "--boot", "100", "--seed", "7", "--json"]
        assert main(args) == EXIT_OK
        first = capsys.readouterr().out
        assert main(args) == EXIT_OK
        second = capsys.readouterr().out
        assert first == second
        doc = json.loads(first)
        assert doc["gof"]["B"] == 100
        assert doc["gof"]["seed"] == 7

    def test_too_few_replicates(self, prussian_path):
        """B below 100 is a usage error."""
        assert main(["gof", "--input", prussian_path, "--boot", "10", "--seed", "1"]) == EXIT_USAGE


class TestSimulateCommand:
    """Tests for nbfit simulate."""

    def test_poisson_json(self, capsys):
        """The JSON payload carries parameters, seed and values."""
        code = main(["simulate", "--dist", "pois", "--lambda", "3", "--n", "5", "--seed", "1", "--json"])
        assert code == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["params"] == {"lambda": 3.0}
        assert payload["seed"] == 1
        assert len(payload["values"]) == 5

    def test_deterministic(self, capsys):
        """A seed replays the same draws."""
        args = ["simulate", "--dist", "nb", "--nu", "2", "--p", "0.4", "--n", "20", "--seed", "5"]
        main(args)
        first = capsys.readouterr().out
        main(args)
        assert capsys.readouterr().out == first

    def test_invalid_parameters(self, capsys):
        """Out-of-range distribution flags are usage errors."""
        assert main(["simulate", "--dist", "nb", "--p", "1.5", "--n", "3", "--seed", "1"]) == EXIT_USAGE
        assert "invalid --nb parameters" in capsys.readouterr().err
        assert main(["simulate", "--dist", "pois", "--lambda", "-1", "--n", "3", "--seed", "1"]) == EXIT_USAGE


class TestVerifyCommand:
    """Tests for nbfit verify."""

    def test_g_positivity(self, capsys):
        """A small grid of G_lambda values passes."""
        code = main(["verify", "--check", "G-positivity", "--lambdas", "1", "5", "--nu-points", "5", "--json"])
        assert code == EXIT_OK
        rows = json.loads(capsys.readouterr().out)
        assert len(rows) == 10
        assert all(row["passed"] for row in rows)

    def test_diff_profile(self, capsys):
        """The D(y) structure holds from nu = 1e-2 up to 1e6."""
        code = main(["verify", "--check", "diff-profile", "--lambdas", "1", "10", "--nu-points", "6", "--json"])
        assert code == EXIT_OK
        rows = json.loads(capsys.readouterr().out)
        assert len(rows) == 12
        assert all(row["K1"] < row["Kstar"] < row["K2"] for row in rows)


class TestBenchCommand:
    """Tests for nbfit bench."""

    def test_moments(self, capsys, tmp_path):
        """The moment table has 25 rows and can be written as CSV."""
        out = tmp_path / "moments.csv"
        code = main(["bench", "--table", "moments", "--json", "--out", str(out)])
        assert code == EXIT_OK
        assert len(json.loads(capsys.readouterr().out)) == 25
        assert out.read_text(encoding="utf-8").startswith("nu,p,mean,variance")
