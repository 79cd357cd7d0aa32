"""Tests for the dlnn command line."""
import json

import pytest
from typer.testing import CliRunner

from pydlnn.cli import app
from pydlnn.network import Architecture
from pydlnn.patterns import ROW_COLUMN_PAIRING, ConjectureReport, Counterexample

SINGLE = "H=1,m=1,dx=1,dy=1,d=1"


@pytest.fixture
def runner():
    """CLI runner."""
    return CliRunner()


@pytest.fixture
def system_file(runner, tmp_path):
    """Gradient system of the single-neuron network written by ``generate``."""
    path = tmp_path / "system.txt"
    result = runner.invoke(app, ["generate", "--arch", SINGLE, "--seed", "2", "-o", str(path)])
    assert result.exit_code == 0
    return path


def test_generate(runner, system_file, tmp_path):
    """Test writing a system and the sampled instance."""
    instance = tmp_path / "instance.json"
    result = runner.invoke(
        app, ["generate", "-a", SINGLE, "-s", "2", "--instance", str(instance)]
    )
    assert result.exit_code == 0
    assert system_file.read_text() in result.output
    assert set(json.loads(instance.read_text())) >= {"X", "Y"}


def test_bad_architecture(runner):
    """Test that a malformed architecture is a usage error."""
    result = runner.invoke(app, ["generate", "--arch", "H=one"])
    assert result.exit_code == 2


def test_bounds(runner):
    """Test the bounds CSV."""
    result = runner.invoke(app, ["bounds", "--arch", SINGLE, "--arch", "H=1,m=2,dx=2,dy=2,d=1"])
    assert result.exit_code == 0
    lines = [line for line in result.output.splitlines() if line.startswith(("arch", '"'))]
    assert lines[0] == "arch,N,CBB,BKK_torus,BKK_affine,B_C*,B_C"
    assert lines[1].startswith(f'"{SINGLE}",2,9,')
    assert lines[1].endswith(",5,4,5")
    assert lines[2].startswith('"H=1,m=2,dx=2,dy=2,d=1",4,81,')
    assert ",33," in lines[2]


def test_bounds_needs_an_architecture(runner):
    """Test the missing-argument error."""
    assert runner.invoke(app, ["bounds"]).exit_code == 2


def test_solve(runner, system_file, tmp_path):
    """Test solving a generated system."""
    out = tmp_path / "solutions.jsonl"
    result = runner.invoke(app, ["solve", str(system_file), "-o", str(out)])
    assert result.exit_code == 0
    assert "N_C=5 N_C*=4" in result.output
    assert len(out.read_text().splitlines()) == 5


def test_solve_missing_file(runner, tmp_path):
    """Test an unreadable system file."""
    result = runner.invoke(app, ["solve", str(tmp_path / "nope.txt")])
    assert result.exit_code == 2


def test_reduce(runner):
    """Test the reduced system command and its architecture check."""
    result = runner.invoke(app, ["reduce", "--arch", SINGLE])
    assert result.exit_code == 0
    assert "N_C*=4" in result.output
    assert runner.invoke(app, ["reduce", "--arch", "H=2,m=1,dx=1,dy=1,d=1"]).exit_code == 2


def test_experiment_csv(runner, tmp_path):
    """Test one experiment printed as CSV."""
    result = runner.invoke(
        app,
        ["experiment", "-a", SINGLE, "-n", "1", "-o", str(tmp_path), "--format", "csv"],
    )
    assert result.exit_code == 0
    assert "d_i,d_x,d_y,N,CBB,BKK,B_C,B_C*,N_C,N_C*,max N_R" in result.output
    assert "1,1,1,2,9,5,5,4,5,4," in result.output


def test_experiment_bad_format(runner):
    """Test an unknown table format."""
    result = runner.invoke(app, ["experiment", "-a", SINGLE, "--format", "latex"])
    assert result.exit_code == 2


def test_verify_table_from_rows(runner, tmp_path):
    """Test comparing a CSV of rows with the packaged reference."""
    header = "d_i,d_x,d_y,N,CBB,BKK,N_C,N_C*,max N_R\n"
    good = tmp_path / "good.csv"
    good.write_text(header + "1,2,2,4,81,33,9,8,3\n")
    result = runner.invoke(
        app, ["verify-table", "--rows", str(good), "--table-title", "H=1, m=1"]
    )
    assert result.exit_code == 0
    assert "[H=1, m=1] Compared 1 row(s): 0 diff(s)" in result.output

    bad = tmp_path / "bad.csv"
    bad.write_text(header + "1,2,2,4,81,33,10,8,3\n")
    result = runner.invoke(app, ["verify-table", "--rows", str(bad), "--table-title", "H=1, m=1"])
    assert result.exit_code == 1
    assert "N_C expected 9, observed 10" in result.output

    assert runner.invoke(app, ["verify-table", "--rows", str(good)]).exit_code == 2


def test_verify_patterns_single_data_point(runner):
    """Test the census for one data point."""
    result = runner.invoke(app, ["verify-patterns", "--arch", SINGLE])
    assert result.exit_code == 0
    assert "| # | W_2 | W_1 | count | violations |" in result.output


def test_verify_patterns_two_data_points(runner, mocker):
    """Test that a counterexample for m = 2 fails the command."""
    report = ConjectureReport(arch=Architecture.parse("H=1,m=2,dx=1,dy=1,d=2"), trials=1)
    report.counterexamples.append(Counterexample(0, ROW_COLUMN_PAIRING, {}))
    probe = mocker.patch("pydlnn.cli.probe_conjecture_m2", return_value=report)
    result = runner.invoke(app, ["verify-patterns", "-a", "H=1,m=1,dx=1,dy=1,d=2", "--m", "2"])
    assert result.exit_code == 1
    assert probe.call_args.args[0].m == 2
    assert ROW_COLUMN_PAIRING in result.output


def test_invalid_thread_setting(runner, monkeypatch):
    """Test that a bad DLNN_THREADS value stops the command."""
    monkeypatch.setenv("DLNN_THREADS", "zero")
    result = runner.invoke(app, ["bounds", "--arch", SINGLE])
    assert result.exit_code == 2
    assert "DLNN_THREADS must be an integer" in result.output
