"""Tests for the porowave command line."""

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from porowave.cli import main
from porowave.output import read_report


@pytest.fixture
def runner():
    return CliRunner()


def _config(tmp_path, doc, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def test_case_writes_report_and_snapshot(runner, tmp_path):
    out = tmp_path / "results"
    result = runner.invoke(main, ["case", "0", "--n", "6",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "1-norm" in result.output
    assert (out / "report.csv").exists()
    snaps = list(out.glob("snap_*.vtk"))
    assert len(snaps) == 1
    rows = read_report(out / "report.csv")
    assert {r["norm"] for r in rows} >= {"1-norm", "max-norm"}
    assert all(r["rate"] is None for r in rows)


def test_case_rejects_out_of_range_id(runner, tmp_path):
    result = runner.invoke(main, ["case", "40", "--n", "6",
                                  "--out", str(tmp_path)])
    assert result.exit_code != 0
    result = runner.invoke(main, ["case", "0", "--n", "2",
                                  "--out", str(tmp_path)])
    assert result.exit_code != 0


def test_converge_writes_rates_and_plot(runner, tmp_path):
    out = tmp_path / "conv"
    result = runner.invoke(main, ["converge", "0",
                                  "--resolutions", "6,8",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "fitted 1-norm rate" in result.output
    rows = read_report(out / "report.csv")
    stacked = [r for r in rows if r["norm"] == "1-norm"]
    assert len(stacked) == 2
    assert stacked[0]["rate"] is not None
    assert (out / "converge.png").exists()


def test_converge_requires_two_resolutions(runner, tmp_path):
    result = runner.invoke(main, ["converge", "0", "--resolutions", "8",
                                  "--out", str(tmp_path)])
    assert result.exit_code != 0
    assert "two resolutions" in result.output


def test_run_dispatches_a_box_config(runner, tmp_path):
    cfg = _config(tmp_path, {
        "problem": "box",
        "box": {
            "mapping": {"kind": "scaled-box", "edge": 0.3},
            "dims": [6, 6, 6],
            "material": {"name": "brine"},
            "initial": {"kind": "plane-wave", "ell": [1, 0, 0],
                        "family": "Acoustic"},
            "boundaries": {"x": ["analytic", "analytic"],
                           "y": ["analytic", "analytic"],
                           "z": ["analytic", "analytic"]},
            "t_end": 1.0e-5,
        },
        "output": {"dir": str(tmp_path / "from_config")},
    })
    result = runner.invoke(main, ["run", cfg])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "from_config" / "report.csv").exists()


def test_run_honors_explicit_out_over_config(runner, tmp_path):
    cfg = _config(tmp_path, {
        "problem": "case", "case": {"id": 0, "n": 6},
        "output": {"dir": str(tmp_path / "ignored")},
    })
    out = tmp_path / "explicit"
    result = runner.invoke(main, ["run", cfg, "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "report.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_run_reports_config_errors_with_nonzero_exit(runner, tmp_path):
    cfg = _config(tmp_path, {
        "problem": "box",
        "box": {
            "mapping": {"kind": "scaled-box", "edge": 0.3},
            "dims": [6, 6, 6],
            "material": {"name": "brine"},
            "initial": {"kind": "zero"},
            "boundaries": {"x": ["analytic", "analytic"]},
            "t_end": 1.0e-5,
        },
    })
    result = runner.invoke(main, ["run", cfg])
    assert result.exit_code != 0
    assert "plane-wave initial" in result.output


def test_run_missing_file_fails_cleanly(runner, tmp_path):
    result = runner.invoke(main, ["run", str(tmp_path / "nope.yaml")])
    assert result.exit_code != 0


def test_geometry_check_passes_and_fails(runner, tmp_path):
    good = _config(tmp_path, {
        "problem": "box",
        "box": {
            "mapping": {"kind": "tilt", "edge": 0.5, "sigma": 0.05},
            "dims": [6, 6, 6],
            "material": {"name": "sandstone"},
            "initial": {"kind": "zero"},
            "t_end": 1.0e-5,
        },
    }, name="good.yaml")
    result = runner.invoke(main, ["geometry-check", good])
    assert result.exit_code == 0, result.output
    assert "geometry check passed" in result.output
    assert "closed_surface_residual" in result.output

    # sigma large enough to invert ghost corners at this resolution
    inverted = _config(tmp_path, {
        "problem": "box",
        "box": {
            "mapping": {"kind": "tilt", "edge": 0.5, "sigma": 0.2},
            "dims": [6, 6, 6],
            "material": {"name": "sandstone"},
            "initial": {"kind": "zero"},
            "t_end": 1.0e-5,
        },
    }, name="inverted.yaml")
    result = runner.invoke(main, ["geometry-check", inverted])
    assert result.exit_code != 0
    assert "inverted cell" in result.output


def test_limiter_study_reports_both_ratios(runner, tmp_path):
    out = tmp_path / "lim"
    result = runner.invoke(main, ["limiter-study", "--n", "10",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "classical" in result.output and "e-full" in result.output
    rows = read_report(out / "report.csv")
    cases = {r["case"] for r in rows}
    assert cases == {"5-classical", "5-e-full"}
    assert (out / "limiter.png").exists()


@pytest.mark.slow
def test_demo_cli_smoke(runner, tmp_path):
    out = tmp_path / "demo"
    result = runner.invoke(main, ["demo", "--nx", "8", "--ny", "8",
                                  "--nz", "16", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "total energy" in result.output
    assert (out / "slice_final.csv").exists()
    assert list(out.glob("snap_*.vtk"))
    data = np.loadtxt(out / "slice_final.csv", delimiter=",", skiprows=1)
    assert np.all(np.isfinite(data))


def test_help_lists_all_subcommands(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for cmd in ("run", "case", "converge", "limiter-study", "demo",
                "geometry-check"):
        assert cmd in result.output
