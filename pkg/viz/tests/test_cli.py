"""CLI tests, plus one end-to-end run against the solver when installed."""

import shutil
import subprocess

import numpy as np
import pytest
from click.testing import CliRunner

from porowave_viz import load_snapshot
from porowave_viz.cli import main

ZERO = np.zeros((2, 2, 1))


@pytest.fixture
def runner():
    return CliRunner()


def test_slices_default_fields(runner, write_snapshot, tmp_path):
    snap = write_snapshot({
        "p": np.arange(4.0).reshape(2, 2, 1) - 1.5,
        "tau_zz": ZERO, "v_z": ZERO, "energy": np.ones((2, 2, 1)),
    })
    out = tmp_path / "img"
    result = runner.invoke(main, ["slices", str(snap), "--out", str(out)])
    assert result.exit_code == 0, result.output
    echoed = result.output.splitlines()
    assert [p.rsplit("/", 1)[-1] for p in echoed] == [
        "slice_energy.png", "slice_p.png", "slice_tau_zz.png",
        "slice_v_z.png"]
    for line in echoed:
        assert (out / line.rsplit("/", 1)[-1]).exists()


def test_slices_axis_and_index_options(runner, write_snapshot, tmp_path):
    snap = write_snapshot({"p": ZERO})
    result = runner.invoke(main, [
        "slices", str(snap), "--fields", "p", "--axis", "x", "--index", "1",
        "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, [
        "slices", str(snap), "--fields", "p", "--axis", "z", "--index", "5",
        "--out", str(tmp_path)])
    assert result.exit_code != 0
    assert "outside" in result.stderr


def test_slices_missing_field_reports_available(runner, write_snapshot,
                                                tmp_path):
    snap = write_snapshot({"p": ZERO})
    result = runner.invoke(main, ["slices", str(snap), "--out",
                                  str(tmp_path)])
    assert result.exit_code != 0
    assert "available: p" in result.stderr


def test_slices_rejects_empty_field_list(runner, write_snapshot, tmp_path):
    snap = write_snapshot({"p": ZERO})
    result = runner.invoke(main, ["slices", str(snap), "--fields", " , "])
    assert result.exit_code != 0
    assert "no fields requested" in result.stderr


def test_converge_reports_rates(runner, write_report, tmp_path):
    report = write_report("case,N,norm,value,rate\n"
                          "0,20,1-norm,1e-2,\n0,40,1-norm,2.5e-3,2.0\n")
    out = tmp_path / "rates.png"
    result = runner.invoke(main, ["converge", str(report), "--out",
                                  str(out)])
    assert result.exit_code == 0, result.output
    assert "case 0 1-norm: rate 2.00" in result.output
    assert result.output.splitlines()[-1] == str(out)
    assert out.exists()


def test_converge_diagnoses_malformed_reports(runner, write_report):
    report = write_report("case,N,norm,value,rate\n0,20,1-norm,tiny,\n")
    result = runner.invoke(main, ["converge", str(report)])
    assert result.exit_code != 0
    assert "line 2" in result.stderr


def test_converge_requires_existing_file(runner, tmp_path):
    result = runner.invoke(main, ["converge", str(tmp_path / "nope.csv")])
    assert result.exit_code != 0


@pytest.mark.slow
def test_end_to_end_against_solver(runner, tmp_path):
    """Full pipeline: solver demo and convergence outputs in, figures out."""
    exe = shutil.which("porowave")
    if exe is None:
        pytest.skip("porowave CLI not on PATH")

    demo_dir = tmp_path / "demo"
    subprocess.run(
        [exe, "demo", "--nx", "8", "--ny", "8", "--nz", "16",
         "--out", str(demo_dir)],
        check=True, capture_output=True, text=True, timeout=1200)
    snaps = sorted(demo_dir.glob("snap_*.vtk"),
                   key=lambda p: int(p.stem.split("_")[1]))
    assert snaps, "demo wrote no snapshots"

    img_dir = tmp_path / "img"
    result = runner.invoke(main, ["slices", str(snaps[-1]), "--out",
                                  str(img_dir)])
    assert result.exit_code == 0, result.output
    assert sorted(p.name for p in img_dir.glob("slice_*.png")) == [
        "slice_energy.png", "slice_p.png", "slice_tau_zz.png",
        "slice_v_z.png"]

    view = load_snapshot(snaps[-1])
    bed = view.field("material_id") == 0
    assert bed.any() and not bed.all()
    assert float(view.field("e")[bed].max()) > 0.0

    conv_dir = tmp_path / "conv"
    subprocess.run(
        [exe, "converge", "0", "--resolutions", "6,8", "--out",
         str(conv_dir)],
        check=True, capture_output=True, text=True, timeout=1200)
    png = tmp_path / "fit.png"
    result = runner.invoke(main, ["converge", str(conv_dir / "report.csv"),
                                  "--out", str(png)])
    assert result.exit_code == 0, result.output
    assert png.exists()
    assert "case 0 1-norm: rate" in result.output
