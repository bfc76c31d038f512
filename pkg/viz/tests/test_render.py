"""Rendering tests: slice images and convergence plots."""

import numpy as np
import pytest

from porowave_viz import render_convergence, render_slices

ZERO = np.zeros((2, 2, 1))
TWO_POINT = """\
case,N,norm,value,rate
0,20,1-norm,1e-2,
0,40,1-norm,2.5e-3,2.0000
"""


def test_two_point_fitted_rate_is_exact(write_report, tmp_path):
    out = tmp_path / "rates.png"
    rates = render_convergence(write_report(TWO_POINT), out)
    # log(1e-2 / 2.5e-3) / log(40 / 20) is exactly 2.
    assert rates == {("0", "1-norm"): pytest.approx(2.0, abs=1e-12)}
    assert out.exists() and out.stat().st_size > 0


def test_single_norm_gives_one_series_per_case(write_report, tmp_path):
    text = ("case,N,norm,value,rate\n"
            "0,20,1-norm,1e-2,\n0,40,1-norm,2.5e-3,2.0\n"
            "3,20,1-norm,2e-2,\n3,40,1-norm,5e-3,2.0\n")
    rates = render_convergence(write_report(text), tmp_path / "r.png")
    assert set(rates) == {("0", "1-norm"), ("3", "1-norm")}


def test_component_norms_stay_off_the_plot(write_report, tmp_path):
    text = ("case,N,norm,value,rate\n"
            "0,20,1-norm,1e-2,\n0,40,1-norm,2.5e-3,2.0\n"
            "0,20,1-norm[tau_xx],3e-2,\n0,40,1-norm[tau_xx],8e-3,\n")
    rates = render_convergence(write_report(text), tmp_path / "r.png")
    assert set(rates) == {("0", "1-norm")}


def test_no_usable_series_writes_nothing(write_report, tmp_path):
    only_components = ("case,N,norm,value,rate\n"
                       "0,20,1-norm[tau_xx],3e-2,\n"
                       "0,40,1-norm[tau_xx],8e-3,\n")
    out = tmp_path / "none.png"
    with pytest.raises(ValueError, match="two or more"):
        render_convergence(write_report(only_components), out)
    assert not out.exists()

    single = "case,N,norm,value,rate\n0,20,1-norm,1e-2,\n"
    with pytest.raises(ValueError, match="two or more"):
        render_convergence(write_report(single, name="single.csv"), out)
    assert not out.exists()


def test_empty_report_writes_nothing(write_report, tmp_path):
    out = tmp_path / "none.png"
    with pytest.raises(ValueError, match="no data rows"):
        render_convergence(write_report("case,N,norm,value,rate\n"), out)
    assert not out.exists()


def test_zero_state_slices_render_flat_panels(write_snapshot, tmp_path):
    snap = write_snapshot({
        "p": ZERO, "tau_zz": ZERO, "v_z": ZERO, "energy": ZERO,
    })
    out = tmp_path / "img"
    written = render_slices(snap, ["e", "p", "tau_zz", "v_z"], out_dir=out)
    assert [p.rsplit("/", 1)[-1] for p in written] == [
        "slice_energy.png", "slice_p.png", "slice_tau_zz.png",
        "slice_v_z.png"]
    for path in written:
        assert (out / path.rsplit("/", 1)[-1]).stat().st_size > 0


def test_signed_field_with_negatives_renders(write_snapshot, tmp_path):
    snap = write_snapshot({"v_z": np.array([[[-2.0], [0.5]],
                                            [[1.0], [-0.25]]])})
    written = render_slices(snap, ["v_z"], out_dir=tmp_path, axis="x",
                            index=1)
    assert len(written) == 1


def test_alias_and_duplicate_requests_collapse(write_snapshot, tmp_path):
    snap = write_snapshot({"energy": np.ones((2, 2, 1))})
    written = render_slices(snap, ["e", "energy"], out_dir=tmp_path)
    assert len(written) == 1


def test_missing_field_lists_available_and_writes_nothing(write_snapshot,
                                                          tmp_path):
    snap = write_snapshot({"p": ZERO})
    out = tmp_path / "img"
    with pytest.raises(ValueError, match="available: p"):
        render_slices(snap, ["p", "v_z"], out_dir=out)
    assert not out.exists()
