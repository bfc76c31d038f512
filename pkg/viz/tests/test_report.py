"""Report parser tests: typed rows and line-numbered diagnostics."""

import pytest

from porowave_viz import read_report

GOOD = """\
# solver convergence report
case,N,norm,value,rate
0,20,1-norm,1e-2,
# interleaved comment
0,40,1-norm,2.5e-3,2.0000
"""


def test_typed_rows_and_comment_skipping(write_report):
    rows = read_report(write_report(GOOD))
    assert rows == [
        {"case": "0", "N": 20, "norm": "1-norm", "value": 0.01, "rate": None},
        {"case": "0", "N": 40, "norm": "1-norm", "value": 0.0025,
         "rate": 2.0},
    ]
    assert isinstance(rows[0]["N"], int)
    assert isinstance(rows[1]["rate"], float)


def test_header_mismatch_is_diagnosed(write_report):
    path = write_report("case,N,norm,value\n0,20,1-norm,1e-2\n")
    with pytest.raises(ValueError, match="line 1: expected header"):
        read_report(path)


@pytest.mark.parametrize("row, match", [
    ("0,twenty,1-norm,1e-2,", "line 3: N is not an integer"),
    ("0,20,1-norm,tiny,", "line 3: value is not a number"),
    ("0,20,1-norm,1e-2,fast", "line 3: rate is not a number"),
    ("0,20,1-norm,1e-2", "line 3: expected 5 fields, got 4"),
])
def test_malformed_rows_carry_line_numbers(write_report, row, match):
    path = write_report(f"# note\ncase,N,norm,value,rate\n{row}\n")
    with pytest.raises(ValueError, match=match):
        read_report(path)


def test_empty_reports_are_errors(write_report):
    with pytest.raises(ValueError, match="no data rows"):
        read_report(write_report("case,N,norm,value,rate\n"))
    with pytest.raises(ValueError, match="no header line"):
        read_report(write_report("# only chatter\n"))
    with pytest.raises(ValueError, match="no header line"):
        read_report(write_report(""))
