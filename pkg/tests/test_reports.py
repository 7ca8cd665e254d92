import json
import os

import numpy as np
import pytest

from ergonet.reports import ExperimentReport, format_cell, loglog_slope


@pytest.mark.parametrize("value, text", [
    (True, "true"), (np.bool_(False), "false"), (3, "3"), (np.int64(-2), "-2"),
    (0.1, "0.10000000000000001"), (np.float32(0.5), "0.5"), (None, ""), ("a", "a")])
def test_format_cell(value, text):
    assert format_cell(value) == text


def test_csv_sorted_and_roundtrip(tmp_path):
    rep = ExperimentReport("demo", ["x", "y"], plot=("x", "y"))
    rep.add_row(2, 0.25)
    rep.add_row(1, 0.5)
    rep.add_verdict("ok", True, "fine")
    assert rep.to_csv() == "x,y\n1,0.5\n2,0.25\n"
    assert rep.plot_csv().startswith("x,y\n1,")
    back = ExperimentReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back.to_csv() == rep.to_csv() and back.passed
    paths = rep.write(tmp_path / "out")
    assert sorted(paths) == ["plot.csv", "report.csv", "report.json"]
    assert not any(p.endswith(".tmp") for p in os.listdir(tmp_path / "out"))
    with pytest.raises(ValueError):
        rep.add_row(1)


def test_failing_verdict_and_json_values():
    rep = ExperimentReport("demo", ["x"])
    rep.add_verdict("bad", False)
    rep.metadata["z"] = 1 + 2j
    rep.metadata["inf"] = float("inf")
    d = rep.to_dict()
    assert not rep.passed and not d["passed"]
    assert d["metadata"]["z"] == [1.0, 2.0] and d["metadata"]["inf"] == "inf"
    assert rep.plot_csv() is None


def test_loglog_slope():
    xs = 2.0 ** np.arange(4, 12)
    assert loglog_slope(xs, 3 / xs) == pytest.approx(-1.0)
