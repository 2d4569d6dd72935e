import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ebcache.report import emit_report, make_report, normalize, render


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_nine_significant_digits(v):
    out = normalize(v)
    assert out == float(f"{v:.9g}")


def test_special_values_and_numpy():
    assert normalize([math.inf, -math.inf, math.nan]) == ["inf", "-inf", "nan"]
    assert normalize({"a": np.arange(3), "b": np.float32(0.5), "c": np.bool_(True)}) == \
        {"a": [0, 1, 2], "b": 0.5, "c": True}


def test_meta_block():
    rep = make_report("sweep", {}, [], seed=3, config_hash="abc", figure="table1")
    assert rep["meta"] == {"kind": "sweep", "seed": 3, "config_hash": "abc",
                           "version": rep["meta"]["version"], "figure": "table1"}


def test_json_round_trip(tmp_path):
    rep = make_report("x", {"w": 1 / 3}, [{"node": 0, "eb": 2 / 3}], seed=0, config_hash="h")
    path = tmp_path / "r.json"
    emit_report(rep, "json", path)
    assert json.loads(path.read_text()) == rep


def test_empty_csv_is_header_only():
    rep = make_report("sweep", {}, [], seed=0, config_hash="h")
    lines = render(rep, "csv", ["value", "w"]).splitlines()
    assert lines[0].startswith("# kind=sweep")
    assert lines[1:] == ["value,w"]


def test_csv_columns_stable_and_identical_bytes(tmp_path):
    rows = [{"b": 1.0 / 7, "a": 1}, {"a": 2, "c": None}]
    rep = make_report("x", {}, rows, seed=0, config_hash="h")
    text = render(rep, "csv")
    assert text.splitlines()[1] == "b,a,c"
    assert text.splitlines()[2] == "0.142857143,1,"
    a = emit_report(rep, "csv", tmp_path / "a.csv")
    b = emit_report(rep, "csv", tmp_path / "b.csv")
    assert a == b == (tmp_path / "a.csv").read_text()


def test_unknown_format_and_unwritable(tmp_path):
    rep = make_report("x", {}, [], seed=0, config_hash="h")
    with pytest.raises(ValueError):
        render(rep, "xml")
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_report(rep, "json", blocker / "sub" / "r.json")
