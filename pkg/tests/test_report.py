import json
import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from koenigs.report import CSV_COLUMNS, normalise, table_csv, to_csv, to_json


def test_float_format_round_trips():
    text = to_json({"x": 0.1, "y": 1 / 3, "z": 2.0})
    data = json.loads(text)
    assert data == {"x": 0.1, "y": 1 / 3, "z": 2.0}
    assert '"z": 2.0' in text


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_any_finite_float_round_trips(x):
    assert json.loads(to_json({"x": x}))["x"] == x


def test_complex_and_non_finite():
    data = json.loads(to_json({"c": 1 - 2j, "n": math.nan, "p": math.inf, "m": -math.inf}))
    assert data == {"c": [1.0, -2.0], "n": "nan", "p": "inf", "m": "-inf"}


def test_numpy_values_are_normalised():
    obj = normalise({"a": np.float64(1.5), "b": np.arange(3), "c": np.complex128(1j), "d": np.bool_(True)})
    assert obj == {"a": 1.5, "b": [0, 1, 2], "c": 1j, "d": True}
    assert type(obj["b"][0]) is int


def test_key_order_is_insertion_order():
    text = to_json({"b": 1, "a": {"z": 1, "y": 2}})
    assert text.index('"b"') < text.index('"a"') < text.index('"z"') < text.index('"y"')


def test_identical_input_identical_bytes():
    rep = {"results": {"v": [0.1 * k for k in range(10)], "c": 0.3 + 0.7j}}
    assert to_json(rep) == to_json(dict(rep))


def test_csv_projection():
    rep = {"command": "slc", "results": {"c": 2.5 + 0j, "flags": ["a"]}, "checks": [{"passed": True}], "errors": []}
    lines = to_csv(rep).splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert "slc,results.c,,2.5,0.0," in lines
    assert "slc,results.flags,0,,,a" in lines
    assert "slc,checks.passed,0,,,true" in lines


def test_table_csv():
    text = table_csv(("t", "F"), [(1.0, 0.1), (2.0, math.nan)])
    assert text == "t,F\n1.0,0.10000000000000001\n2.0,nan\n"
