import json
import math

import numpy as np
from hypothesis import given, strategies as st

from waveguide import report as rp

ECHO = {"text": "", "overrides": [], "sha256": "ab" * 32}


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_through_text(x):
    assert float(rp.fmt(x)) == x
    assert json.loads(rp.dumps({"x": x}))["x"] == x


def test_non_finite_values():
    assert rp.fmt(float("nan")) == "nan" and rp.fmt(-math.inf) == "-inf"
    assert json.loads(rp.dumps({"a": float("nan"), "b": np.inf}))["a"] is None


def test_plain_converts_numpy_and_dataclasses():
    from waveguide.spectral import BC

    out = rp.plain({"a": np.arange(3), "b": np.float64(0.1), "c": np.bool_(True), "d": BC.NEUMANN, 1: (1, 2)})
    assert out == {"a": [0, 1, 2], "b": 0.1, "c": True, "d": "neumann", "1": [1, 2]}


def test_json_envelope(tmp_path):
    path = rp.write_json(tmp_path / "x.json", "demo", {"value": 0.1}, ECHO)
    doc = json.loads(open(path).read())
    assert doc["schema"] == 1 and doc["kind"] == "demo"
    assert doc["config_sha256"] == ECHO["sha256"] and doc["value"] == 0.1


def test_csv_header_and_cells(tmp_path):
    rows = [{"a": 0.1, "b": True, "c": None, "d": [1.0, 2.0]}]
    path = rp.write_csv(tmp_path / "x.csv", rows, ["a", "b", "c", "d"], "ff")
    lines = open(path).read().splitlines()
    assert lines[0] == "# config_sha256=ff"
    assert lines[2] == "0.10000000000000001,true,,1 2"
    assert rp.read_csv(path) == [{"a": "0.10000000000000001", "b": "true", "c": "", "d": "1 2"}]


def test_series_file(tmp_path):
    path = rp.write_series(tmp_path / "s.dat", [0.0, 1.0], [2.0, 3.0], "ff", ("t", "u"))
    assert open(path).read() == "# config_sha256=ff\n# t u\n0 2\n1 3\n"
