"""
CSV / JSON output formats.
"""
import json
import math

import numpy as np

from storage.models import RunSummary
from storage.writers import (
    TRACE_COLUMNS,
    dumps,
    fmt,
    read_csv,
    write_bound_overlay,
    write_csv,
    write_json,
    write_traces,
)
from federated.simulation import run_fl
from tests.conftest import make_run


class TestFormatting:
    def test_floats_round_trip(self, rng):
        values = rng.standard_normal(50) * 10.0 ** rng.integers(-20, 20, size=50)
        assert all(float(fmt(v)) == v for v in values)

    def test_scalar_kinds(self):
        assert fmt(True) == "true"
        assert fmt(np.int64(3)) == "3"
        assert fmt(0.1) == "0.10000000000000001"

    def test_non_finite_json(self):
        data = json.loads(dumps({"a": math.inf, "b": [math.nan, -math.inf], "c": np.float64(1.5)}))
        assert data == {"a": "inf", "b": ["nan", "-inf"], "c": 1.5}

    def test_dataclasses_serialize(self):
        data = json.loads(dumps(RunSummary("x", assertions={"ok": True})))
        assert data["command"] == "x" and data["assertions"] == {"ok": True}


class TestFiles:
    def test_csv_round_trip(self, tmp_path, rng):
        values = rng.standard_normal(10)
        path = write_csv(tmp_path / "sub" / "v.csv", ["i", "v"], enumerate(values))
        rows = read_csv(path)
        assert [float(r["v"]) for r in rows] == list(values)

    def test_json_keys_sorted(self, tmp_path):
        path = write_json(tmp_path / "s.json", {"b": 1, "a": 2})
        assert path.read_text().index('"a"') < path.read_text().index('"b"')

    def test_trace_file(self, tmp_path, quadratic):
        trace = run_fl(quadratic, make_run(quadratic.d, T=3, K=2, eta_local=0.05))
        rows = read_csv(write_traces(tmp_path / "traces.csv", [trace]))
        assert list(rows[0]) == TRACE_COLUMNS
        assert len(rows) == 3 * 2 + 1
        assert float(rows[-1]["f_gap"]) == trace.f_gap[3]
        assert rows[0]["bound_value"] == "nan"

    def test_bound_overlay(self, tmp_path):
        path = write_bound_overlay(tmp_path / "o.csv", np.array([1.0, 0.5]), np.array([2.0, 1.0]),
                                   label="grad_sq")
        rows = read_csv(path)
        assert list(rows[0]) == ["t", "grad_sq", "bound_value", "margin"]
        assert [float(r["margin"]) for r in rows] == [1.0, 0.5]
