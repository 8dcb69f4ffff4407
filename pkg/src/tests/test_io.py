import json
import os
import tempfile
from unittest import TestCase

import numpy as np

from thinfilm.energy import chemical_potential
from thinfilm.exceptions import GridError
from thinfilm.flow import FlowConfig, evolve
from thinfilm.grid import build_grid, cosine_mode
from thinfilm.io import (TRACE_COLUMNS, read_field, read_json, read_table_csv, read_trace_csv, write_field,
    write_json, write_snapshots, write_table_csv, write_trace_csv)


class TestIO(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.grid = build_grid(1, 16, 1.0)
        self.trace = evolve(cosine_mode(self.grid, 1, 1e-3), FlowConfig(1e-3, 4, snapshot_stride=2))

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_trace_csv(self):
        write_trace_csv(self.path("trace.csv"), self.trace)
        table = read_trace_csv(self.path("trace.csv"))
        self.assertEqual(tuple(table), TRACE_COLUMNS)
        np.testing.assert_array_equal(table["step"], np.arange(5))
        np.testing.assert_array_equal(table["phi"], self.trace.series("phi"))
        np.testing.assert_array_equal(table["displacement"], self.trace.displacements)
        write_table_csv(self.path("short.csv"), ("step",), [[0.0]])
        with self.assertRaises(ValueError):
            read_trace_csv(self.path("short.csv"))

    def test_nan_entries(self):
        write_table_csv(self.path("table.csv"), ("a", "b"), [[1.0, float("nan")]])
        table = read_table_csv(self.path("table.csv"))
        self.assertEqual(table["a"][0], 1.0)
        self.assertTrue(np.isnan(table["b"][0]))
        with open(self.path("table.csv")) as handle:
            self.assertEqual(handle.readline().strip(), "a,b")

    def test_field_files(self):
        u = cosine_mode(self.grid, 3, 0.25)
        write_field(self.path("u.txt"), u)
        np.testing.assert_array_equal(read_field(self.grid, self.path("u.txt")).values, u.values)
        with self.assertRaises(GridError):
            read_field(build_grid(1, 8, 1.0), self.path("u.txt"))

    def test_snapshots(self):
        paths = write_snapshots(self.tmp.name, self.trace)
        self.assertEqual(sorted(os.path.basename(p) for p in paths), ["potential_0.csv", "potential_2.csv",
            "potential_4.csv", "snapshot_0.csv", "snapshot_2.csv", "snapshot_4.csv"])
        potential = read_field(self.grid, self.path("potential_4.csv"))
        expected = chemical_potential(self.trace.snapshots[4], self.trace.policy)
        np.testing.assert_array_equal(potential.values, expected.values)

    def test_json(self):
        write_json(self.path("a.json"), {"b": 1, "a": [1.5, None], "c": {"z": True, "y": "text"}})
        with open(self.path("a.json")) as handle:
            text = handle.read()
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(read_json(self.path("a.json")), {"a": [1.5, None], "b": 1, "c": {"y": "text", "z": True}})

    def test_json_nonfinite(self):
        write_json(self.path("b.json"), {"order": float("nan"), "rows": [[1.0, float("inf")]], "k": 2.5})
        with open(self.path("b.json")) as handle:
            text = handle.read()
        self.assertNotIn("NaN", text)
        self.assertNotIn("Infinity", text)
        self.assertEqual(json.loads(text), {"k": 2.5, "order": None, "rows": [[1.0, None]]})
