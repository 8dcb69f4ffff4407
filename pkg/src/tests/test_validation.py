import shutil
import tempfile
from pathlib import Path
from unittest import TestCase

import matplotlib
matplotlib.use("Agg")
import numpy as np

from thinfilm.io import read_table_csv
from validation.utils import plot_series, save_figure, save_table


class TestValidationUtils(TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmp)
        # results/ is created next to this path
        self.script = str(Path(self.tmp).joinpath("script.py"))

    def test_save_table(self):
        path = save_table(self.script, "decay", ("time", "amplitude"), [[0.0, 1e-3], [0.5, 6e-4]])
        self.assertEqual(path, Path(self.tmp).joinpath("results", "decay.csv"))
        table = read_table_csv(str(path))
        np.testing.assert_array_equal(table["amplitude"], [1e-3, 6e-4])

    def test_save_figure(self):
        t = np.linspace(0.0, 1.0, 11)
        fig, ax = plot_series(t, [np.exp(-t), np.exp(-2 * t), np.exp(-3 * t)], ["a", "b", "c"], "time", "value",
            figtitle="decay", logy=True)
        self.assertEqual(len(ax.lines), 3)
        self.assertEqual(ax.get_yscale(), "log")
        path = save_figure(self.script, fig, "decay")
        self.assertEqual(path.suffix, ".svg")
        self.assertTrue(path.is_file())
        with open(path) as handle:
            self.assertIn("<svg", handle.read())
