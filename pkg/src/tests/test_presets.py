from pathlib import Path
from unittest import TestCase

import numpy as np

from thinfilm.config import InitialConditionSpec
from thinfilm.exceptions import ConfigError, GridError
from thinfilm.grid import apply_laplacian, build_grid, mode_amplitude
from thinfilm.presets import PRESETS, InitialCondition, build_initial_condition


class TestPresets(TestCase):

    def setUp(self):
        self.inp_dir = Path(__file__).parents[1].joinpath("test_resources")
        self.grid = build_grid(1, 64, 1.0)
        self.grid2 = build_grid(2, 16, 1.0)

    def test_every_preset_is_mean_zero(self):
        for name in PRESETS[:-1]:
            for grid in (self.grid, self.grid2):
                u = InitialCondition(grid, name)()
                self.assertTrue(u.mean_zero)
                self.assertLessEqual(abs(np.mean(u.values)), 1e-15)

    def test_cosine(self):
        u = InitialCondition(self.grid, "cosine", k=2, amplitude=0.5)()
        self.assertAlmostEqual(mode_amplitude(u, 2), 0.5, places=12)
        self.assertAlmostEqual(mode_amplitude(u, 1), 0.0, places=12)

    def test_gaussian_bump(self):
        u = InitialCondition(self.grid, "gaussian_bump", center=0.25, width=0.05, amplitude=1e-2)()
        self.assertEqual(int(np.argmax(u.values)), 15)
        u2 = InitialCondition(self.grid2, "gaussian_bump", center=(0.25, 0.75))()
        self.assertEqual(np.unravel_index(np.argmax(u2.values), u2.values.shape), (3, 11))
        with self.assertRaises(ConfigError):
            InitialCondition(self.grid2, "gaussian_bump", center=0.5)()

    def test_cone(self):
        u = InitialCondition(self.grid, "cone")()
        lap = apply_laplacian(self.grid, u.values)
        # tip cells: slope·(1/h − 1/R) with R the distance to the wall
        self.assertAlmostEqual(float(np.max(lap)), 0.2 * (64.0 - 2.0), places=8)
        self.assertAlmostEqual(float(np.min(lap)), -0.2 / 0.5, places=8)
        self.assertEqual(set(np.argsort(lap)[-2:]), {31, 32})
        with self.assertRaises(ConfigError):
            InitialCondition(self.grid, "cone", radius=-1.0)()

    def test_random_bandlimited(self):
        first = InitialCondition(self.grid2, "random_bandlimited", seed=4, amplitude=1e-3)()
        second = InitialCondition(self.grid2, "random_bandlimited", seed=4, amplitude=1e-3)()
        np.testing.assert_array_equal(first.values, second.values)
        self.assertAlmostEqual(float(np.max(np.abs(first.values))), 1e-3, delta=1e-12)
        other = InitialCondition(self.grid2, "random_bandlimited", seed=5, amplitude=1e-3)()
        self.assertFalse(np.array_equal(first.values, other.values))

    def test_from_file(self):
        grid = build_grid(1, 16, 1.0)
        path = str(self.inp_dir.joinpath("field_16.txt"))
        u = InitialCondition(grid, "from_file", path=path)()
        np.testing.assert_allclose(u.values, 0.01 * np.arange(16) - 0.075, atol=1e-14)
        with self.assertRaises(GridError):
            InitialCondition(self.grid, "from_file", path=path)()
        with self.assertRaises(ConfigError):
            InitialCondition(grid, "from_file")()

    def test_unknown(self):
        with self.assertRaises(ConfigError):
            InitialCondition(self.grid, "sphere")

    def test_from_spec(self):
        u = build_initial_condition(self.grid, InitialConditionSpec(preset="cosine", amplitude=2e-3))
        self.assertAlmostEqual(mode_amplitude(u, 1), 2e-3, places=14)
