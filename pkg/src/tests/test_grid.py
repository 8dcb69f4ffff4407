from unittest import TestCase

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from thinfilm.exceptions import GridError
from thinfilm.grid import (Field, apply_laplacian, build_grid, cosine_mode, discrete_eigenvalue, inner,
    laplacian_matrix, mean_zero_project, measure_norms, mode_amplitude, neumann_laplacian, norm_h)


class TestGrid(TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)
        self.grid1 = build_grid(1, 16, 1.0)
        self.grid2 = build_grid(2, 8, 2.0)

    def random_field(self, grid):
        return Field(grid, self.rng.standard_normal(grid.shape))

    def test_build_grid(self):
        g = build_grid(1, 4, 1.0)
        self.assertEqual(g.h, 0.25)
        self.assertEqual(g.cell_volume, 0.25)
        self.assertEqual(self.grid2.h, 0.25)
        self.assertEqual(self.grid2.cell_volume, 0.0625)
        self.assertEqual(self.grid2.volume, 4.0)
        self.assertEqual(self.grid2.h * self.grid2.n, self.grid2.length)

    def test_build_grid_rejects(self):
        with self.assertRaises(GridError):
            build_grid(3, 8, 1.0)
        with self.assertRaises(GridError):
            build_grid(1, 3, 1.0)
        with self.assertRaises(GridError):
            build_grid(2, 8, 0.0)
        # GridError is also a ValueError
        with self.assertRaises(ValueError):
            build_grid(1, 8, -1.0)

    def test_field_validation(self):
        with self.assertRaises(GridError):
            Field(self.grid1, np.zeros(15))
        values = np.zeros(16)
        values[3] = np.nan
        with self.assertRaises(GridError):
            Field(self.grid1, values)
        with self.assertRaises(GridError):
            Field(self.grid1, np.ones(16), mean_zero=True)
        with self.assertRaises(GridError):
            self.grid1.zeros() + self.grid2.zeros()

    def test_cancelling_difference(self):
        for grid in (self.grid1, build_grid(2, 64, 1.0)):
            u = mean_zero_project(self.random_field(grid))
            w = mean_zero_project(u + 1e-15 * self.random_field(grid))
            diff = u - w
            self.assertTrue(diff.mean_zero)
            self.assertLess(norm_h(diff), 1e-13)
            self.assertTrue((0.5 * (u + w) - u).mean_zero)
            self.assertEqual(norm_h(-diff), norm_h(diff))
            self.assertTrue(diff.copy().mean_zero)

    def test_laplacian_of_constant(self):
        for grid in (self.grid1, self.grid2):
            lap = neumann_laplacian(grid, Field(grid, 3.7 * np.ones(grid.shape)))
            np.testing.assert_allclose(lap.values, 0.0, atol=1e-12)

    def test_discrete_eigenpair(self):
        for k in (1, 2, 5):
            mode = cosine_mode(self.grid1, k)
            lam = discrete_eigenvalue(self.grid1, k)
            lap = neumann_laplacian(self.grid1, mode)
            np.testing.assert_allclose(lap.values, lam * mode.values, atol=1e-10 * abs(lam))
            # assembled matrix agrees with the stencil
            dense = laplacian_matrix(self.grid1).toarray() @ mode.values
            np.testing.assert_allclose(dense, lap.values, atol=1e-10 * abs(lam))

    def test_matrix_matches_stencil_2d(self):
        f = self.random_field(self.grid2)
        matrix = laplacian_matrix(self.grid2)
        np.testing.assert_allclose((matrix @ f.values.ravel()).reshape(self.grid2.shape),
            apply_laplacian(self.grid2, f.values), atol=1e-12)
        np.testing.assert_allclose(matrix.toarray(), matrix.toarray().T)

    def test_conservation(self):
        for grid in (self.grid1, self.grid2):
            f = self.random_field(grid)
            lap = apply_laplacian(grid, f.values)
            self.assertLessEqual(abs(np.sum(lap)), 1e-12 * np.sum(np.abs(lap)))

    def test_symmetric_negative_semidefinite(self):
        for grid in (self.grid1, self.grid2):
            for _ in range(10):
                f, g = self.random_field(grid), self.random_field(grid)
                lf, lg = neumann_laplacian(grid, f), neumann_laplacian(grid, g)
                self.assertLessEqual(abs(inner(lf, g) - inner(f, lg)), 1e-10 * norm_h(f) * norm_h(g) * grid.n ** 2)
                self.assertLessEqual(inner(lf, f), 1e-10 * norm_h(f) ** 2)

    def test_kernel_is_constants(self):
        # −Δ_h + mean is SPD iff the kernel of Δ_h holds only constants; CG then recovers
        # a mean-zero field from its Laplacian
        for grid in (self.grid1, self.grid2):
            matrix = laplacian_matrix(grid)
            operator = LinearOperator((grid.size, grid.size),
                matvec=lambda p: -(matrix @ p) + np.mean(p), dtype=float)
            f = mean_zero_project(self.random_field(grid)).values.ravel()
            solution, info = cg(operator, -(matrix @ f), rtol=1e-13, atol=0.0, maxiter=10 * grid.size)
            self.assertEqual(info, 0)
            self.assertLessEqual(norm_h(Field(grid, (solution - f).reshape(grid.shape))), 1e-10 * grid.n ** 2)

    def test_mean_zero_project(self):
        five = mean_zero_project(Field(self.grid1, 5.0 * np.ones(16)))
        np.testing.assert_allclose(five.values, 0.0, atol=1e-14)
        self.assertTrue(five.mean_zero)
        f = mean_zero_project(self.random_field(self.grid2))
        again = mean_zero_project(f)
        np.testing.assert_allclose(again.values, f.values, atol=1e-14)
        shifted = Field(self.grid1, self.rng.standard_normal(16) + 1e3)
        self.assertLessEqual(abs(np.mean(mean_zero_project(shifted).values)), 1e-12)

    def test_inner_and_norm(self):
        f = self.random_field(self.grid2)
        self.assertAlmostEqual(inner(f, f), norm_h(f) ** 2, places=12)
        a = np.zeros(16)
        b = np.zeros(16)
        a[:8] = 1.0
        b[8:] = 1.0
        self.assertEqual(inner(Field(self.grid1, a), Field(self.grid1, b)), 0.0)
        self.assertAlmostEqual(norm_h(Field(self.grid1, np.ones(16))), 1.0, places=14)
        # a plain weighted sum, with no Laplacian inverse involved
        g = self.random_field(self.grid2)
        self.assertEqual(inner(f, g), float(self.grid2.cell_volume * np.sum(f.values * g.values)))

    def test_measure_norms(self):
        self.assertEqual(measure_norms(self.grid1.zeros()), (0.0, 0.0, 0.0))
        hand = Field(build_grid(1, 4, 1.0), np.array([2.0, -1.0, -1.0, 0.0]))
        total, pos, neg = measure_norms(hand)
        self.assertAlmostEqual(total, 1.0)
        self.assertAlmostEqual(pos, 0.5)
        self.assertAlmostEqual(neg, 0.5)
        for grid in (self.grid1, self.grid2):
            total, pos, neg = measure_norms(neumann_laplacian(grid, self.random_field(grid)))
            self.assertAlmostEqual(total, pos + neg, places=10)
            self.assertLessEqual(abs(pos - neg), 1e-10 * total)

    def test_mode_amplitude(self):
        f = cosine_mode(self.grid1, 1, 0.3) + cosine_mode(self.grid1, 3, -0.1)
        self.assertAlmostEqual(mode_amplitude(f, 1), 0.3, places=12)
        self.assertAlmostEqual(mode_amplitude(f, 3), -0.1, places=12)
        self.assertAlmostEqual(mode_amplitude(f, 2), 0.0, places=12)
