import math
from unittest import TestCase

import numpy as np

from thinfilm.energy import (EXPONENT_CLAMP, TruncationPolicy, chemical_potential, dissipation_E, dual_phi,
    energy_report, exp_neg, metric_slope, phi, phi_raw, prox_energy, psi, truncation_l2_bound_check)
from thinfilm.grid import (Field, apply_laplacian, build_grid, cosine_mode, discrete_eigenvalue,
    laplacian_matrix, mean_zero_project, neumann_laplacian, norm_h)
from thinfilm.verify import sample_fields


def field_with_laplacian(grid, lap):
    '''Mean-zero u with Δ_h u = lap (lap must sum to zero).'''
    values, *_ = np.linalg.lstsq(laplacian_matrix(grid).toarray(), np.ravel(lap), rcond=None)
    return mean_zero_project(Field(grid, values.reshape(grid.shape)))


class TestEnergy(TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)
        self.grid = build_grid(1, 64, 1.0)
        self.small = build_grid(1, 4, 1.0)
        self.grid2 = build_grid(2, 16, 1.0)
        self.hand = field_with_laplacian(self.small, [2.0, -1.0, -1.0, 0.0])

    def test_flat_state(self):
        zero = self.grid.zeros()
        self.assertAlmostEqual(phi(zero), 1.0, places=14)
        self.assertEqual(dissipation_E(zero), 0.0)
        self.assertEqual(metric_slope(zero), 0.0)
        self.assertEqual(psi(zero, 0.5), 0.0)

    def test_hand_evaluation(self):
        np.testing.assert_allclose(apply_laplacian(self.small, self.hand.values), [2.0, -1.0, -1.0, 0.0],
            atol=1e-10)
        self.assertAlmostEqual(phi(self.hand, TruncationPolicy(1.0)), 1.701111, places=5)
        self.assertAlmostEqual(phi(self.hand), 1.642975, places=5)
        self.assertAlmostEqual(phi_raw(self.hand), 1.642975, places=5)

    def test_truncation_order(self):
        u = sample_fields(self.grid, 1, max_mode=6, amplitude=0.2, seed=3)[0]
        lap_max = float(np.max(apply_laplacian(self.grid, u.values)))
        self.assertGreater(lap_max, 0.5)
        low, high = TruncationPolicy(0.25 * lap_max), TruncationPolicy(0.75 * lap_max)
        self.assertGreaterEqual(phi(u, low), phi(u, high))
        self.assertGreaterEqual(phi(u, high), phi_raw(u))
        # inert cap leaves the energy unchanged
        self.assertEqual(phi(u, TruncationPolicy(2.0 * lap_max)), phi_raw(u))

    def test_prox_energy(self):
        u = sample_fields(self.grid, 1, max_mode=6, amplitude=0.2, seed=3)[0]
        lap = apply_laplacian(self.grid, u.values)
        policy = TruncationPolicy(0.5 * float(np.max(lap)))
        report = energy_report(u, policy)
        self.assertGreater(report.excess_mass, 0.0)
        self.assertAlmostEqual(report.phi_prox, report.phi - math.exp(-policy.level_N) * report.excess_mass,
            places=12)
        self.assertEqual(prox_energy(u), phi(u))

    def test_psi(self):
        hand = energy_report(self.hand)
        self.assertAlmostEqual(hand.measure_total, 1.0, places=10)
        self.assertEqual(psi(self.hand, 2.0), 0.0)
        self.assertEqual(psi(3.0 * self.hand, 2.0), math.inf)
        with self.assertRaises(ValueError):
            psi(self.hand, 0.0)

    def test_dissipation_linearized(self):
        eps = 1e-3
        u = cosine_mode(self.grid, 1, eps)
        lam = discrete_eigenvalue(self.grid, 1)
        cos_norm = norm_h(cosine_mode(self.grid, 1))
        expected = 0.5 * eps ** 2 * lam ** 4 * cos_norm ** 2
        self.assertAlmostEqual(dissipation_E(u) / expected, 1.0, delta=1e-2)
        self.assertAlmostEqual(metric_slope(u) / (eps * lam ** 2 * cos_norm), 1.0, delta=1e-2)

    def test_slope_consistency(self):
        for u in sample_fields(self.grid2, 5, amplitude=0.02, seed=5):
            self.assertAlmostEqual(metric_slope(u) ** 2, 2.0 * dissipation_E(u), delta=1e-12 * (1 + dissipation_E(u)))

    def test_flat_potential_has_no_dissipation(self):
        u = self.grid.zeros()
        self.assertEqual(dissipation_E(u, TruncationPolicy(1.0)), 0.0)
        np.testing.assert_allclose(chemical_potential(u).values, 1.0)

    def test_convexity(self):
        ts = (0.25, 0.5, 0.75)
        fields = sample_fields(self.grid, 40, max_mode=5, amplitude=0.1, seed=9)
        for policy in (TruncationPolicy(), TruncationPolicy(1.0)):
            for u, v in zip(fields[::2], fields[1::2]):
                pu, pv = phi(u, policy), phi(v, policy)
                for t in ts:
                    mid = phi((1.0 - t) * u + t * v, policy)
                    self.assertLessEqual(mid, (1.0 - t) * pu + t * pv + 1e-10 * (1 + abs(pu) + abs(pv)))

    def test_jensen_lower_bound(self):
        for u in sample_fields(self.grid2, 10, amplitude=0.05, seed=2):
            self.assertGreaterEqual(phi(u), self.grid2.volume - 1e-10)

    def test_dual_oracle(self):
        grid = build_grid(1, 16, 1.0)
        self.assertAlmostEqual(dual_phi(grid.zeros()), 1.0, places=10)
        self.assertAlmostEqual(dual_phi(Field(grid, 2.0 * np.ones(16))), math.exp(-2.0), delta=1e-8)
        for _ in range(100):
            mu = Field(grid, self.rng.uniform(0.0, 5.0, 16))
            raw = float(grid.cell_volume * np.sum(np.exp(-mu.values)))
            self.assertLessEqual(abs(dual_phi(mu) - raw), 1e-8 * raw)

    def test_truncation_l2_bound(self):
        self.assertTrue(truncation_l2_bound_check(self.grid.zeros(), 1.0, self.grid.volume))
        grid = build_grid(1, 16, 1.0)
        values = np.zeros(16)
        values[5] = -10.0
        mu = Field(grid, values)
        A = float(grid.cell_volume * np.sum(np.exp(-values)))
        self.assertTrue(truncation_l2_bound_check(mu, 1.0, A))
        with self.assertRaises(ValueError):
            truncation_l2_bound_check(mu, 1.0, 0.5 * A)
        for u in sample_fields(self.grid, 5, amplitude=0.05, seed=4):
            lap = neumann_laplacian(self.grid, u)
            self.assertTrue(truncation_l2_bound_check(lap, 2.0, phi_raw(u)))

    def test_report(self):
        u = sample_fields(self.grid2, 1, amplitude=0.05, seed=8)[0]
        report = energy_report(u)
        self.assertEqual(report.phi, report.phi_raw)
        self.assertEqual(report.excess_mass, 0.0)
        self.assertAlmostEqual(report.measure_total, report.measure_pos + report.measure_neg, places=12)
        self.assertAlmostEqual(report.dissipation_E, dissipation_E(u), places=12)
        self.assertEqual(report.clamp_events, 0)

    def test_clamp(self):
        values, clamps = exp_neg(np.array([0.0, 2.0 * EXPONENT_CLAMP, -2.0 * EXPONENT_CLAMP]))
        self.assertEqual(clamps, 2)
        self.assertTrue(np.all(np.isfinite(values)))

    def test_policy(self):
        with self.assertRaises(ValueError):
            TruncationPolicy(0.0)
        u = cosine_mode(self.grid, 1, 1e-3)
        lap_max = float(np.max(apply_laplacian(self.grid, u.values)))
        self.assertAlmostEqual(TruncationPolicy.auto(u).level_N, 10.0 * max(1.0, lap_max))
        self.assertEqual(TruncationPolicy().describe(), "none")

    def test_dual_oracle_2d(self):
        grid = build_grid(2, 8, 1.0)
        for scale in (0.1, 1.0, 3.0):
            for _ in range(10):
                mu = Field(grid, scale * self.rng.exponential(1.0, grid.shape))
                raw = float(grid.cell_volume * np.sum(np.exp(-mu.values)))
                self.assertLessEqual(abs(dual_phi(mu) - raw), 1e-8 * raw)
