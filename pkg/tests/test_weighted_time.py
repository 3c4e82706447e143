# tests/test_weighted_time.py

import logging
import math
import os
import sys
import tempfile
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(current_dir)
src_path = os.path.join(project_root, 'src')
if src_path not in sys.path:
    sys.path.insert(0, src_path)

from naevo.errors import ShapeError  # type: ignore
from naevo.weighted_time import (TimeGrid, Trajectory, Weight, cutoff, d0_apply, d0_inv,  # type: ignore
                                 d0_star_apply, estimate_d0_inv_norm, exact_weighted_adjoint,
                                 fourier_laplace, inverse_fourier_laplace, minus_one_norm, plus_one_norm,
                                 resolvent_eps, spectral_d0, weighted_inner, weighted_norm)

logging.disable(logging.CRITICAL)


class TestTimeGrid(unittest.TestCase):

    def test_rejects_degenerate_grids(self):
        with self.assertRaises(ValueError):
            TimeGrid(0.0, 1.0, 1)
        with self.assertRaises(ValueError):
            TimeGrid(1.0, 1.0, 10)
        with self.assertRaises(ValueError):
            TimeGrid(0.0, float("inf"), 10)

    def test_times_and_step(self):
        grid = TimeGrid(-1.0, 3.0, 400)
        self.assertAlmostEqual(grid.h, 0.01)
        self.assertEqual(grid.times.size, 401)
        self.assertAlmostEqual(grid.times[-1], 3.0)
        self.assertEqual(grid.index_at_or_before(0.0), 100)
        self.assertEqual(grid.index_at_or_before(-2.0), -1)
        self.assertEqual(grid.index_at_or_before(10.0), 400)
        self.assertEqual(grid.refine(2).n, 800)

    def test_weight_must_be_positive(self):
        for bad in (0.0, -1.0, float("nan"), True):
            with self.assertRaises(ValueError):
                Weight(bad)


class TestTrajectory(unittest.TestCase):

    def setUp(self):
        self.grid = TimeGrid(0.0, 1.0, 10)

    def test_shape_is_checked(self):
        with self.assertRaises(ShapeError):
            Trajectory(self.grid, np.zeros((5, 2)))

    def test_values_are_read_only(self):
        u = Trajectory.zeros(self.grid, 2)
        with self.assertRaises(ValueError):
            u.values[0, 0] = 1.0

    def test_arithmetic_requires_same_grid(self):
        u = Trajectory.zeros(self.grid, 1)
        v = Trajectory.zeros(TimeGrid(0.0, 2.0, 10), 1)
        with self.assertRaises(ShapeError):
            _ = u + v

    def test_csv_round_trip_is_exact(self):
        rng = np.random.default_rng(3)
        u = Trajectory(self.grid, rng.standard_normal((11, 3)))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "u.csv")
            u.to_csv(path)
            back = Trajectory.from_csv(path)
        self.assertEqual(back.grid.n, 10)
        np.testing.assert_array_equal(back.values, u.values)


class TestWeightedCalculus(unittest.TestCase):

    def test_d0_inv_inverts_d0(self):
        grid = TimeGrid(-1.0, 2.0, 90)
        u = Trajectory(grid, np.random.default_rng(0).standard_normal((91, 2)))
        np.testing.assert_allclose(d0_apply(d0_inv(u)).values, u.values, atol=1e-12)
        np.testing.assert_allclose(d0_inv(d0_apply(u)).values, u.values, atol=1e-12)

    def test_weighted_norm_matches_inner(self):
        grid = TimeGrid(0.0, 2.0, 50)
        u = Trajectory(grid, np.random.default_rng(1).standard_normal((51, 3)))
        w = Weight(1.5)
        self.assertAlmostEqual(weighted_norm(u, w) ** 2, weighted_inner(u, u, w), places=12)

    def test_d0_inv_norm_approaches_one_over_rho(self):
        w = Weight(2.0)
        estimates = []
        for n in (300, 600, 1200):
            estimate = estimate_d0_inv_norm(TimeGrid(0.0, 12.0, n), w, n_samples=200, seed=0)
            self.assertLessEqual(estimate, 1.05 / w.rho)
            self.assertGreaterEqual(estimate, 0.85 / w.rho)
            estimates.append(estimate)
        self.assertLess(abs(estimates[-1] - 1.0 / w.rho), 0.15 / w.rho)

    def test_minus_and_plus_one_norms(self):
        grid = TimeGrid(0.0, 4.0, 400)
        w = Weight(1.0)
        u = Trajectory.from_function(grid, lambda t: math.sin(t) ** 2)
        self.assertAlmostEqual(minus_one_norm(u, w), weighted_norm(d0_inv(u), w))
        self.assertAlmostEqual(plus_one_norm(u, w), weighted_norm(d0_apply(u), w))
        self.assertLess(minus_one_norm(u, w), weighted_norm(u, w) / w.rho * 1.05)

    def test_fourier_laplace_round_trip(self):
        grid = TimeGrid(0.0, 4.0, 256)
        w = Weight(1.0)
        u = Trajectory(grid, np.random.default_rng(5).standard_normal((257, 2)))
        back = inverse_fourier_laplace(fourier_laplace(u, w), real=True)
        np.testing.assert_allclose(back.values, u.values, atol=1e-10)

    def test_spectral_derivative_of_a_compact_bump(self):
        grid = TimeGrid(0.0, 4.0, 256)
        w = Weight(1.0)
        bump = lambda t: math.sin(0.5 * math.pi * (t - 1.0)) ** 4 if 1.0 < t < 3.0 else 0.0
        slope = lambda t: (2.0 * math.pi * math.sin(0.5 * math.pi * (t - 1.0)) ** 3
                           * math.cos(0.5 * math.pi * (t - 1.0))) if 1.0 < t < 3.0 else 0.0
        du = spectral_d0(Trajectory.from_function(grid, bump), w)
        self.assertFalse(du.is_complex)
        np.testing.assert_allclose(du.values, Trajectory.from_function(grid, slope).values, atol=1e-4)

    def test_plancherel_pairs_with_rectangle_rule(self):
        grid = TimeGrid(-1.0, 3.0, 200)
        w = Weight(0.75)
        u = Trajectory(grid, np.random.default_rng(6).standard_normal((201, 1)))
        spectral = fourier_laplace(u, w).norm()
        temporal = weighted_norm(u, w, rule="rectangle")
        self.assertLess(abs(spectral - temporal) / temporal, 1e-8)

    def test_resolvent_converges_linearly(self):
        grid = TimeGrid(0.0, 6.0, 6000)
        w = Weight(0.5)
        u = Trajectory.from_function(grid, lambda t: math.sin(t) ** 2)
        errors = [weighted_norm(resolvent_eps(u, eps) - u, w) for eps in (1e-1, 5e-2, 2.5e-2)]
        for coarse, fine in zip(errors, errors[1:]):
            self.assertGreaterEqual(coarse / fine, 1.5)
            self.assertLessEqual(coarse / fine, 3.0)

    def test_resolvent_rejects_non_positive_eps(self):
        u = Trajectory.zeros(TimeGrid(0.0, 1.0, 10), 1)
        with self.assertRaises(ValueError):
            resolvent_eps(u, 0.0)

    def test_exact_adjoint_identity(self):
        grid = TimeGrid(0.0, 2.0, 40)
        w = Weight(1.3)
        rng = np.random.default_rng(7)
        u = Trajectory(grid, rng.standard_normal((41, 2)))
        v = Trajectory(grid, rng.standard_normal((41, 2)))
        lhs = weighted_inner(d0_apply(u), v, w)
        rhs = weighted_inner(u, exact_weighted_adjoint(v, w), w)
        self.assertLess(abs(lhs - rhs), 1e-10 * max(1.0, abs(lhs)))

    def test_continuum_adjoint_formula_defect_is_first_order(self):
        w = Weight(1.0)
        defects = []
        for n in (200, 400, 800):
            grid = TimeGrid(0.0, 4.0, n)
            v = Trajectory.from_function(grid, lambda t: math.sin(math.pi * t / 4.0) ** 2)
            defects.append(weighted_norm(exact_weighted_adjoint(v, w) - d0_star_apply(v, w), w))
        for coarse, fine in zip(defects, defects[1:]):
            self.assertGreaterEqual(coarse / fine, 1.5)
            self.assertLessEqual(coarse / fine, 3.0)

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(min_value=-2.0, max_value=3.0, allow_nan=False))
    def test_cutoff_is_idempotent_and_causal(self, a):
        grid = TimeGrid(-1.0, 2.0, 30)
        u = Trajectory(grid, np.arange(31.0).reshape(-1, 1) + 1.0)
        once = cutoff(u, a)
        np.testing.assert_array_equal(cutoff(once, a).values, once.values)
        k = grid.index_at_or_before(a)
        self.assertTrue(np.all(once.values[k + 1:] == 0.0))
        np.testing.assert_array_equal(once.values[:k + 1], u.values[:k + 1])


if __name__ == '__main__':
    unittest.main()
