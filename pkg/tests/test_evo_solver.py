# tests/test_evo_solver.py

import logging
import math
import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(current_dir)
src_path = os.path.join(project_root, 'src')
if src_path not in sys.path:
    sys.path.insert(0, src_path)

from naevo.errors import PreconditionError, ShapeError, SolveError  # type: ignore
from naevo.evo_solver import (EvoProblem, adjoint_identity_defect, apply_adjoint_operator,  # type: ignore
                              apply_operator, check_step_size, energy_identity_residual, ensure_certificate,
                              oracle_dense_solve, residual_norm, solve, solve_adjoint, solve_trajectory,
                              verify_causality, verify_norm_bound)
from naevo.material_law import constant_family, piecewise_family, ramp_family, scalar_family  # type: ignore
from naevo.spatial_operator import SkewOperator  # type: ignore
from naevo.weighted_time import TimeGrid, Trajectory, Weight  # type: ignore

logging.disable(logging.CRITICAL)


def smooth_pulse(grid: TimeGrid, dim: int, t0: float, t1: float) -> Trajectory:
    t = grid.times
    pulse = np.where((t > t0) & (t < t1), np.sin(math.pi * (t - t0) / (t1 - t0)) ** 2, 0.0)
    return Trajectory(grid, np.outer(pulse, np.linspace(1.0, 0.5, dim)))


def random_problem(seed: int, dim: int, n: int, rho: float = 1.0) -> EvoProblem:
    """Constant PSD mass (possibly singular), M1 with positive Hermitian part, skew A."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((dim, dim))
    mass = G @ G.T
    if dim > 1:
        mass[:, 0] = mass[0, :] = 0.0
    K = rng.standard_normal((dim, dim))
    damping = np.eye(dim) + 0.3 * (K - K.T)
    S = rng.standard_normal((dim, dim))
    grid = TimeGrid(0.0, 1.0, n)
    F = Trajectory(grid, rng.standard_normal((n + 1, dim)))
    return EvoProblem(constant_family(mass), constant_family(damping), SkewOperator(S - S.T), F, Weight(rho))


def smooth_problem(n: int, rho: float = 0.25) -> EvoProblem:
    grid = TimeGrid(0.0, 4.0, n)
    M0 = scalar_family(lambda t: 2.0 + math.sin(t), np.eye(2), math.cos, lipschitz_hint=1.0, name="M0")
    M1 = constant_family(0.5 * np.eye(2), name="M1")
    A = SkewOperator(6.0 * np.array([[0.0, 1.0], [-1.0, 0.0]]))
    return EvoProblem(M0, M1, A, smooth_pulse(grid, 2, 0.0, 2.5), Weight(rho))


class TestProblem(unittest.TestCase):

    def test_dimensions_must_agree(self):
        grid = TimeGrid(0.0, 1.0, 10)
        with self.assertRaises(ShapeError):
            EvoProblem(constant_family(np.eye(2)), constant_family(np.eye(3)), SkewOperator.zero(2),
                       Trajectory.zeros(grid, 2), Weight(1.0))

    def test_step_size_advice(self):
        self.assertTrue(check_step_size(TimeGrid(0.0, 1.0, 100), Weight(2.0)))
        self.assertFalse(check_step_size(TimeGrid(0.0, 1.0, 10), Weight(10.0)))


class TestMarching(unittest.TestCase):

    def test_scalar_integration_is_a_ramp(self):
        grid = TimeGrid(-1.0, 3.0, 400)
        F = Trajectory.from_function(grid, lambda t: 1.0 if t > 0.5 * grid.h else 0.0)
        p = EvoProblem(constant_family(np.eye(1)), constant_family(np.zeros((1, 1))), SkewOperator.zero(1),
                       F, Weight(1.0))
        report = solve(p)
        np.testing.assert_allclose(report.u.values[:, 0], np.maximum(grid.times, 0.0), atol=1e-12)
        self.assertAlmostEqual(report.c0, 1.0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000), dim=st.integers(min_value=1, max_value=8),
           n=st.integers(min_value=2, max_value=64))
    def test_march_matches_dense_oracle(self, seed, dim, n):
        p = random_problem(seed, dim, n)
        marched = solve_trajectory(p)
        dense = oracle_dense_solve(p)
        scale = max(1.0, marched.max_abs())
        self.assertLess(np.max(np.abs(marched.values - dense.values)) / scale, 1e-9)

    def test_march_solves_the_space_time_system(self):
        p = random_problem(11, 4, 40)
        u = solve_trajectory(p)
        self.assertLess(residual_norm(p, u), 1e-10 * max(1.0, np.max(np.abs(p.F.values))))

    def test_oracle_size_guard(self):
        p = random_problem(0, 8, 600)
        with self.assertRaises(PreconditionError):
            oracle_dense_solve(p)

    def test_piecewise_constant_coefficients(self):
        grid = TimeGrid(0.0, 2.0, 50)
        M0 = piecewise_family([1.0], [np.eye(2), 2.0 * np.eye(2)])
        M1 = piecewise_family([0.5], [np.eye(2), 0.5 * np.eye(2)])
        p = EvoProblem(M0, M1, SkewOperator.zero(2), smooth_pulse(grid, 2, 0.2, 1.6), Weight(1.0))
        np.testing.assert_allclose(solve_trajectory(p).values, oracle_dense_solve(p).values, atol=1e-12)

    def test_damping_jump_on_a_grid_time_uses_the_left_value(self):
        grid = TimeGrid(0.0, 1.0, 10)
        M1 = piecewise_family([0.5], [np.eye(1), 4.0 * np.eye(1)])
        p = EvoProblem(constant_family(np.zeros((1, 1))), M1, SkewOperator.zero(1),
                       Trajectory(grid, np.ones((11, 1))), Weight(1.0))
        u = solve_trajectory(p)
        np.testing.assert_array_equal(u.values[:, 0], [1.0] * 6 + [0.25] * 5)
        np.testing.assert_array_equal(oracle_dense_solve(p).values, u.values)
        self.assertLess(residual_norm(p, u), 1e-14)

    def test_linear_algebra_failures_become_solve_errors(self):
        grid = TimeGrid(0.0, 1.0, 10)
        nan_forcing = Trajectory(grid, np.full((11, 1), np.nan))
        p = EvoProblem(constant_family(np.eye(1)), constant_family(np.eye(1)), SkewOperator.zero(1),
                       nan_forcing, Weight(1.0))
        for run in (solve_trajectory, oracle_dense_solve, solve_adjoint):
            with self.assertRaises(SolveError):
                run(p)
        broken = scalar_family(lambda t: math.nan if t > 0.5 else 1.0, np.eye(1))
        p = EvoProblem(constant_family(np.eye(1)), broken, SkewOperator.zero(1), Trajectory.zeros(grid, 1),
                       Weight(1.0))
        with self.assertRaises(SolveError) as ctx:
            solve_trajectory(p)
        self.assertAlmostEqual(ctx.exception.step_time, 0.6)

    def test_non_accretive_step_is_rejected(self):
        grid = TimeGrid(0.0, 1.0, 10)
        p = EvoProblem(constant_family(np.zeros((1, 1))), constant_family(-np.eye(1)), SkewOperator.zero(1),
                       Trajectory.zeros(grid, 1), Weight(1.0))
        with self.assertRaises(SolveError) as ctx:
            solve_trajectory(p)
        self.assertEqual(ctx.exception.step_time, 0.0)
        with self.assertRaises(PreconditionError):
            solve(p)


class TestObservables(unittest.TestCase):

    def test_causality_is_exact(self):
        p = random_problem(5, 3, 60)
        for a in (0.1, 0.45, 0.9):
            self.assertLessEqual(verify_causality(p, a), 1e-12)

    def test_adjoint_identity(self):
        grid = TimeGrid(0.0, 2.0, 80)
        M0 = ramp_family(np.eye(3), np.diag([1.0, 2.0, 0.5]), 0.3, 1.5)
        M1 = constant_family(np.eye(3) + 0.2 * np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 0]]))
        S = np.random.default_rng(3).standard_normal((3, 3))
        p = EvoProblem(M0, M1, SkewOperator(S - S.T), Trajectory.zeros(grid, 3), Weight(1.5))
        rng = np.random.default_rng(4)
        for _ in range(5):
            u = Trajectory(grid, rng.standard_normal((81, 3)))
            v = Trajectory(grid, rng.standard_normal((81, 3)))
            self.assertLess(adjoint_identity_defect(p, u, v), 1e-10)

    def test_adjoint_solve_inverts_adjoint_operator(self):
        p = random_problem(8, 3, 30)
        z = solve_adjoint(p).u
        back = apply_adjoint_operator(p, z)
        np.testing.assert_allclose(back.values, p.F.values, atol=1e-9)

    def test_norm_bound_holds(self):
        for p in (smooth_problem(400, rho=1.0), random_problem(2, 3, 200, rho=2.0)):
            report = solve(p)
            self.assertLessEqual(report.bound_ratio, 1.1)
            self.assertTrue(verify_norm_bound(report, ensure_certificate(p)))

    def test_energy_residual_is_first_order(self):
        residuals = []
        for n in (200, 400, 800, 1600):
            p = smooth_problem(n)
            residuals.append(energy_identity_residual(p, solve_trajectory(p), 2.0))
        for coarse, fine in zip(residuals, residuals[1:]):
            self.assertGreaterEqual(coarse / fine, 1.5)
            self.assertLessEqual(coarse / fine, 3.0)

    def test_energy_residual_before_the_grid(self):
        p = smooth_problem(100)
        self.assertEqual(energy_identity_residual(p, solve_trajectory(p), -1.0), 0.0)

    def test_solve_reports_requested_cuts(self):
        p = smooth_problem(200)
        report = solve(p, cut_times=[1.0, 3.0], causality_cut=2.0)
        self.assertEqual(sorted(report.energy_residuals), [1.0, 3.0])
        self.assertLessEqual(report.causality_defect, 1e-12)
        self.assertGreater(report.step_accretivity_min, 0.0)

    def test_apply_operator_rejects_foreign_grid(self):
        p = smooth_problem(100)
        with self.assertRaises(ShapeError):
            apply_operator(p, Trajectory.zeros(TimeGrid(0.0, 1.0, 100), 2))


if __name__ == '__main__':
    unittest.main()
