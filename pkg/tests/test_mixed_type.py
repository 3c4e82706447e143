# tests/test_mixed_type.py

import logging
import os
import sys
import unittest
import warnings

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(current_dir)
src_path = os.path.join(project_root, 'src')
if src_path not in sys.path:
    sys.path.insert(0, src_path)

from naevo.errors import ConfigError, ShapeError  # type: ignore
from naevo.evo_solver import oracle_dense_solve, solve, solve_trajectory, verify_causality  # type: ignore
from naevo.examples.mixed_type import (MixedTypeConfig, build_mixed_type, case_bounds, default_grid,  # type: ignore
                                       gaussian_forcing, mixed_type_families, phi, region_types)
from naevo.weighted_time import TimeGrid, Trajectory, Weight, cutoff  # type: ignore

logging.disable(logging.CRITICAL)


class TestMixedTypeConfig(unittest.TestCase):

    def test_validation(self):
        with self.assertRaises(ConfigError):
            MixedTypeConfig(epsilon=0.0)
        with self.assertRaises(ConfigError):
            MixedTypeConfig(epsilon=1.5, L=1.0)
        with self.assertRaises(ConfigError):
            MixedTypeConfig(m=4)
        with self.assertRaises(ConfigError) as ctx:
            MixedTypeConfig(variant="stationary")
        self.assertEqual(ctx.exception.location, "examples.mixed_type.variant")

    def test_from_dict_defaults(self):
        cfg = MixedTypeConfig.from_dict({"m": 16})
        self.assertEqual((cfg.epsilon, cfg.L, cfg.m, cfg.variant), (0.5, 1.0, 16, "nonautonomous"))
        self.assertEqual(cfg.dim, 32)

    def test_indicators(self):
        cfg = MixedTypeConfig(m=16)
        a = cfg.indicators()
        np.testing.assert_array_equal(a[4:8], 0.0)
        np.testing.assert_array_equal(a[16 + 4:16 + 12], 0.0)
        self.assertEqual(a.sum(), 32 - 4 - 8)

    def test_phi(self):
        self.assertEqual([phi(-1.0), phi(0.0), phi(0.5), phi(1.0), phi(2.0)], [0.0, 0.0, 0.5, 1.0, 1.0])
        samples = np.linspace(-2.0, 3.0, 101)
        values = [phi(t) for t in samples]
        self.assertTrue(np.all(np.diff(values) >= 0.0))
        self.assertLessEqual(np.max(np.abs(np.diff(values)) / np.diff(samples)), 1.0 + 1e-12)

    def test_module_source_compiles_without_warnings(self):
        path = os.path.join(src_path, "naevo", "examples", "mixed_type.py")
        with open(path, encoding="utf-8") as f:
            source = f.read()
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            compile(source, path, "exec")

    def test_default_grid_avoids_zero(self):
        grid = default_grid(64)
        self.assertFalse(np.any(np.abs(grid.times) < 1e-12))
        self.assertTrue(np.any(np.abs(grid.times - 1.0) < 1e-12))


class TestMixedTypeProblem(unittest.TestCase):

    def setUp(self):
        self.cfg = MixedTypeConfig(m=16)
        self.grid = default_grid(64)
        self.samples = np.linspace(self.grid.t_min, self.grid.t_max, 200)

    def _problem(self, rho: float):
        return build_mixed_type(self.cfg, Weight(rho), self.grid, gaussian_forcing(self.cfg, self.grid))

    def test_case_bounds(self):
        for rho in (0.5, 1.0, 2.0):
            bounds = case_bounds(self._problem(rho), rho, self.samples)
            self.assertAlmostEqual(bounds["t<=0"], 1.0)
            self.assertGreaterEqual(bounds["0<t<=1"], 0.5)
            self.assertLess(bounds["0<t<=1"], 0.5 + 0.05 * rho)
            self.assertAlmostEqual(bounds["t>1"], min(rho, 1.0))

    def test_region_types(self):
        p = self._problem(1.0)
        late = region_types(p, 2.0)
        self.assertEqual(late[4:8], ["elliptic"] * 4)
        self.assertEqual(late[8:12], ["parabolic"] * 4)
        self.assertEqual(late.count("hyperbolic"), 8)
        self.assertEqual(region_types(p, -0.1), ["elliptic"] * 16)

    def test_autonomous_variant_is_constant(self):
        M0, M1, A = mixed_type_families(MixedTypeConfig(m=16, variant="autonomous"))
        np.testing.assert_array_equal(M0.at(-1.0), M0.at(2.0))
        np.testing.assert_array_equal(M0.at(0.0) + M1.at(0.0), np.eye(32))
        self.assertLess(np.max(np.abs(A.matrix + A.matrix.T)), 1e-15)

    def test_solution_is_causal_and_bounded(self):
        p = self._problem(1.0)
        report = solve(p)
        self.assertLessEqual(report.bound_ratio, 1.1)
        self.assertLessEqual(verify_causality(p, 0.75), 1e-12)
        np.testing.assert_array_equal(report.u.values[self.grid.times <= 0.5], 0.0)

    def test_forcing_must_match(self):
        with self.assertRaises(ShapeError):
            build_mixed_type(self.cfg, Weight(1.0), self.grid,
                             gaussian_forcing(MixedTypeConfig(m=8), self.grid))
        with self.assertRaises(ShapeError):
            build_mixed_type(self.cfg, Weight(1.0), self.grid,
                             gaussian_forcing(self.cfg, TimeGrid(0.0, 1.0, 64)))

    def test_grid_through_zero(self):
        # h = 1/16, so t = 0 is the 16th grid time; M0(0) = 0 there.
        grid = TimeGrid(-1.0, 3.0, 64)
        self.assertEqual(grid.times[16], 0.0)
        p = build_mixed_type(self.cfg, Weight(1.0), grid, gaussian_forcing(self.cfg, grid))
        np.testing.assert_array_equal(p.M1.left_at(0.0), np.eye(self.cfg.dim))
        report = solve(p)
        self.assertGreater(report.step_accretivity_min, 0.0)
        self.assertLessEqual(report.bound_ratio, 1.1)
        np.testing.assert_allclose(report.u.values, oracle_dense_solve(p).values, atol=1e-10)


class TestMixedTypeAcceptance(unittest.TestCase):

    def test_norm_bound_under_refinement(self):
        cfg = MixedTypeConfig(m=64)
        ratios = []
        for n in (512, 1024, 2048):
            grid = default_grid(n)
            p = build_mixed_type(cfg, Weight(2.0), grid, gaussian_forcing(cfg, grid))
            report = solve(p)
            self.assertLessEqual(report.norm_u, 1.1 * report.norm_F / report.c0)
            ratios.append(report.bound_ratio)
        # Non-increasing up to the O(h) drift of the discrete weighted norms.
        for coarse, fine in zip(ratios, ratios[1:]):
            self.assertLessEqual(fine, coarse * (1.0 + 5e-2))

    def test_randomized_causality(self):
        cfg = MixedTypeConfig(m=64)
        grid = default_grid(256)
        base = build_mixed_type(cfg, Weight(1.0), grid, gaussian_forcing(cfg, grid))
        rng = np.random.default_rng(20)
        for _ in range(20):
            a = float(rng.uniform(grid.t_min, grid.t_max))
            F = Trajectory(grid, rng.standard_normal((grid.n + 1, cfg.dim)))
            late = F - cutoff(F, a)
            u = solve_trajectory(base.with_forcing(late))
            self.assertLessEqual(u.max_abs(upto=a), 1e-12)
            self.assertLessEqual(verify_causality(base.with_forcing(F), a), 1e-12)


if __name__ == '__main__':
    unittest.main()
