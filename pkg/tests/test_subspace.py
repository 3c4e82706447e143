# tests/test_subspace.py

import logging
import os
import sys
import unittest

import numpy as np

current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(current_dir)
src_path = os.path.join(project_root, 'src')
if src_path not in sys.path:
    sys.path.insert(0, src_path)

from naevo.errors import ShapeError  # type: ignore
from naevo.subspace import SubspaceProjector  # type: ignore
from naevo.weighted_time import TimeGrid, Trajectory, d0_inv  # type: ignore

logging.disable(logging.CRITICAL)


class TestSubspaceProjector(unittest.TestCase):

    def test_coordinate_subspace(self):
        V = SubspaceProjector.from_indices(4, [3, 1])
        self.assertEqual(V.rank, 2)
        self.assertEqual(V.dim, 4)
        np.testing.assert_array_equal(np.diag(V.projector), [0.0, 1.0, 0.0, 1.0])
        np.testing.assert_array_equal(np.diag(V.complement_projector), [1.0, 0.0, 1.0, 0.0])
        self.assertEqual(V.resolution_defect(), 0.0)

    def test_indices_out_of_range(self):
        with self.assertRaises(ShapeError):
            SubspaceProjector.from_indices(3, [3])

    def test_mask_matches_indices(self):
        a = SubspaceProjector.from_mask([True, False, True])
        b = SubspaceProjector.from_indices(3, [0, 2])
        np.testing.assert_array_equal(a.projector, b.projector)

    def test_general_basis_is_orthonormalized(self):
        V = SubspaceProjector.from_basis(np.array([[1.0], [1.0], [0.0]]))
        P = V.projector
        np.testing.assert_allclose(P @ P, P, atol=1e-14)
        np.testing.assert_allclose(P, P.T, atol=1e-14)
        np.testing.assert_allclose(P @ np.array([1.0, -1.0, 0.0]), np.zeros(3), atol=1e-14)
        self.assertLess(V.resolution_defect(), 1e-12)

    def test_rank_deficient_basis(self):
        V = SubspaceProjector.from_basis(np.array([[1.0, 2.0], [0.0, 0.0]]))
        self.assertEqual(V.rank, 1)
        self.assertEqual(V.complement.shape, (2, 1))

    def test_whole_space_has_empty_complement(self):
        V = SubspaceProjector.from_basis(np.eye(2))
        self.assertEqual(V.complement.shape, (2, 0))
        self.assertLess(V.resolution_defect(), 1e-12)

    def test_restrictions(self):
        V = SubspaceProjector.from_indices(3, [0])
        X = np.arange(9.0).reshape(3, 3)
        np.testing.assert_array_equal(V.restrict(X), [[0.0]])
        np.testing.assert_array_equal(V.restrict_complement(X), [[4.0, 5.0], [7.0, 8.0]])

    def test_project_trajectory(self):
        grid = TimeGrid(0.0, 1.0, 4)
        u = Trajectory(grid, np.ones((5, 2)))
        projected = SubspaceProjector.from_indices(2, [1]).project(u)
        np.testing.assert_array_equal(projected.values[:, 0], 0.0)
        np.testing.assert_array_equal(projected.values[:, 1], 1.0)
        with self.assertRaises(ShapeError):
            SubspaceProjector.from_indices(3, [1]).project(u)

    def test_invariance_check(self):
        grid = TimeGrid(0.0, 1.0, 20)
        V = SubspaceProjector.from_indices(2, [0])
        self.assertLess(V.check_invariant(d0_inv, grid), 1e-12)
        mixing = np.array([[0.0, 1.0], [1.0, 0.0]])
        defect = V.check_invariant(lambda u: u.with_values(u.values @ mixing.T), grid)
        self.assertGreater(defect, 1e-3)


if __name__ == '__main__':
    unittest.main()
