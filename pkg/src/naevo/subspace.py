# src/naevo/subspace.py
"""
Closed subspaces V of C^d given by an orthonormal basis, with the complement V-perp, the
canonical embeddings iota_V / iota_Vperp and the orthogonal projector P_V = iota_V iota_V*.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import ShapeError
from .utils import make_rng, spectral_norm
from .weighted_time import TimeGrid, Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SubspaceProjector:
    basis: np.ndarray
    complement: np.ndarray

    @classmethod
    def from_basis(cls, columns, tol: float = 1e-12) -> "SubspaceProjector":
        """Orthonormalizes `columns` (shape (d, r)) and builds the complement from scipy's null_space."""
        cols = np.atleast_2d(np.asarray(columns))
        if cols.ndim != 2:
            raise ShapeError(f"Subspace basis must be 2-D, got shape {cols.shape}.")
        basis = scipy.linalg.orth(cols, rcond=tol) if cols.shape[1] else cols
        if basis.shape[1] < cols.shape[1]:
            logger.warning(f"Subspace basis had {cols.shape[1]} columns but rank {basis.shape[1]}.")
        if basis.shape[1] == 0:
            complement = np.eye(cols.shape[0], dtype=cols.dtype)
        elif basis.shape[1] == cols.shape[0]:
            complement = np.zeros((cols.shape[0], 0), dtype=basis.dtype)
        else:
            complement = scipy.linalg.null_space(basis.conj().T)
        return cls(_frozen(basis), _frozen(complement))

    @classmethod
    def from_indices(cls, dim: int, indices: Iterable[int]) -> "SubspaceProjector":
        """Coordinate subspace spanned by the unit vectors e_i, i in `indices`."""
        idx = sorted(set(int(i) for i in indices))
        if any(i < 0 or i >= dim for i in idx):
            raise ShapeError(f"Subspace indices must lie in [0, {dim}).")
        eye = np.eye(dim)
        rest = [i for i in range(dim) if i not in set(idx)]
        return cls(_frozen(eye[:, idx]), _frozen(eye[:, rest]))

    @classmethod
    def from_mask(cls, mask: Sequence[bool]) -> "SubspaceProjector":
        mask = np.asarray(mask, dtype=bool)
        return cls.from_indices(mask.size, np.flatnonzero(mask))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    @property
    def complement_projector(self) -> np.ndarray:
        return self.complement @ self.complement.conj().T

    def restrict(self, matrix: np.ndarray) -> np.ndarray:
        """iota_V* X iota_V."""
        return self.basis.conj().T @ matrix @ self.basis

    def restrict_complement(self, matrix: np.ndarray) -> np.ndarray:
        return self.complement.conj().T @ matrix @ self.complement

    def project(self, u: Trajectory) -> Trajectory:
        if u.dim != self.dim:
            raise ShapeError(f"Trajectory dim {u.dim} does not match subspace ambient dim {self.dim}.")
        return u.with_values(u.values @ self.projector.T)

    def resolution_defect(self) -> float:
        """|| P_V + P_Vperp - I ||, which vanishes when basis and complement split C^d orthogonally."""
        return spectral_norm(self.projector + self.complement_projector - np.eye(self.dim))

    def check_invariant(self, apply, grid: TimeGrid, n_probes: int = 4, seed: int = 0, tol: float = 1e-8) -> float:
        """
        Randomized check that P_V commutes with a trajectory operator: returns the worst relative
        value of || P_V K u - K P_V u || over a few random inputs. Raises nothing; callers compare to tol.
        """
        rng = make_rng(seed)
        worst = 0.0
        for _ in range(n_probes):
            u = Trajectory(grid, rng.standard_normal((grid.n + 1, self.dim)))
            lhs = self.project(apply(u)).values
            rhs = apply(self.project(u)).values
            scale = max(1.0, float(np.max(np.abs(lhs))))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
        if worst > tol:
            logger.warning(f"P_V does not commute with the operator: defect {worst:.3e}.")
        return worst


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out
