# src/naevo/spatial_operator.py
"""Discrete skew-selfadjoint spatial operators A (A* = -A as matrices)."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import ShapeError
from .material_law import CheckResult
from .utils import as_square_matrix, spectral_norm
from .weighted_time import Trajectory

logger = logging.getLogger(__name__)

SKEW_TOL = 1e-12


def check_skew(matrix, tol: float = SKEW_TOL) -> CheckResult:
    """Passes iff ||A + A*|| <= tol; `value` is that defect."""
    arr = as_square_matrix(matrix, name="A")
    defect = spectral_norm(arr + arr.conj().T)
    return CheckResult(defect <= tol, defect)


@dataclass(frozen=True, eq=False)
class SkewOperator:
    matrix: np.ndarray

    def __post_init__(self):
        arr = np.array(as_square_matrix(self.matrix, name="A"), copy=True)
        result = check_skew(arr, SKEW_TOL * max(1.0, spectral_norm(arr)))
        if not result:
            raise ValueError(f"Spatial operator is not skew-selfadjoint (||A + A*|| = {result.value:.3e}).")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @classmethod
    def zero(cls, dim: int) -> "SkewOperator":
        return cls(np.zeros((dim, dim)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: Trajectory) -> Trajectory:
        if u.dim != self.dim:
            raise ShapeError(f"A has dim {self.dim} but the trajectory has dim {u.dim}.")
        return u.with_values(u.values @ self.matrix.T)

    def max_real_eigenvalue(self) -> float:
        """Largest |Re lambda| over the spectrum (0 up to eigensolver round-off)."""
        if self.dim == 0:
            return 0.0
        return float(np.max(np.abs(scipy.linalg.eigvals(self.matrix).real)))


def make_block_skew(C) -> SkewOperator:
    """[[0, C*], [-C, 0]] for a p x q matrix C; the first q components come first."""
    c = np.atleast_2d(np.asarray(C))
    if c.ndim != 2:
        raise ShapeError(f"Block C must be 2-D, got shape {c.shape}.")
    p, q = c.shape
    dtype = np.result_type(c.dtype, float)
    out = np.zeros((p + q, p + q), dtype=dtype)
    out[:q, q:] = c.conj().T
    out[q:, :q] = -c
    return SkewOperator(out)


def grad_1d_dirichlet(m: int, dx: float):
    """
    Forward-difference gradient on m cells with a vanishing value past the last cell,
    (D u)_j = (u_{j+1} - u_j)/dx, u_m = 0. Returns (D, div) with div = -D*, so the pair
    integrates by parts without boundary terms.
    """
    if int(m) != m or m < 2:
        raise ValueError(f"grad_1d_dirichlet needs an integer m >= 2, got {m}.")
    if not dx > 0:
        raise ValueError(f"grad_1d_dirichlet needs dx > 0, got {dx}.")
    m = int(m)
    D = scipy.sparse.diags([-np.ones(m), np.ones(m - 1)], [0, 1], shape=(m, m)).toarray() / dx
    return D, -D.T
