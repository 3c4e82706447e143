# src/naevo/evo_solver.py
"""
Causal time-marching solver for (d0 M0(m0) + M1(m0) + A) u = F and the discrete observables
that go with it: the space-time operator B_h and its weighted adjoint, the energy identity,
causality and the 1/c0 norm bound.

The scheme is the conservative backward Euler step

    (M0(t_k)/h + M1(t_k-) + A) u_k = F_k + M0(t_{k-1}) u_{k-1} / h,    u_{-1} = 0,

i.e. B_h u = d0_apply(M0 u) + M1 u + A u with d0_apply the zero-extended backward difference.
Step k covers ]t_{k-1}, t_k], so M1 is taken as its left limit M1(t_k-) at declared breakpoints.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional

import numpy as np
import scipy.linalg

from .errors import CertificateError, PreconditionError, ShapeError, SolveError
from .material_law import OperatorFamily, PosDefCertificate, derivative_at, multiply, posdef_certificate
from .spatial_operator import SkewOperator
from .utils import min_eigenvalue
from .weighted_time import TimeGrid, Trajectory, Weight, cutoff, weighted_inner, weighted_norm

logger = logging.getLogger(__name__)

ORACLE_MAX_UNKNOWNS = 4096


@dataclass(frozen=True, eq=False)
class EvoProblem:
    M0: OperatorFamily
    M1: OperatorFamily
    A: SkewOperator
    F: Trajectory
    w: Weight
    cert: Optional[PosDefCertificate] = None

    def __post_init__(self):
        dims = {"M0": self.M0.dim, "M1": self.M1.dim, "A": self.A.dim, "F": self.F.dim}
        if len(set(dims.values())) != 1:
            raise ShapeError(f"Problem dimensions disagree: {dims}.")
        if self.cert is not None and self.w.rho < self.cert.rho0 - 1e-12:
            raise ValueError(f"rho={self.w.rho} lies below the certified rho0={self.cert.rho0}.")

    @property
    def grid(self) -> TimeGrid:
        return self.F.grid

    @property
    def dim(self) -> int:
        return self.F.dim

    def with_forcing(self, F: Trajectory) -> "EvoProblem":
        return dataclasses.replace(self, F=F)


@dataclass(frozen=True, eq=False)
class SolveReport:
    u: Trajectory
    rho: float
    norm_u: float
    norm_F: float
    c0: float
    bound_ratio: float
    step_accretivity_min: float
    energy_residuals: Dict[float, float] = field(default_factory=dict)
    causality_defect: float = float("nan")


def ensure_certificate(p: EvoProblem) -> PosDefCertificate:
    """The problem's certificate, or one computed at exactly rho = w.rho on the grid times."""
    if p.cert is not None:
        return p.cert
    try:
        return posdef_certificate(p.M0, p.M1, p.grid.times, rho_grid=[p.w.rho])
    except CertificateError as e:
        raise PreconditionError(f"No positive-definiteness certificate at rho={p.w.rho}: {e}") from e


def check_step_size(grid: TimeGrid, w: Weight) -> bool:
    """Steps with 1/h >= 4*rho keep M0/h dominant in the step matrix; larger steps only warn."""
    ok = grid.h * 4.0 * w.rho <= 1.0 + 1e-12
    if not ok:
        logger.warning(f"Step h={grid.h:.4g} exceeds 1/(4*rho)={1.0 / (4.0 * w.rho):.4g}; "
                       f"consider n >= {math.ceil(4.0 * w.rho * (grid.t_max - grid.t_min))}.")
    return ok


def _bound_ratio(norm_u: float, norm_F: float, c0: float) -> float:
    if norm_F == 0.0:
        return 0.0 if norm_u == 0.0 else float("inf")
    return norm_u * c0 / norm_F


def _step_factor(p: EvoProblem, t: float, m0: np.ndarray, cache: Optional[dict]):
    key = None
    if cache is not None:
        key = (p.M0.segment(t), p.M1.left_segment(t))
        if key in cache:
            return cache[key]
    step = m0 / p.grid.h + p.M1.left_at(t) + p.A.matrix
    if not np.all(np.isfinite(step)):
        raise SolveError(f"Step matrix at t={t:.6g} has non-finite entries.", step_time=float(t))
    accretivity = min_eigenvalue(step)
    if not accretivity > 0.0:
        raise SolveError(f"Step matrix at t={t:.6g} is not accretive (min Re eigenvalue {accretivity:.3e}).",
                         step_time=float(t))
    try:
        factor = scipy.linalg.lu_factor(step)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise SolveError(f"Step matrix at t={t:.6g} could not be factorized: {e}", step_time=float(t)) from e
    if np.min(np.abs(np.diag(factor[0]))) == 0.0:
        raise SolveError(f"Step matrix at t={t:.6g} is singular.", step_time=float(t))
    if cache is not None:
        cache[key] = (factor, accretivity)
    return factor, accretivity


def _march(p: EvoProblem) -> tuple:
    grid, h = p.grid, p.grid.h
    F = p.F.values
    dtype = np.result_type(F.dtype, p.M0.at(grid.t_min).dtype, p.M1.at(grid.t_min).dtype, p.A.matrix.dtype)
    u = np.zeros((grid.n + 1, p.dim), dtype=dtype)
    cache = {} if (p.M0.piecewise_constant and p.M1.piecewise_constant) else None
    carried = None
    lowest = math.inf
    for k, t in enumerate(grid.times):
        m0 = p.M0.at(t)
        factor, accretivity = _step_factor(p, t, m0, cache)
        rhs = F[k] if carried is None else F[k] + carried / h
        try:
            u[k] = scipy.linalg.lu_solve(factor, rhs)
        except ValueError as e:
            raise SolveError(f"Step at t={t:.6g} failed: {e}", step_time=float(t)) from e
        carried = m0 @ u[k]
        lowest = min(lowest, accretivity)
    if cache is not None:
        logger.debug(f"Reused {len(cache)} step factorization(s) over {grid.n + 1} steps.")
    return Trajectory(grid, u), lowest


def solve_trajectory(p: EvoProblem) -> Trajectory:
    """Bare march without certificate lookup or report; callers certify once up front."""
    return _march(p)[0]


def solve(p: EvoProblem, cut_times: Iterable[float] = (), causality_cut: Optional[float] = None) -> SolveReport:
    cert = ensure_certificate(p)
    check_step_size(p.grid, p.w)
    u, lowest = _march(p)
    norm_u, norm_F = weighted_norm(u, p.w), weighted_norm(p.F, p.w)
    residuals = {float(a): energy_identity_residual(p, u, a) for a in cut_times}
    defect = verify_causality(p, causality_cut) if causality_cut is not None else float("nan")
    report = SolveReport(u, p.w.rho, norm_u, norm_F, cert.c0, _bound_ratio(norm_u, norm_F, cert.c0),
                         lowest, residuals, defect)
    logger.info(f"Solved on {p.grid.n + 1} steps at rho={p.w.rho:g}: ||u||={norm_u:.6g}, ||F||={norm_F:.6g}, "
                f"bound ratio {report.bound_ratio:.6g}, min step accretivity {lowest:.6g}.")
    return report


def oracle_dense_solve(p: EvoProblem) -> Trajectory:
    """Assembles the whole block lower-bidiagonal space-time matrix and solves it in one dense call."""
    grid, d, h = p.grid, p.dim, p.grid.h
    size = (grid.n + 1) * d
    if size > ORACLE_MAX_UNKNOWNS:
        raise PreconditionError(f"Dense oracle limited to {ORACLE_MAX_UNKNOWNS} unknowns, problem has {size}.")
    m0 = p.M0.stack(grid.times)
    m1 = p.M1.left_stack(grid.times)
    dtype = np.result_type(m0.dtype, m1.dtype, p.A.matrix.dtype, p.F.values.dtype)
    K = np.zeros((size, size), dtype=dtype)
    for k in range(grid.n + 1):
        rows = slice(k * d, (k + 1) * d)
        K[rows, rows] = m0[k] / h + m1[k] + p.A.matrix
        if k > 0:
            K[rows, (k - 1) * d:k * d] = -m0[k - 1] / h
    try:
        values = scipy.linalg.solve(K, p.F.values.reshape(-1))
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise SolveError(f"Dense space-time solve failed: {e}") from e
    return Trajectory(grid, values.reshape(grid.n + 1, d))


def apply_operator(p: EvoProblem, u: Trajectory) -> Trajectory:
    """B_h u = d0_apply(M0 u) + M1 u + A u."""
    if u.grid != p.grid:
        raise ShapeError("Trajectory and problem live on different grids.")
    m0u = multiply(p.M0, u).values
    shifted = np.zeros_like(m0u)
    shifted[1:] = m0u[:-1]
    m1u = multiply(p.M1, u, left_limits=True).values
    return u.with_values((m0u - shifted) / p.grid.h + m1u + p.A.apply(u).values)


def _adjoint_ratios(grid: TimeGrid, w: Weight) -> np.ndarray:
    c = grid.endpoint_factors()
    return (c[1:] / c[:-1]) * math.exp(-2.0 * w.rho * grid.h)


def apply_adjoint_operator(p: EvoProblem, v: Trajectory) -> Trajectory:
    """Adjoint of B_h under the trapezoid weighted inner product."""
    if v.grid != p.grid:
        raise ShapeError("Trajectory and problem live on different grids.")
    grid, h = p.grid, p.grid.h
    m0h = np.conj(p.M0.stack(grid.times)).transpose(0, 2, 1)
    out = (np.einsum("kij,kj->ki", m0h, v.values) / h
           + multiply(p.M1.adjoint(), v, left_limits=True).values
           - p.A.apply(v).values)
    coupling = np.einsum("kij,kj->ki", m0h[:-1], v.values[1:])
    out[:-1] -= _adjoint_ratios(grid, p.w).reshape(-1, 1) * coupling / h
    return v.with_values(out)


def solve_adjoint(p: EvoProblem) -> SolveReport:
    """Backward march for B_h^dagger z = F: S_j* z_j = F_j + r_j M0(t_j)* z_{j+1} / h."""
    cert = ensure_certificate(p)
    grid, h = p.grid, p.grid.h
    ratios = _adjoint_ratios(grid, p.w)
    G = p.F.values
    dtype = np.result_type(G.dtype, p.M0.at(grid.t_min).dtype, p.M1.at(grid.t_min).dtype, p.A.matrix.dtype)
    z = np.zeros((grid.n + 1, p.dim), dtype=dtype)
    lowest = math.inf
    for j in range(grid.n, -1, -1):
        t = grid.times[j]
        m0 = p.M0.at(t)
        step = m0 / h + p.M1.left_at(t) + p.A.matrix
        if not np.all(np.isfinite(step)):
            raise SolveError(f"Adjoint step matrix at t={t:.6g} has non-finite entries.", step_time=float(t))
        accretivity = min_eigenvalue(step)
        if not accretivity > 0.0:
            raise SolveError(f"Adjoint step matrix at t={t:.6g} is not accretive ({accretivity:.3e}).",
                             step_time=float(t))
        rhs = G[j] if j == grid.n else G[j] + ratios[j] * (m0.conj().T @ z[j + 1]) / h
        try:
            z[j] = scipy.linalg.solve(step.conj().T, rhs)
        except (scipy.linalg.LinAlgError, ValueError) as e:
            raise SolveError(f"Adjoint step at t={t:.6g} failed: {e}", step_time=float(t)) from e
        lowest = min(lowest, accretivity)
    u = Trajectory(grid, z)
    norm_u, norm_F = weighted_norm(u, p.w), weighted_norm(p.F, p.w)
    logger.info(f"Adjoint solve at rho={p.w.rho:g}: ||z||={norm_u:.6g}.")
    return SolveReport(u, p.w.rho, norm_u, norm_F, cert.c0, _bound_ratio(norm_u, norm_F, cert.c0), lowest)


def adjoint_identity_defect(p: EvoProblem, u: Trajectory, v: Trajectory) -> float:
    """|<B u, v> - <u, B^dagger v>| relative to ||B u||*||v||."""
    lhs = weighted_inner(apply_operator(p, u), v, p.w)
    rhs = weighted_inner(u, apply_adjoint_operator(p, v), p.w)
    scale = max(1.0, weighted_norm(apply_operator(p, u), p.w) * weighted_norm(v, p.w))
    return abs(lhs - rhs) / scale


def energy_identity_residual(p: EvoProblem, u: Trajectory, a: float) -> float:
    """
    |left - right| for the energy identity cut at a, both sides summed with the rectangle rule up
    to the last grid time t_K <= a:

        left  = sum_k h Re<(B_h u)_k, u_k> e^{-2 rho t_k}
        right = 1/2 <u_K, M0(t_K) u_K> e^{-2 rho t_K}
                + sum_k h <(rho M0 + 1/2 M0' + Re M1)(t_k) u_k, u_k> e^{-2 rho t_k}
    """
    grid, rho = p.grid, p.w.rho
    K = grid.index_at_or_before(a)
    if K < 0:
        return 0.0
    times = grid.times[:K + 1]
    weights = grid.h * np.exp(-2.0 * rho * times)
    vals = u.values[:K + 1]
    bu = apply_operator(p, u).values[:K + 1]
    left = float(np.sum(weights * np.real(np.sum(np.conj(vals) * bu, axis=1))))
    body = 0.0
    for k, t in enumerate(times):
        m0 = p.M0.at(t)
        m1 = p.M1.left_at(t)
        form = rho * m0 + 0.5 * derivative_at(p.M0, t) + 0.5 * (m1 + m1.conj().T)
        body += weights[k] * float(np.real(np.vdot(vals[k], form @ vals[k])))
    end = vals[K]
    boundary = 0.5 * float(np.real(np.vdot(end, p.M0.at(times[K]) @ end))) * math.exp(-2.0 * rho * times[K])
    return abs(left - (boundary + body))


def residual_norm(p: EvoProblem, u: Trajectory, extra: Optional[Trajectory] = None) -> float:
    """||B_h u (+ extra) - F||_rho."""
    r = apply_operator(p, u) - p.F
    if extra is not None:
        r = r + extra
    return weighted_norm(r, p.w)


def verify_causality(p: EvoProblem, a: float,
                     solver: Optional[Callable[[Trajectory], Trajectory]] = None) -> float:
    """
    Max of two defects on t <= a: the solution for F with its part up to a removed (must vanish),
    and the difference between the solutions for F and for cutoff(F, a) (must agree).
    """
    if solver is None:
        solver = lambda F: solve(p.with_forcing(F)).u
    head = cutoff(p.F, a)
    silent = solver(p.F - head).max_abs(upto=a)
    agree = (solver(p.F) - solver(head)).max_abs(upto=a)
    defect = max(silent, agree)
    logger.debug(f"Causality at a={a:g}: late-forcing response {silent:.3e}, agreement defect {agree:.3e}.")
    return defect


def verify_norm_bound(report: SolveReport, cert: PosDefCertificate, bound_slack: float = 0.1) -> bool:
    """||u|| <= (1 + slack) ||F|| / c0."""
    ok = report.norm_u <= (1.0 + bound_slack) * report.norm_F / cert.c0
    logger.info(f"Norm bound: ||u|| c0/||F|| = {_bound_ratio(report.norm_u, report.norm_F, cert.c0):.6g} "
                f"(limit {1.0 + bound_slack:g}) -> {'ok' if ok else 'violated'}.")
    return ok
