# src/naevo/perturbation.py
"""
Perturbed problems (d0 M0 + M1 + Minf + A) u = F solved by the Picard iteration
u <- solve(F - Minf(u)), plus the stock causal perturbations (delay, convolution,
scaled identity, pointwise Lipschitz maps).
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.signal

from .errors import CertificateError, DivergenceError, IterationLimitError, PreconditionError, ShapeError
from .evo_solver import EvoProblem, ensure_certificate, residual_norm, solve_trajectory
from .material_law import DEFAULT_RHO_GRID, estimate_lipschitz, posdef_certificate, subspace_posdef_certificate
from .subspace import SubspaceProjector
from .utils import make_rng
from .weighted_time import TimeGrid, Trajectory, Weight, weighted_inner, weighted_norm

logger = logging.getLogger(__name__)

DIVERGENCE_STREAK = 3


@dataclass(frozen=True, eq=False)
class PerturbationOp:
    """
    `norm_estimate(w)` bounds the weighted operator norm at w (the Lipschitz constant when
    `lipschitz` is set). `causal` is asserted by whoever builds the operator.
    """
    apply: Callable[[Trajectory], Trajectory]
    norm_estimate: Callable[[Weight], float]
    causal: bool = True
    lipschitz: bool = False
    name: str = "Minf"

    def __call__(self, u: Trajectory) -> Trajectory:
        return self.apply(u)


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    u: Trajectory
    iters: int
    ratio: float
    rho: float
    residual: float
    history: List[tuple] = field(default_factory=list)


def zero_operator() -> PerturbationOp:
    return PerturbationOp(lambda u: u * 0.0, lambda w: 0.0, name="zero")


def scaled_identity(eps: float) -> PerturbationOp:
    return PerturbationOp(lambda u: u * eps, lambda w: abs(eps), name=f"{eps:g}*I")


def delay_operator(tau: float, grid: Optional[TimeGrid] = None) -> PerturbationOp:
    """
    Right shift by s = floor(tau/h + 1/2) samples, zero-filled. With a known grid the norm
    estimate uses the effective delay s*h, otherwise exp(-rho*tau).
    """
    if not tau > 0:
        raise ValueError(f"Delay tau must be positive, got {tau}.")

    def shift_of(h: float) -> int:
        return int(math.floor(tau / h + 0.5))

    def apply(u: Trajectory) -> Trajectory:
        s = shift_of(u.grid.h)
        if s == 0:
            return u
        out = np.zeros_like(u.values)
        if s <= u.grid.n:
            out[s:] = u.values[:u.grid.n + 1 - s]
        return u.with_values(out)

    def norm_estimate(w: Weight) -> float:
        delay = shift_of(grid.h) * grid.h if grid is not None else tau
        return math.exp(-w.rho * delay)

    if grid is not None and shift_of(grid.h) == 0:
        logger.warning(f"Delay tau={tau:g} rounds to zero steps at h={grid.h:g}; the operator is the identity.")
    return PerturbationOp(apply, norm_estimate, name=f"delay({tau:g})")


def convolution_operator(kernel: Trajectory) -> PerturbationOp:
    """
    Causal convolution (K * u)_k = h * sum_{j<=k} K_{k-j} u_j. The kernel lives on a grid
    starting at t = 0 with the same step as the signals it acts on; a one-column kernel acts on
    every component, a d-column kernel componentwise.
    """
    kgrid = kernel.grid
    if abs(kgrid.t_min) > 1e-12:
        raise ValueError(f"Convolution kernel must start at t=0, got t_min={kgrid.t_min}.")
    magnitudes = np.max(np.abs(kernel.values), axis=1)

    def apply(u: Trajectory) -> Trajectory:
        h = u.grid.h
        if abs(h - kgrid.h) > 1e-9 * h:
            raise ShapeError(f"Kernel step {kgrid.h:g} differs from signal step {h:g}.")
        if kernel.dim not in (1, u.dim):
            raise ShapeError(f"Kernel has {kernel.dim} columns, signal has {u.dim}.")
        taps = h * kernel.values[:u.grid.n + 1]
        if kernel.dim == 1:
            out = scipy.signal.lfilter(taps[:, 0], [1.0], u.values, axis=0)
        else:
            out = np.column_stack([scipy.signal.lfilter(taps[:, i], [1.0], u.values[:, i]) for i in range(u.dim)])
        return u.with_values(out)

    def norm_estimate(w: Weight) -> float:
        return float(kgrid.h * np.sum(magnitudes * np.exp(-w.rho * kgrid.times)))

    return PerturbationOp(apply, norm_estimate, name="convolution")


def lipschitz_operator(fn: Callable[[np.ndarray], np.ndarray], lipschitz: float, name: str = "lipschitz") -> PerturbationOp:
    """Pointwise nonlinear map u_k -> fn(u_k) with Lipschitz constant `lipschitz` for every rho."""
    if lipschitz < 0:
        raise ValueError("Lipschitz constant must be non-negative.")

    def apply(u: Trajectory) -> Trajectory:
        return u.with_values(np.array([np.asarray(fn(row)).reshape(u.dim) for row in u.values]))

    return PerturbationOp(apply, lambda w: float(lipschitz), causal=True, lipschitz=True, name=name)


def fixed_point_solve(p: EvoProblem, Minf: PerturbationOp, tol: float = 1e-10, max_iter: int = 200,
                      iterations: Optional[int] = None) -> FixedPointResult:
    """
    Picard iteration for the perturbed equation. Requires Minf.norm_estimate(rho) < c0; stops when
    ||u_next - u||_rho <= tol. The reported ratio is the largest observed contraction ratio.

    With `iterations` set, exactly that many sweeps run and `tol` is ignored: two forcings that
    agree up to a time then yield bitwise identical iterates up to that time.
    """
    cert = ensure_certificate(p)
    estimate = Minf.norm_estimate(p.w)
    if not estimate < cert.c0:
        raise PreconditionError(f"||{Minf.name}|| estimate {estimate:.6g} is not below c0={cert.c0:.6g} at "
                                f"rho={p.w.rho:g}; try a larger rho.")
    if iterations is not None and iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}.")
    u = solve_trajectory(p)
    history = []
    previous, streak, iters = None, 0, 0
    while True:
        if iterations is not None and iters >= iterations:
            break
        if iters >= max_iter:
            last = history[-1][2] if history else float("nan")
            raise IterationLimitError(f"No convergence within {max_iter} iterations (last ratio {last:.4g}).",
                                      last_ratio=last)
        u_next = solve_trajectory(p.with_forcing(p.F - Minf(u)))
        iters += 1
        delta = weighted_norm(u_next - u, p.w)
        ratio = delta / previous if previous else float("nan")
        history.append((iters, delta, ratio))
        logger.debug(f"Iteration {iters}: ||du||={delta:.3e}, ratio={ratio:.4g}")
        u = u_next
        if iterations is None and delta <= tol:
            break
        if ratio >= 1.0:
            streak += 1
            if streak >= DIVERGENCE_STREAK:
                raise DivergenceError(f"Iteration is not contracting: ratio >= 1 for {streak} iterations "
                                      f"(last {ratio:.4g}).")
        else:
            streak = 0
        previous = delta

    observed = [r for _, _, r in history if not math.isnan(r)]
    worst = max(observed) if observed else 0.0
    residual = residual_norm(p, u, Minf(u))
    logger.info(f"Fixed point reached in {iters} iteration(s) at rho={p.w.rho:g}: max ratio {worst:.4g} "
                f"(estimate {estimate / cert.c0:.4g}), residual {residual:.3e}.")
    return FixedPointResult(u, iters, worst, p.w.rho, residual, history)


def subspace_coercivity(rho: float, c1: float, c0_V: float, eps: float, lip_M0: float, sup_M1: float,
                        minf_norm: float) -> float:
    """
    Lower bound for Re<(rho M0 + M0'/2 + M1 + Minf) u, u> / |u|^2 when M0 vanishes on V: the
    smallest eigenvalue of [[alpha, -beta/2], [-beta/2, eps]] in the variables (|P_Vperp u|, |P_V u|) with

        alpha = rho c1 - lip_M0/2 - sup_M1 - minf_norm,   beta = 2 (sup_M1 + minf_norm).

    With an empty complement (c1 = inf) this is eps.
    """
    if math.isinf(c1):
        return float(eps)
    alpha = rho * c1 - 0.5 * lip_M0 - sup_M1 - minf_norm
    beta = 2.0 * (sup_M1 + minf_norm)
    mean = 0.5 * (alpha + eps)
    spread = math.hypot(0.5 * (alpha - eps), 0.5 * beta)
    return mean - spread


def check_subspace_inequality(Minf: PerturbationOp, V: SubspaceProjector, grid: TimeGrid, w: Weight,
                              bound: float, n_probes: int = 8, seed: int = 0) -> float:
    """
    Smallest sampled Re<Minf(P_V u), P_V u>_rho / ||P_V u||^2_rho; raises PreconditionError if it
    falls below `bound`.
    """
    rng = make_rng(seed)
    lowest = math.inf
    for _ in range(n_probes):
        y = V.project(Trajectory(grid, rng.standard_normal((grid.n + 1, V.dim))))
        size = weighted_norm(y, w) ** 2
        if size == 0.0:
            continue
        value = float(np.real(weighted_inner(Minf(y), y, w))) / size
        lowest = min(lowest, value)
    if lowest < bound - 1e-12:
        raise PreconditionError(f"Sampled Re<{Minf.name} P_V u, P_V u> / ||P_V u||^2 = {lowest:.6g} "
                                f"falls below {bound:.6g}.")
    return lowest


def subspace_perturbed_solve(p: EvoProblem, Minf: PerturbationOp, V: SubspaceProjector, eps_margin: float = 0.1,
                             tol: float = 1e-10, max_iter: int = 200, rho_grid: Optional[Sequence[float]] = None,
                             n_probes: int = 8, seed: int = 0, iterations: Optional[int] = None) -> FixedPointResult:
    """
    Fixed-point solve when M0 degenerates on a subspace V. rho is raised along `rho_grid` (starting
    at p.w.rho) until the subspace coercivity constant is positive and Minf contracts against the
    certificate at that rho.
    """
    if not eps_margin > 0:
        raise ValueError(f"eps_margin must be positive, got {eps_margin}.")
    times = p.grid.times
    sub = subspace_posdef_certificate(p.M0, p.M1, V, times)
    check_subspace_inequality(Minf, V, p.grid, p.w, eps_margin - sub.c0, n_probes, seed)
    lip = estimate_lipschitz(p.M0, times)
    sup_m1 = p.M1.sup_norm(times)

    candidates = sorted({p.w.rho} | {float(r) for r in (rho_grid or DEFAULT_RHO_GRID) if r >= p.w.rho})
    limits = []
    for rho in candidates:
        w = Weight(rho)
        minf_norm = Minf.norm_estimate(w)
        coercivity = subspace_coercivity(rho, sub.c1, sub.c0, eps_margin, lip, sup_m1, minf_norm)
        limits.append((rho, coercivity, minf_norm))
        if coercivity <= 0:
            continue
        try:
            cert = posdef_certificate(p.M0, p.M1, times, rho_grid=[rho])
        except CertificateError:
            continue
        if minf_norm < cert.c0:
            logger.info(f"Subspace solve at rho={rho:g}: coercivity {coercivity:.4g}, c0={cert.c0:.4g}, "
                        f"||{Minf.name}||={minf_norm:.4g}.")
            return fixed_point_solve(dataclasses.replace(p, w=w, cert=cert), Minf, tol, max_iter, iterations)
    rho, coercivity, minf_norm = limits[-1]
    raise CertificateError(
        f"No rho up to {rho:g} gives a contracting subspace-coercive problem: coercivity {coercivity:.4g}, "
        f"c1={sub.c1:.4g}, c0(V)={sub.c0:.4g}, ||{Minf.name}||={minf_norm:.4g}.",
        hypothesis="subspace coercivity", witness_value=coercivity)
