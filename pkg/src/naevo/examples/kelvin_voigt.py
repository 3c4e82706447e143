# src/naevo/examples/kelvin_voigt.py
"""
1-D Kelvin-Voigt solid with time-dependent coefficients: velocity v and stress T on m cells,

    d0 eta(t) v - Div T = f,     d0 (C(t) + D(t) d0)^{-1} T = Grad v,

where D(t) = iota_V B(t) iota_V* is supported on the viscous cells V and vanishes on the
elastic cells P = V-perp. Splitting C in the V + P frame with

    X = C_PP^{-1} C_PV,   S = 1 - iota_P X iota_V*,   Sigma = C_VV - C_VP X   (Schur complement)

gives d0 (C + D d0)^{-1} = d0 M0~ + M1~ + Minf~ with

    M0~   = iota_P C_PP^{-1} iota_P*
    M1~   = S iota_V B^{-1} iota_V* S*
    Minf~ = S' iota_V R iota_V* S* + S iota_V (-B^{-1} Sigma R) iota_V* S*,   R = (B d0 + Sigma)^{-1}.

The assembled system acts on (v_0..v_{m-1}, T_0..T_{m-1}); its degenerate subspace is the
viscous part of the T block.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
import scipy.linalg

from ..errors import CertificateError, ConfigError, PreconditionError, ShapeError, SolveError
from ..evo_solver import EvoProblem
from ..material_law import (OperatorFamily, check_selfadjoint, constant_family, derivative_at, estimate_lipschitz,
                            ramp_family, scalar_family, sum_family)
from ..perturbation import PerturbationOp
from ..spatial_operator import grad_1d_dirichlet, make_block_skew
from ..subspace import SubspaceProjector
from ..utils import min_eigenvalue, spectral_norm
from ..weighted_time import TimeGrid, Trajectory, Weight, d0_inv, estimate_operator_norm

logger = logging.getLogger(__name__)

SERIES_TOL = 1e-14
PRESETS = ("reference", "solidifying")


@dataclass(frozen=True, eq=False)
class KelvinVoigtConfig:
    m: int
    dx: float
    viscous: tuple
    C: OperatorFamily
    B: OperatorFamily
    eta: OperatorFamily
    c: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ConfigError(f"m must be an integer >= 2, got {self.m}.", "examples.kelvin_voigt.m")
        if not self.dx > 0:
            raise ConfigError(f"dx must be positive, got {self.dx}.", "examples.kelvin_voigt.dx")
        object.__setattr__(self, "viscous", tuple(bool(x) for x in self.viscous))
        if len(self.viscous) != self.m:
            raise ConfigError(f"viscous mask has {len(self.viscous)} entries for {self.m} cells.",
                              "examples.kelvin_voigt.viscous")
        if not any(self.viscous):
            raise ConfigError("D vanishes on every cell, so there is no viscous subspace to split off.",
                              "examples.kelvin_voigt.viscous")
        if self.C.dim != self.m or self.eta.dim != self.m:
            raise ShapeError(f"C and eta must act on {self.m} cells.")
        if self.B.dim != self.rank:
            raise ShapeError(f"B must act on the {self.rank} viscous cells, got dim {self.B.dim}.")
        if not self.c > 0:
            raise ConfigError(f"coercivity constant c must be positive, got {self.c}.", "examples.kelvin_voigt.c")

    @property
    def rank(self) -> int:
        return sum(self.viscous)

    @property
    def dim(self) -> int:
        return 2 * self.m

    @property
    def stress_subspace(self) -> SubspaceProjector:
        """V inside the stress block."""
        return SubspaceProjector.from_mask(self.viscous)

    @property
    def system_subspace(self) -> SubspaceProjector:
        """V embedded in the full (v, T) system."""
        return SubspaceProjector.from_indices(self.dim, [self.m + i for i, x in enumerate(self.viscous) if x])

    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) * self.dx


@dataclass(frozen=True, eq=False)
class SchurDecomposition:
    """All matrices in stress-block coordinates (m x m) except `schur` (V) and `c_block` (P)."""
    V: SubspaceProjector
    S: np.ndarray
    coupling: np.ndarray
    schur: np.ndarray
    c_block: np.ndarray
    B: Optional[np.ndarray] = None

    def _blockdiag(self, on_v: np.ndarray, on_p: np.ndarray) -> np.ndarray:
        iv, ip = self.V.basis, self.V.complement
        return iv @ on_v @ iv.conj().T + ip @ on_p @ ip.conj().T

    def reconstruct(self) -> np.ndarray:
        """S^{-*} diag(schur, C_PP) S^{-1}, which equals C."""
        s_inv = scipy.linalg.inv(self.S)
        c_pp = scipy.linalg.inv(self.c_block) if self.c_block.size else self.c_block
        return s_inv.conj().T @ self._blockdiag(self.schur, c_pp) @ s_inv

    def inverse(self) -> np.ndarray:
        """S diag(schur^{-1}, C_PP^{-1}) S*, which equals C^{-1}."""
        return self.S @ self._blockdiag(scipy.linalg.inv(self.schur), self.c_block) @ self.S.conj().T

    def resolvent(self, z: complex) -> np.ndarray:
        """S diag((schur + z B)^{-1}, C_PP^{-1}) S*, which equals (C + z iota_V B iota_V*)^{-1}."""
        if self.B is None:
            raise ValueError("resolvent needs the decomposition to carry B.")
        return self.S @ self._blockdiag(scipy.linalg.inv(self.schur + z * self.B), self.c_block) @ self.S.conj().T


def schur_decompose(C_t: np.ndarray, B_t: Optional[np.ndarray], V: SubspaceProjector,
                    tol: float = 1e-12) -> SchurDecomposition:
    iv, ip = V.basis, V.complement
    C_t = np.asarray(C_t)
    if C_t.shape != (V.dim, V.dim):
        raise ShapeError(f"C must be {V.dim}x{V.dim}, got {C_t.shape}.")
    if B_t is not None and np.shape(B_t) != (V.rank, V.rank):
        raise ShapeError(f"B must be {V.rank}x{V.rank}, got {np.shape(B_t)}.")
    c_vv = iv.conj().T @ C_t @ iv
    if ip.shape[1] == 0:
        coupling = np.zeros((0, V.rank), dtype=C_t.dtype)
        return SchurDecomposition(V, np.eye(V.dim, dtype=C_t.dtype), coupling, c_vv,
                                  np.zeros((0, 0), dtype=C_t.dtype), B_t)
    c_pp = ip.conj().T @ C_t @ ip
    lowest = min_eigenvalue(c_pp)
    if lowest <= tol:
        raise CertificateError(f"Elastic block of C is not invertible (min eigenvalue {lowest:.3e}).",
                               hypothesis="elastic block", witness_value=lowest)
    c_block = scipy.linalg.inv(c_pp)
    coupling = c_block @ (ip.conj().T @ C_t @ iv)
    schur = c_vv - (iv.conj().T @ C_t @ ip) @ coupling
    S = np.eye(V.dim, dtype=np.result_type(C_t.dtype, float)) - ip @ coupling @ iv.conj().T
    return SchurDecomposition(V, S, coupling, schur, c_block, B_t)


def schur_family(C: OperatorFamily, V: SubspaceProjector) -> OperatorFamily:
    """t -> S(t); S'(t) = -iota_P X'(t) iota_V* with X' = C_PP^{-1}(C_PV' - C_PP' X) when C has a derivative."""
    iv, ip = V.basis, V.complement

    def sampler(t):
        return schur_decompose(C.at(t), None, V).S

    derivative = None
    if C.derivative_sampler is not None and ip.shape[1] > 0:
        def derivative(t):
            dec = schur_decompose(C.at(t), None, V)
            dC = np.asarray(C.derivative_sampler(t))
            d_coupling = dec.c_block @ (ip.conj().T @ dC @ iv - (ip.conj().T @ dC @ ip) @ dec.coupling)
            return -ip @ d_coupling @ iv.conj().T
    elif ip.shape[1] == 0:
        derivative = lambda t: np.zeros((V.dim, V.dim))
    return OperatorFamily(V.dim, sampler, derivative, None, C.breakpoints, None, "S")


def schur_lipschitz_bound(cfg: KelvinVoigtConfig, t_samples: Sequence[float]) -> Dict[str, float]:
    """Observed Lipschitz constant of S on the samples next to c^{-1}|C|_Lip + c^{-2}|C|_Lip |C|_inf."""
    samples = list(t_samples)
    observed = estimate_lipschitz(schur_family(cfg.C, cfg.stress_subspace), samples, use_hint=False)
    lip_c = estimate_lipschitz(cfg.C, samples)
    sup_c = cfg.C.sup_norm(samples)
    bound = lip_c / cfg.c + lip_c * sup_c / cfg.c ** 2
    return {"observed": observed, "bound": bound}


def check_kv_hypotheses(cfg: KelvinVoigtConfig, t_samples: Iterable[float], tol: float = 1e-10) -> Dict[str, float]:
    """Minima of Re B, iota_P* C iota_P and eta on the samples; each must reach c."""
    samples = list(t_samples)
    V = cfg.stress_subspace
    for family in (cfg.C, cfg.eta):
        result = check_selfadjoint(family, samples, tol)
        if not result:
            raise CertificateError(f"'{family.name}' is not selfadjoint (asymmetry {result.value:.3e}).",
                                   hypothesis="(a) selfadjoint", witness_t=result.witness_t,
                                   witness_value=result.value)
    minima = {
        "Re B": min(min_eigenvalue(cfg.B.at(t)) for t in samples),
        "C on elastic cells": min(min_eigenvalue(V.restrict_complement(cfg.C.at(t))) for t in samples),
        "eta": min(min_eigenvalue(cfg.eta.at(t)) for t in samples),
    }
    for label, value in minima.items():
        if value < cfg.c - tol:
            raise CertificateError(f"Kelvin-Voigt hypothesis '{label} >= c' fails: {value:.6g} < {cfg.c:g}.",
                                   hypothesis=label, witness_value=value)
    logger.debug(f"Kelvin-Voigt hypotheses hold: {minima}")
    return minima


class _Stacks:
    """Per-grid samples of S, S', B, B^{-1} Sigma restricted to what the perturbation needs."""

    def __init__(self, cfg: KelvinVoigtConfig, grid: TimeGrid):
        V = cfg.stress_subspace
        iv = V.basis
        s_family = schur_family(cfg.C, V)
        decs = [schur_decompose(cfg.C.at(t), cfg.B.at(t), V) for t in grid.times]
        self.s_v = np.array([d.S @ iv for d in decs])
        self.sh_v = np.array([iv.conj().T @ d.S.conj().T for d in decs])
        self.sdot_v = np.array([derivative_at(s_family, t) @ iv for t in grid.times])
        self.b = np.array([d.B for d in decs])
        try:
            self.b_inv_sigma = np.array([scipy.linalg.solve(d.B, d.schur) for d in decs])
            self.sup_b_inv = max(spectral_norm(scipy.linalg.inv(b)) for b in self.b)
        except (scipy.linalg.LinAlgError, ValueError) as e:
            raise SolveError(f"Viscosity block B could not be inverted on the grid: {e}") from e
        self.sigma = np.array([d.schur for d in decs])
        self.sup_s = max(spectral_norm(d.S) for d in decs)
        self.sup_sdot = max(spectral_norm(x) for x in self.sdot_v)
        self.sup_b_inv_sigma = max(spectral_norm(x) for x in self.b_inv_sigma)


def _pointwise(stack: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.einsum("kij,kj->ki", stack, values)


def _resolve(stacks: _Stacks, y: np.ndarray, h: float) -> np.ndarray:
    """z = (B d0 + Sigma)^{-1} y by (B_k/h + Sigma_k) z_k = y_k + B_k z_{k-1}/h."""
    z = np.zeros(y.shape, dtype=np.result_type(y.dtype, stacks.b.dtype))
    previous = np.zeros(y.shape[1], dtype=z.dtype)
    for k in range(y.shape[0]):
        try:
            z[k] = scipy.linalg.solve(stacks.b[k] / h + stacks.sigma[k], y[k] + stacks.b[k] @ previous / h)
        except (scipy.linalg.LinAlgError, ValueError) as e:
            raise SolveError(f"Resolvent step {k} failed: {e}") from e
        previous = z[k]
    return z


def d0_inv_bound(grid: TimeGrid, w: Weight) -> float:
    """Weighted norm of the discrete d0^{-1}: h / (1 - exp(-rho h)), slightly above 1/rho."""
    return grid.h / -math.expm1(-w.rho * grid.h)


def kv_perturbation(cfg: KelvinVoigtConfig, grid: TimeGrid) -> PerturbationOp:
    """Minf~ acting on the stress block of (v, T) trajectories on `grid`."""
    stacks = _Stacks(cfg, grid)
    m = cfg.m

    def apply(u: Trajectory) -> Trajectory:
        if u.grid != grid:
            raise ShapeError("Kelvin-Voigt perturbation was built for a different grid.")
        y = _pointwise(stacks.sh_v, u.values[:, m:])
        z = _resolve(stacks, y, grid.h)
        stress = _pointwise(stacks.sdot_v, z) + _pointwise(stacks.s_v, -_pointwise(stacks.b_inv_sigma, z))
        out = np.zeros(u.values.shape, dtype=np.result_type(u.values.dtype, stress.dtype))
        out[:, m:] = stress
        return u.with_values(out)

    def norm_estimate(w: Weight) -> float:
        dinv = d0_inv_bound(grid, w)
        q = dinv * stacks.sup_b_inv_sigma
        if q >= 1.0:
            return float("inf")
        resolvent = dinv * stacks.sup_b_inv / (1.0 - q)
        return (stacks.sup_sdot * stacks.sup_s + stacks.sup_s ** 2 * stacks.sup_b_inv_sigma) * resolvent

    return PerturbationOp(apply, norm_estimate, causal=True, name="kelvin_voigt_tail")


def neumann_tail_norm(cfg: KelvinVoigtConfig, w: Weight, grid: TimeGrid, n_samples: int = 64,
                      seed: Optional[int] = 0) -> float:
    """
    Randomized weighted norm of the tail -B^{-1} Sigma (B d0 + Sigma)^{-1} on V, with the resolvent
    expanded as the series sum_k (-d0^{-1} B^{-1} Sigma)^k d0^{-1} B^{-1}, truncated once q^k < 1e-14.
    """
    stacks = _Stacks(cfg, grid)
    q = d0_inv_bound(grid, w) * stacks.sup_b_inv_sigma
    if q >= 1.0:
        raise PreconditionError(f"Neumann series contraction factor {q:.4g} >= 1 at rho={w.rho:g}; "
                                f"increase rho.")
    if q == 0.0:
        return 0.0
    terms = max(1, math.ceil(math.log(SERIES_TOL) / math.log(q)))
    b_inv = np.array([scipy.linalg.inv(b) for b in stacks.b])

    def tail(y: Trajectory) -> Trajectory:
        term = d0_inv(y.with_values(_pointwise(b_inv, y.values)))
        z = term.values
        for _ in range(terms):
            term = d0_inv(term.with_values(-_pointwise(stacks.b_inv_sigma, term.values)))
            z = z + term.values
        return y.with_values(-_pointwise(stacks.b_inv_sigma, z))

    estimate = estimate_operator_norm(tail, grid, cfg.rank, w, n_samples, seed)
    logger.info(f"Neumann tail at rho={w.rho:g}: {estimate:.6g} ({terms} series terms, q={q:.4g}).")
    return estimate


@dataclass(frozen=True, eq=False)
class KelvinVoigtSystem:
    problem: EvoProblem
    Minf: PerturbationOp
    V: SubspaceProjector


def _blockdiag(top: np.ndarray, bottom: np.ndarray) -> np.ndarray:
    return scipy.linalg.block_diag(top, bottom)


def build_kv_problem(cfg: KelvinVoigtConfig, w: Weight, grid: TimeGrid, F: Trajectory) -> KelvinVoigtSystem:
    if F.dim != cfg.dim or F.grid != grid:
        raise ShapeError(f"Forcing must be a {cfg.dim}-component trajectory on the requested grid.")
    check_kv_hypotheses(cfg, grid.times)
    V = cfg.stress_subspace
    ip = V.complement
    m = cfg.m
    zero = np.zeros((m, m))

    def elastic_mass(t):
        if ip.shape[1] == 0:
            return zero
        return ip @ schur_decompose(cfg.C.at(t), None, V).c_block @ ip.conj().T

    def m0(t):
        return _blockdiag(cfg.eta.at(t), elastic_mass(t))

    m0_derivative = None
    if cfg.C.derivative_sampler is not None and cfg.eta.derivative_sampler is not None:
        def m0_derivative(t):
            d_eta = np.asarray(cfg.eta.derivative_sampler(t))
            if ip.shape[1] == 0:
                return _blockdiag(d_eta, zero)
            inv = schur_decompose(cfg.C.at(t), None, V).c_block
            d_cpp = ip.conj().T @ np.asarray(cfg.C.derivative_sampler(t)) @ ip
            return _blockdiag(d_eta, -ip @ inv @ d_cpp @ inv @ ip.conj().T)

    def m1(t):
        dec = schur_decompose(cfg.C.at(t), None, V)
        s_v = dec.S @ V.basis
        return _blockdiag(zero, s_v @ scipy.linalg.inv(cfg.B.at(t)) @ s_v.conj().T)

    breakpoints = tuple(sorted(set(cfg.C.breakpoints) | set(cfg.B.breakpoints) | set(cfg.eta.breakpoints)))
    M0 = OperatorFamily(cfg.dim, m0, m0_derivative, None, breakpoints, None, "M0")
    M1 = OperatorFamily(cfg.dim, m1, None, None, breakpoints, None, "M1")
    D, _ = grad_1d_dirichlet(m, cfg.dx)
    problem = EvoProblem(M0, M1, make_block_skew(D), F, w)
    logger.info(f"Kelvin-Voigt system: {m} cells, {cfg.rank} viscous, rho={w.rho:g}.")
    return KelvinVoigtSystem(problem, kv_perturbation(cfg, grid), cfg.system_subspace)


def kv_forcing(cfg: KelvinVoigtConfig, grid: TimeGrid, t0: float = 0.25, t1: float = 1.25,
               amplitude: float = 1.0) -> Trajectory:
    """sin^2 body-force pulse on [t0, t1] with profile sin(pi x) in the velocity block."""
    t = grid.times
    pulse = np.where((t > t0) & (t < t1), np.sin(math.pi * (t - t0) / (t1 - t0)) ** 2, 0.0)
    values = np.zeros((grid.n + 1, cfg.dim))
    values[:, :cfg.m] = amplitude * np.outer(pulse, np.sin(math.pi * cfg.cell_centers() / (cfg.m * cfg.dx)))
    return Trajectory(grid, values)


def _left_half(m: int) -> tuple:
    return tuple(j < m // 2 for j in range(m))


def kv_reference_config(m: int = 16) -> KelvinVoigtConfig:
    """Viscous left half, C = 1, B = 1 on V, eta = 1, c = 1."""
    viscous = _left_half(m)
    r = sum(viscous)
    return KelvinVoigtConfig(m, 1.0 / m, viscous, constant_family(np.eye(m), "C"),
                             constant_family(np.eye(r), "B"), constant_family(np.eye(m), "eta"), 1.0)


def kv_solidifying_config(m: int = 16) -> KelvinVoigtConfig:
    """
    Stiffening C(t) = (1.5 + 0.5 tanh(t - 1)) + K/4 with a fixed nearest-neighbour coupling K and a
    viscosity ramping from 0.5 to 1 on t in [0, 1]; c = 0.5.
    """
    viscous = _left_half(m)
    r = sum(viscous)
    stiffening = scalar_family(lambda t: 1.5 + 0.5 * math.tanh(t - 1.0), np.eye(m),
                               lambda t: 0.5 / math.cosh(t - 1.0) ** 2, lipschitz_hint=0.5, name="C_diag")
    neighbours = constant_family(0.25 * (np.eye(m, k=1) + np.eye(m, k=-1)), name="C_coupling")
    C = sum_family(stiffening, neighbours, name="C")
    B = ramp_family(0.5 * np.eye(r), 0.5 * np.eye(r), 0.0, 1.0, name="B")
    return KelvinVoigtConfig(m, 1.0 / m, viscous, C, B, constant_family(np.eye(m), "eta"), 0.5)


def kv_config_from_dict(section: Dict) -> KelvinVoigtConfig:
    preset = section.get("preset", "reference")
    m = int(section.get("m", 16))
    if preset == "reference":
        return kv_reference_config(m)
    if preset == "solidifying":
        return kv_solidifying_config(m)
    raise ConfigError(f"Unknown Kelvin-Voigt preset '{preset}' (expected one of {PRESETS}).",
                      "examples.kelvin_voigt.preset")
