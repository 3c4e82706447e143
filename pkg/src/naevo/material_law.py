# src/naevo/material_law.py
"""
Time-dependent operator families t -> M(t) (d x d matrices) and the checks that make
(d0 M0 + M1 + A) well posed: hypotheses (a)-(d) on M0 and the positive-definiteness
certificate rho*M0(t) + 1/2*M0'(t) + Re M1(t) >= c0.

Declared breakpoints of a family are the times where its derivative may fail to exist.
derivative_at returns 0 there, and certificates do not sample them.
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Optional, Sequence

import numpy as np

from .errors import CertificateError, PreconditionError, ShapeError
from .subspace import SubspaceProjector
from .utils import as_square_matrix, min_eigenvalue, spectral_norm, sym_part
from .weighted_time import Trajectory

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_RHO_GRID = tuple(float(2 ** k) for k in range(11))


def unit_ramp(s: float) -> float:
    """0 for s <= 0, s on ]0, 1], 1 afterwards."""
    return float(min(max(s, 0.0), 1.0))


def unit_ramp_slope(s: float) -> float:
    return 1.0 if 0.0 < s < 1.0 else 0.0


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    dim: int
    sampler: Callable[[float], np.ndarray]
    derivative_sampler: Optional[Callable[[float], np.ndarray]] = None
    lipschitz_hint: Optional[float] = None
    breakpoints: tuple = ()
    segments: Optional[Callable[[float], Hashable]] = None
    name: str = "M"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"Family '{self.name}' needs dim >= 1, got {self.dim}.")
        if self.lipschitz_hint is not None and self.lipschitz_hint < 0:
            raise ValueError(f"Family '{self.name}' has a negative lipschitz_hint.")
        object.__setattr__(self, "breakpoints", tuple(sorted(float(b) for b in self.breakpoints)))

    def at(self, t: float) -> np.ndarray:
        return as_square_matrix(self.sampler(float(t)), self.dim, name=f"{self.name}({t:g})")

    def stack(self, times: Iterable[float]) -> np.ndarray:
        return np.array([self.at(t) for t in times])

    @property
    def piecewise_constant(self) -> bool:
        return self.segments is not None

    def segment(self, t: float) -> Optional[Hashable]:
        return None if self.segments is None else self.segments(float(t))

    def is_breakpoint(self, t: float) -> bool:
        tol = 1e-12 * max(1.0, abs(t))
        return any(abs(t - b) <= tol for b in self.breakpoints)

    def left_time(self, t: float) -> float:
        """t, or the float just below the matching breakpoint when t sits on one."""
        t = float(t)
        tol = 1e-12 * max(1.0, abs(t))
        for b in self.breakpoints:
            if abs(t - b) <= tol:
                return float(np.nextafter(b, -np.inf))
        return t

    def left_at(self, t: float) -> np.ndarray:
        """Left limit M(t-); equals M(t) away from declared breakpoints."""
        return self.at(self.left_time(t))

    def left_stack(self, times: Iterable[float]) -> np.ndarray:
        return np.array([self.left_at(t) for t in times])

    def left_segment(self, t: float) -> Optional[Hashable]:
        return self.segment(self.left_time(t))

    def sup_norm(self, t_samples: Iterable[float]) -> float:
        return max((spectral_norm(self.at(t)) for t in t_samples), default=0.0)

    def adjoint(self) -> "OperatorFamily":
        derivative = None
        if self.derivative_sampler is not None:
            derivative = lambda t: np.conj(np.asarray(self.derivative_sampler(t))).T
        return OperatorFamily(self.dim, lambda t: np.conj(self.at(t)).T, derivative, self.lipschitz_hint,
                              self.breakpoints, self.segments, f"{self.name}*")


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    value: float
    witness_t: Optional[float] = None
    flagged: bool = False

    def __bool__(self):
        return self.passed


@dataclass(frozen=True, eq=False)
class PosDefCertificate:
    rho0: float
    c0: float
    witness: np.ndarray
    t_samples: np.ndarray
    tol: float = DEFAULT_TOL

    @property
    def worst_t(self) -> float:
        return float(self.t_samples[int(np.argmin(self.witness))])

    def min_where(self, mask: np.ndarray) -> float:
        """Smallest certified eigenvalue over the samples selected by `mask`."""
        mask = np.asarray(mask, dtype=bool)
        return float(np.min(self.witness[mask])) if mask.any() else float("inf")


@dataclass(frozen=True)
class SubspaceCertificate:
    c0: float
    c1: float
    t_samples: tuple = field(default_factory=tuple)


def constant_family(matrix, name: str = "M") -> OperatorFamily:
    mat = np.array(as_square_matrix(matrix, name=name), copy=True)
    mat.setflags(write=False)
    zero = np.zeros_like(mat)
    zero.setflags(write=False)
    return OperatorFamily(mat.shape[0], lambda t: mat, lambda t: zero, 0.0, (), lambda t: 0, name)


def piecewise_family(breakpoints: Sequence[float], matrices: Sequence, name: str = "M") -> OperatorFamily:
    """M(t) = matrices[i] on [breakpoints[i-1], breakpoints[i]) (left-closed segments)."""
    bps = [float(b) for b in breakpoints]
    if any(b1 >= b2 for b1, b2 in zip(bps, bps[1:])):
        raise ValueError(f"Breakpoints of '{name}' must be strictly increasing.")
    if len(matrices) != len(bps) + 1:
        raise ValueError(f"'{name}' needs {len(bps) + 1} matrices for {len(bps)} breakpoints, got {len(matrices)}.")
    mats = [np.array(as_square_matrix(m, name=name), copy=True) for m in matrices]
    dim = mats[0].shape[0]
    for m in mats:
        if m.shape != (dim, dim):
            raise ShapeError(f"Piecewise family '{name}' mixes matrix sizes.")
        m.setflags(write=False)
    zero = np.zeros_like(mats[0])
    locate = lambda t: bisect.bisect_right(bps, t)
    return OperatorFamily(dim, lambda t: mats[locate(t)], lambda t: zero, None, tuple(bps), locate, name)


def ramp_family(base, slope, t_start: float = 0.0, t_end: float = 1.0, name: str = "M") -> OperatorFamily:
    """base + ramp((t - t_start)/(t_end - t_start)) * slope."""
    if not t_end > t_start:
        raise ValueError(f"Ramp of '{name}' needs t_start < t_end.")
    base = np.array(as_square_matrix(base, name=name), copy=True)
    slope = np.array(as_square_matrix(slope, base.shape[0], name=name), copy=True)
    width = t_end - t_start
    return OperatorFamily(
        base.shape[0],
        lambda t: base + unit_ramp((t - t_start) / width) * slope,
        lambda t: (unit_ramp_slope((t - t_start) / width) / width) * slope,
        spectral_norm(slope) / width,
        (t_start, t_end),
        None,
        name,
    )


def scalar_family(profile: Callable[[float], float], matrix, profile_derivative: Optional[Callable] = None,
                  lipschitz_hint: Optional[float] = None, breakpoints: Sequence[float] = (),
                  name: str = "M") -> OperatorFamily:
    """profile(t) * matrix."""
    mat = np.array(as_square_matrix(matrix, name=name), copy=True)
    derivative = None
    if profile_derivative is not None:
        derivative = lambda t: profile_derivative(t) * mat
    if lipschitz_hint is not None:
        lipschitz_hint = lipschitz_hint * spectral_norm(mat)
    return OperatorFamily(mat.shape[0], lambda t: profile(t) * mat, derivative, lipschitz_hint,
                          tuple(breakpoints), None, name)


def table_family(times: Sequence[float], matrices: Sequence, name: str = "M") -> OperatorFamily:
    """Piecewise-linear interpolation of tabulated matrices, constant outside the table."""
    ts = np.asarray(times, dtype=float)
    if ts.ndim != 1 or ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ValueError(f"Table for '{name}' needs >= 2 strictly increasing times.")
    mats = np.array([as_square_matrix(m, name=name) for m in matrices])
    if mats.shape[0] != ts.size:
        raise ValueError(f"Table for '{name}' has {ts.size} times but {mats.shape[0]} matrices.")
    slopes = np.diff(mats, axis=0) / np.diff(ts).reshape(-1, 1, 1)

    def sampler(t):
        if t <= ts[0]:
            return mats[0]
        if t >= ts[-1]:
            return mats[-1]
        i = int(np.searchsorted(ts, t, side="right")) - 1
        return mats[i] + (t - ts[i]) * slopes[i]

    def derivative(t):
        if t <= ts[0] or t >= ts[-1]:
            return np.zeros_like(mats[0])
        return slopes[int(np.searchsorted(ts, t, side="right")) - 1]

    hint = max(spectral_norm(s) for s in slopes)
    return OperatorFamily(mats.shape[1], sampler, derivative, hint, tuple(ts), None, name)


def sum_family(*families: OperatorFamily, name: str = "M") -> OperatorFamily:
    dim = families[0].dim
    if any(f.dim != dim for f in families):
        raise ShapeError("sum_family needs families of equal dimension.")
    derivative = None
    if all(f.derivative_sampler is not None for f in families):
        derivative = lambda t: sum(np.asarray(f.derivative_sampler(t)) for f in families)
    hint = None
    if all(f.lipschitz_hint is not None for f in families):
        hint = sum(f.lipschitz_hint for f in families)
    segments = None
    if all(f.piecewise_constant for f in families):
        segments = lambda t: tuple(f.segment(t) for f in families)
    bps = sorted({b for f in families for b in f.breakpoints})
    return OperatorFamily(dim, lambda t: sum(f.at(t) for f in families), derivative, hint, tuple(bps),
                          segments, name)


def derivative_at(M: OperatorFamily, t: float, h_d: Optional[float] = None) -> np.ndarray:
    """Analytic derivative when supplied, else a central difference; 0 at declared breakpoints."""
    if M.is_breakpoint(t):
        return np.zeros((M.dim, M.dim), dtype=M.at(t).dtype)
    if M.derivative_sampler is not None:
        return as_square_matrix(M.derivative_sampler(float(t)), M.dim, name=f"{M.name}'({t:g})")
    step = h_d if h_d is not None else 1e-6 * max(1.0, abs(t))
    return (M.at(t + step) - M.at(t - step)) / (2.0 * step)


def derivative_family(M: OperatorFamily) -> OperatorFamily:
    """t -> M'(t) as a family of its own (for pointwise application to trajectories)."""
    return OperatorFamily(M.dim, lambda t: derivative_at(M, t), None, None, M.breakpoints, None, f"{M.name}'")


def check_selfadjoint(M: OperatorFamily, t_samples: Iterable[float], tol: float = DEFAULT_TOL) -> CheckResult:
    worst, worst_t = 0.0, None
    for t in t_samples:
        m = M.at(t)
        defect = spectral_norm(m - m.conj().T)
        if worst_t is None or defect > worst:
            worst, worst_t = defect, float(t)
    return CheckResult(worst <= tol, worst, worst_t)


def check_nonnegative(M: OperatorFamily, t_samples: Sequence[float], tol: float = DEFAULT_TOL) -> CheckResult:
    """Min eigenvalue of the Hermitian part; flagged when M itself is not selfadjoint."""
    samples = list(t_samples)
    selfadjoint = check_selfadjoint(M, samples, tol)
    if not selfadjoint:
        logger.warning(f"Family '{M.name}' is not selfadjoint (asymmetry {selfadjoint.value:.3e} at "
                       f"t={selfadjoint.witness_t}); checking its symmetrized part.")
    lowest, lowest_t = math.inf, None
    for t in samples:
        value = min_eigenvalue(M.at(t))
        if value < lowest:
            lowest, lowest_t = value, float(t)
    return CheckResult(lowest >= -tol, lowest, lowest_t, flagged=not selfadjoint.passed)


def estimate_lipschitz(M: OperatorFamily, t_samples: Sequence[float], use_hint: bool = True) -> float:
    """Largest difference quotient over consecutive samples, unless the family carries a hint."""
    if use_hint and M.lipschitz_hint is not None:
        return float(M.lipschitz_hint)
    ts = np.sort(np.asarray(list(t_samples), dtype=float))
    if ts.size < 2:
        raise ValueError("estimate_lipschitz needs at least two samples.")
    mats = M.stack(ts)
    quotients = [spectral_norm(mats[k + 1] - mats[k]) / (ts[k + 1] - ts[k])
                 for k in range(ts.size - 1) if ts[k + 1] > ts[k]]
    # np.max keeps a NaN quotient visible.
    return float(np.max(quotients)) if quotients else 0.0


def multiply(M: OperatorFamily, u: Trajectory, left_limits: bool = False) -> Trajectory:
    """Pointwise-in-time application (M(m0) u)(t_k) = M(t_k) u_k, or M(t_k-) u_k with left_limits."""
    if M.dim != u.dim:
        raise ShapeError(f"Family '{M.name}' has dim {M.dim} but the trajectory has dim {u.dim}.")
    mats = M.left_stack(u.grid.times) if left_limits else M.stack(u.grid.times)
    return u.with_values(np.einsum("kij,kj->ki", mats, u.values))


def _certificate_samples(M0: OperatorFamily, M1: OperatorFamily, t_samples: Iterable[float]) -> np.ndarray:
    kept = [float(t) for t in t_samples if not (M0.is_breakpoint(t) or M1.is_breakpoint(t))]
    if not kept:
        raise ValueError("No certificate samples left after removing family breakpoints.")
    dropped = len(list(t_samples)) - len(kept) if isinstance(t_samples, (list, tuple, np.ndarray)) else 0
    if dropped:
        logger.debug(f"Dropped {dropped} sample(s) sitting on breakpoints of '{M0.name}'/'{M1.name}'.")
    return np.asarray(kept)


def _check_m0_hypotheses(M0: OperatorFamily, samples: np.ndarray, tol: float):
    selfadjoint = check_selfadjoint(M0, samples, tol)
    if not selfadjoint:
        raise CertificateError(
            f"Hypothesis (a) failed: '{M0.name}' is not selfadjoint (asymmetry {selfadjoint.value:.3e} "
            f"at t={selfadjoint.witness_t}).",
            hypothesis="(a) selfadjoint", witness_t=selfadjoint.witness_t, witness_value=selfadjoint.value)
    nonnegative = check_nonnegative(M0, samples, tol)
    if not nonnegative:
        raise CertificateError(
            f"Hypothesis (b) failed: '{M0.name}' has eigenvalue {nonnegative.value:.6g} at "
            f"t={nonnegative.witness_t}.",
            hypothesis="(b) non-negative", witness_t=nonnegative.witness_t, witness_value=nonnegative.value)
    if M0.lipschitz_hint is not None or samples.size >= 2:
        lipschitz = estimate_lipschitz(M0, samples)
        if not math.isfinite(lipschitz):
            raise PreconditionError(f"Hypothesis (c) failed: '{M0.name}' has no finite Lipschitz estimate "
                                    f"(got {lipschitz}).")
        logger.debug(f"Lipschitz estimate for '{M0.name}': {lipschitz:.6g}.")
    for t in samples:
        d = derivative_at(M0, t)
        scale = max(1.0, spectral_norm(d))
        if spectral_norm(d - d.conj().T) > 1e-6 * scale:
            raise CertificateError(f"Hypothesis (d) failed: derivative of '{M0.name}' is not selfadjoint at t={t}.",
                                   hypothesis="(d) derivative selfadjoint", witness_t=float(t))


def posdef_certificate(M0: OperatorFamily, M1: OperatorFamily, t_samples: Iterable[float],
                       rho_grid: Optional[Iterable[float]] = None, tol: float = DEFAULT_TOL) -> PosDefCertificate:
    """
    Smallest rho on `rho_grid` for which rho*M0 + 1/2*M0' + Re M1 has minimum eigenvalue > tol on
    every sample; c0 is that minimum.
    """
    if M0.dim != M1.dim:
        raise ShapeError(f"M0 has dim {M0.dim} but M1 has dim {M1.dim}.")
    samples = _certificate_samples(M0, M1, list(t_samples))
    _check_m0_hypotheses(M0, samples, tol)
    rhos = sorted(float(r) for r in (rho_grid if rho_grid is not None else DEFAULT_RHO_GRID))
    if not rhos or rhos[0] <= 0:
        raise ValueError("rho_grid must hold positive values.")

    mass = np.array([sym_part(M0.at(t)) for t in samples])
    rest = np.array([sym_part(0.5 * derivative_at(M0, t) + M1.at(t)) for t in samples])
    worst_t, worst_value = None, None
    for rho in rhos:
        minima = np.linalg.eigvalsh(rho * mass + rest)[:, 0]
        c0 = float(np.min(minima))
        logger.debug(f"rho={rho:g}: min eigenvalue {c0:.6g}")
        if c0 > tol:
            logger.info(f"Positive-definiteness certificate: rho0={rho:g}, c0={c0:.6g} on {samples.size} samples.")
            witness = np.array(minima, copy=True)
            witness.setflags(write=False)
            samples.setflags(write=False)
            return PosDefCertificate(rho, c0, witness, samples, tol)
        worst_t, worst_value = float(samples[int(np.argmin(minima))]), c0
    raise CertificateError(
        f"No rho in [{rhos[0]:g}, {rhos[-1]:g}] makes rho*M0 + M0'/2 + Re M1 positive definite; "
        f"worst eigenvalue {worst_value:.6g} at t={worst_t}.",
        hypothesis="pos_def", witness_t=worst_t, witness_value=worst_value)


def subspace_posdef_certificate(M0: OperatorFamily, M1: OperatorFamily, V: SubspaceProjector,
                                t_samples: Iterable[float], tol: float = DEFAULT_TOL) -> SubspaceCertificate:
    """
    c0 = min eig of iota_V* Re M1 iota_V, c1 = min eig of iota_Vperp* M0 iota_Vperp, where V must be
    the (time-invariant) null space of M0.
    """
    if V.dim != M0.dim or M0.dim != M1.dim:
        raise ShapeError("Subspace and families must share one dimension.")
    samples = [float(t) for t in t_samples]
    c0, c1 = math.inf, math.inf
    for t in samples:
        m0 = M0.at(t)
        leak = spectral_norm(m0 @ V.basis)
        if leak > tol * max(1.0, spectral_norm(m0)):
            raise PreconditionError(f"V is not in the null space of '{M0.name}' at t={t} (defect {leak:.3e}).",
                                    step_time=t)
        c0 = min(c0, min_eigenvalue(V.restrict(M1.at(t))))
        c1 = min(c1, min_eigenvalue(V.restrict_complement(m0)))
    if c0 <= tol or c1 <= tol:
        raise CertificateError(f"Subspace certificate failed: c0={c0:.6g}, c1={c1:.6g}.", hypothesis="subspace")
    logger.info(f"Subspace certificate: c0={c0:.6g} on V (dim {V.rank}), c1={c1:.6g} on its complement.")
    return SubspaceCertificate(c0, c1, tuple(samples))
