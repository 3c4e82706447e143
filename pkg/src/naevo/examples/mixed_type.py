# src/naevo/examples/mixed_type.py
r"""
1+1-D system that changes type in space (hyperbolic / parabolic / elliptic) and, in the
nonautonomous variant, also in time:

    M0(t) = phi(t) * diag(a_u, a_v),    a_u = chi_{R \ ]-eps,0[},  a_v = chi_{R \ ]-eps,eps[}
    M1(t) = 1 for t < 0,  diag(1 - a_u, 1 - a_v) for t >= 0
    A     = [[0, D*], [-D, 0]],  D the Dirichlet forward difference

on m cells of [-L, L] with centers x_j = -L + (j + 1/2) dx. The unknown is (u_0..u_{m-1}, v_0..v_{m-1}).
The autonomous variant drops phi and uses diag(1 - a_u, 1 - a_v) for all t.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List

import numpy as np

from ..errors import ConfigError, ShapeError
from ..evo_solver import EvoProblem
from ..material_law import constant_family, piecewise_family, posdef_certificate, ramp_family, unit_ramp
from ..spatial_operator import grad_1d_dirichlet, make_block_skew
from ..weighted_time import TimeGrid, Trajectory, Weight

logger = logging.getLogger(__name__)

VARIANTS = ("autonomous", "nonautonomous")


def phi(t: float) -> float:
    """0 for t <= 0, t on ]0, 1], 1 afterwards."""
    return unit_ramp(t)


@dataclass(frozen=True)
class MixedTypeConfig:
    epsilon: float = 0.5
    L: float = 1.0
    m: int = 64
    variant: str = "nonautonomous"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}.", "examples.mixed_type.epsilon")
        if not self.epsilon < self.L:
            raise ConfigError(f"epsilon={self.epsilon} must be below L={self.L}.", "examples.mixed_type.epsilon")
        if int(self.m) != self.m or self.m < 8:
            raise ConfigError(f"m must be an integer >= 8, got {self.m}.", "examples.mixed_type.m")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got '{self.variant}'.",
                              "examples.mixed_type.variant")

    @classmethod
    def from_dict(cls, section: Dict) -> "MixedTypeConfig":
        return cls(float(section.get("epsilon", 0.5)), float(section.get("L", 1.0)),
                   int(section.get("m", 64)), str(section.get("variant", "nonautonomous")))

    @property
    def dim(self) -> int:
        return 2 * self.m

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.m

    def cell_centers(self) -> np.ndarray:
        return -self.L + (np.arange(self.m) + 0.5) * self.dx

    def indicators(self) -> np.ndarray:
        """Diagonal of the undegenerate M0 (a_u cells then a_v cells) as 0/1 floats."""
        x = self.cell_centers()
        a_u = ~((x > -self.epsilon) & (x < 0.0))
        a_v = ~((x > -self.epsilon) & (x < self.epsilon))
        return np.concatenate([a_u, a_v]).astype(float)


def default_grid(n: int = 512) -> TimeGrid:
    """[-0.3125, 2.6875]; t = 1 is a grid point when 16 divides n."""
    return TimeGrid(-0.3125, 2.6875, n)


def mixed_type_families(cfg: MixedTypeConfig):
    """(M0, M1, A) for the configured variant."""
    a = cfg.indicators()
    mass, damping = np.diag(a), np.diag(1.0 - a)
    if cfg.variant == "autonomous":
        M0 = constant_family(mass, name="M0")
        M1 = constant_family(damping, name="M1")
    else:
        M0 = ramp_family(np.zeros_like(mass), mass, 0.0, 1.0, name="M0")
        M1 = piecewise_family([0.0], [np.eye(cfg.dim), damping], name="M1")
    D, _ = grad_1d_dirichlet(cfg.m, cfg.dx)
    return M0, M1, make_block_skew(D)


def build_mixed_type(cfg: MixedTypeConfig, w: Weight, grid: TimeGrid, F: Trajectory) -> EvoProblem:
    if F.dim != cfg.dim:
        raise ShapeError(f"Forcing must have 2m = {cfg.dim} components, got {F.dim}.")
    if F.grid != grid:
        raise ShapeError("Forcing does not live on the requested grid.")
    M0, M1, A = mixed_type_families(cfg)
    cert = posdef_certificate(M0, M1, grid.times, rho_grid=[w.rho])
    logger.info(f"Mixed-type ({cfg.variant}, m={cfg.m}, eps={cfg.epsilon:g}) certified with c0={cert.c0:.6g} "
                f"at rho={w.rho:g}.")
    return EvoProblem(M0, M1, A, F, w, cert)


def region_types(problem: EvoProblem, t: float) -> List[str]:
    """Per cell: 'elliptic' (no time derivative on u), 'parabolic' (only on u), 'hyperbolic' (on both)."""
    m = problem.dim // 2
    diag = np.real(np.diag(problem.M0.at(t)))
    labels = []
    for j in range(m):
        if diag[j] == 0.0:
            labels.append("elliptic")
        elif diag[m + j] == 0.0:
            labels.append("parabolic")
        else:
            labels.append("hyperbolic")
    return labels


def case_bounds(problem: EvoProblem, rho: float, t_samples: Iterable[float]) -> Dict[str, float]:
    """Certificate minima over the three time regimes t <= 0, 0 < t <= 1 and t > 1."""
    cert = posdef_certificate(problem.M0, problem.M1, t_samples, rho_grid=[rho])
    t = cert.t_samples
    return {
        "t<=0": cert.min_where(t <= 0.0),
        "0<t<=1": cert.min_where((t > 0.0) & (t <= 1.0)),
        "t>1": cert.min_where(t > 1.0),
    }


def gaussian_forcing(cfg: MixedTypeConfig, grid: TimeGrid, t0: float = 0.5, t1: float = 1.5,
                     center: float = 0.5, width: float = 0.15, amplitude: float = 1.0) -> Trajectory:
    """sin^2 pulse on [t0, t1] times a Gaussian in x, in the u block only."""
    if not t1 > t0:
        raise ValueError("gaussian_forcing needs t0 < t1.")
    profile = np.exp(-((cfg.cell_centers() - center) / width) ** 2)
    t = grid.times
    pulse = np.where((t > t0) & (t < t1), np.sin(math.pi * (t - t0) / (t1 - t0)) ** 2, 0.0)
    values = np.zeros((grid.n + 1, cfg.dim))
    values[:, :cfg.m] = amplitude * np.outer(pulse, profile)
    return Trajectory(grid, values)
