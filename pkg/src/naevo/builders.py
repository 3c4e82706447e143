# src/naevo/builders.py
"""Turns a validated configuration dictionary into grids, families, forcings and problems."""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config_manager import DEFAULT_CONFIG
from .errors import ConfigError, ShapeError
from .evo_solver import EvoProblem
from .examples.kelvin_voigt import KelvinVoigtConfig, build_kv_problem, kv_config_from_dict, kv_forcing
from .examples.mixed_type import MixedTypeConfig, build_mixed_type, gaussian_forcing
from .material_law import OperatorFamily, constant_family, piecewise_family, ramp_family, table_family
from .perturbation import PerturbationOp, convolution_operator, delay_operator, scaled_identity
from .spatial_operator import SkewOperator, grad_1d_dirichlet, make_block_skew
from .subspace import SubspaceProjector
from .utils import get_safe_nested_dict_value, make_rng
from .weighted_time import TimeGrid, Trajectory, Weight

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BuiltProblem:
    """Everything a command needs; `Minf` and `V` are set for perturbed and degenerate problems."""
    kind: str
    problem: EvoProblem
    Minf: Optional[PerturbationOp] = None
    V: Optional[SubspaceProjector] = None
    mixed: Optional[MixedTypeConfig] = None
    kv: Optional[KelvinVoigtConfig] = None


def build_grid(config: dict) -> TimeGrid:
    section = config["grid"]
    return TimeGrid(float(section["t_min"]), float(section["t_max"]), int(section["n"]))


def build_weight(config: dict, rho: Optional[float] = None) -> Weight:
    return Weight(float(rho if rho is not None else config["weight"]["rho"]))


def certificate_samples(config: dict, grid: TimeGrid) -> np.ndarray:
    n = int(get_safe_nested_dict_value(config, ["certificate", "n_samples"], 200))
    return np.linspace(grid.t_min, grid.t_max, n)


def parse_matrix(literal, dim: int, location: str = "matrix") -> np.ndarray:
    """
    Accepts nested lists, "identity", "zero", {"identity": s}, {"diag": [...]},
    {"tridiag": [sub, main, super]} (scalars) and {"csv": path}.
    """
    if isinstance(literal, str):
        if literal == "identity":
            return np.eye(dim)
        if literal == "zero":
            return np.zeros((dim, dim))
        raise ConfigError(f"Unknown matrix keyword '{literal}'.", location)
    if isinstance(literal, (int, float)) and not isinstance(literal, bool):
        return float(literal) * np.eye(dim)
    if isinstance(literal, dict):
        if "identity" in literal:
            return float(literal["identity"]) * np.eye(dim)
        if "diag" in literal:
            diag = np.asarray(literal["diag"], dtype=float)
            if diag.shape != (dim,):
                raise ConfigError(f"diag needs {dim} entries, got {diag.size}.", location)
            return np.diag(diag)
        if "tridiag" in literal:
            sub, main, sup = (float(x) for x in literal["tridiag"])
            return main * np.eye(dim) + sub * np.eye(dim, k=-1) + sup * np.eye(dim, k=1)
        if "csv" in literal:
            arr = np.loadtxt(literal["csv"], delimiter=",", ndmin=2)
            if arr.shape != (dim, dim):
                raise ConfigError(f"CSV matrix must be {dim}x{dim}, got {arr.shape}.", location)
            return arr
        raise ConfigError(f"Unrecognized matrix literal {literal!r}.", location)
    try:
        arr = np.array(literal, dtype=complex)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Matrix literal is not numeric: {e}", location) from e
    if not np.any(arr.imag):
        arr = arr.real
    arr = np.atleast_2d(arr)
    if arr.shape != (dim, dim):
        raise ConfigError(f"Matrix must be {dim}x{dim}, got shape {arr.shape}.", location)
    return arr


def _table_from_csv(path: str, dim: int, name: str, location: str) -> OperatorFamily:
    """Rows `t, m_11, m_12, ..., m_dd` (row-major)."""
    rows = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    if rows.shape[1] != 1 + dim * dim:
        raise ConfigError(f"Table CSV needs 1 + {dim * dim} columns, got {rows.shape[1]}.", location)
    return table_family(rows[:, 0], rows[:, 1:].reshape(-1, dim, dim), name=name)


def build_family(spec, dim: int, name: str, location: str) -> OperatorFamily:
    if not (isinstance(spec, dict) and "type" in spec):
        return constant_family(parse_matrix(spec, dim, location), name=name)
    kind = spec["type"]
    if kind == "constant":
        return constant_family(parse_matrix(spec["matrix"], dim, f"{location}.matrix"), name=name)
    if kind == "piecewise":
        matrices = [parse_matrix(m, dim, f"{location}.matrices[{i}]") for i, m in enumerate(spec["matrices"])]
        try:
            return piecewise_family(spec["breakpoints"], matrices, name=name)
        except ValueError as e:
            raise ConfigError(str(e), location) from e
    if kind == "ramp":
        base = parse_matrix(spec["base"], dim, f"{location}.base")
        slope = parse_matrix(spec["slope"], dim, f"{location}.slope")
        try:
            return ramp_family(base, slope, float(spec.get("t_start", 0.0)), float(spec.get("t_end", 1.0)), name=name)
        except ValueError as e:
            raise ConfigError(str(e), location) from e
    if kind == "table":
        return _table_from_csv(spec["csv"], dim, name, location)
    raise ConfigError(f"Unknown family type '{kind}'.", location)


def build_spatial(spec, dim: int, location: str = "problem.A") -> SkewOperator:
    """A matrix literal, {"type": "block_skew", "C": literal} or {"type": "grad_1d", "m": m, "dx": dx}."""
    if isinstance(spec, dict) and spec.get("type") == "block_skew":
        C = np.atleast_2d(np.asarray(spec["C"], dtype=float))
        op = make_block_skew(C)
    elif isinstance(spec, dict) and spec.get("type") == "grad_1d":
        m = int(spec.get("m", dim // 2))
        D, _ = grad_1d_dirichlet(m, float(spec.get("dx", 1.0 / m)))
        op = make_block_skew(D)
    else:
        try:
            op = SkewOperator(parse_matrix(spec, dim, location))
        except ValueError as e:
            raise ConfigError(str(e), location) from e
    if op.dim != dim:
        raise ConfigError(f"Spatial operator has dim {op.dim}, problem has dim {dim}.", location)
    return op


def _forcing_value(spec: dict, dim: int, location: str) -> np.ndarray:
    value = np.atleast_1d(np.asarray(spec.get("value", 1.0), dtype=float))
    if value.size == 1:
        return np.full(dim, value[0])
    if value.shape != (dim,):
        raise ConfigError(f"Forcing value needs 1 or {dim} entries, got {value.size}.", f"{location}.value")
    return value


def build_forcing(spec: dict, grid: TimeGrid, dim: int, seed: int = 0, location: str = "problem.F") -> Trajectory:
    """
    zero; step (value for t > t0); bump (sin^2 pulse on ]t0, t1[); sine (sin(omega (t - t0)) for
    t > t0); random (Gaussian samples on ]t0, t1], seeded by general.seed + seed_offset); csv.
    """
    kind = spec.get("type", "zero")
    t = grid.times
    if kind == "zero":
        return Trajectory.zeros(grid, dim)
    if kind == "step":
        profile = (t > float(spec.get("t0", 0.0))).astype(float)
    elif kind == "bump":
        t0, t1 = float(spec.get("t0", 0.0)), float(spec.get("t1", 1.0))
        if not t1 > t0:
            raise ConfigError("bump needs t0 < t1.", location)
        profile = np.where((t > t0) & (t < t1), np.sin(math.pi * (t - t0) / (t1 - t0)) ** 2, 0.0)
    elif kind == "sine":
        t0 = float(spec.get("t0", 0.0))
        profile = np.where(t > t0, np.sin(float(spec.get("omega", 1.0)) * (t - t0)), 0.0)
    elif kind == "random":
        t0, t1 = float(spec.get("t0", grid.t_min)), float(spec.get("t1", grid.t_max))
        rng = make_rng(seed + int(spec.get("seed_offset", 0)))
        values = rng.standard_normal((grid.n + 1, dim))
        values[(t <= t0) | (t > t1)] = 0.0
        return Trajectory(grid, values)
    elif kind == "csv":
        F = Trajectory.from_csv(spec["path"])
        if F.grid != grid or F.dim != dim:
            raise ConfigError(f"Forcing CSV must hold {dim} components on the configured grid.", location)
        return F
    else:
        raise ConfigError(f"Unknown forcing type '{kind}'.", location)
    return Trajectory(grid, np.outer(profile, _forcing_value(spec, dim, location)))


def build_perturbation(config: dict, grid: TimeGrid) -> Optional[PerturbationOp]:
    section = config["perturbation"]
    kind = section.get("type", "none")
    if kind == "none":
        return None
    if kind == "delay":
        return delay_operator(float(section["tau"]), grid)
    if kind == "scaled_identity":
        return scaled_identity(float(section["epsilon"]))
    if kind == "convolution":
        kernel = section.get("kernel", DEFAULT_CONFIG["perturbation"]["kernel"])
        if "csv" in kernel:
            K = Trajectory.from_csv(kernel["csv"])
        else:
            steps = max(2, int(math.ceil(float(kernel.get("t_max", 4.0)) / grid.h)))
            kgrid = TimeGrid(0.0, steps * grid.h, steps)
            decay, amplitude = float(kernel.get("decay", 1.0)), float(kernel.get("amplitude", 1.0))
            K = Trajectory(kgrid, amplitude * np.exp(-decay * kgrid.times))
        return convolution_operator(K)
    raise ConfigError(f"Unknown perturbation type '{kind}'.", "perturbation.type")


def build_problem(config: dict, rho: Optional[float] = None, grid: Optional[TimeGrid] = None) -> BuiltProblem:
    """The configured problem at weight `rho` (default weight.rho) on `grid` (default from config)."""
    grid = grid if grid is not None else build_grid(config)
    w = build_weight(config, rho)
    problem_section = config["problem"]
    kind = problem_section["kind"]
    seed = int(config["general"]["seed"])

    if kind == "mixed_type":
        section = config["examples"]["mixed_type"]
        cfg = MixedTypeConfig.from_dict(section)
        F = gaussian_forcing(cfg, grid, **section.get("forcing", {}))
        problem = build_mixed_type(cfg, w, grid, F)
        return BuiltProblem(kind, problem, build_perturbation(config, grid), mixed=cfg)

    if kind == "kelvin_voigt":
        section = config["examples"]["kelvin_voigt"]
        cfg = kv_config_from_dict(section)
        system = build_kv_problem(cfg, w, grid, kv_forcing(cfg, grid, **section.get("forcing", {})))
        return BuiltProblem(kind, system.problem, system.Minf, system.V, kv=cfg)

    dim = int(problem_section["dim"])
    M0 = build_family(problem_section["M0"], dim, "M0", "problem.M0")
    M1 = build_family(problem_section["M1"], dim, "M1", "problem.M1")
    A = build_spatial(problem_section.get("A", "zero"), dim)
    F = build_forcing(problem_section.get("F", {"type": "zero"}), grid, dim, seed)
    try:
        problem = EvoProblem(M0, M1, A, F, w)
    except ShapeError as e:
        raise ConfigError(str(e), "problem") from e
    logger.info(f"Built '{kind}' problem: dim={dim}, {grid.n + 1} time steps on [{grid.t_min:g}, {grid.t_max:g}], "
                f"rho={w.rho:g}.")
    return BuiltProblem(kind, problem, build_perturbation(config, grid))
