# src/naevo/core.py

import copy
import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import builders, config_manager, reporting
from .errors import ConfigError, NaevoError, PreconditionError, VerificationError
from .evo_solver import (ORACLE_MAX_UNKNOWNS, EvoProblem, adjoint_identity_defect, energy_identity_residual,
                         oracle_dense_solve, solve, solve_trajectory, verify_causality)
from .examples.kelvin_voigt import check_kv_hypotheses, neumann_tail_norm
from .examples.mixed_type import case_bounds, region_types
from .material_law import posdef_certificate, subspace_posdef_certificate
from .perturbation import FixedPointResult, fixed_point_solve, subspace_perturbed_solve
from .reporting import CheckOutcome
from .utils import make_rng
from .weighted_time import TimeGrid, Trajectory, Weight, weighted_norm

# Initialize a module-level logger
logger = logging.getLogger(__name__)

CAUSALITY_TOL = 1e-12
PERTURBED_CAUSALITY_TOL = 1e-10
ADJOINT_TOL = 1e-10
ORACLE_TOL = 1e-10
REFINEMENT_RANGE = (1.5, 3.0)
ROUND_OFF_RESIDUAL = 1e-12


class Naevo:
    """
    Configuration-driven runner. Owns the merged config and the logging setup, builds the
    configured problem and executes one command per call, writing its artifacts to
    `general.output_dir`.
    """

    def __init__(self, config_file_path: str = "naevo_config.json", seed: Optional[int] = None,
                 output_dir: Optional[str] = None, quiet: bool = False):
        """
        Args:
            config_file_path: Path to the naevo configuration JSON file.
            seed: Overrides general.seed when given.
            output_dir: Overrides general.output_dir when given.
            quiet: Forces the WARNING log level.
        """
        self.config = config_manager.load_config(config_file_path)
        if seed is not None:
            if seed < 0:
                raise ConfigError(f"seed must be non-negative, got {seed}.", "--seed")
            self.config["general"]["seed"] = int(seed)
        if output_dir is not None:
            self.config["general"]["output_dir"] = output_dir
        self.quiet = quiet
        self._configure_logging()
        logger.debug(f"Loaded configuration: {json.dumps(self.config, indent=2)}")

    def _configure_logging(self):
        """Configures the logging system based on the loaded configuration."""
        log_level_str = "WARNING" if self.quiet else self.config.get("general", {}).get("log_level", "INFO").upper()
        log_level = getattr(logging, log_level_str, logging.INFO)

        # Clear existing handlers from the root logger to avoid duplicate messages
        for handler in logging.root.handlers[:]:
            logging.root.removeHandler(handler)

        logging.basicConfig(
            level=log_level,
            format='%(asctime)s - %(name)s - %(levelname)s - %(module)s.%(funcName)s:%(lineno)d - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        for noisy in ("numpy", "scipy", "matplotlib"):
            logging.getLogger(noisy).setLevel(logging.WARNING)
        logger.info(f"Logging configured to level: {log_level_str}")

    # --- helpers -----------------------------------------------------------------------

    @property
    def output_dir(self) -> str:
        return reporting.ensure_output_dir(self.config["general"]["output_dir"])

    @property
    def seed(self) -> int:
        return int(self.config["general"]["seed"])

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _grid(self) -> TimeGrid:
        return builders.build_grid(self.config)

    def _samples(self, grid: TimeGrid) -> np.ndarray:
        return builders.certificate_samples(self.config, grid)

    def _certify(self, p: EvoProblem, rho_grid: Optional[Sequence[float]] = None):
        cert_cfg = self.config["certificate"]
        return posdef_certificate(p.M0, p.M1, self._samples(p.grid),
                                  rho_grid if rho_grid is not None else cert_cfg["rho_grid"], float(cert_cfg["tol"]))

    def _with_kind(self, kind: str) -> dict:
        config = copy.deepcopy(self.config)
        config["problem"] = {"kind": kind}
        return config

    def _fixed_point(self, built: builders.BuiltProblem, p: EvoProblem, tol: Optional[float] = None,
                     rho_grid: Optional[Sequence[float]] = None, iterations: Optional[int] = None) -> FixedPointResult:
        solver_cfg = self.config["solver"]
        tol = float(solver_cfg["tol"]) if tol is None else tol
        if built.V is not None:
            return subspace_perturbed_solve(p, built.Minf, built.V, float(solver_cfg["eps_margin"]), tol,
                                            int(solver_cfg["max_iter"]),
                                            rho_grid if rho_grid is not None else self.config["certificate"]["rho_grid"],
                                            seed=self.seed, iterations=iterations)
        return fixed_point_solve(p, built.Minf, tol, int(solver_cfg["max_iter"]), iterations)

    def _solver_for(self, built: builders.BuiltProblem, p: EvoProblem) -> Callable[[Trajectory], Trajectory]:
        """
        F -> u for the configured (possibly perturbed) problem, certified once. Perturbed problems
        replay the rho and the sweep count of the configured solve for every forcing.
        """
        if built.Minf is None:
            certified = dataclasses.replace(p, cert=p.cert or self._certify(p, [p.w.rho]))
            return lambda F: solve_trajectory(certified.with_forcing(F))
        reference = self._fixed_point(built, p)
        locked = dataclasses.replace(p, w=Weight(reference.rho), cert=None)
        return lambda F: self._fixed_point(built, locked.with_forcing(F), rho_grid=[reference.rho],
                                           iterations=reference.iters).u

    # --- commands ----------------------------------------------------------------------

    def check(self) -> Dict[str, object]:
        """Certificate report: rho0, c0 and the worst witness (plus per-case bounds / subspace constants)."""
        grid = self._grid()
        built = builders.build_problem(self.config, grid=grid)
        return self._certificate_artifacts(built)

    def _certificate_artifacts(self, built: builders.BuiltProblem) -> Dict[str, object]:
        p = built.problem
        samples = self._samples(p.grid)
        rows: List[tuple] = []
        summary: Dict[str, object] = {"kind": built.kind}
        if built.kv is not None:
            hypotheses = check_kv_hypotheses(built.kv, samples)
            sub = subspace_posdef_certificate(p.M0, p.M1, built.V, samples)
            rows += [(f"kv {label}", value) for label, value in hypotheses.items()]
            rows += [("subspace c0 (on V)", sub.c0), ("subspace c1 (on V-perp)", sub.c1)]
            summary.update({"subspace_c0": sub.c0, "subspace_c1": sub.c1})
        cert = self._certify(p)
        summary.update({"rho0": cert.rho0, "c0": cert.c0, "worst_t": cert.worst_t,
                        "samples": int(cert.t_samples.size)})
        rows = [("rho0", cert.rho0), ("c0", cert.c0), ("worst witness t", cert.worst_t)] + rows
        if built.mixed is not None:
            bounds = case_bounds(p, p.w.rho, samples)
            keys = {"t<=0": "case_t_le_0", "0<t<=1": "case_0_lt_t_le_1", "t>1": "case_t_gt_1"}
            for label, value in bounds.items():
                rows.append((f"case {label} (rho={p.w.rho:g})", value))
                summary[keys[label]] = value
        reporting.write_text_report(self._path("certificate_report.txt"), "Positive-definiteness certificate",
                                    [(f"{built.kind} on {cert.t_samples.size} samples", rows)])
        reporting.write_certificate_witness(self._path("certificate_witness.csv"), cert.t_samples, cert.witness)
        reporting.write_summary(self._path("summary.txt"), summary)
        logger.info(f"Certificate: rho0={cert.rho0:g}, c0={cert.c0:.6g}, worst at t={cert.worst_t:.6g}.")
        return summary

    def solve(self, emit_plot_data: bool = False) -> Dict[str, object]:
        built = builders.build_problem(self.config)
        return self._solve_artifacts(built, emit_plot_data)

    def _solve_artifacts(self, built: builders.BuiltProblem, emit_plot_data: bool) -> Dict[str, object]:
        p = built.problem
        summary: Dict[str, object] = {"kind": built.kind}
        rows: List[tuple] = []
        if built.Minf is None:
            p = dataclasses.replace(p, cert=p.cert or self._certify(p, [p.w.rho]))
            cut_times = [float(a) for a in self.config["solver"]["cut_times"]]
            report = solve(p, cut_times=cut_times)
            u, w, c0 = report.u, p.w, report.c0
            summary.update({"rho": w.rho, "c0": c0, "norm_u": report.norm_u, "norm_F": report.norm_F,
                            "bound_ratio": report.bound_ratio, "step_accretivity_min": report.step_accretivity_min})
            for a, value in report.energy_residuals.items():
                summary[f"energy_residual_{a:g}"] = value
                rows.append((f"energy residual at a={a:g}", value))
        else:
            result = self._fixed_point(built, p)
            u, w = result.u, Weight(result.rho)
            solved = dataclasses.replace(p, w=w, cert=None)
            c0 = self._certify(solved, [w.rho]).c0
            norm_u, norm_F = weighted_norm(u, w), weighted_norm(p.F, w)
            minf_norm = built.Minf.norm_estimate(w)
            summary.update({"rho": w.rho, "c0": c0, "norm_u": norm_u, "norm_F": norm_F,
                            "bound_ratio": norm_u * c0 / norm_F if norm_F else 0.0,
                            "perturbation": built.Minf.name, "perturbation_norm_estimate": minf_norm,
                            "iterations": result.iters, "contraction_ratio": result.ratio,
                            "residual": result.residual})
            reporting.write_iteration_log(self._path("iteration_log.csv"), result.history)
        reporting.write_trajectory(self._path("solution.csv"), u)
        if emit_plot_data:
            reporting.write_plot_data(self.output_dir, u, p.F, w)
        rows = [(key, value) for key, value in summary.items() if key != "kind"] + rows
        reporting.write_text_report(self._path("report.txt"), "Solve report", [(built.kind, rows)])
        reporting.write_summary(self._path("summary.txt"), summary)
        return summary

    def verify(self) -> List[CheckOutcome]:
        """Runs the configured verification checks; raises VerificationError naming any failure."""
        built = builders.build_problem(self.config)
        outcomes = []
        for name in self.config["verification"]["checks"]:
            outcome = getattr(self, f"_verify_{name}")(built)
            logger.info(f"Check '{outcome.name}': measured {outcome.measured:.6g} vs {outcome.threshold:.6g} -> "
                        f"{'pass' if outcome.passed else 'FAIL'}.")
            outcomes.append(outcome)
        reporting.write_verification(self._path("verification.txt"), outcomes)
        summary = {o.name: o.passed for o in outcomes}
        summary["all_passed"] = all(o.passed for o in outcomes)
        reporting.write_summary(self._path("summary.txt"), summary)
        failed = [o.name for o in outcomes if not o.passed]
        if failed:
            raise VerificationError(f"Verification failed: {', '.join(failed)}.", failed)
        return outcomes

    def _random_cut(self, rng: np.random.Generator, grid: TimeGrid) -> float:
        length = grid.t_max - grid.t_min
        return float(rng.uniform(grid.t_min + 0.1 * length, grid.t_max - 0.1 * length))

    def _verify_causality(self, built: builders.BuiltProblem) -> CheckOutcome:
        p = built.problem
        grid = p.grid
        rng = make_rng(self.seed)
        solver = self._solver_for(built, p)
        worst = 0.0
        for _ in range(int(self.config["verification"]["n_random"])):
            a = self._random_cut(rng, grid)
            F = Trajectory(grid, rng.standard_normal((grid.n + 1, p.dim)))
            worst = max(worst, verify_causality(p.with_forcing(F), a, solver))
        threshold = CAUSALITY_TOL if built.Minf is None else PERTURBED_CAUSALITY_TOL
        return CheckOutcome("causality", worst, threshold, worst <= threshold)

    def _verify_norm_bound(self, built: builders.BuiltProblem) -> CheckOutcome:
        p = built.problem
        limit = 1.0 + float(self.config["solver"]["bound_slack"])
        if built.Minf is None:
            certified = dataclasses.replace(p, cert=p.cert or self._certify(p, [p.w.rho]))
            ratio = solve(certified).bound_ratio
            return CheckOutcome("norm_bound", ratio, limit, ratio <= limit, "||u|| c0 / ||F||")
        result = self._fixed_point(built, p)
        w = Weight(result.rho)
        c0 = self._certify(dataclasses.replace(p, w=w, cert=None), [w.rho]).c0
        norm_F = weighted_norm(p.F, w)
        margin = c0 - built.Minf.norm_estimate(w)
        ratio = weighted_norm(result.u, w) * margin / norm_F if norm_F else 0.0
        return CheckOutcome("norm_bound", ratio, limit, ratio <= limit, "||u|| (c0 - ||Minf||) / ||F||")

    def _verify_energy_refinement(self, built: builders.BuiltProblem) -> CheckOutcome:
        if built.Minf is not None:
            return CheckOutcome("energy_refinement", float("nan"), REFINEMENT_RANGE[0], True,
                                "not applicable to perturbed problems")
        grid = built.problem.grid
        length = grid.t_max - grid.t_min
        cuts = [float(a) for a in self.config["solver"]["cut_times"]] or \
            [grid.t_min + f * length for f in (0.4, 0.6, 0.8)]
        levels = []
        for factor in (1, 2, 4):
            refined = grid if factor == 1 else grid.refine(factor)
            p = builders.build_problem(self.config, grid=refined).problem
            p = dataclasses.replace(p, cert=p.cert or self._certify(p, [p.w.rho]))
            u = solve_trajectory(p)
            levels.append([energy_identity_residual(p, u, a) for a in cuts])
        ratios = []
        for coarse, fine in zip(levels, levels[1:]):
            for r0, r1 in zip(coarse, fine):
                if r0 <= ROUND_OFF_RESIDUAL:
                    continue
                ratios.append(r0 / r1 if r1 > 0 else float("inf"))
        lo, hi = REFINEMENT_RANGE
        if not ratios:
            return CheckOutcome("energy_refinement", 0.0, lo, True, "residual at round-off on every level")
        outside = [r for r in ratios if not lo <= r <= hi]
        measured = outside[0] if outside else min(ratios)
        return CheckOutcome("energy_refinement", measured, lo, not outside,
                            f"residual ratio per h-halving in [{lo:g}, {hi:g}]")

    def _verify_adjoint_identity(self, built: builders.BuiltProblem) -> CheckOutcome:
        p = built.problem
        rng = make_rng(self.seed)
        shape = (p.grid.n + 1, p.dim)
        worst = 0.0
        for _ in range(int(self.config["verification"]["n_random"])):
            u = Trajectory(p.grid, rng.standard_normal(shape))
            v = Trajectory(p.grid, rng.standard_normal(shape))
            worst = max(worst, adjoint_identity_defect(p, u, v))
        return CheckOutcome("adjoint_identity", worst, ADJOINT_TOL, worst <= ADJOINT_TOL)

    def _verify_oracle(self, built: builders.BuiltProblem) -> CheckOutcome:
        p = built.problem
        grid = p.grid
        steps = min(grid.n, ORACLE_MAX_UNKNOWNS // p.dim - 1)
        if steps < 2:
            return CheckOutcome("oracle", float("nan"), ORACLE_TOL, True,
                                f"skipped: dim {p.dim} exceeds the dense oracle size")
        head = TimeGrid(grid.t_min, grid.t_min + steps * grid.h, steps)
        truncated = EvoProblem(p.M0, p.M1, p.A, Trajectory(head, p.F.values[:steps + 1]), p.w)
        marched = solve_trajectory(truncated)
        dense = oracle_dense_solve(truncated)
        defect = float(np.max(np.abs(marched.values - dense.values))) / max(1.0, marched.max_abs())
        note = "" if steps == grid.n else f"first {steps} steps"
        return CheckOutcome("oracle", defect, ORACLE_TOL, defect <= ORACLE_TOL, note)

    def sweep_rho(self, rhos: Optional[Sequence[float]] = None) -> List[Dict[str, object]]:
        """One row per rho (run concurrently, written in increasing rho); failures become rows."""
        rhos = sorted({float(r) for r in (rhos if rhos is not None else self.config["weight"]["sweep"])})
        if len(rhos) < 2:
            raise PreconditionError("A rho sweep needs at least two distinct values.")
        grid = self._grid()
        with ThreadPoolExecutor(max_workers=min(len(rhos), os.cpu_count() or 1)) as pool:
            rows = list(pool.map(lambda rho: self._sweep_row(rho, grid), rhos))
        reporting.write_sweep(self.output_dir, rows)
        return rows

    def _sweep_row(self, rho: float, grid: TimeGrid) -> Dict[str, object]:
        row: Dict[str, object] = {"rho": rho, "c0": math.nan, "bound_ratio": math.nan, "tail_norm": math.nan,
                                  "contraction_ratio": math.nan, "status": "ok"}
        try:
            built = builders.build_problem(self.config, rho=rho, grid=grid)
            w = Weight(rho)
            cert = self._certify(built.problem, [rho])
            p = dataclasses.replace(built.problem, cert=cert)
            row["c0"] = cert.c0
            if built.kv is not None:
                row["tail_norm"] = neumann_tail_norm(built.kv, w, grid, seed=self.seed)
            else:
                row["tail_norm"] = built.Minf.norm_estimate(w) if built.Minf is not None else 0.0
            if built.Minf is not None:
                result = self._fixed_point(built, p, rho_grid=[rho])
                row["contraction_ratio"] = result.ratio
                u = result.u
            else:
                u = solve_trajectory(p)
            norm_F = weighted_norm(p.F, w)
            row["bound_ratio"] = weighted_norm(u, w) * cert.c0 / norm_F if norm_F else 0.0
        except NaevoError as e:
            logger.warning(f"Sweep row rho={rho:g} failed: {e}")
            row["status"] = f"{type(e).__name__}: {e}"
        return row

    def run_example(self, name: str, emit_plot_data: bool = False) -> Dict[str, object]:
        """`mixed-type` or `kelvin-voigt`: certificate report, solution, region map and iteration log."""
        kinds = {"mixed-type": "mixed_type", "kelvin-voigt": "kelvin_voigt"}
        if name not in kinds:
            raise ConfigError(f"Unknown example '{name}' (expected one of {sorted(kinds)}).", "example")
        config = self._with_kind(kinds[name])
        grid = builders.build_grid(config)
        built = builders.build_problem(config, grid=grid)
        summary = self._certificate_artifacts(built)
        summary.update(self._solve_artifacts(built, emit_plot_data))
        times = grid.times[::max(1, grid.n // 8)]
        if built.mixed is not None:
            labels = [region_types(built.problem, t) for t in times]
            reporting.write_region_map(self._path("region_map.csv"), times, built.mixed.cell_centers(), labels)
        else:
            cells = ["viscous" if x else "elastic" for x in built.kv.viscous]
            reporting.write_region_map(self._path("region_map.csv"), times, built.kv.cell_centers(),
                                       [cells] * len(times))
        reporting.write_summary(self._path("summary.txt"), summary)
        logger.info(f"Example '{name}' finished; artifacts: {reporting.describe_outputs(self.output_dir)}")
        return summary
