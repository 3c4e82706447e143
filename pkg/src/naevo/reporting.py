# src/naevo/reporting.py
"""
On-disk artifacts: trajectory CSVs, plain-text reports, key=value summaries, iteration logs,
region maps and rho sweeps. Nothing here reads the clock, so reruns are byte-identical.
"""

import csv
import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .utils import clean_label, format_float
from .weighted_time import Trajectory, Weight

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckOutcome:
    """One row of the verification table."""
    name: str
    measured: float
    threshold: float
    passed: bool
    note: str = ""


def ensure_output_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating, complex, np.complexfloating)):
        return format_float(value)
    return str(value)


def _short(value) -> str:
    if isinstance(value, (float, np.floating)) and not isinstance(value, bool):
        return f"{float(value):.6g}"
    return _render(value)


def write_summary(path: str, items: Dict[str, object]) -> str:
    """Machine-readable `key=value` lines in insertion order."""
    with open(path, "w") as f:
        for key, value in items.items():
            f.write(f"{clean_label(key)}={_render(value)}\n")
    logger.debug(f"Summary written to '{path}'.")
    return path


def write_text_report(path: str, title: str, sections: Sequence[Tuple[str, Sequence[Tuple[str, object]]]]) -> str:
    lines = [title, "=" * len(title), ""]
    for heading, rows in sections:
        lines.append(heading)
        lines.append("-" * len(heading))
        width = max((len(label) for label, _ in rows), default=0)
        for label, value in rows:
            lines.append(f"  {label.ljust(width)} : {_short(value)}")
        lines.append("")
    with open(path, "w") as f:
        f.write("\n".join(lines))
    logger.debug(f"Report written to '{path}'.")
    return path


def write_table_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_render(x) for x in row])
    return path


def write_trajectory(path: str, u: Trajectory) -> str:
    u.to_csv(path)
    logger.info(f"Trajectory with {u.grid.n + 1} samples written to '{path}'.")
    return path


def write_iteration_log(path: str, history: Sequence[tuple]) -> str:
    """Rows (iteration, ||u_next - u||_rho, ratio)."""
    return write_table_csv(path, ["iteration", "delta", "ratio"], history)


def write_certificate_witness(path: str, t_samples: np.ndarray, witness: np.ndarray) -> str:
    return write_table_csv(path, ["t", "min_eigenvalue"], zip(t_samples, witness))


def write_region_map(path: str, times: Sequence[float], x: np.ndarray, labels_at: Sequence[List[str]]) -> str:
    """Long format: one row per (time, cell)."""
    rows = []
    for t, labels in zip(times, labels_at):
        for j, label in enumerate(labels):
            rows.append((float(t), j, float(x[j]), label))
    return write_table_csv(path, ["t", "cell", "x", "type"], rows)


def write_plot_data(directory: str, u: Trajectory, F: Trajectory, w: Weight) -> str:
    """plot_data/norms.csv with |u(t)|, |F(t)| and the weighted magnitude |u(t)| exp(-rho t)."""
    target = ensure_output_dir(os.path.join(directory, "plot_data"))
    t = u.grid.times
    size_u = np.linalg.norm(u.values, axis=1)
    size_f = np.linalg.norm(F.values, axis=1)
    rows = zip(t, size_u, size_f, size_u * np.exp(-w.rho * t))
    return write_table_csv(os.path.join(target, "norms.csv"), ["t", "norm_u", "norm_F", "weighted_norm_u"], rows)


def write_verification(path: str, outcomes: Sequence[CheckOutcome]) -> str:
    """Fixed-width pass/fail table with measured values against thresholds."""
    header = f"{'check':<28} {'measured':>14} {'threshold':>14}  result  note"
    lines = [header, "-" * len(header)]
    for o in outcomes:
        lines.append(f"{o.name:<28} {o.measured:>14.6g} {o.threshold:>14.6g}  {'PASS' if o.passed else 'FAIL':<6}  {o.note}")
    if not outcomes:
        lines.append("(no checks requested)")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return path


def monotonicity(values: Sequence[float]) -> str:
    """'decreasing', 'non-increasing', 'increasing', 'non-decreasing', 'constant' or 'not monotone'."""
    finite = [v for v in values if v is not None and math.isfinite(v)]
    if len(finite) < 2:
        return "n/a"
    steps = np.diff(finite)
    if np.all(steps == 0):
        return "constant"
    if np.all(steps < 0):
        return "decreasing"
    if np.all(steps <= 0):
        return "non-increasing"
    if np.all(steps > 0):
        return "increasing"
    if np.all(steps >= 0):
        return "non-decreasing"
    return "not monotone"


SWEEP_COLUMNS = ("rho", "c0", "bound_ratio", "tail_norm", "contraction_ratio")


def write_sweep(directory: str, rows: Sequence[Dict[str, object]]) -> Tuple[str, str]:
    """sweep_rho.csv (one row per rho, failures carried in `status`) and sweep_report.txt."""
    csv_path = os.path.join(directory, "sweep_rho.csv")
    write_table_csv(csv_path, SWEEP_COLUMNS + ("status",),
                    ([row.get(c, float("nan")) for c in SWEEP_COLUMNS] + [row.get("status", "ok")] for row in rows))
    annotations = []
    for column in SWEEP_COLUMNS[1:]:
        values = [float(row.get(column, float("nan"))) for row in rows]
        annotations.append((column, monotonicity(values)))
    halvings = _doubling_factors(rows, "tail_norm")
    if halvings:
        annotations.append(("tail_norm shrink per rho doubling", min(halvings)))
    failures = [(f"rho={_short(row['rho'])}", row["status"]) for row in rows if row.get("status", "ok") != "ok"]
    sections = [("Monotonicity along increasing rho", annotations)]
    if failures:
        sections.append(("Failed rows", failures))
    report_path = write_text_report(os.path.join(directory, "sweep_report.txt"), "rho sweep", sections)
    logger.info(f"Sweep over {len(rows)} rho value(s) written to '{csv_path}'.")
    return csv_path, report_path


def _doubling_factors(rows: Sequence[Dict[str, object]], column: str) -> List[float]:
    """value(rho)/value(2 rho) for every pair of rows a doubling apart."""
    by_rho = {float(row["rho"]): float(row.get(column, float("nan"))) for row in rows}
    factors = []
    for rho, value in by_rho.items():
        doubled = by_rho.get(2.0 * rho)
        if doubled is not None and math.isfinite(value) and math.isfinite(doubled) and doubled > 0:
            factors.append(value / doubled)
    return factors


def read_summary(path: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    with open(path, "r") as f:
        for line in f:
            line = line.strip()
            if line and "=" in line:
                key, value = line.split("=", 1)
                out[key] = value
    return out


def describe_outputs(directory: str, names: Optional[Iterable[str]] = None) -> List[str]:
    """Sorted artifact paths under `directory` (used for logging what a command produced)."""
    found = []
    for root, _, files in os.walk(directory):
        for name in files:
            if names is None or name in names:
                found.append(os.path.relpath(os.path.join(root, name), directory))
    return sorted(found)
