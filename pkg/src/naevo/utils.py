# src/naevo/utils.py

import logging
import re
from typing import Any, Dict, Optional

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)


def get_safe_nested_dict_value(data_dict: Dict, keys: list[str], default: Optional[Any] = None) -> Optional[Any]:
    """
    Safely retrieves a value from a nested dictionary.

    Args:
        data_dict: The dictionary to traverse.
        keys: A list of keys representing the path to the desired value.
        default: The value to return if any key is not found or the path is invalid.

    Returns:
        The value if found, otherwise the default.
    """
    if not isinstance(data_dict, dict) or not keys:
        return default
    node = data_dict
    for key in keys:
        if isinstance(node, dict) and key in node:
            node = node[key]
        else:
            return default
    return node


def clean_label(name: str) -> str:
    """
    Turns a free-form label (check name, family name) into a lowercase token usable
    as a file stem or summary key.
    """
    if not isinstance(name, str):
        return "unnamed"
    name = re.sub(r'[^\w_]', '_', name)
    name = re.sub(r'_+', '_', name)
    return name.strip('_').lower() or "unnamed"


def as_square_matrix(value, dim: Optional[int] = None, name: str = "matrix") -> np.ndarray:
    """Coerces `value` to a 2-D square ndarray, optionally checking its size."""
    arr = np.atleast_2d(np.asarray(value))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}.")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} must be {dim}x{dim}, got {arr.shape[0]}x{arr.shape[1]}.")
    if not np.issubdtype(arr.dtype, np.number):
        raise ValueError(f"{name} must be numeric, got dtype {arr.dtype}.")
    return arr


def sym_part(matrix: np.ndarray) -> np.ndarray:
    """Hermitian part ½(X + X*)."""
    return 0.5 * (matrix + matrix.conj().T)


def min_eigenvalue(matrix: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of `matrix`."""
    if matrix.size == 0:
        return float("inf")
    return float(scipy.linalg.eigvalsh(sym_part(matrix))[0])


def spectral_norm(matrix: np.ndarray) -> float:
    if matrix.size == 0 or not np.any(matrix):
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """Seeded generator; every randomized check goes through here so runs are reproducible."""
    return np.random.default_rng(0 if seed is None else int(seed))


def format_float(value) -> str:
    """Fixed 17-significant-digit rendering used in every CSV and summary file."""
    if isinstance(value, (complex, np.complexfloating)):
        return f"{value.real:.16e}{value.imag:+.16e}j"
    return f"{float(value):.16e}"


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    cfg = {"grid": {"t_min": -1.0, "n": 400}}
    logger.info(f"grid.n: {get_safe_nested_dict_value(cfg, ['grid', 'n'])}")
    logger.info(f"Clean 'Energy residual (a=1.5)': {clean_label('Energy residual (a=1.5)')}")
    logger.info(f"min eig of [[2,1],[0,2]]: {min_eigenvalue(np.array([[2.0, 1.0], [0.0, 2.0]])):.6f}")
