"""Worked examples: a system changing type in space and time, and a Kelvin-Voigt solid."""

from ..subspace import SubspaceProjector
from .kelvin_voigt import (KelvinVoigtConfig, KelvinVoigtSystem, SchurDecomposition, build_kv_problem,
                           check_kv_hypotheses, kv_forcing, kv_perturbation, kv_reference_config,
                           kv_solidifying_config, neumann_tail_norm, schur_decompose, schur_family,
                           schur_lipschitz_bound)
from .mixed_type import (MixedTypeConfig, build_mixed_type, case_bounds, default_grid, gaussian_forcing,
                         mixed_type_families, phi, region_types)

__all__ = [
    "SubspaceProjector",
    "KelvinVoigtConfig", "KelvinVoigtSystem", "SchurDecomposition", "build_kv_problem", "check_kv_hypotheses",
    "kv_forcing", "kv_perturbation", "kv_reference_config", "kv_solidifying_config", "neumann_tail_norm",
    "schur_decompose", "schur_family", "schur_lipschitz_bound",
    "MixedTypeConfig", "build_mixed_type", "case_bounds", "default_grid", "gaussian_forcing",
    "mixed_type_families", "phi", "region_types",
]
