# src/naevo/config_manager.py

import copy
import json
import logging
import os

from .errors import ConfigError

SCHEMA_VERSION = 1

# Every key the runner reads; user files override these section by section.
DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "general": {
        "log_level": "INFO",
        "seed": 0,
        "output_dir": "naevo_output"
    },
    "grid": {
        "t_min": -1.0,
        "t_max": 3.0,
        "n": 400
    },
    "weight": {
        "rho": 1.0,
        "sweep": [1.0, 2.0, 4.0, 8.0]
    },
    "problem": {
        "kind": "families",  # or "mixed_type", "kelvin_voigt"
        "dim": 1,
        "M0": {"type": "constant", "matrix": "identity"},
        "M1": {"type": "constant", "matrix": "zero"},
        "A": "zero",
        "F": {"type": "step", "t0": 0.0, "value": 1.0}
    },
    "certificate": {
        "rho_grid": [float(2 ** k) for k in range(11)],
        "tol": 1e-10,
        "n_samples": 200
    },
    "perturbation": {
        "type": "none",  # or "delay", "convolution", "scaled_identity"
        "tau": 0.5,
        "epsilon": 0.0,
        "kernel": {"type": "exponential", "decay": 1.0, "amplitude": 1.0, "t_max": 4.0}
    },
    "solver": {
        "tol": 1e-10,
        "max_iter": 200,
        "bound_slack": 0.1,
        "eps_margin": 0.1,
        "cut_times": []
    },
    "verification": {
        "checks": ["causality", "norm_bound", "energy_refinement", "adjoint_identity", "oracle"],
        "n_random": 5
    },
    "examples": {
        "mixed_type": {
            "epsilon": 0.5,
            "L": 1.0,
            "m": 64,
            "variant": "nonautonomous",
            "forcing": {"t0": 0.5, "t1": 1.5, "center": 0.5, "width": 0.15, "amplitude": 1.0}
        },
        "kelvin_voigt": {
            "preset": "reference",
            "m": 16,
            "forcing": {"t0": 0.25, "t1": 1.25, "amplitude": 1.0}
        }
    }
}

PROBLEM_KINDS = ("families", "mixed_type", "kelvin_voigt")
FAMILY_TYPES = ("constant", "piecewise", "ramp", "table")
FORCING_TYPES = ("zero", "step", "bump", "sine", "random", "csv")
PERTURBATION_TYPES = ("none", "delay", "convolution", "scaled_identity")
VERIFICATION_CHECKS = ("causality", "norm_bound", "energy_refinement", "adjoint_identity", "oracle")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

logger = logging.getLogger(__name__)


def deep_update(source, overrides):
    """
    Recursively update a dictionary.
    Modifies 'source' in place.
    """
    for key, value in overrides.items():
        if isinstance(value, dict) and key in source and isinstance(source[key], dict):
            deep_update(source[key], value)
        else:
            source[key] = value
    return source


def load_config(config_file_path: str = "naevo_config.json") -> dict:
    """
    Loads the configuration from a JSON file, merges it over the defaults and validates it.
    Relative CSV paths are resolved against the directory of the file.

    Raises:
        ConfigError: if the file is missing, not valid JSON, or violates the schema.
    """
    if not os.path.exists(config_file_path):
        raise ConfigError(f"Configuration file '{config_file_path}' not found.", "file")
    try:
        with open(config_file_path, "r") as f:
            user_config = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Error decoding JSON from '{config_file_path}': {e}", "file") from e
    except OSError as e:
        raise ConfigError(f"Could not read '{config_file_path}': {e}", "file") from e
    if not isinstance(user_config, dict):
        raise ConfigError("Top level of the configuration must be an object.", "file")

    current_config = copy.deepcopy(DEFAULT_CONFIG)
    # Lists of matrices/forcing specs replace, never merge, so a user "problem" section is taken whole.
    if "problem" in user_config and isinstance(user_config["problem"], dict):
        current_config["problem"] = {"kind": DEFAULT_CONFIG["problem"]["kind"]}
    deep_update(current_config, user_config)
    logger.info(f"Successfully loaded configuration from '{config_file_path}'.")

    validate_config(current_config, base_dir=os.path.dirname(os.path.abspath(config_file_path)))
    return current_config


def _require_number(value, location: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Expected a number, got {value!r}.", location)
    if positive and not value > 0:
        raise ConfigError(f"Must be positive, got {value}.", location)
    return float(value)


def _resolve_csv_paths(node, base_dir: str, location: str):
    """Rewrites every {"csv": path} (and forcing {"type": "csv", "path": ...}) to an existing absolute path."""
    if isinstance(node, list):
        for i, item in enumerate(node):
            _resolve_csv_paths(item, base_dir, f"{location}[{i}]")
        return
    if not isinstance(node, dict):
        return
    for key in ("csv", "path"):
        value = node.get(key)
        if key == "path" and node.get("type") != "csv":
            continue
        if isinstance(value, str):
            resolved = value if os.path.isabs(value) else os.path.join(base_dir, value)
            if not os.path.exists(resolved):
                raise ConfigError(f"Referenced CSV '{value}' does not exist.", f"{location}.{key}")
            node[key] = resolved
    for key, value in node.items():
        if isinstance(value, (dict, list)):
            _resolve_csv_paths(value, base_dir, f"{location}.{key}")


def _validate_family(spec, location: str):
    if isinstance(spec, dict) and "type" in spec:
        if spec["type"] not in FAMILY_TYPES:
            raise ConfigError(f"Unknown family type '{spec['type']}' (expected one of {FAMILY_TYPES}).", location)
        required = {"constant": ["matrix"], "piecewise": ["breakpoints", "matrices"],
                    "ramp": ["base", "slope"], "table": ["csv"]}[spec["type"]]
        for key in required:
            if key not in spec:
                raise ConfigError(f"Family of type '{spec['type']}' needs '{key}'.", location)


def validate_config(config: dict, base_dir: str = "."):
    """
    Fixes soft problems in place (with a warning) and raises ConfigError for hard ones.

    Args:
        config: The merged configuration dictionary.
        base_dir: Directory against which relative CSV paths are resolved.
    """
    version = config.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"Unsupported schema_version {version!r} (this build reads {SCHEMA_VERSION}).",
                          "schema_version")

    general = config["general"]
    log_level = str(general.get("log_level", "INFO")).upper()
    if log_level not in LOG_LEVELS:
        logger.warning(f"Invalid log level '{log_level}'. Defaulting to 'INFO'.")
        general["log_level"] = DEFAULT_CONFIG["general"]["log_level"]
    else:
        general["log_level"] = log_level
    seed = general.get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        logger.warning(f"Invalid 'general.seed' {seed!r}. Setting to 0.")
        general["seed"] = 0
    if not general.get("output_dir"):
        logger.warning("Empty 'general.output_dir'. Using the default.")
        general["output_dir"] = DEFAULT_CONFIG["general"]["output_dir"]

    grid = config["grid"]
    t_min = _require_number(grid.get("t_min"), "grid.t_min")
    t_max = _require_number(grid.get("t_max"), "grid.t_max")
    n = grid.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise ConfigError(f"Need an integer n >= 2, got {n!r}.", "grid.n")
    if t_max <= t_min:
        raise ConfigError(f"t_max={t_max} must exceed t_min={t_min}.", "grid.t_max")

    weight = config["weight"]
    _require_number(weight.get("rho"), "weight.rho", positive=True)
    sweep = weight.get("sweep")
    if not isinstance(sweep, list) or len(sweep) < 2:
        raise ConfigError("A rho sweep needs a list of at least two values.", "weight.sweep")
    for i, rho in enumerate(sweep):
        _require_number(rho, f"weight.sweep[{i}]", positive=True)

    certificate = config["certificate"]
    rho_grid = certificate.get("rho_grid")
    if not isinstance(rho_grid, list) or not rho_grid:
        raise ConfigError("rho_grid must be a non-empty list.", "certificate.rho_grid")
    for i, rho in enumerate(rho_grid):
        _require_number(rho, f"certificate.rho_grid[{i}]", positive=True)
    _require_number(certificate.get("tol"), "certificate.tol", positive=True)
    samples = certificate.get("n_samples")
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 2:
        logger.warning(f"Invalid 'certificate.n_samples' {samples!r}. Setting to 200.")
        certificate["n_samples"] = DEFAULT_CONFIG["certificate"]["n_samples"]

    problem = config["problem"]
    kind = problem.get("kind")
    if kind not in PROBLEM_KINDS:
        raise ConfigError(f"Unknown problem kind '{kind}' (expected one of {PROBLEM_KINDS}).", "problem.kind")
    if kind == "families":
        dim = problem.get("dim")
        if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
            raise ConfigError(f"Need an integer dim >= 1, got {dim!r}.", "problem.dim")
        for key in ("M0", "M1"):
            if key not in problem:
                raise ConfigError(f"'{key}' is required for a 'families' problem.", f"problem.{key}")
            _validate_family(problem[key], f"problem.{key}")
        problem.setdefault("A", "zero")
        forcing = problem.setdefault("F", {"type": "zero"})
        if not isinstance(forcing, dict) or forcing.get("type") not in FORCING_TYPES:
            raise ConfigError(f"Unknown forcing {forcing!r} (expected a type in {FORCING_TYPES}).", "problem.F")

    perturbation = config["perturbation"]
    ptype = perturbation.get("type", "none")
    if ptype not in PERTURBATION_TYPES:
        raise ConfigError(f"Unknown perturbation type '{ptype}' (expected one of {PERTURBATION_TYPES}).",
                          "perturbation.type")
    if ptype == "delay":
        _require_number(perturbation.get("tau"), "perturbation.tau", positive=True)
    if ptype == "scaled_identity":
        _require_number(perturbation.get("epsilon"), "perturbation.epsilon")

    solver = config["solver"]
    _require_number(solver.get("tol"), "solver.tol", positive=True)
    max_iter = solver.get("max_iter")
    if isinstance(max_iter, bool) or not isinstance(max_iter, int) or max_iter < 1:
        logger.warning(f"Invalid 'solver.max_iter' {max_iter!r}. Setting to 200.")
        solver["max_iter"] = DEFAULT_CONFIG["solver"]["max_iter"]
    _require_number(solver.get("bound_slack"), "solver.bound_slack")
    _require_number(solver.get("eps_margin"), "solver.eps_margin", positive=True)
    if not isinstance(solver.get("cut_times"), list):
        raise ConfigError("cut_times must be a list.", "solver.cut_times")

    verification = config["verification"]
    checks = verification.get("checks")
    if not isinstance(checks, list):
        raise ConfigError("checks must be a list.", "verification.checks")
    unknown = [c for c in checks if c not in VERIFICATION_CHECKS]
    if unknown:
        raise ConfigError(f"Unknown verification checks {unknown} (expected a subset of {VERIFICATION_CHECKS}).",
                          "verification.checks")
    n_random = verification.get("n_random")
    if isinstance(n_random, bool) or not isinstance(n_random, int) or n_random < 1:
        logger.warning(f"Invalid 'verification.n_random' {n_random!r}. Setting to 5.")
        verification["n_random"] = DEFAULT_CONFIG["verification"]["n_random"]

    _resolve_csv_paths(problem, base_dir, "problem")
    _resolve_csv_paths(perturbation, base_dir, "perturbation")
    logger.debug(f"Final validated configuration: {json.dumps(config, indent=2)}")


def write_example_config(path: str):
    """Dumps DEFAULT_CONFIG as a starting point for a new experiment."""
    with open(path, "w") as f:
        json.dump(DEFAULT_CONFIG, f, indent=4)
        f.write("\n")
    logger.info(f"Example configuration written to '{path}'.")


if __name__ == "__main__":
    logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    dummy_file_path = "temp_naevo_config.json"
    with open(dummy_file_path, "w") as f:
        json.dump({"general": {"log_level": "debug", "seed": -3}, "grid": {"n": 100}}, f, indent=4)
    try:
        loaded = load_config(dummy_file_path)
        logger.info(f"seed after validation: {loaded['general']['seed']}, n: {loaded['grid']['n']}")
    finally:
        os.remove(dummy_file_path)

    try:
        load_config("non_existent_config.json")
    except ConfigError as e:
        logger.info(f"Missing file rejected as expected: {e}")
