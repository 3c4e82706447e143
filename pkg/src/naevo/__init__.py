"""naevo: well-posedness checks and causal solvers for non-autonomous evolutionary equations."""

from .errors import (CertificateError, ConfigError, DivergenceError, IterationLimitError, NaevoError,
                     PreconditionError, ShapeError, SolveError, VerificationError)
from .evo_solver import EvoProblem, SolveReport, solve
from .material_law import OperatorFamily, posdef_certificate
from .perturbation import PerturbationOp, fixed_point_solve
from .spatial_operator import SkewOperator
from .weighted_time import TimeGrid, Trajectory, Weight

__version__ = "0.1.0"
