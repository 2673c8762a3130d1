"""Top-level package for grassmann_prom."""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config
from .ecsw import HyperMesh, solve_sparse_nnls
from .errors import (
    ConfigError,
    ConvergenceError,
    IllConditionedError,
    NumericalError,
    PromError,
)
from .experiment import report, run_offline, run_online
from .grassmann import exp_map, log_map
from .param_space import Domain, ParameterPoint, partition_grid
from .pod import ReductionBasis, SnapshotSet
from .prom import build_region, query
