"""Dynamic regret through a dynamic-to-static reduction."""

from ._backend import BACKEND, COMPILED_AVAILABLE
from .haar import HaarPreconditioner
from .harness import ScenarioConfig, generate_scenario, run_experiment
from .learners import DenseOracleReducer, FastHaarReducer, KTBettor, Reducer, make_reducer
from .linalg import (
    DenseSPD,
    DifferencePreconditioner,
    EmbeddedVector,
    IdentityPreconditioner,
    embed_comparator,
    embed_loss,
    weighted_norm_sq,
)
from .reduction import duality_gap, dynamic_regret, run_reduction
from .verify import adversary_search, empirical_quadratic_tail, verify_difference_eigen_bound, wolkowicz_upper_bound

__version__ = "0.1.0"
