"""Maximum-likelihood reconstruction of quantum states from homodyne and spin data."""

from .estimate import EstimationResult, LogLikelihood, OptimizerConfig, mle_estimate
from .linalg import (
    factor_to_density,
    factor_to_params,
    fidelity,
    params_to_density,
    params_to_factor,
    trace_distance,
)
from .povm import Records, Scheme, SchemeConfig
from .simulate import SimulationSpec, simulate
from .states import PureState, coherent_state, singlet, squeezed_vacuum, two_mode_bell
from .uncertainty import NotAtMaximumError, analyze

__version__ = "0.1.0"

__all__ = [
    "EstimationResult",
    "LogLikelihood",
    "OptimizerConfig",
    "mle_estimate",
    "factor_to_density",
    "factor_to_params",
    "fidelity",
    "params_to_density",
    "params_to_factor",
    "trace_distance",
    "Records",
    "Scheme",
    "SchemeConfig",
    "SimulationSpec",
    "simulate",
    "PureState",
    "coherent_state",
    "singlet",
    "squeezed_vacuum",
    "two_mode_bell",
    "NotAtMaximumError",
    "analyze",
]
