"""Random gradient-free descent in Hilbert spaces, with Matern pre-bases for PDE residual risks."""

from .directions import (
    ExplicitTails,
    Geometric,
    PreconditionSchedule,
    ShiftedPoisson,
    Truncated,
    gamma,
    sample_direction,
    sample_directions,
    tails_for_target,
)
from .errors import (
    ConfigurationError,
    ContractError,
    DomainError,
    NumericalRankError,
    StateError,
    UnsupportedOrderError,
)
from .function_space import PreBasisExpansion, axpy, evaluate, evaluate_partial, sobolev_inner
from .matern import MaternParams, MultiIndex, PreBasis
from .optimizer import GfdConfig, StepSchedule, run
from .quadrature import BoxDomain, box_quadrature, roberts_sequence
from .risks import HeatRisk, HjbParams, HjbRisk, htilde, optimal_control

__version__ = "0.1.0"
