"""Local toll design for atomic congestion games: PoA/PoS bounds and an exact small-game engine."""

from .errors import (
    BoundVacuous,
    CapExceeded,
    ConfigError,
    InfeasibleAlpha,
    NumericalFailure,
    PoaInfinite,
    SolverError,
    TailNotSettled,
    TollError,
)
from .model import BasisFunction, GameClass, Mechanism, make_basis, marginal_cost_mechanism, monomial, no_incentive_mechanism
from .poa import PoaCertificate, marginal_cost_poa, optimal_poa_mechanism, poa_of_mechanism
from .frontier import (
    BoundCertificate,
    KappaSearch,
    min_poa_for_pos_target,
    pos_lower_bound,
    pos_upper_bound,
    smoothness_pos_bound,
    sweep_frontier,
)
from .asymptotic import AsymptoticExtension, min_poa_for_pos_target_asymptotic, solve_asymptotic_program
from .engine import Game, Resource, exact_metrics, enumerate_pure_nash

__version__ = "0.1.0"
