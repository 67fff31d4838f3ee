"""Poisson encounter-mating model.

Exact simulation of the finite-population pair-type process, its fluid limit
(numerical and closed form), Gaussian fluctuations and the diffusion
approximation, and the classification of limiting mating patterns.
"""

from .closed_form import (
    fine_balance_eval,
    fine_balance_solution,
    q12_infinity,
    q12_of_t,
    sym2x2_report,
    sym2x2_solution,
)
from .ctmc import (
    PoissonPathStore,
    SimConfig,
    SimTrajectory,
    exact_pattern_oracle,
    simulate,
    simulate_coupled,
    simulate_ensemble,
    sup_norm_error,
    transition_rates,
)
from .dynamics import integrate_replicator, lv_vector_field, replicator_vector_field, to_singles
from .errors import NumericalError, PairsimError, ValidationError
from .fluctuations import (
    coupled_jump_diffusion,
    empirical_fluctuations,
    simulate_clt_limit,
    simulate_diffusion,
)
from .fluid import drift_F, integrate_fluid, jacobian_F, mating_pattern_limit
from .model import (
    MatingClass,
    ModelParams,
    PopulationCounts,
    PopulationFractions,
    build_params,
    check_fine_balance,
    classify_2x2,
    round_population,
)

__version__ = "0.1.0"

__all__ = [
    "MatingClass", "ModelParams", "NumericalError", "PairsimError", "PoissonPathStore",
    "PopulationCounts", "PopulationFractions", "SimConfig", "SimTrajectory", "ValidationError",
    "build_params", "check_fine_balance", "classify_2x2", "coupled_jump_diffusion", "drift_F",
    "empirical_fluctuations", "exact_pattern_oracle", "fine_balance_eval", "fine_balance_solution",
    "integrate_fluid", "integrate_replicator", "jacobian_F", "lv_vector_field", "mating_pattern_limit",
    "q12_infinity", "q12_of_t", "replicator_vector_field", "round_population", "simulate",
    "simulate_clt_limit", "simulate_coupled", "simulate_diffusion", "simulate_ensemble",
    "sup_norm_error", "sym2x2_report", "sym2x2_solution", "to_singles", "transition_rates",
]
