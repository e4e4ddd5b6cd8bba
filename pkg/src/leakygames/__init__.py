"""Zero-sum security games where one target's protection status may leak."""

from .errors import ConvergenceError, InputError, LeakyGamesError, SizeGuardError
from .game import (
    ADIL,
    PRIL,
    ConditionalUtilities,
    GameInstance,
    LeakageModel,
    MixedStrategy,
    PairwiseMarginals,
    PureStrategy,
    conditional_utilities,
    enumerate_pure_strategies,
    leakage_utility,
    membership_check_small,
    pairwise_marginals,
    validate_instance,
)
from .linprog import LinearProgram, LinProgError, LpSolution, solve_lp

__version__ = "0.1.0"

__all__ = [
    "ADIL",
    "PRIL",
    "ConditionalUtilities",
    "ConvergenceError",
    "GameInstance",
    "InputError",
    "LeakageModel",
    "LeakyGamesError",
    "LinProgError",
    "LinearProgram",
    "LpSolution",
    "MixedStrategy",
    "PairwiseMarginals",
    "PureStrategy",
    "SizeGuardError",
    "conditional_utilities",
    "enumerate_pure_strategies",
    "leakage_utility",
    "membership_check_small",
    "pairwise_marginals",
    "solve_lp",
    "validate_instance",
]
