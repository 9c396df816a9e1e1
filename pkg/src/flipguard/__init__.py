"""Defense planning for multi-node systems under stealthy, budget-limited attack."""
from .best_response import (attacker_best_response, attacker_best_response_general,
                            defender_best_response, defender_best_response_general)
from .errors import ResourceLimitError, ValidationError
from .model import GameInstance, NodeParams, PayoffPair, front_sets, m_bar, mu, payoff, rho
from .nash import EquilibriumRecord, enumerate_equilibria, verify_equilibrium
from .sequential import SequentialSolution, solve_sequential
from .simulator import SimConfig, SimResult, simulate

__version__ = "0.1.0"

__all__ = [
    "GameInstance", "NodeParams", "PayoffPair", "front_sets", "m_bar", "mu", "payoff", "rho",
    "attacker_best_response", "attacker_best_response_general", "defender_best_response",
    "defender_best_response_general", "EquilibriumRecord", "enumerate_equilibria", "verify_equilibrium",
    "SequentialSolution", "solve_sequential", "SimConfig", "SimResult", "simulate",
    "ResourceLimitError", "ValidationError",
]
