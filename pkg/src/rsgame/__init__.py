"""Risk-sensitive two-person zero-sum stochastic games on finite spaces.

Finite-horizon and discounted Shapley recursions in exp space, the ergodic
Poisson equation by relative value iteration, an ergodicity-condition checker
and independent simulation / enumeration oracles.
"""

from .discounted import DiscountedSolution, shapley_residual, solve_discounted
from .ergodic import (ErgodicityReport, ErgodicSolution, apply_U, check_ergodicity,
                      evaluate_ergodic_policies, solve_ergodic, twisted_psi)
from .finite import FiniteHorizonPlan, best_response, evaluate_policies, solve_finite
from .matgame import MatrixGameSolution, solve_matrix_game, solve_stage_game
from .model import (GameModel, MarkovPolicy, ModelParseError, ModelValidationError, build_model,
                    load_model, normalize_rewards, twisted_kernel_mass)
from .sim import SimulationResult, brute_force_exp_value, risk_neutral_value, simulate

__all__ = [
    "GameModel", "MarkovPolicy", "ModelParseError", "ModelValidationError", "build_model",
    "load_model", "normalize_rewards", "twisted_kernel_mass",
    "MatrixGameSolution", "solve_matrix_game", "solve_stage_game",
    "FiniteHorizonPlan", "solve_finite", "evaluate_policies", "best_response",
    "DiscountedSolution", "solve_discounted", "shapley_residual",
    "ErgodicSolution", "ErgodicityReport", "apply_U", "solve_ergodic", "evaluate_ergodic_policies",
    "twisted_psi", "check_ergodicity",
    "SimulationResult", "simulate", "brute_force_exp_value", "risk_neutral_value",
]
