"""Infinite-horizon discounted games (beta < 1) by certified truncation.

With normalized rewards in ``[0, r_bar]`` the tail beyond stage ``n`` adds at
most ``beta**n * r_bar / (1 - beta)`` to the discounted reward, so for
``gamma > 0``

    V_n <= V_inf <= V_n * delta_n,    delta_n = exp(gamma beta^n r_bar / (1 - beta)),

with both inequalities reversed for ``gamma < 0``.  In CE units the interval is
``[ce(V_n), ce(V_n) + beta^n r_bar / (1 - beta)]`` for either sign.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .finite import backward_recursion, stage_gamma_ladder
from .matgame import solve_stage_log
from .model import GameModel, MarkovPolicy, normalize_rewards

MAX_DEPTH = 100_000


class TruncationCapError(RuntimeError):
    """The requested tolerance needs more stages than the hard cap allows."""


@dataclass(frozen=True, eq=False)
class DiscountedSolution:
    value_lower: np.ndarray
    value_upper: np.ndarray
    ce_lower: np.ndarray
    ce_upper: np.ndarray
    policies1: MarkovPolicy
    policies2: MarkovPolicy
    stage_gammas: np.ndarray
    n_trunc: int
    delta_n: float
    reward_offset: float
    gamma: float
    beta: float

    @property
    def ce_mid(self) -> np.ndarray:
        return 0.5 * (self.ce_lower + self.ce_upper)

    def continuation_policies(self):
        """Heuristic stationary continuation: repeat the last computed stage forever.

        Any admissible continuation keeps the CE inside the certified interval;
        this one is merely concrete.
        """
        return self.policies1[-1], self.policies2[-1]

    def to_dict(self) -> dict:
        return {
            "n_trunc": self.n_trunc,
            "delta_n": self.delta_n,
            "value_lower": self.value_lower.tolist(),
            "value_upper": self.value_upper.tolist(),
            "ce_lower": self.ce_lower.tolist(),
            "ce_upper": self.ce_upper.tolist(),
            "stage_gammas": self.stage_gammas.tolist(),
            "policies1": self.policies1.tolist(),
            "policies2": self.policies2.tolist(),
            "reward_offset": self.reward_offset,
            "gamma": self.gamma,
            "beta": self.beta,
            "tail_policy": "unspecified beyond n_trunc; repeating the last stage is a heuristic",
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscountedSolution":
        arr = lambda k: np.array(d[k], dtype=float)  # noqa: E731
        return cls(
            value_lower=arr("value_lower"),
            value_upper=arr("value_upper"),
            ce_lower=arr("ce_lower"),
            ce_upper=arr("ce_upper"),
            policies1=MarkovPolicy.from_lists(d["policies1"]),
            policies2=MarkovPolicy.from_lists(d["policies2"]),
            stage_gammas=arr("stage_gammas"),
            n_trunc=int(d["n_trunc"]),
            delta_n=float(d["delta_n"]),
            reward_offset=float(d["reward_offset"]),
            gamma=float(d["gamma"]),
            beta=float(d["beta"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def truncation_depth(r_bar: float, beta: float, tol: float) -> int:
    """Smallest n >= 1 with beta^n r_bar / (1 - beta) <= tol."""
    if r_bar <= 0.0:
        return 1
    tail = r_bar / (1.0 - beta)
    if tail <= tol:
        return 1
    n = math.ceil(math.log(tol / tail) / math.log(beta))
    while n > 1 and beta ** (n - 1) * tail <= tol:
        n -= 1
    while beta**n * tail > tol:
        n += 1
    return max(n, 1)


def _interval(log_V: np.ndarray, gamma: float, beta: float, n: int, r_bar: float):
    tail = beta**n * r_bar / (1.0 - beta)
    log_delta = gamma * tail
    lo_log, hi_log = (log_V, log_V + log_delta) if gamma > 0 else (log_V + log_delta, log_V)
    return np.exp(lo_log), np.exp(hi_log), float(np.exp(log_delta)), tail


def solve_discounted(model: GameModel, tol: float = 1e-6, workers: int | None = None,
                     max_depth: int = MAX_DEPTH, depth: int | None = None) -> DiscountedSolution:
    """Certified CE interval of width <= ``tol`` around the infinite-horizon value.

    ``depth`` forces a truncation depth instead of deriving it from ``tol``.
    """
    if not model.beta < 1.0:
        raise ValueError("discounted solver needs beta < 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    model = normalize_rewards(model)
    r_bar = model.r_bar
    n = depth if depth is not None else truncation_depth(r_bar, model.beta, tol)
    if n > max_depth:
        raise TruncationCapError(
            f"tol={tol} needs {n} stages at beta={model.beta}, above the cap of {max_depth}")
    gammas = stage_gamma_ladder(model.gamma, model.beta, n)
    log_E, r1, r2, _ = backward_recursion(model, gammas, workers)
    lo, hi, delta, tail = _interval(log_E[0], model.gamma, model.beta, n, r_bar)
    ce_lo = log_E[0] / model.gamma + model.reward_offset / (1.0 - model.beta)
    return DiscountedSolution(
        value_lower=lo,
        value_upper=hi,
        ce_lower=ce_lo,
        ce_upper=ce_lo + tail,
        policies1=MarkovPolicy(tuple(r1)),
        policies2=MarkovPolicy(tuple(r2)),
        stage_gammas=gammas,
        n_trunc=n,
        delta_n=delta,
        reward_offset=model.reward_offset,
        gamma=model.gamma,
        beta=model.beta,
    )


def shapley_residual(model: GameModel, solution: DiscountedSolution, workers: int | None = None) -> float:
    """Fixed-point diagnostic: max_x |CE(T m')(x) - CE(m)(x)|.

    ``m`` is the exp-space interval midpoint at parameter ``gamma``; ``m'`` is
    the midpoint of the same-depth certified interval at the shifted
    parameter ``beta * gamma`` (the ladder started one rung down), which is
    what one Shapley step at ``gamma`` consumes.
    """
    model = normalize_rewards(model)
    g, b, n = model.gamma, model.beta, solution.n_trunc
    shifted = stage_gamma_ladder(g * b, b, n)
    log_E, *_ = backward_recursion(model, shifted, workers)
    lo, hi, _, _ = _interval(log_E[0], g * b, b, n, model.r_bar)
    m_shift = 0.5 * (lo + hi)
    m = 0.5 * (solution.value_lower + solution.value_upper)
    log_T = np.array(pmap(lambda x: solve_stage_log(model, x, np.log(m_shift), g).log_value,
                          range(model.n_states), workers))
    return float(np.max(np.abs(log_T - np.log(m)) / abs(g)))
