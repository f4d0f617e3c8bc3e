"""Finite-horizon risk-sensitive games: backward Shapley recursion in exp space.

Stage ``k`` (``k = 0..N-1``) is played with risk parameter ``gamma * beta**k``;
``E_k(x)`` is the exp-space value of the remaining ``N - k`` stages measured
with that parameter, so ``E_N == 1`` and ``E_0`` is the game value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .matgame import solve_matrix_game, solve_stage_log
from .model import GameModel, MarkovPolicy, normalize_rewards, pure


@dataclass(frozen=True, eq=False)
class FiniteHorizonPlan:
    exp_values: np.ndarray  # (N + 1, S); exp_values[N] == 1
    ce_values: np.ndarray  # (S,), offset-corrected
    policies1: MarkovPolicy
    policies2: MarkovPolicy
    stage_gammas: np.ndarray  # (N,)
    reward_offset: float
    saddle_gaps: np.ndarray  # (N, S), exp-space units

    @property
    def horizon(self) -> int:
        return len(self.stage_gammas)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "exp_values": self.exp_values.tolist(),
            "ce_values": self.ce_values.tolist(),
            "stage_gammas": self.stage_gammas.tolist(),
            "policies1": self.policies1.tolist(),
            "policies2": self.policies2.tolist(),
            "reward_offset": self.reward_offset,
            "saddle_gaps": self.saddle_gaps.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteHorizonPlan":
        return cls(
            exp_values=np.array(d["exp_values"], dtype=float),
            ce_values=np.array(d["ce_values"], dtype=float),
            policies1=MarkovPolicy.from_lists(d["policies1"]),
            policies2=MarkovPolicy.from_lists(d["policies2"]),
            stage_gammas=np.array(d["stage_gammas"], dtype=float),
            reward_offset=float(d.get("reward_offset", 0.0)),
            saddle_gaps=np.array(d.get("saddle_gaps", []), dtype=float),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FiniteHorizonPlan":
        return cls.from_dict(json.loads(text))


def stage_gamma_ladder(gamma: float, beta: float, n: int) -> np.ndarray:
    return gamma * beta ** np.arange(n, dtype=float)


def backward_recursion(model: GameModel, stage_gammas, workers: int | None = None):
    """Run the exp-space Shapley recursion over the given ladder of stage parameters.

    Returns ``(log_E, rules1, rules2, gaps)`` where ``log_E`` has shape
    ``(len(stage_gammas) + 1, S)`` and ``log_E[-1] == 0``.
    """
    n, S = len(stage_gammas), model.n_states
    log_E = np.zeros((n + 1, S))
    gaps = np.zeros((n, S))
    rules1, rules2 = [None] * n, [None] * n
    for k in range(n - 1, -1, -1):
        g = float(stage_gammas[k])
        tail = log_E[k + 1]
        sols = pmap(lambda x: solve_stage_log(model, x, tail, g), range(S), workers)
        log_E[k] = [s.log_value for s in sols]
        gaps[k] = [s.epsilon for s in sols]
        rules1[k] = tuple(s.row_strategy for s in sols)
        rules2[k] = tuple(s.col_strategy for s in sols)
    return log_E, rules1, rules2, gaps


def solve_finite(model: GameModel, N: int, workers: int | None = None) -> FiniteHorizonPlan:
    """Value and optimal Markov policies of the ``N``-stage game.

    The model is normalized first; ``exp_values`` refer to the normalized
    rewards while ``ce_values`` are reported in the original reward units.
    """
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    model = normalize_rewards(model)
    gammas = stage_gamma_ladder(model.gamma, model.beta, N)
    log_E, r1, r2, gaps = backward_recursion(model, gammas, workers)
    ce = log_E[0] / model.gamma + model.reward_offset * model.horizon_weight(N)
    return FiniteHorizonPlan(
        exp_values=np.exp(log_E),
        ce_values=ce,
        policies1=MarkovPolicy(tuple(r1)),
        policies2=MarkovPolicy(tuple(r2)),
        stage_gammas=gammas,
        reward_offset=model.reward_offset,
        saddle_gaps=gaps,
    )


def _stage_payoffs(model: GameModel, x: int, tail: np.ndarray, g: float) -> np.ndarray:
    """Exp-space payoff matrix exp(g r(x,a,b)) * sum_x' Q(x'|x,a,b) tail(x')."""
    return np.exp(g * model.reward[x]) * (model.transition[x] @ tail)


def evaluate_policies(model: GameModel, pi: MarkovPolicy, sigma: MarkovPolicy, N: int) -> np.ndarray:
    """Exp-space value E[exp(gamma R_N)] of the pair (pi, sigma) from every initial state,
    by backward application of the bilinear one-stage operators."""
    pi.validate(model, 1, N)
    sigma.validate(model, 2, N)
    gammas = stage_gamma_ladder(model.gamma, model.beta, N)
    E = np.ones(model.n_states)
    for k in range(N - 1, -1, -1):
        E = np.array([pi[k][x] @ _stage_payoffs(model, x, E, gammas[k]) @ sigma[k][x]
                      for x in range(model.n_states)])
    return E


def best_response(model: GameModel, opponent: MarkovPolicy, side: int, N: int):
    """Exact deterministic best response of player ``side`` to a fixed opponent.

    Player 1 maximizes the certainty equivalent (maximizes exp space when
    ``gamma > 0``, minimizes it when ``gamma < 0``); player 2 does the opposite.
    Returns ``(policy, exp_values)`` with ``exp_values`` the value at stage 0.
    """
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    opponent.validate(model, 3 - side, N)
    maximize = (side == 1) == (model.gamma > 0)
    gammas = stage_gamma_ladder(model.gamma, model.beta, N)
    E = np.ones(model.n_states)
    rules = [None] * N
    for k in range(N - 1, -1, -1):
        stage, new_E = [], np.empty(model.n_states)
        for x in range(model.n_states):
            P = _stage_payoffs(model, x, E, gammas[k])
            vals = P @ opponent[k][x] if side == 1 else opponent[k][x] @ P
            i = int(np.argmax(vals) if maximize else np.argmin(vals))
            stage.append(pure(i, len(vals)))
            new_E[x] = vals[i]
        rules[k] = tuple(stage)
        E = new_E
    return MarkovPolicy(tuple(rules)), E


def ce_recursion(model: GameModel, N: int) -> np.ndarray:
    """Certainty-equivalent values computed directly in log form.

    ``C_k(x) = sup_mu inf_nu (1/g_k) ln sum exp(g_k r + g_k beta C_{k+1}(x')) Q``,
    with ``g_k = gamma beta^k``; the inner problem is a matrix game after
    pulling the monotone map ``(1/g_k) ln`` outside.  Returns ``C_0`` in the
    normalized reward scale (no offset correction).
    """
    model = normalize_rewards(model)
    gammas = stage_gamma_ladder(model.gamma, model.beta, N)
    C = np.zeros(model.n_states)
    for k in range(N - 1, -1, -1):
        g = gammas[k]
        new_C = np.empty_like(C)
        for x in range(model.n_states):
            expo = g * model.reward[x][:, :, None] + g * model.beta * C[None, None, :]
            top = expo.max()
            P = np.einsum("aby,aby->ab", model.transition[x], np.exp(expo - top))
            sol = solve_matrix_game(P, "row" if g > 0 else "column")
            new_C[x] = (top + np.log(sol.value)) / g
        C = new_C
    return C
