"""Independent oracles: Monte Carlo simulation, exhaustive path enumeration and
a risk-neutral reference solver.

Random stream layout: episode ``i`` owns the block of ``L = 4 * ceil(3N / 4)``
consecutive doubles starting at draw ``i * L`` of ``Philox(key=seed)``; within
the block stage ``k`` reads ``[u_action1, u_action2, u_next_state]`` at offset
``3k``.  A batch of episodes ``[start, stop)`` is reproduced exactly by
advancing the counter by ``start * L / 4`` (Philox emits four doubles per
counter step), so batches can be generated in any order or in parallel.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linprog

from ._parallel import pmap
from .model import GameModel, MarkovPolicy

MAX_PATHS = 10**7


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SimulationResult:
    exp_estimate: float
    stderr: float
    ce_estimate: float
    episodes: int
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "SimulationResult":
        return cls(**json.loads(text))


def block_length(N: int) -> int:
    return 4 * math.ceil(3 * N / 4)


def _uniforms(seed: int, start: int, stop: int, N: int) -> np.ndarray:
    L = block_length(N)
    bg = np.random.Philox(key=seed)
    bg.advance(start * L // 4)
    return np.random.Generator(bg).random((stop - start) * L).reshape(stop - start, L)


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Index of the first cumulative weight exceeding ``u`` (row-wise when cdf is 2-d)."""
    if cdf.ndim == 1:
        idx = np.searchsorted(cdf, u, side="right")
        return np.minimum(idx, len(cdf) - 1)
    idx = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, cdf.shape[1] - 1)


def simulate_batch(model: GameModel, pi: MarkovPolicy, sigma: MarkovPolicy, N: int,
                   seed: int, start: int, stop: int, x0: int = 0) -> np.ndarray:
    """Discounted rewards R_N of episodes ``start..stop-1``."""
    U = _uniforms(seed, start, stop, N)
    n = stop - start
    X = np.full(n, x0, dtype=np.intp)
    R = np.zeros(n)
    cum_q = [np.cumsum(q, axis=2) for q in model.transition]
    for k in range(N):
        ua, ub, ux = U[:, 3 * k], U[:, 3 * k + 1], U[:, 3 * k + 2]
        nxt = np.empty_like(X)
        disc = model.beta**k
        for x in np.unique(X):
            sel = np.flatnonzero(X == x)
            a = _inverse_cdf(np.cumsum(pi[k][x]), ua[sel])
            b = _inverse_cdf(np.cumsum(sigma[k][x]), ub[sel])
            R[sel] += disc * model.reward[x][a, b]
            nxt[sel] = _inverse_cdf(cum_q[x][a, b], ux[sel])
        X = nxt
    return R


def simulate(model: GameModel, pi: MarkovPolicy, sigma: MarkovPolicy, N: int, episodes: int,
             seed: int, x0: int = 0, batch_size: int = 50_000, workers: int | None = None) -> SimulationResult:
    """Monte Carlo estimate of E_x0[exp(gamma R_N)] under (pi, sigma).

    The result depends only on ``seed`` (not on ``batch_size`` or ``workers``).
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    pi.validate(model, 1, N)
    sigma.validate(model, 2, N)
    bounds = [(s, min(s + batch_size, episodes)) for s in range(0, episodes, batch_size)]
    parts = pmap(lambda b: simulate_batch(model, pi, sigma, N, seed, b[0], b[1], x0), bounds, workers)
    Y = np.exp(model.gamma * np.concatenate(parts))
    mean = float(np.sum(Y)) / episodes
    if episodes > 1:
        # shifted two-pass variance; exactly zero for constant samples
        d = Y - Y[0]
        var = (float(np.sum(d * d)) - float(np.sum(d)) ** 2 / episodes) / (episodes - 1)
        stderr = math.sqrt(max(var, 0.0) / episodes)
    else:
        stderr = 0.0
    ce = math.log(mean) / model.gamma + model.reward_offset * model.horizon_weight(N)
    return SimulationResult(mean, stderr, ce, episodes, seed)


def brute_force_exp_value(model: GameModel, pi: MarkovPolicy, sigma: MarkovPolicy, N: int) -> np.ndarray:
    """E_x[exp(gamma R_N)] by summing over every (a, b, x') path of length N."""
    pi.validate(model, 1, N)
    sigma.validate(model, 2, N)
    S = model.n_states
    width = max(r.size for r in model.reward) * S
    if width**N > MAX_PATHS:
        raise InstanceTooLarge(f"{width}^{N} paths per initial state exceed the enumeration cap of {MAX_PATHS}")
    gam, beta = model.gamma, model.beta

    def walk(x, k, prob, R):
        if k == N:
            return prob * math.exp(gam * R)
        total = 0.0
        f, g = pi[k][x], sigma[k][x]
        r, q = model.reward[x], model.transition[x]
        for a in range(len(f)):
            if f[a] == 0.0:
                continue
            for b in range(len(g)):
                if g[b] == 0.0:
                    continue
                p_ab = prob * f[a] * g[b]
                R_next = R + beta**k * r[a, b]
                for y in range(S):
                    if q[a, b, y] > 0.0:
                        total += walk(y, k + 1, p_ab * q[a, b, y], R_next)
        return total

    return np.array([walk(x, 0, 1.0, 0.0) for x in range(S)])


# ---------------------------------------------------------------------------
# risk-neutral reference


def lp_matrix_game(M: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Row-maximizer matrix game via two HiGHS linear programs: (value, row, column)."""
    M = np.asarray(M, float)
    m, n = M.shape
    # row player: max v s.t. M^T p >= v, sum p = 1
    c = np.r_[np.zeros(m), -1.0]
    res_p = linprog(c, A_ub=np.c_[-M.T, np.ones(n)], b_ub=np.zeros(n),
                    A_eq=np.r_[np.ones(m), 0.0][None, :], b_eq=[1.0],
                    bounds=[(0, None)] * m + [(None, None)], method="highs")
    # column player: min v s.t. M q <= v, sum q = 1
    c = np.r_[np.zeros(n), 1.0]
    res_q = linprog(c, A_ub=np.c_[M, -np.ones(m)], b_ub=np.zeros(m),
                    A_eq=np.r_[np.ones(n), 0.0][None, :], b_eq=[1.0],
                    bounds=[(0, None)] * n + [(None, None)], method="highs")
    if res_p.status != 0 or res_q.status != 0:
        raise ArithmeticError("reference LP failed: " + res_p.message + " / " + res_q.message)
    p, q = np.clip(res_p.x[:m], 0, None), np.clip(res_q.x[:n], 0, None)
    return 0.5 * (-res_p.fun + res_q.fun), p / p.sum(), q / q.sum()


@dataclass(frozen=True, eq=False)
class RiskNeutralResult:
    values: np.ndarray  # per state, in original reward units
    policies1: list
    policies2: list
    phi: float | None = None


def _rn_stage(model, cont, discount):
    out = [lp_matrix_game(model.reward[x] + model.reward_offset + discount * (model.transition[x] @ cont))
           for x in range(model.n_states)]
    return (np.array([o[0] for o in out]), tuple(o[1] for o in out), tuple(o[2] for o in out))


def risk_neutral_value(model: GameModel, mode: str = "finite", N: int | None = None,
                       tol: float = 1e-10, max_iters: int = 100_000, x_ref: int = 0) -> RiskNeutralResult:
    """Expected-reward (gamma -> 0) game values by ordinary zero-sum dynamic programming.

    ``mode``: ``"finite"`` (needs ``N``), ``"discounted"`` (beta < 1) or
    ``"ergodic"`` (relative value iteration; ``phi`` holds the average value).
    """
    S = model.n_states
    if mode == "finite":
        if not N or N < 1:
            raise ValueError("finite mode needs N >= 1")
        V = np.zeros(S)
        p1, p2 = [None] * N, [None] * N
        for k in range(N - 1, -1, -1):
            V, p1[k], p2[k] = _rn_stage(model, V, model.beta)
        return RiskNeutralResult(V, p1, p2)
    if mode == "discounted":
        if not model.beta < 1:
            raise ValueError("discounted mode needs beta < 1")
        V = np.zeros(S)
        for _ in range(max_iters):
            new, a, b = _rn_stage(model, V, model.beta)
            done = np.max(np.abs(new - V)) * model.beta / (1 - model.beta) <= tol
            V = new
            if done:
                return RiskNeutralResult(V, [a], [b])
        raise ArithmeticError("risk-neutral discounted iteration did not converge")
    if mode == "ergodic":
        h = np.zeros(S)
        for _ in range(max_iters):
            Th, a, b = _rn_stage(model, h, 1.0)
            d = Th - h
            if d.max() - d.min() <= tol:
                return RiskNeutralResult(h, [a], [b], phi=0.5 * float(d.max() + d.min()))
            h = Th - Th[x_ref]
        raise ArithmeticError("risk-neutral relative value iteration did not converge")
    raise ValueError(f"unknown mode {mode!r}")
