"""Zero-sum matrix games: value and optimal mixed strategies by linear programming.

Every Shapley / U-operator evaluation reduces to one small matrix game per
state, so the solver here is a plain dense tableau simplex with Bland's rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GameModel

PIVOT_TOL = 1e-12
MAX_PIVOTS = 10_000


class MatrixGameError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class MatrixGameSolution:
    """Value and strategies of a matrix game.

    ``epsilon`` is the measured saddle gap: no pure row deviation gains more
    than ``epsilon`` against ``col_strategy`` and no pure column deviation
    gains more than ``epsilon`` against ``row_strategy``.
    """

    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    epsilon: float


def _simplex_max(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``max 1'y s.t. A y <= 1, y >= 0`` for a strictly positive ``A``.

    Returns the primal ``y`` and the dual ``u`` (``min 1'u s.t. A'u >= 1``).
    """
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = 1.0
    T[m, :n] = -1.0
    basis = list(range(n, n + m))

    for _ in range(MAX_PIVOTS):
        # Bland: lowest-index improving column, lowest-index basic variable on ratio ties
        entering = next((j for j in range(n + m) if T[m, j] < -PIVOT_TOL), None)
        if entering is None:
            break
        col = T[:m, entering]
        rows = np.flatnonzero(col > PIVOT_TOL)
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        leave = min(ties, key=lambda i: basis[i])
        T[leave] /= T[leave, entering]
        others = np.arange(m + 1) != leave
        T[others] -= np.outer(T[others, entering], T[leave])
        basis[leave] = entering
    else:
        raise MatrixGameError("simplex pivot limit reached")

    y = np.zeros(n + m)
    y[basis] = T[:m, -1]
    return np.maximum(y[:n], 0.0), np.maximum(T[m, n:n + m], 0.0)


def _clean(p: np.ndarray) -> np.ndarray:
    p = np.where(p > 0.0, p, 0.0)
    return p / p.sum()


def saddle_gap(M: np.ndarray, value: float, p: np.ndarray, q: np.ndarray) -> float:
    """Largest violation of the two saddle inequalities for a row-maximizer game."""
    best_row = float(np.max(M @ q))
    worst_col = float(np.min(p @ M))
    return max(best_row - value, value - worst_col, 0.0)


def solve_matrix_game(M, maximizer: str = "row") -> MatrixGameSolution:
    """Value and optimal mixed strategies of the zero-sum game with payoff ``M``.

    ``M[i, j]`` is paid by the column player to the row player when
    ``maximizer="row"``; with ``maximizer="column"`` the column player is the
    one maximizing ``M``.  Strategies are always returned as (row, column).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or 0 in M.shape:
        raise ValueError(f"payoff matrix must be a nonempty 2-d array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise MatrixGameError("non-finite payoff entry (exp-space overflow upstream?)")
    if maximizer == "column":
        sol = solve_matrix_game(M.T, "row")
        return MatrixGameSolution(sol.value, sol.col_strategy, sol.row_strategy, sol.epsilon)
    if maximizer != "row":
        raise ValueError(f"maximizer must be 'row' or 'column', not {maximizer!r}")

    lo, hi = float(M.min()), float(M.max())
    m, n = M.shape
    if hi == lo:
        p, q = np.full(m, 1.0 / m), np.full(n, 1.0 / n)
        return MatrixGameSolution(lo, p, q, 0.0)

    if 1e-9 * hi <= lo < 0.5 * hi:
        # wide positive range: pure scaling keeps small entries (and a small
        # value) at full relative precision; beyond 1e9 the pivot tolerance
        # would swallow the small entries, so those fall through to the
        # affine form (absolute precision only)
        y, u = _simplex_max(M / hi)
        q, p = _clean(y), _clean(u)
        value = 0.5 * (float(np.max(M @ q)) + float(np.min(p @ M)))
    else:
        # affine rescale onto [1, 2]; strategies are invariant, value maps back
        span = hi - lo
        A = 1.0 + (M - lo) / span
        y, u = _simplex_max(A)
        q, p = _clean(y), _clean(u)
        scaled_value = 0.5 * (float(np.max(A @ q)) + float(np.min(p @ A)))
        value = lo + span * (scaled_value - 1.0)
    value = min(max(value, lo), hi)
    return MatrixGameSolution(value, p, q, saddle_gap(M, value, p, q))


# ---------------------------------------------------------------------------
# stage games built from a game model


def stage_matrix(model: GameModel, x: int, log_weights, stage_gamma: float) -> tuple[np.ndarray, float]:
    """Exp-space stage matrix at state ``x`` in offset-one form.

    The payoff is ``N(a,b) = sum_x' exp(stage_gamma r(x,a,b)) Q(x'|x,a,b) w(x')``
    with ``w = exp(log_weights)``.  Returns ``(D, shift)`` with
    ``N = exp(shift) * (1 + D)``; ``D`` is computed with ``expm1`` so that
    nearly constant matrices (small ``|stage_gamma|``) keep full precision.
    """
    z, shift = _stage_exponents(model, x, log_weights, stage_gamma)
    Q = model.transition[x]
    D = np.einsum("aby,aby->ab", Q, np.expm1(np.where(Q > 0.0, z - shift, 0.0)))
    return D, shift


def _stage_exponents(model, x, log_weights, stage_gamma):
    lw = np.asarray(log_weights, dtype=float)
    z = stage_gamma * model.reward[x][:, :, None] + lw[None, None, :]
    z = np.where(model.transition[x] > 0.0, z, -np.inf)
    return z, float(z.max())


@dataclass(frozen=True, eq=False)
class StageSolution:
    """Stage-game solution kept in log form: the exp-space value is ``exp(log_value)``."""

    log_value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray
    epsilon: float  # in exp-space units
    rel_epsilon: float  # epsilon / value, free of the exp-space scale

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))


def solve_stage_log(model: GameModel, x: int, log_weights, stage_gamma: float) -> StageSolution:
    """Solve the stage game at ``x`` with player 1 maximizing for ``stage_gamma > 0``
    and minimizing for ``stage_gamma < 0`` (maximizing the certainty equivalent either way)."""
    if stage_gamma == 0.0:
        raise ValueError("stage_gamma must be nonzero")
    D, shift = stage_matrix(model, x, log_weights, stage_gamma)
    side = "row" if stage_gamma > 0 else "column"
    if D.min() >= -0.5:
        # nearly constant payoffs: work with the offsets D to keep their digits
        sol = solve_matrix_game(D, side)
        log_value, rel = shift + float(np.log1p(sol.value)), sol.epsilon / (1.0 + sol.value)
    else:
        z, _ = _stage_exponents(model, x, log_weights, stage_gamma)
        P = np.einsum("aby,aby->ab", model.transition[x], np.exp(z - shift))
        sol = solve_matrix_game(P, side)
        log_value, rel = shift + float(np.log(sol.value)), sol.epsilon / sol.value
    return StageSolution(log_value, sol.row_strategy, sol.col_strategy, float(np.exp(log_value)) * rel, rel)


def solve_stage_game(model: GameModel, x: int, weights, stage_gamma: float) -> MatrixGameSolution:
    """Exp-space stage game at ``x`` against positive continuation ``weights``."""
    w = np.asarray(weights, dtype=float)
    if np.any(~(w > 0)):
        raise ValueError("stage weights must be strictly positive")
    s = solve_stage_log(model, x, np.log(w), stage_gamma)
    return MatrixGameSolution(s.value, s.row_strategy, s.col_strategy, s.epsilon)
