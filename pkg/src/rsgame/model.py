"""Finite zero-sum risk-sensitive stochastic game instances.

A game is stored per state: ``reward[x]`` is an ``(m_x, n_x)`` array and
``transition[x]`` an ``(m_x, n_x, S)`` array, where ``m_x``/``n_x`` are the
numbers of admissible actions of player 1/2 in state ``x``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

PROB_TOL = 1e-12


class ModelError(ValueError):
    """Base class for model loading/validation failures."""


class ModelParseError(ModelError):
    pass


class ModelValidationError(ModelError):
    """Raised when a model violates an invariant.

    ``path`` is the index path of the offending entry, e.g. ``("transition", 1, 0, 1)``.
    """

    def __init__(self, message: str, path: tuple = ()):
        self.path = tuple(path)
        if path:
            message = f"{message} at {_fmt_path(path)}"
        super().__init__(message)


def _fmt_path(path):
    head, *rest = path
    return str(head) + "".join(f"[{i}]" for i in rest)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GameModel:
    states: tuple[str, ...]
    actions1: tuple[tuple[str, ...], ...]
    actions2: tuple[tuple[str, ...], ...]
    reward: tuple[np.ndarray, ...]
    transition: tuple[np.ndarray, ...]
    gamma: float
    beta: float
    reward_offset: float = 0.0
    horizon: int | None = None
    weight_W: np.ndarray | None = None
    ergodic_constants: dict | None = field(default=None)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def r_max(self) -> float:
        return max(float(r.max()) for r in self.reward)

    @property
    def r_min(self) -> float:
        return min(float(r.min()) for r in self.reward)

    @property
    def r_bar(self) -> float:
        """Reward range; equals the largest reward once normalized."""
        return self.r_max - self.r_min

    @property
    def is_normalized(self) -> bool:
        return self.r_min == 0.0

    def shape(self, x: int) -> tuple[int, int]:
        return self.reward[x].shape

    def replace(self, **changes) -> "GameModel":
        return dataclasses.replace(self, **changes)

    def horizon_weight(self, n: int) -> float:
        """sum_{k<n} beta^k, the factor multiplying a constant reward."""
        if self.beta == 1.0:
            return float(n)
        return (1.0 - self.beta**n) / (1.0 - self.beta)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "states": list(self.states),
            "actions1": [list(a) for a in self.actions1],
            "actions2": [list(b) for b in self.actions2],
            "reward": [(r + self.reward_offset).tolist() for r in self.reward],
            "transition": [q.tolist() for q in self.transition],
            "gamma": self.gamma,
            "beta": self.beta,
        }
        if self.horizon is not None:
            d["horizon"] = self.horizon
        if self.weight_W is not None:
            d["weight_W"] = self.weight_W.tolist()
        if self.ergodic_constants is not None:
            d["ergodic_constants"] = dict(self.ergodic_constants)
        return d


def build_model(
    reward: Sequence,
    transition: Sequence,
    gamma: float,
    beta: float = 1.0,
    *,
    states: Sequence[str] | None = None,
    actions1: Sequence | None = None,
    actions2: Sequence | None = None,
    horizon: int | None = None,
    weight_W: Sequence[float] | None = None,
    ergodic_constants: dict | None = None,
    normalize: bool = True,
) -> GameModel:
    """Validate raw nested arrays and build a :class:`GameModel`.

    ``reward[x]`` is indexed ``[a][b]`` and ``transition[x]`` ``[a][b][x']``.
    Action label lists may be given globally (one flat list) or per state.
    """
    n = len(reward)
    if n == 0:
        raise ModelValidationError("model has no states", ("states",))
    if len(transition) != n:
        raise ModelValidationError(
            f"transition has {len(transition)} state blocks, expected {n}", ("transition",))
    if states is None:
        states = [str(i) for i in range(n)]
    states = tuple(str(s) for s in states)
    if len(states) != n:
        raise ModelValidationError(f"{len(states)} state names for {n} reward blocks", ("states",))
    if len(set(states)) != n:
        raise ModelValidationError("duplicate state identifiers", ("states",))

    rewards, kernels = [], []
    for x in range(n):
        r = _as_matrix(reward[x], ("reward", x))
        m, k = r.shape
        q = _as_tensor(transition[x], (m, k, n), ("transition", x))
        rewards.append(r)
        kernels.append(_check_rows(q, x))

    a1 = _action_labels(actions1, [r.shape[0] for r in rewards], "actions1")
    a2 = _action_labels(actions2, [r.shape[1] for r in rewards], "actions2")

    gamma = float(gamma)
    beta = float(beta)
    if not math.isfinite(gamma) or gamma == 0.0:
        raise ModelValidationError(
            "gamma must be finite and nonzero (use sim.risk_neutral_value for gamma=0)", ("gamma",))
    if not (0.0 < beta <= 1.0):
        raise ModelValidationError(f"beta={beta} outside (0, 1]", ("beta",))
    if horizon is not None and int(horizon) < 1:
        raise ModelValidationError("horizon must be >= 1", ("horizon",))

    W = None
    if weight_W is not None:
        W = np.asarray(weight_W, dtype=float)
        if W.shape != (n,):
            raise ModelValidationError(f"weight_W has shape {W.shape}, expected ({n},)", ("weight_W",))
        bad = np.flatnonzero(~(W >= 0) | ~np.isfinite(W))
        if bad.size:
            raise ModelValidationError("weight_W must be finite and nonnegative", ("weight_W", int(bad[0])))
        W = _frozen(W)

    if ergodic_constants is not None:
        ergodic_constants = dict(ergodic_constants)
        for key, val in ergodic_constants.items():
            if not (isinstance(val, (int, float)) and val > 0):
                raise ModelValidationError(f"ergodic constant {key} must be a positive number",
                                           ("ergodic_constants", key))
        gb = ergodic_constants.get("gamma_bar")
        if gb is not None and abs(gamma) > gb:
            raise ModelValidationError(f"|gamma|={abs(gamma)} exceeds gamma_bar={gb}", ("gamma",))

    model = GameModel(
        states=states,
        actions1=a1,
        actions2=a2,
        reward=tuple(_frozen(r) for r in rewards),
        transition=tuple(_frozen(q) for q in kernels),
        gamma=gamma,
        beta=beta,
        horizon=None if horizon is None else int(horizon),
        weight_W=W,
        ergodic_constants=ergodic_constants,
    )
    return normalize_rewards(model) if normalize else model


def _as_matrix(obj, path) -> np.ndarray:
    try:
        r = np.array(obj, dtype=float)
    except (ValueError, TypeError):
        raise ModelValidationError("ragged or non-numeric reward block", path) from None
    if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 1:
        raise ModelValidationError(f"reward block must be a nonempty matrix, got shape {r.shape}", path)
    bad = np.argwhere(~np.isfinite(r))
    if bad.size:
        raise ModelValidationError("non-finite reward", path + tuple(int(i) for i in bad[0]))
    return r


def _as_tensor(obj, shape, path) -> np.ndarray:
    try:
        q = np.array(obj, dtype=float)
    except (ValueError, TypeError):
        raise ModelValidationError("ragged or non-numeric transition block", path) from None
    if q.shape != shape:
        raise ModelValidationError(f"transition block has shape {q.shape}, expected {shape}", path)
    return q


def _check_rows(q: np.ndarray, x: int) -> np.ndarray:
    bad = np.argwhere(~(q >= 0.0))
    if bad.size:
        a, b, y = (int(i) for i in bad[0])
        raise ModelValidationError(f"negative or non-finite probability {q[a, b, y]!r}",
                                   ("transition", x, a, b, y))
    sums = q.sum(axis=2)
    off = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)
    if off.size:
        a, b = (int(i) for i in off[0])
        raise ModelValidationError(f"row sums to {sums[a, b]!r}, not 1", ("transition", x, a, b))
    return q / sums[:, :, None]


def _action_labels(labels, sizes, name):
    if labels is None:
        return tuple(tuple(str(i) for i in range(k)) for k in sizes)
    labels = list(labels)
    if labels and all(not isinstance(lab, (list, tuple)) for lab in labels):
        labels = [labels] * len(sizes)
    if len(labels) != len(sizes):
        raise ModelValidationError(f"{name} lists {len(labels)} states, expected {len(sizes)}", (name,))
    out = []
    for x, (lab, k) in enumerate(zip(labels, sizes)):
        if len(lab) != k:
            raise ModelValidationError(f"{len(lab)} labels for {k} actions", (name, x))
        if k < 1:
            raise ModelValidationError("empty action set", (name, x))
        out.append(tuple(str(t) for t in lab))
    return tuple(out)


def normalize_rewards(model: GameModel) -> GameModel:
    """Shift rewards so their global minimum is 0, accumulating the shift in ``reward_offset``.

    Solvers add back ``offset * sum_{k<N} beta^k`` (finite horizon),
    ``offset / (1 - beta)`` (discounted) or ``offset`` (ergodic) to their
    certainty-equivalent outputs.
    """
    c = model.r_min
    if c == 0.0:
        return model
    return model.replace(
        reward=tuple(_frozen(r - c) for r in model.reward),
        reward_offset=model.reward_offset + c,
    )


def load_model(path: str | Path, *, normalize: bool = True) -> GameModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ModelParseError(f"cannot read model file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelParseError(f"{path}: malformed JSON ({e.msg} at line {e.lineno}, column {e.colno})") from e
    return model_from_dict(data, normalize=normalize)


def model_from_dict(data: dict, *, normalize: bool = True) -> GameModel:
    if not isinstance(data, dict):
        raise ModelParseError("model file must contain a JSON object")
    missing = [k for k in ("states", "reward", "transition", "gamma", "beta") if k not in data]
    if missing:
        raise ModelParseError(f"missing required field(s): {', '.join(missing)}")
    unknown = set(data) - {"states", "actions1", "actions2", "reward", "transition", "gamma", "beta",
                           "horizon", "weight_W", "ergodic_constants"}
    if unknown:
        raise ModelParseError(f"unknown field(s): {', '.join(sorted(unknown))}")
    if not isinstance(data["gamma"], (int, float)) or not isinstance(data["beta"], (int, float)):
        raise ModelParseError("gamma and beta must be numbers")
    return build_model(
        data["reward"],
        data["transition"],
        data["gamma"],
        data["beta"],
        states=data["states"],
        actions1=data.get("actions1"),
        actions2=data.get("actions2"),
        horizon=data.get("horizon"),
        weight_W=data.get("weight_W"),
        ergodic_constants=data.get("ergodic_constants"),
        normalize=normalize,
    )


# ---------------------------------------------------------------------------
# mixed actions and policies


def check_mixed(weights, size: int, path=("mixed",)) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (size,):
        raise ModelValidationError(f"mixed action has shape {w.shape}, expected ({size},)", path)
    if np.any(~(w >= 0)) or abs(w.sum() - 1.0) > PROB_TOL:
        raise ModelValidationError("mixed action is not a probability vector", path)
    return w


def pure(index: int, size: int) -> np.ndarray:
    w = np.zeros(size)
    w[index] = 1.0
    return w


@dataclass(frozen=True, eq=False)
class MarkovPolicy:
    """Per-stage, per-state mixed actions: ``rules[k][x]`` is a probability vector."""

    rules: tuple[tuple[np.ndarray, ...], ...]

    def __len__(self):
        return len(self.rules)

    def __getitem__(self, k):
        return self.rules[k]

    @classmethod
    def stationary(cls, rule: Sequence, n_stages: int) -> "MarkovPolicy":
        rule = tuple(np.asarray(w, dtype=float) for w in rule)
        return cls((rule,) * n_stages)

    @classmethod
    def from_lists(cls, rules) -> "MarkovPolicy":
        return cls(tuple(tuple(np.asarray(w, dtype=float) for w in stage) for stage in rules))

    def tolist(self):
        return [[w.tolist() for w in stage] for stage in self.rules]

    def validate(self, model: GameModel, player: int, n_stages: int) -> "MarkovPolicy":
        if len(self.rules) < n_stages:
            raise ModelValidationError(
                f"policy of player {player} covers {len(self.rules)} stages, {n_stages} needed", ("policy",))
        for k in range(n_stages):
            stage = self.rules[k]
            if len(stage) != model.n_states:
                raise ModelValidationError(f"stage has {len(stage)} rules for {model.n_states} states",
                                           ("policy", k))
            for x, w in enumerate(stage):
                size = model.shape(x)[player - 1]
                check_mixed(w, size, ("policy", k, x))
        return self


def uniform_policy(model: GameModel, player: int, n_stages: int) -> MarkovPolicy:
    rule = tuple(np.full(model.shape(x)[player - 1], 1.0 / model.shape(x)[player - 1])
                 for x in range(model.n_states))
    return MarkovPolicy((rule,) * n_stages)


# ---------------------------------------------------------------------------
# twisted kernel quantities


def twisted_kernel_mass(model: GameModel, x: int, mu, nu) -> float:
    """Total mass c(x, mu, nu) = sum_{a,b} exp(gamma r(x,a,b)) mu(a) nu(b) of the twisted kernel."""
    return float(np.asarray(mu) @ np.exp(model.gamma * model.reward[x]) @ np.asarray(nu))


def twisted_kernel(model: GameModel, x: int, mu, nu) -> np.ndarray:
    """Unnormalized twisted kernel sum_{a,b} exp(gamma r) Q(.|x,a,b) mu(a) nu(b)."""
    weights = np.exp(model.gamma * model.reward[x]) * np.outer(mu, nu)
    return np.einsum("ab,aby->y", weights, model.transition[x])


def normalized_twisted_kernel(model: GameModel, x: int, mu, nu) -> np.ndarray:
    """The probability kernel obtained by dividing the twisted kernel by its mass."""
    z = model.gamma * model.reward[x]
    weights = np.outer(mu, nu) * np.exp(z - z.max())
    p = np.einsum("ab,aby->y", weights / weights.sum(), model.transition[x])
    return p / p.sum()
