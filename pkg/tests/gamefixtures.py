"""Hand-built and seeded random game models shared by the test modules."""

import numpy as np

from rsgame.model import build_model

EXAMPLE_R = [[5.0, 3.0], [2.0, 4.0]]


def single_state(reward, gamma, beta=1.0, **kw):
    r = np.asarray(reward, float)
    q = np.ones(r.shape + (1,))
    return build_model([r.tolist()], [q.tolist()], gamma, beta, **kw)


def example(gamma=1.0, beta=1.0):
    return single_state(EXAMPLE_R, gamma, beta)


def random_model(seed, gamma=0.5, beta=1.0, max_states=3, max_actions=3, sparse=False, scale=1.0):
    rng = np.random.default_rng(seed)
    S = int(rng.integers(1, max_states + 1))
    rewards, kernels = [], []
    for _ in range(S):
        m, n = (int(k) for k in rng.integers(1, max_actions + 1, size=2))
        rewards.append((scale * rng.uniform(-1.0, 1.0, (m, n))).tolist())
        q = rng.dirichlet(np.ones(S), (m, n))
        if sparse:
            q = np.where(rng.uniform(size=q.shape) < 0.3, 0.0, q)
            q[..., 0] += 1e-3  # keep every row nonempty
            q /= q.sum(axis=2, keepdims=True)
        kernels.append(q.tolist())
    return build_model(rewards, kernels, gamma, beta)


def two_state(gamma=0.5, beta=1.0):
    r = [[[1.0, -0.5], [0.25, 2.0]], [[0.0, 1.5], [-1.0, 0.75]]]
    q = [[[[0.7, 0.3], [0.2, 0.8]], [[0.5, 0.5], [0.9, 0.1]]],
         [[[0.4, 0.6], [0.35, 0.65]], [[0.1, 0.9], [0.6, 0.4]]]]
    return build_model(r, q, gamma, beta, states=["low", "high"], actions1=["u", "d"], actions2=["l", "r"])


IID_Q = np.array([0.3, 0.7])


def iid(gamma=0.05):
    """Transitions independent of (x, a, b); reward range 0.2."""
    r = [[[0.2, 0.05], [0.0, 0.15]], [[0.1, 0.18], [0.12, 0.02]]]
    q = [[[IID_Q.tolist()] * 2] * 2] * 2
    return build_model(r, q, gamma, 1.0)


DOEBLIN_Q = [
    [[[0.6, 0.4], [0.3, 0.7]], [[0.5, 0.5], [0.9, 0.1]]],
    [[[0.2, 0.8], [0.7, 0.3]], [[0.4, 0.6], [0.15, 0.85]]],
]


def doeblin(gamma=0.03):
    r = [[[0.3, 0.1], [0.0, 0.25]], [[0.2, 0.05], [0.15, 0.3]]]
    return build_model(r, DOEBLIN_Q, gamma, 1.0, weight_W=[0.0, 0.0],
                       ergodic_constants={"K0": 1.0, "gamma_bar": 1.0, "R": 1.0})


def disjoint(gamma=0.5):
    """Two absorbing states with different rewards: not ergodic."""
    r = [[[1.0]], [[0.0]]]
    q = [[[[1.0, 0.0]]], [[[0.0, 1.0]]]]
    return build_model(r, q, gamma, 1.0)


def monotone(gamma=-0.5):
    """Rewards nondecreasing in the state, stochastically monotone rows."""
    rng = np.random.default_rng(5)
    S = 3
    base = rng.dirichlet(np.ones(S), (2, 2))
    r0 = rng.uniform(0.0, 0.5, (2, 2))
    rewards, kernels = [], []
    for x in range(S):
        rewards.append((r0 + 0.25 * x).tolist())
        kernels.append((0.4 * base + 0.6 * np.eye(S)[x]).tolist())
    return build_model(rewards, kernels, gamma, 1.0, weight_W=[0.0, 1.0, 20.0],
                       ergodic_constants={"K0": 1.0, "gamma_bar": 1.0, "R": 20.0})
