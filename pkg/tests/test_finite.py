import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gamefixtures import EXAMPLE_R, example, random_model, two_state
from rsgame.finite import (FiniteHorizonPlan, backward_recursion, best_response, ce_recursion,
                           evaluate_policies, solve_finite, stage_gamma_ladder)
from rsgame.model import MarkovPolicy, build_model, normalize_rewards, pure, uniform_policy
from rsgame.sim import brute_force_exp_value


def test_constant_reward_ce():
    q = [[[[0.5, 0.5]] * 2] * 2, [[[0.1, 0.9]] * 2] * 2]
    m = build_model([[[-1.5, -1.5], [-1.5, -1.5]]] * 2, q, 0.8, 0.9)
    plan = solve_finite(m, 4)
    expected = -1.5 * (1 - 0.9**4) / (1 - 0.9)
    np.testing.assert_allclose(plan.ce_values, expected, rtol=0, atol=1e-12)


def test_example_small_gamma_limit():
    plan = solve_finite(example(1e-4), 1)
    assert plan.ce_values[0] == pytest.approx(3.5, abs=1e-3)
    np.testing.assert_allclose(plan.policies1[0][0], [0.5, 0.5], atol=1e-3)
    np.testing.assert_allclose(plan.policies2[0][0], [0.25, 0.75], atol=1e-3)


def test_plan_structure():
    m = two_state(gamma=0.5, beta=0.9)
    plan = solve_finite(m, 3)
    assert plan.horizon == 3 and len(plan.policies1) == 3
    np.testing.assert_array_equal(plan.exp_values[3], 1.0)
    np.testing.assert_allclose(plan.stage_gammas, [0.5, 0.45, 0.405])
    assert np.all(plan.saddle_gaps <= 1e-9)
    again = FiniteHorizonPlan.from_json(plan.to_json())
    np.testing.assert_array_equal(again.exp_values, plan.exp_values)
    np.testing.assert_array_equal(again.policies2[1][0], plan.policies2[1][0])


@pytest.mark.parametrize("gamma", [0.5, -0.5])
@pytest.mark.parametrize("beta", [1.0, 0.9])
def test_exp_value_bounds(gamma, beta):
    m = normalize_rewards(two_state(gamma, beta))
    plan = solve_finite(m, 4)
    for k in range(5):
        tail = m.r_bar * sum(beta**j for j in range(k, 4))
        lo, hi = sorted((1.0, math.exp(gamma * tail)))
        assert np.all(plan.exp_values[k] >= lo * (1 - 1e-12))
        assert np.all(plan.exp_values[k] <= hi * (1 + 1e-12))


def test_evaluate_zero_reward_and_pure_base_case():
    m = two_state(0.7)
    zero = m.replace(reward=tuple(np.zeros_like(r) for r in m.reward))
    pi, sigma = uniform_policy(m, 1, 3), uniform_policy(m, 2, 3)
    np.testing.assert_allclose(evaluate_policies(zero, pi, sigma, 3), 1.0, rtol=1e-15)
    for a in range(2):
        for b in range(2):
            p1 = MarkovPolicy.stationary([pure(a, 2), pure(a, 2)], 1)
            p2 = MarkovPolicy.stationary([pure(b, 2), pure(b, 2)], 1)
            E = evaluate_policies(m, p1, p2, 1)
            expected = [math.exp(0.7 * m.reward[x][a, b]) for x in range(2)]
            np.testing.assert_allclose(E, expected, rtol=1e-15)


def test_evaluate_matches_enumeration_on_two_state():
    m = two_state(0.6, 0.9)
    rng = np.random.default_rng(3)
    pi = MarkovPolicy(tuple(tuple(rng.dirichlet([1, 1]) for _ in range(2)) for _ in range(3)))
    sigma = MarkovPolicy(tuple(tuple(rng.dirichlet([1, 1]) for _ in range(2)) for _ in range(3)))
    np.testing.assert_allclose(evaluate_policies(m, pi, sigma, 3), brute_force_exp_value(m, pi, sigma, 3),
                               rtol=1e-12, atol=0)


def test_policy_stage_mismatch():
    m = two_state()
    with pytest.raises(ValueError):
        evaluate_policies(m, uniform_policy(m, 1, 2), uniform_policy(m, 2, 3), 3)


def test_best_response_example_uniform_opponent():
    m = example(1.0)
    pol, E = best_response(m, uniform_policy(m, 2, 1), 1, 1)
    np.testing.assert_array_equal(pol[0][0], [1.0, 0.0])  # row -1
    r = np.array(EXAMPLE_R) - 2.0
    assert E[0] == pytest.approx((math.exp(r[0, 0]) + math.exp(r[0, 1])) / 2, rel=1e-15)


def test_best_response_zero_reward():
    m = two_state(0.5)
    zero = m.replace(reward=tuple(np.zeros_like(r) for r in m.reward))
    for side in (1, 2):
        _, E = best_response(zero, uniform_policy(zero, 3 - side, 2), side, 2)
        np.testing.assert_allclose(E, 1.0, rtol=1e-15)


def _grid_oracle(model, h=1e-3):
    """Two-stage, single-state-agnostic grid search over 2x2 stage simplices with local refinement."""
    def stage_value(P, maximize):
        grid = np.linspace(0, 1, int(round(1 / h)) + 1)

        def best(lo, hi, n):
            ys = np.linspace(lo, hi, n)
            mus = np.stack([1 - ys, ys], axis=1)
            vals = mus @ P  # inner player picks a pure column
            inner = vals.min(axis=1) if maximize else vals.max(axis=1)
            i = int(inner.argmax() if maximize else inner.argmin())
            return ys[i], inner[i]

        y, _ = best(0.0, 1.0, len(grid))
        _, v = best(max(y - h, 0.0), min(y + h, 1.0), 4001)
        return v

    E = np.ones(model.n_states)
    gammas = stage_gamma_ladder(model.gamma, model.beta, 2)
    for k in (1, 0):
        E = np.array([stage_value(np.exp(gammas[k] * model.reward[x]) * (model.transition[x] @ E),
                                  model.gamma > 0) for x in range(model.n_states)])
    return E


@pytest.mark.parametrize("seed", range(4))
def test_grid_oracle_two_state_two_stage(seed):
    rng = np.random.default_rng(100 + seed)
    r = rng.uniform(0, 1, (2, 2, 2)).tolist()
    q = rng.dirichlet([1, 1], (2, 2, 2)).tolist()
    m = build_model(r, q, 0.5, 1.0)
    plan = solve_finite(m, 2)
    np.testing.assert_allclose(plan.exp_values[0], _grid_oracle(m), rtol=0, atol=1e-5)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), gamma=st.sampled_from([0.5, -0.5, 1.3]),
       beta=st.sampled_from([1.0, 0.9]), N=st.integers(1, 4))
def test_saddle_sandwich(seed, gamma, beta, N):
    m = random_model(seed, gamma, beta)
    plan = solve_finite(m, N)
    E0 = plan.exp_values[0]
    _, v1 = best_response(m, plan.policies2, 1, N)
    _, v2 = best_response(m, plan.policies1, 2, N)
    if gamma > 0:
        assert np.all(v1 <= E0 + 1e-9) and np.all(v2 >= E0 - 1e-9)
    else:
        assert np.all(v1 >= E0 - 1e-9) and np.all(v2 <= E0 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000), gamma=st.sampled_from([0.5, -0.8]))
def test_stage_operator_monotone_and_homogeneous(seed, gamma):
    m = normalize_rewards(random_model(seed, gamma))
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.5, 2.0, m.n_states)
    w = v + rng.uniform(0.0, 1.0, m.n_states)
    c = float(rng.uniform(0.1, 10.0))
    Tv, *_ = backward_recursion_once(m, v)
    Tw, *_ = backward_recursion_once(m, w)
    Tcv, s1, s2 = backward_recursion_once(m, c * v)
    assert np.all(Tv <= Tw * (1 + 1e-12))
    np.testing.assert_allclose(Tcv, c * Tv, rtol=1e-12)
    _, t1, t2 = backward_recursion_once(m, v)
    for x in range(m.n_states):
        np.testing.assert_allclose(s1[x], t1[x], atol=1e-9)
        np.testing.assert_allclose(s2[x], t2[x], atol=1e-9)


def backward_recursion_once(model, weights):
    from rsgame.matgame import solve_stage_log
    sols = [solve_stage_log(model, x, np.log(weights), model.gamma) for x in range(model.n_states)]
    return (np.array([s.value for s in sols]), [s.row_strategy for s in sols],
            [s.col_strategy for s in sols])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000), gamma=st.sampled_from([0.5, -0.5, 2.0]),
       beta=st.sampled_from([1.0, 0.8]), N=st.integers(1, 5))
def test_ce_recursion_agrees(seed, gamma, beta, N):
    m = random_model(seed, gamma, beta)
    plan = solve_finite(m, N)
    C0 = ce_recursion(m, N)
    norm = normalize_rewards(m)
    np.testing.assert_allclose(C0, np.log(plan.exp_values[0]) / gamma, rtol=0, atol=1e-10)
    np.testing.assert_allclose(C0 + norm.reward_offset * norm.horizon_weight(N), plan.ce_values,
                               rtol=0, atol=1e-10)


def test_workers_do_not_change_results():
    m = random_model(11, 0.5, 0.9, max_states=3)
    a = backward_recursion(normalize_rewards(m), stage_gamma_ladder(0.5, 0.9, 4))
    b = backward_recursion(normalize_rewards(m), stage_gamma_ladder(0.5, 0.9, 4), workers=3)
    np.testing.assert_array_equal(a[0], b[0])
