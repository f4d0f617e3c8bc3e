import math

import numpy as np
import pytest

from gamefixtures import example, iid, two_state
from rsgame.finite import evaluate_policies, solve_finite
from rsgame.model import MarkovPolicy, build_model, pure, uniform_policy
from rsgame.sim import (InstanceTooLarge, SimulationResult, block_length, brute_force_exp_value,
                        lp_matrix_game, risk_neutral_value, simulate, simulate_batch)


def test_constant_reward_simulation_is_exact():
    q = [[[[0.5, 0.5]] * 2] * 2, [[[0.2, 0.8]] * 2] * 2]
    m = build_model([[[0.75, 0.75], [0.75, 0.75]]] * 2, q, 0.5, 0.5, normalize=False)
    N = 4
    pi, sigma = uniform_policy(m, 1, N), uniform_policy(m, 2, N)
    res = simulate(m, pi, sigma, N, 1000, seed=1)
    weight = sum(0.5**k for k in range(N))
    assert res.exp_estimate == pytest.approx(math.exp(0.5 * 0.75 * weight), rel=1e-14)
    assert res.stderr == 0.0
    assert res.ce_estimate == pytest.approx(0.75 * weight, abs=1e-12)


def test_determinism_and_batch_independence():
    m = two_state(0.5)
    plan = solve_finite(m, 3)
    args = (m, plan.policies1, plan.policies2, 3, 20_000)
    a = simulate(*args, seed=42)
    b = simulate(*args, seed=42)
    c = simulate(*args, seed=42, batch_size=777, workers=4)
    assert a == b == c
    assert simulate(*args, seed=43) != a
    whole = simulate_batch(m, plan.policies1, plan.policies2, 3, 42, 0, 1000)
    parts = np.concatenate([simulate_batch(m, plan.policies1, plan.policies2, 3, 42, s, s + 100)
                            for s in range(900, -1, -100)][::-1])
    np.testing.assert_array_equal(whole, parts)


def test_block_length():
    assert [block_length(n) for n in (1, 2, 4, 5, 8)] == [4, 8, 12, 16, 24]


def test_json_round_trip():
    res = SimulationResult(1.5, 0.01, 0.4, 100, 7)
    assert SimulationResult.from_json(res.to_json()) == res


def test_simulation_within_four_stderr():
    m = two_state(0.5, 0.9)
    plan = solve_finite(m, 3)
    exact = evaluate_policies(m, plan.policies1, plan.policies2, 3)
    for x0 in range(2):
        res = simulate(m, plan.policies1, plan.policies2, 3, 100_000, seed=2024 + x0, x0=x0)
        assert abs(res.exp_estimate - exact[x0]) <= 4 * res.stderr


def test_simulated_ce_nondecreasing_in_gamma():
    m = two_state(0.5)
    plan = solve_finite(m, 3)
    ces = [simulate(m.replace(gamma=g), plan.policies1, plan.policies2, 3, 5000, seed=9).ce_estimate
           for g in (-2.0, -0.5, -0.1, 0.1, 0.5, 2.0)]
    assert all(a <= b + 1e-12 for a, b in zip(ces, ces[1:]))


def test_brute_force_base_cases():
    m = two_state(0.8)
    for a in range(2):
        for b in range(2):
            p1 = MarkovPolicy.stationary([pure(a, 2)] * 2, 1)
            p2 = MarkovPolicy.stationary([pure(b, 2)] * 2, 1)
            np.testing.assert_allclose(brute_force_exp_value(m, p1, p2, 1),
                                       [math.exp(0.8 * m.reward[x][a, b]) for x in range(2)], rtol=1e-15)
    zero = m.replace(reward=tuple(np.zeros_like(r) for r in m.reward))
    np.testing.assert_allclose(brute_force_exp_value(zero, uniform_policy(m, 1, 3), uniform_policy(m, 2, 3), 3),
                               1.0, rtol=1e-14)


def test_brute_force_guard():
    m = two_state()  # 8 branches per stage
    assert brute_force_exp_value(m, uniform_policy(m, 1, 4), uniform_policy(m, 2, 4), 4).shape == (2,)
    with pytest.raises(InstanceTooLarge):
        brute_force_exp_value(m, uniform_policy(m, 1, 8), uniform_policy(m, 2, 8), 8)


def test_risk_neutral_example():
    res = risk_neutral_value(example(1.0), "finite", N=1)
    assert res.values[0] == pytest.approx(3.5, abs=1e-9)
    np.testing.assert_allclose(res.policies1[0][0], [0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(res.policies2[0][0], [0.25, 0.75], atol=1e-9)


def test_lp_oracle_agrees_with_simplex():
    rng = np.random.default_rng(0)
    from rsgame.matgame import solve_matrix_game
    for _ in range(30):
        M = rng.normal(size=tuple(rng.integers(1, 6, size=2)))
        assert lp_matrix_game(M)[0] == pytest.approx(solve_matrix_game(M).value, abs=1e-8)


def test_risk_neutral_constant_rewards():
    q = [[[[0.5, 0.5]]], [[[0.3, 0.7]]]]
    m = build_model([[[2.0]], [[2.0]]], q, 1.0, 0.8)
    np.testing.assert_allclose(risk_neutral_value(m, "finite", N=3).values, 2.0 * (1 + 0.8 + 0.64), atol=1e-9)
    np.testing.assert_allclose(risk_neutral_value(m, "discounted").values, 2.0 / 0.2, atol=1e-8)
    assert risk_neutral_value(m.replace(beta=1.0), "ergodic").phi == pytest.approx(2.0, abs=1e-9)


def test_risk_neutral_iid_ergodic():
    m = iid()
    w0 = np.array([lp_matrix_game(m.reward[x] + m.reward_offset)[0] for x in range(2)])
    res = risk_neutral_value(m, "ergodic")
    assert res.phi == pytest.approx(float(np.dot([0.3, 0.7], w0)), abs=1e-9)


def test_risk_neutral_is_small_gamma_limit():
    m = two_state(1.0, 1.0)
    rn = risk_neutral_value(m, "finite", N=3).values
    gaps = {}
    for g in (1e-2, -1e-2, 1e-3, -1e-3):
        ce = solve_finite(m.replace(gamma=g), 3).ce_values
        gaps[g] = np.max(np.abs(ce - rn)) / abs(g)
    # |CE(gamma) - risk neutral| <= C |gamma| with a stable C
    assert max(gaps.values()) < 10
    assert gaps[1e-3] == pytest.approx(gaps[1e-2], rel=0.2)


def test_risk_neutral_mode_errors():
    with pytest.raises(ValueError):
        risk_neutral_value(example(), "finite")
    with pytest.raises(ValueError):
        risk_neutral_value(example(), "discounted")
    with pytest.raises(ValueError):
        risk_neutral_value(example(), "average")
