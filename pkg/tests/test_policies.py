import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxbandit.config import PolicyConfig
from ctxbandit.environments import channel_k7, draw_stream, energy_harvesting_k4, get_preset, reward_min
from ctxbandit.experiments import replication_rng, simulate_arms
from ctxbandit.policies import (
    CCB,
    DCB,
    UCB1,
    DoublingCCB,
    MultiUCB,
    bin_centers,
    dcb_index,
    doubling_delta,
    num_bins,
    phase_of,
    quantize,
    ucb_index,
)


def identity(ys, x):
    return np.full(len(ys), float(x))


def make_dcb(m=1, k=2, eps=0.01, g_range=1.0, fn=identity):
    return DCB(np.arange(1, m + 1, dtype=float), k, fn, [g_range] * m, eps)


# ------------------------------------------------------------------ DCB


def test_dcb_initialization_order_ignores_context():
    pol = DCB([1.0, 2.0, 3.0], 2, reward_min, [1.0, 2.0, 3.0], 0.01)
    assert pol.select(2) == 0
    pol.update(2, 0, 1.0)
    assert pol.select(0) == 1


def test_dcb_init_pull_with_zero_state_zeroes_column():
    env = channel_k7()
    pol = DCB.from_environment(env, 0.01)
    pol.update(0, 3, 0.0)
    assert np.all(pol.theta_hat[:, 3] == 0.0)


def test_dcb_after_initialization_counts():
    env = channel_k7()
    pol = DCB.from_environment(env, 0.01)
    rng = np.random.default_rng(0)
    for j in range(7):
        arm = pol.select(int(rng.integers(4)))
        assert arm == j
        pol.update(None, arm, float(j + 1))
    assert pol.pull_counts.tolist() == [1] * 7
    assert pol.trial == 7


def test_dcb_index_examples():
    # hand evaluation of theta + G sqrt((2 + eps) ln n / m)
    def by_hand(theta, m, n):
        return theta + math.sqrt(2.01 * math.log(n) / m)

    idx = dcb_index([0.5, 0.4], 1.0, [10, 10], 20, 0.01)
    assert idx == pytest.approx([by_hand(0.5, 10, 20), by_hand(0.4, 10, 20)])
    assert int(np.argmax(idx)) == 0

    idx = dcb_index([0.5, 0.4], 1.0, [100, 2], 103, 0.01)
    assert idx[0] == pytest.approx(0.805, abs=5e-4)
    assert idx[1] == pytest.approx(2.558, abs=5e-4)
    assert int(np.argmax(idx)) == 1


def test_dcb_select_matches_index_examples():
    pol = make_dcb()
    pol._theta[:, 0] = [0.5, 0.4]
    pol.pull_counts[:] = [100, 2]
    pol.trial = 102  # current trial n = 103
    assert pol.select(0) == 1
    assert pol.indices(0) == pytest.approx(dcb_index([0.5, 0.4], 1.0, [100, 2], 103, 0.01))

    pol.pull_counts[:] = [10, 10]
    pol.trial = 20
    assert pol.select(0) == 0


def test_dcb_select_ties_lowest_index():
    pol = make_dcb(m=2, k=4)
    pol._theta[:] = 0.3
    pol.pull_counts[:] = 5
    pol.trial = 20
    assert pol.select(1) == 0


def test_dcb_select_does_not_mutate():
    pol = make_dcb(m=2, k=3)
    for j in range(3):
        pol.update(None, j, 0.2 * j)
    before = (pol._theta.copy(), pol.pull_counts.copy(), pol.trial)
    pol.select(1)
    assert np.array_equal(before[0], pol._theta)
    assert np.array_equal(before[1], pol.pull_counts)
    assert before[2] == pol.trial


def test_dcb_update_incremental_mean():
    pol = make_dcb(m=1, k=2)
    pol._theta[1, 0] = 0.5
    pol.pull_counts[:] = [3, 4]
    pol.trial = 7
    pol.update(0, 1, 1.0)
    assert pol.theta_hat[0, 1] == pytest.approx(0.6)
    assert pol.pull_counts[1] == 5
    assert pol.trial == 8


def test_dcb_update_touches_one_column_all_rows():
    env = channel_k7()
    pol = DCB.from_environment(env, 0.01)
    for j in range(7):
        pol.update(None, j, float(j + 1))
    before = pol.theta_hat.copy()
    pol.update(None, 4, 0.0)
    changed = pol.theta_hat != before
    assert changed[:, 4].all()
    assert not np.delete(changed, 4, axis=1).any()
    # every context shrinks towards zero by the same factor m/(m+1)
    assert pol.theta_hat[:, 4] == pytest.approx(before[:, 4] / 2)


def test_dcb_three_observations_average():
    pol = DCB([1.0, 2.0, 3.0], 1, reward_min, [3.0, 3.0, 3.0], 0.01)
    ys = np.array([1.0, 2.0, 3.0])
    for x in (2.5, 0.5, 4.0):
        pol.update(None, 0, x)
    expected = (np.minimum(ys, 2.5) + np.minimum(ys, 0.5) + np.minimum(ys, 4.0)) / 3
    assert pol.theta_hat[:, 0] == pytest.approx(expected)


def test_dcb_rejects_bad_arguments():
    with pytest.raises(ValueError):
        make_dcb(eps=0.0)
    with pytest.raises(ValueError):
        make_dcb(eps=-1.0)
    with pytest.raises(ValueError):
        make_dcb(k=0)
    pol = make_dcb(m=2)
    with pytest.raises(IndexError):
        pol.select(2)
    with pytest.raises(IndexError):
        pol.update(0, 5, 1.0)


@given(st.floats(0.0, 1.0), st.integers(1, 1000), st.integers(1, 1000), st.integers(2, 10**6),
       st.floats(0.001, 1.0))
def test_dcb_index_monotone_in_counts_and_trial(theta, m, dm, n, eps):
    a = dcb_index([theta], 1.5, [m], n, eps)[0]
    assert dcb_index([theta], 1.5, [m + dm], n, eps)[0] < a
    assert dcb_index([theta], 1.5, [m], n + 1, eps)[0] > a


def test_dcb_estimates_stay_within_reward_range():
    env = channel_k7()
    rng = replication_rng(3, 0)
    s = draw_stream(env, 2000, rng)
    vals, _ = env.arm_value_table()
    pol = DCB.from_environment(env, 0.01)
    ys = env.context_points()
    lo = np.minimum(ys, 0.0)
    hi = np.minimum(ys, vals.max())
    for t in range(len(s)):
        arm = pol.select(s.contexts[t])
        pol.update(s.contexts[t], arm, vals[arm, s.value_idx[t, arm]])
    assert pol.pull_counts.sum() == pol.trial == 2000
    assert np.all(pol.theta_hat >= lo[:, None]) and np.all(pol.theta_hat <= hi[:, None])


# ----------------------------------------------------------------- UCB1


def test_ucb1_single_arm():
    pol = UCB1(1)
    for t in range(20):
        assert pol.select() == 0
        pol.update(None, 0, t % 2)


def test_ucb1_index_examples():
    assert int(np.argmax(ucb_index([0.9, 0.1], [50, 50], 100))) == 0
    idx = ucb_index([0.9, 0.1], [99, 1], 100)
    assert idx[1] - 0.1 == pytest.approx(math.sqrt(2 * math.log(100)), rel=1e-12)
    assert idx[1] - 0.1 == pytest.approx(3.03, abs=0.01)
    assert int(np.argmax(idx)) == 1


def test_ucb1_select_examples():
    pol = UCB1(2)
    pol.value_means[:] = [0.9, 0.1]
    pol.pull_counts[:] = [50, 50]
    pol.trial = 100
    assert pol.select() == 0
    pol.pull_counts[:] = [99, 1]
    assert pol.select() == 1


def test_ucb1_updates_raw_value_means():
    pol = UCB1(3)
    for arm, x in [(0, 2.0), (1, 1.0), (2, 4.0), (0, 4.0)]:
        pol.update("ignored", arm, x)
    assert pol.value_means.tolist() == [3.0, 1.0, 4.0]
    assert pol.trial == 4


# ------------------------------------------------------------ Multi-UCB


def test_multi_ucb_new_context_cycles_arms():
    pol = MultiUCB(3, 4)
    for j in range(4):
        assert pol.select(1) == j
        pol.update_reward(1, j, 0.5)
    # another context still starts at arm 0
    assert pol.select(2) == 0


def test_multi_ucb_rows_are_isolated():
    pol = MultiUCB(2, 2)
    for ctx in (0, 1):
        for j in range(2):
            pol.update_reward(ctx, j, 0.3 + 0.1 * j)
    row1 = (pol.reward_means[1].copy(), pol.per_context_pulls[1].copy(), pol.context_counts[1])
    for _ in range(10):
        pol.update_reward(0, pol.select(0), 1.0)
    assert np.array_equal(pol.reward_means[1], row1[0])
    assert np.array_equal(pol.per_context_pulls[1], row1[1])
    assert pol.context_counts[1] == row1[2]
    assert pol.per_context_pulls.sum(axis=1).tolist() == pol.context_counts.tolist()


def test_multi_ucb_single_context_is_ucb1():
    rng = np.random.default_rng(5)
    xs = rng.random((3000, 3)) < np.array([0.3, 0.5, 0.45])
    multi, ucb = MultiUCB(1, 3), UCB1(3)
    for t in range(len(xs)):
        a, b = multi.select(0), ucb.select()
        assert a == b
        multi.update_reward(0, a, float(xs[t, a]))
        ucb.update(None, b, float(xs[t, b]))


def test_multi_ucb_update_from_state_uses_reward_fn():
    pol = MultiUCB(2, 2, reward_fn=reward_min, context_points=[1.0, 3.0])
    pol.update(1, 0, 5.0)
    pol.update(0, 0, 5.0)
    assert pol.reward_means[:, 0].tolist() == [1.0, 3.0]


# --------------------------------------------------------- quantization


def test_quantize_examples():
    assert quantize(0.3, 0.25, 0.0, 1.0) == (1, pytest.approx(0.375))
    assert quantize(1.0, 0.25, 0.0, 1.0) == (3, pytest.approx(0.875))
    for y in (0.0, 0.2, 0.7, 1.0):
        assert quantize(y, 1.0, 0.0, 1.0) == (0, pytest.approx(0.5))


def test_quantize_rejects_outside_support():
    with pytest.raises(ValueError):
        quantize(1.2, 0.25, 0.0, 1.0)
    with pytest.raises(ValueError):
        quantize(-0.1, 0.25, 0.0, 1.0)


def test_bin_count_for_root_t_width():
    assert num_bins(1 / math.sqrt(10**6), 0.0, 1.0) == 1000
    assert num_bins((10**6) ** (-1 / 3), 0.0, 1.0) == 100
    assert num_bins((10**6) ** (-2 / 3), 0.0, 1.0) == 10000


def test_truncated_final_bin_center():
    c = bin_centers(0.3, 0.0, 1.0)
    assert c.tolist() == pytest.approx([0.15, 0.45, 0.75, 0.95])


@settings(max_examples=300)
@given(st.floats(0.0, 1.0), st.floats(1e-4, 1.0), st.floats(-5, 5), st.floats(0.1, 10))
def test_quantize_properties(u, delta, lo, width):
    hi = lo + width
    delta = delta * width
    y = lo + u * width
    b, c = quantize(y, delta, lo, hi)
    nb = num_bins(delta, lo, hi)
    assert 0 <= b < nb
    assert abs(y - c) <= delta / 2 + 1e-9 * width
    left = lo + b * delta
    assert left - 1e-9 * width <= c <= min(left + delta, hi) + 1e-9 * width


def test_bins_tile_the_support():
    c = bin_centers(0.07, 2.0, 3.0)
    left = 2.0 + 0.07 * np.arange(c.size)
    right = np.append(left[1:], 3.0)
    assert np.allclose((left + right) / 2, c)


# ------------------------------------------------------------------ CCB


def _drive(policy, env, stream, contexts):
    vals, _ = env.arm_value_table()
    arms = []
    for t in range(len(stream)):
        a = policy.select(contexts[t])
        policy.update(contexts[t], a, vals[a, stream.value_idx[t, a]])
        arms.append(a)
    return np.array(arms)


def test_ccb_single_bin_is_dcb_with_one_context():
    env = energy_harvesting_k4()
    s = draw_stream(env, 3000, replication_rng(11, 0))
    ccb = CCB.from_environment(env, delta=1.0, epsilon=0.01)
    assert ccb.num_bins == 1
    dcb = DCB([0.5], env.n_arms, env.reward_fn(), env.reward_ranges([0.5]), 0.01)
    a = _drive(ccb, env, s, s.contexts)
    b = _drive(dcb, env, s, np.zeros(len(s), dtype=int))
    assert np.array_equal(a, b)


def test_ccb_same_bin_same_decision():
    env = energy_harvesting_k4()
    ccb = CCB.from_environment(env, delta=0.1, epsilon=0.01)
    vals, _ = env.arm_value_table()
    s = draw_stream(env, 500, replication_rng(2, 0))
    _drive(ccb, env, s, s.contexts)
    for b in range(ccb.num_bins):
        lo = b * 0.1
        assert ccb.select(lo + 0.01) == ccb.select(lo + 0.09)


def test_ccb_rejects_out_of_support():
    ccb = CCB.from_environment(energy_harvesting_k4(), delta=0.1)
    with pytest.raises(ValueError):
        ccb.select(1.5)


# ------------------------------------------------------------- doubling


def test_phase_boundaries():
    assert [phase_of(t) for t in (1, 2)] == [1, 1]
    assert {phase_of(t) for t in range(3, 7)} == {2}
    assert {phase_of(t) for t in range(7, 15)} == {3}
    assert phase_of(15) == 4


def test_doubling_delta_schedule():
    assert doubling_delta(10, 0.5) == 2.0**-5 == 0.03125
    assert doubling_delta(7, 1.0) == 1.0


def test_doubling_restarts_inner_state():
    env = energy_harvesting_k4()
    pol = DoublingCCB.from_environment(env, alpha=0.5, epsilon=0.01)
    s = draw_stream(env, 30, replication_rng(0, 0))
    vals, _ = env.arm_value_table()
    starts = {1, 3, 7, 15, 31}
    for t in range(len(s)):
        y = s.contexts[t]
        a = pol.select(y)
        if t + 1 in starts:
            assert pol.trials_in_phase == 0
            assert pol.inner.inner.pull_counts.sum() == 0
            assert pol.phase == phase_of(t + 1)
            assert pol.inner.delta == pytest.approx(min(1.0, doubling_delta(pol.phase, 0.5)))
            # a fresh instance starts its initialization round at arm 0
            assert a == 0
        pol.update(y, a, vals[a, s.value_idx[t, a]])


# --------------------------------------------------- degeneration / engine


def test_dcb_reduces_to_ucb1_without_context():
    rng = np.random.default_rng(9)
    xs = (rng.random((4000, 3)) < np.array([0.6, 0.5, 0.65])).astype(float)
    dcb = DCB([0.0], 3, identity, [1.0], 0.05)
    ucb = UCB1(3, 0.05)
    for t in range(len(xs)):
        a, b = dcb.select(0), ucb.select()
        assert a == b
        dcb.update(0, a, xs[t, a])
        ucb.update(0, b, xs[t, b])


@pytest.mark.parametrize("preset,policy", [
    ("channel-k7", PolicyConfig("dcb", 0.01)),
    ("channel-k7", PolicyConfig("ucb1", 0.0)),
    ("channel-k7", PolicyConfig("multi-ucb", 0.0)),
    ("channel-k4", PolicyConfig("multi-ucb", 0.0, scale_confidence=True)),
    ("energy-harvesting-k4", PolicyConfig("ccb", 0.01, delta=0.05)),
    ("energy-harvesting-k4", PolicyConfig("ccb-doubling", 0.01, alpha=0.5)),
    ("energy-harvesting-k4", PolicyConfig("multi-ucb", 0.0, delta=0.1)),
])
def test_engine_matches_step_by_step_policies(preset, policy):
    env = get_preset(preset)
    s = draw_stream(env, 3000, replication_rng(21, 0))
    fast = simulate_arms(env, policy, s)
    if policy.type == "dcb":
        slow = _drive(DCB.from_environment(env, policy.eps), env, s, s.contexts)
    elif policy.type == "ucb1":
        slow = _drive(UCB1(env.n_arms, policy.eps), env, s, s.contexts)
    elif policy.type == "ccb":
        slow = _drive(CCB.from_environment(env, policy.delta, policy.eps), env, s, s.contexts)
    elif policy.type == "ccb-doubling":
        slow = _drive(DoublingCCB.from_environment(env, policy.alpha, policy.eps), env, s, s.contexts)
    else:
        if env.is_discrete:
            pts = env.context_points()
            ctx = s.contexts
        else:
            pts = bin_centers(policy.delta, 0.0, 1.0)
            ctx = quantize(s.contexts, policy.delta, 0.0, 1.0)[0]
        scales = env.reward_ranges(pts) if policy.scale_confidence else None
        pol = MultiUCB(len(pts), env.n_arms, scales=scales)
        vals, _ = env.arm_value_table()
        ys = env.context_points()[s.contexts] if env.is_discrete else s.contexts
        slow = []
        for t in range(len(s)):
            a = pol.select(ctx[t])
            pol.update_reward(ctx[t], a, float(env.g(ys[t], vals[a, s.value_idx[t, a]])))
            slow.append(a)
        slow = np.array(slow)
    assert np.array_equal(fast, slow)
