"""Index policies for stochastic contextual bandits with a known reward function.

Every policy follows the same cycle::

    arm = policy.select(context)
    policy.update(context, arm, x)   # x: observed state of the pulled arm

Arms and discrete contexts are 0-based.  ``DCB`` and ``CCB`` exploit the
known ``g(y, x)``: one observed state updates the estimate of the pulled arm
for *every* context.  ``UCB1`` ignores contexts, ``MultiUCB`` runs one
independent UCB1 per context.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from . import _kernels as kern

RewardFn = Callable[[np.ndarray, float], np.ndarray]


def dcb_index(theta_row, reward_range: float, counts, n: int, epsilon: float) -> np.ndarray:
    """Per-arm DCB index ``theta + G sqrt((2 + eps) ln n / m)`` for one context."""
    counts = np.asarray(counts, dtype=float)
    return np.asarray(theta_row, dtype=float) + reward_range * np.sqrt((2.0 + epsilon) * math.log(n) / counts)


def ucb_index(means, counts, n: int, epsilon: float = 0.0) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    return np.asarray(means, dtype=float) + np.sqrt((2.0 + epsilon) * math.log(n) / counts)


class DCB:
    """Discrete contextual bandit policy DCB(eps).

    Keeps an ``M x K`` table of reward estimates and a pull count per arm.
    The first ``K`` selections pull arms ``0..K-1`` in order; afterwards the
    arm maximizing ``theta[i, j] + G_i sqrt((2 + eps) ln n / m_j)`` is pulled,
    where ``n`` is the index of the current trial.

    Args:
        context_points: the ``M`` context values ``g`` is evaluated at.
        n_arms: number of arms ``K``.
        reward_fn: ``reward_fn(context_points, x)`` -> length-``M`` rewards.
        reward_ranges: ``G_i = sup_x g(y_i, x) - inf_x g(y_i, x)``.
        epsilon: strictly positive exploration slack.
    """

    def __init__(
        self,
        context_points: Sequence[float],
        n_arms: int,
        reward_fn: RewardFn,
        reward_ranges: Sequence[float],
        epsilon: float = 0.01,
    ):
        if not epsilon > 0:
            raise ValueError(f"DCB needs epsilon > 0, got {epsilon}")
        if n_arms < 1:
            raise ValueError("need at least one arm")
        self.context_points = np.asarray(context_points, dtype=float)
        if self.context_points.ndim != 1 or self.context_points.size < 1:
            raise ValueError("need at least one context")
        self.reward_ranges = np.asarray(reward_ranges, dtype=float)
        if self.reward_ranges.shape != self.context_points.shape:
            raise ValueError("one reward range per context")
        self.n_arms = int(n_arms)
        self.reward_fn = reward_fn
        self.epsilon = float(epsilon)
        self._theta = np.zeros((self.n_arms, self.context_points.size))
        self.pull_counts = np.zeros(self.n_arms, dtype=np.int64)
        self.trial = 0

    @classmethod
    def from_environment(cls, env, epsilon: float = 0.01) -> DCB:
        if not env.is_discrete:
            raise ValueError("DCB needs a discrete context space; use CCB")
        pts = env.context_points()
        return cls(pts, env.n_arms, env.reward_fn(), env.reward_ranges(pts), epsilon)

    @property
    def n_contexts(self) -> int:
        return self.context_points.size

    @property
    def theta_hat(self) -> np.ndarray:
        """``(M, K)`` view of the estimates."""
        return self._theta.T

    def select(self, context: int) -> int:
        i = self._check_context(context)
        return int(
            kern.dcb_argmax(self._theta, self.pull_counts, self.trial + 1, i, self.reward_ranges[i], self.epsilon)
        )

    def update(self, context, arm: int, x: float) -> None:
        # the context plays no role: the state x updates every row
        self._check_arm(arm)
        gcol = np.asarray(self.reward_fn(self.context_points, x), dtype=float)
        kern.dcb_update(self._theta, self.pull_counts, arm, gcol)
        self.trial += 1

    def indices(self, context: int) -> np.ndarray:
        i = self._check_context(context)
        return dcb_index(self._theta[:, i], self.reward_ranges[i], self.pull_counts, self.trial + 1, self.epsilon)

    def _check_context(self, context) -> int:
        i = int(context)
        if not 0 <= i < self.n_contexts:
            raise IndexError(f"context index {context} out of range [0, {self.n_contexts})")
        return i

    def _check_arm(self, arm: int) -> None:
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range [0, {self.n_arms})")


class UCB1:
    """UCB1(eps) on raw arm states; ``epsilon=0`` is classical UCB1."""

    def __init__(self, n_arms: int, epsilon: float = 0.0):
        if n_arms < 1:
            raise ValueError("need at least one arm")
        if epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        self.n_arms = int(n_arms)
        self.epsilon = float(epsilon)
        self.value_means = np.zeros(self.n_arms)
        self.pull_counts = np.zeros(self.n_arms, dtype=np.int64)
        self.trial = 0

    def select(self, context=None) -> int:
        return int(kern.ucb_argmax(self.value_means, self.pull_counts, self.trial + 1, self.epsilon))

    def update(self, context, arm: int, x: float) -> None:
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range")
        kern.mean_update(self.value_means, self.pull_counts, arm, float(x))
        self.trial += 1


class MultiUCB:
    """One UCB1 instance per context on the observed rewards ``g(y_i, x)``.

    The confidence radius is ``sqrt(2 ln n_i / m_ik)`` with ``n_i`` the
    number of occurrences of context ``i`` so far (current one included).
    ``scales`` optionally multiplies the radius per context, e.g. by ``G_i``.
    """

    def __init__(
        self,
        n_contexts: int,
        n_arms: int,
        reward_fn: RewardFn | None = None,
        context_points: Sequence[float] | None = None,
        epsilon: float = 0.0,
        scales: Sequence[float] | None = None,
    ):
        if n_arms < 1 or n_contexts < 1:
            raise ValueError("need at least one arm and one context")
        self.n_contexts = int(n_contexts)
        self.n_arms = int(n_arms)
        self.reward_fn = reward_fn
        self.context_points = None if context_points is None else np.asarray(context_points, dtype=float)
        self.epsilon = float(epsilon)
        self.scales = np.ones(self.n_contexts) if scales is None else np.asarray(scales, dtype=float)
        self.reward_means = np.zeros((self.n_contexts, self.n_arms))
        self.per_context_pulls = np.zeros((self.n_contexts, self.n_arms), dtype=np.int64)
        self.context_counts = np.zeros(self.n_contexts, dtype=np.int64)

    @property
    def trial(self) -> int:
        return int(self.context_counts.sum())

    def select(self, context: int) -> int:
        i = self._check_context(context)
        row = self.per_context_pulls[i]
        if (row == 0).any():
            return int(np.argmax(row == 0))
        n_i = self.context_counts[i] + 1
        c = (2.0 + self.epsilon) * math.log(n_i)
        idx = self.reward_means[i] + self.scales[i] * np.sqrt(c / row)
        return int(np.argmax(idx))

    def update(self, context: int, arm: int, x: float) -> None:
        if self.reward_fn is None or self.context_points is None:
            raise TypeError("update() from an arm state needs reward_fn and context_points; use update_reward()")
        i = self._check_context(context)
        r = float(np.asarray(self.reward_fn(self.context_points[i : i + 1], x))[0])
        self.update_reward(i, arm, r)

    def update_reward(self, context: int, arm: int, reward: float) -> None:
        i = self._check_context(context)
        if not 0 <= arm < self.n_arms:
            raise IndexError(f"arm {arm} out of range")
        m = self.per_context_pulls[i, arm]
        self.reward_means[i, arm] = (self.reward_means[i, arm] * m + reward) / (m + 1)
        self.per_context_pulls[i, arm] = m + 1
        self.context_counts[i] += 1

    def _check_context(self, context) -> int:
        i = int(context)
        if not 0 <= i < self.n_contexts:
            raise IndexError(f"context index {context} out of range [0, {self.n_contexts})")
        return i


# ------------------------------------------------------------ quantization


def num_bins(delta: float, lo: float, hi: float) -> int:
    if not delta > 0:
        raise ValueError("delta must be positive")
    # round first so that e.g. 1/0.001 does not become 1001 bins
    return max(1, math.ceil(round((hi - lo) / delta, 9)))


def bin_centers(delta: float, lo: float, hi: float) -> np.ndarray:
    """Midpoints of the width-``delta`` bins tiling ``[lo, hi]``; the last bin may be truncated."""
    nb = num_bins(delta, lo, hi)
    left = lo + delta * np.arange(nb)
    right = np.minimum(left + delta, hi)
    right[-1] = hi
    return (left + right) / 2


def quantize(y, delta: float, lo: float, hi: float):
    """Bin index and bin center of context value(s) ``y`` in ``[lo, hi]``."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < lo) or np.any(y_arr > hi):
        raise ValueError(f"context outside support [{lo}, {hi}]")
    nb = num_bins(delta, lo, hi)
    b = np.minimum(np.floor((y_arr - lo) / delta).astype(np.int64), nb - 1)
    centers = bin_centers(delta, lo, hi)[b]
    if np.ndim(y) == 0:
        return int(b), float(centers)
    return b, centers


class CCB:
    """Continuous-context policy CCB(eps, delta): DCB(eps) on uniformly quantized contexts."""

    def __init__(self, lo: float, hi: float, n_arms: int, reward_fn: RewardFn, reward_range_fn, delta: float,
                 epsilon: float = 0.01):
        if not 0 < delta:
            raise ValueError("delta must be positive")
        self.lo, self.hi = float(lo), float(hi)
        self.delta = min(float(delta), self.hi - self.lo)
        self.centers = bin_centers(self.delta, self.lo, self.hi)
        self.inner = DCB(self.centers, n_arms, reward_fn, reward_range_fn(self.centers), epsilon)

    @classmethod
    def from_environment(cls, env, delta: float, epsilon: float = 0.01) -> CCB:
        if env.is_discrete:
            raise ValueError("CCB needs a continuous context space")
        c = env.contexts
        return cls(c.lo, c.hi, env.n_arms, env.reward_fn(), env.reward_ranges, delta, epsilon)

    @property
    def num_bins(self) -> int:
        return self.centers.size

    def bin_of(self, y: float) -> int:
        return quantize(y, self.delta, self.lo, self.hi)[0]

    def select(self, y: float) -> int:
        return self.inner.select(self.bin_of(y))

    def update(self, y: float, arm: int, x: float) -> None:
        self.bin_of(y)  # range check
        self.inner.update(None, arm, x)


def doubling_delta(phase: int, alpha: float) -> float:
    """Quantization width for a phase of ``2**phase`` trials: ``(2**phase) ** (alpha - 1)``."""
    return float(2.0 ** (phase * (alpha - 1.0)))


def phase_of(trial: int) -> int:
    """Phase (1-based) containing 1-based ``trial``; phase m covers ``2**m`` trials."""
    if trial < 1:
        raise ValueError("trials are 1-based")
    m = 1
    end = 2
    while trial > end:
        m += 1
        end += 2**m
    return m


class DoublingCCB:
    """CCB for an unknown horizon: phase m runs a fresh CCB tuned to ``2**m`` trials.

    Nothing learned in one phase is carried into the next.
    """

    def __init__(self, lo: float, hi: float, n_arms: int, reward_fn: RewardFn, reward_range_fn,
                 alpha: float = 0.5, epsilon: float = 0.01):
        if not 0 <= alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        self._args = (float(lo), float(hi), int(n_arms), reward_fn, reward_range_fn)
        self.alpha = float(alpha)
        self.epsilon = float(epsilon)
        self.phase = 1
        self.trials_in_phase = 0
        self.inner = self._build(1)

    @classmethod
    def from_environment(cls, env, alpha: float = 0.5, epsilon: float = 0.01) -> DoublingCCB:
        if env.is_discrete:
            raise ValueError("CCB needs a continuous context space")
        c = env.contexts
        return cls(c.lo, c.hi, env.n_arms, env.reward_fn(), env.reward_ranges, alpha, epsilon)

    def _build(self, phase: int) -> CCB:
        lo, hi, k, g, gr = self._args
        return CCB(lo, hi, k, g, gr, doubling_delta(phase, self.alpha), self.epsilon)

    def select(self, y: float) -> int:
        if self.trials_in_phase == 2**self.phase:
            self.phase += 1
            self.trials_in_phase = 0
            self.inner = self._build(self.phase)
        return self.inner.select(y)

    def update(self, y: float, arm: int, x: float) -> None:
        self.inner.update(y, arm, x)
        self.trials_in_phase += 1
