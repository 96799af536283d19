"""Monte Carlo runner: seeded replications, pseudo-regret traces, pull statistics."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as kern
from .config import ExperimentConfig, PolicyConfig
from .environments import Environment, Stream, compute_genie, draw_stream
from .policies import bin_centers, doubling_delta, quantize

log = logging.getLogger(__name__)

CHECKPOINTS_PER_DECADE = 8


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent counter-based stream for replication ``rep``; order of use is irrelevant."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(rep,))))


def default_checkpoints(horizon: int) -> np.ndarray:
    """Powers of ``10**(1/8)`` up to the horizon, plus the horizon."""
    k_max = int(math.floor(CHECKPOINTS_PER_DECADE * math.log10(horizon) + 1e-9))
    pts = {int(round(10 ** (k / CHECKPOINTS_PER_DECADE))) for k in range(k_max + 1)}
    pts.add(horizon)
    return np.array(sorted(p for p in pts if 1 <= p <= horizon), dtype=np.int64)


# ---------------------------------------------------------------- engine


def _reward_table(env: Environment, points: np.ndarray) -> np.ndarray:
    """``gtab[j, v, i] = g(points_i, value_{j,v})`` built with the policy's own reward call."""
    vals, _ = env.arm_value_table()
    fn = env.reward_fn()
    k, nv = vals.shape
    gtab = np.empty((k, nv, points.size))
    for j in range(k):
        for v in range(nv):
            gtab[j, v] = np.asarray(fn(points, vals[j, v]), dtype=float)
    return gtab


def _run_dcb_on(env: Environment, points: np.ndarray, ctx: np.ndarray, vidx: np.ndarray, eps: float) -> np.ndarray:
    gtab = _reward_table(env, points)
    ranges = np.asarray(env.reward_ranges(points), dtype=float)
    theta = np.zeros((env.n_arms, points.size))
    counts = np.zeros(env.n_arms, dtype=np.int64)
    return kern.run_dcb(ctx, vidx, gtab, ranges, eps, theta, counts, 0)


def _observed_rewards(env: Environment, stream: Stream) -> np.ndarray:
    """``g(y_t, x_{t,j})`` for every trial and arm, as a context-agnostic learner would receive it."""
    vals, _ = env.arm_value_table()
    x = vals[np.arange(env.n_arms)[None, :], stream.value_idx]
    if env.is_discrete:
        pts = env.context_points()
        if env.reward.kind == "custom-table":
            return env.g(stream.contexts[:, None], x)
        return np.asarray(env.reward_fn()(pts[stream.contexts][:, None], x), dtype=float)
    return np.asarray(env.g(stream.contexts[:, None], x), dtype=float)


def simulate_arms(env: Environment, policy: PolicyConfig, stream: Stream) -> np.ndarray:
    """Arm (0-based) chosen at every trial of ``stream`` by ``policy``."""
    t = policy.type
    eps = policy.eps
    vals, _ = env.arm_value_table()
    if t == "ucb1":
        return kern.run_ucb1(stream.value_idx, vals, eps, np.zeros(env.n_arms),
                             np.zeros(env.n_arms, dtype=np.int64), 0)
    if t == "genie":
        if env.is_discrete:
            return compute_genie(env).h_star[stream.contexts].astype(np.int64)
        return np.argmax(env.expected_rewards(stream.contexts), axis=1).astype(np.int64)
    if env.is_discrete:
        if t == "dcb":
            return _run_dcb_on(env, env.context_points(), stream.contexts, stream.value_idx, eps)
        if t == "multi-ucb":
            m = env.contexts.size
            scales = env.reward_ranges(env.context_points()) if policy.scale_confidence else np.ones(m)
            return kern.run_multi_ucb(stream.contexts, _observed_rewards(env, stream), scales, eps,
                                      np.zeros((m, env.n_arms)), np.zeros((m, env.n_arms), dtype=np.int64),
                                      np.zeros(m, dtype=np.int64))
        raise ValueError(f"policy {t!r} does not apply to a discrete environment")
    lo, hi = env.contexts.lo, env.contexts.hi
    if t == "ccb":
        delta = min(policy.delta, hi - lo)
        bins, _ = quantize(stream.contexts, delta, lo, hi)
        return _run_dcb_on(env, bin_centers(delta, lo, hi), bins, stream.value_idx, eps)
    if t == "multi-ucb":
        delta = min(policy.delta, hi - lo)
        centers = bin_centers(delta, lo, hi)
        bins, _ = quantize(stream.contexts, delta, lo, hi)
        m = centers.size
        scales = env.reward_ranges(centers) if policy.scale_confidence else np.ones(m)
        return kern.run_multi_ucb(bins, _observed_rewards(env, stream), scales, eps,
                                  np.zeros((m, env.n_arms)), np.zeros((m, env.n_arms), dtype=np.int64),
                                  np.zeros(m, dtype=np.int64))
    if t == "ccb-doubling":
        arms = np.empty(len(stream), dtype=np.int64)
        start, phase = 0, 1
        while start < len(stream):
            stop = min(start + 2**phase, len(stream))
            delta = min(doubling_delta(phase, policy.alpha), hi - lo)
            bins, _ = quantize(stream.contexts[start:stop], delta, lo, hi)
            arms[start:stop] = _run_dcb_on(env, bin_centers(delta, lo, hi), bins,
                                           stream.value_idx[start:stop], eps)
            start, phase = stop, phase + 1
        return arms
    raise ValueError(f"policy {t!r} does not apply to a continuous environment")


def expected_reward_matrix(env: Environment, stream: Stream) -> np.ndarray:
    """``(T, K)`` expected reward of each arm given each trial's context."""
    if env.is_discrete:
        return compute_genie(env).theta[stream.contexts]
    return env.expected_rewards(stream.contexts)


def pseudo_regret_steps(env: Environment, stream: Stream, arms: np.ndarray) -> np.ndarray:
    """Per-trial expected gap between the genie arm and the pulled arm."""
    mu = expected_reward_matrix(env, stream)
    return mu.max(axis=1) - mu[np.arange(len(arms)), arms]


# ----------------------------------------------------------------- trace


@dataclass
class Replication:
    regret: np.ndarray  # (C,) cumulative pseudo-regret at checkpoints
    pulls: np.ndarray  # (C, K) cumulative pulls per arm
    nonopt_pulls: np.ndarray | None  # (C, K) cumulative pulls outside the arm's optimal contexts


@dataclass
class RegretTrace:
    horizon: int
    checkpoints: np.ndarray
    regret: np.ndarray  # (R, C)
    pulls: np.ndarray  # (R, C, K)
    nonopt_pulls: np.ndarray | None  # (R, C, K)
    label: str = ""

    @property
    def replications(self) -> int:
        return self.regret.shape[0]

    @property
    def n_arms(self) -> int:
        return self.pulls.shape[2]

    @property
    def mean_regret(self) -> np.ndarray:
        return _fsum_mean(self.regret)

    @property
    def stderr(self) -> np.ndarray:
        return _stderr(self.regret)

    @property
    def mean_pulls(self) -> np.ndarray:
        return _fsum_mean(self.pulls.astype(float))

    @property
    def pulls_stderr(self) -> np.ndarray:
        return _stderr(self.pulls.astype(float))

    @property
    def mean_nonopt_pulls(self) -> np.ndarray | None:
        return None if self.nonopt_pulls is None else _fsum_mean(self.nonopt_pulls.astype(float))

    def at(self, n: int) -> int:
        """Column of checkpoint ``n``."""
        hits = np.flatnonzero(self.checkpoints == n)
        if hits.size == 0:
            raise KeyError(f"{n} is not a checkpoint")
        return int(hits[0])

    def regret_at(self, n: int) -> float:
        return float(self.mean_regret[self.at(n)])

    def to_rows(self) -> list[list]:
        mp = self.mean_pulls
        return [[int(c), float(self.mean_regret[i]), float(self.stderr[i]), *map(float, mp[i])]
                for i, c in enumerate(self.checkpoints)]

    def csv_header(self) -> list[str]:
        return ["trial", "mean_regret", "stderr"] + [f"pulls_arm{j + 1}" for j in range(self.n_arms)]


def _fsum_mean(a: np.ndarray) -> np.ndarray:
    # exactly rounded sums: the mean does not depend on replication order
    flat = a.reshape(a.shape[0], -1)
    out = np.array([math.fsum(flat[:, c]) for c in range(flat.shape[1])]) / a.shape[0]
    return out.reshape(a.shape[1:])


def _stderr(a: np.ndarray) -> np.ndarray:
    r = a.shape[0]
    if r < 2:
        return np.zeros(a.shape[1:])
    mean = _fsum_mean(a)
    flat = (a - mean).reshape(r, -1) ** 2
    var = np.array([math.fsum(flat[:, c]) for c in range(flat.shape[1])]) / (r - 1)
    return np.sqrt(var / r).reshape(a.shape[1:])


def _cumulative_at(arms: np.ndarray, mask: np.ndarray | None, checkpoints: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((checkpoints.size, k), dtype=np.int64)
    acc = np.zeros(k, dtype=np.int64)
    prev = 0
    for c, cp in enumerate(checkpoints):
        seg = arms[prev:cp] if mask is None else arms[prev:cp][mask[prev:cp]]
        acc += np.bincount(seg, minlength=k)
        out[c] = acc
        prev = cp
    return out


def run_replication(env: Environment, policy: PolicyConfig, horizon: int, checkpoints: np.ndarray,
                    rng: np.random.Generator) -> Replication:
    stream = draw_stream(env, horizon, rng)
    arms = simulate_arms(env, policy, stream)
    steps = pseudo_regret_steps(env, stream, arms)
    regret = np.cumsum(steps)[checkpoints - 1]
    pulls = _cumulative_at(arms, None, checkpoints, env.n_arms)
    nonopt = None
    if env.is_discrete:
        h_star = compute_genie(env).h_star
        nonopt = _cumulative_at(arms, arms != h_star[stream.contexts], checkpoints, env.n_arms)
    return Replication(regret, pulls, nonopt)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> RegretTrace:
    """Simulate every replication and aggregate at the checkpoints.

    The result depends only on (seed, config): each replication draws from
    its own seed-derived stream and aggregation is order independent.
    """
    config.check()
    env = config.env()
    horizon = config.horizon
    if config.checkpoints is not None:
        cps = np.array(sorted(set(config.checkpoints)), dtype=np.int64)
    else:
        cps = default_checkpoints(horizon)
    workers = workers or min(config.replications, os.cpu_count() or 1)

    def one(rep: int) -> Replication:
        log.debug("%s: replication %d", config.name, rep)
        return run_replication(env, config.policy, horizon, cps, replication_rng(config.seed, rep))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            reps = list(pool.map(one, range(config.replications)))
    else:
        reps = [one(r) for r in range(config.replications)]
    nonopt = None if reps[0].nonopt_pulls is None else np.stack([r.nonopt_pulls for r in reps])
    return RegretTrace(
        horizon=horizon,
        checkpoints=cps,
        regret=np.stack([r.regret for r in reps]),
        pulls=np.stack([r.pulls for r in reps]),
        nonopt_pulls=nonopt,
        label=config.policy.label(),
    )
