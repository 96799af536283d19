"""Empirical checks of the DCB regret guarantees and the UCB1(eps) concentration bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as kern
from .environments import GenieTables
from .experiments import RegretTrace, replication_rng

SIGMA_SLACK = 3.0


@dataclass
class BoundReport:
    """Observed quantity against a theoretical upper bound.

    ``satisfied`` is ``observed <= bound + slack``; ``slack`` is the
    statistical allowance (zero for deterministic comparisons).
    """

    name: str
    bound: float
    observed: float
    slack: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return bool(self.observed <= self.bound + self.slack)

    def to_dict(self) -> dict:
        return {"name": self.name, "bound": self.bound, "observed": self.observed, "slack": self.slack,
                "satisfied": self.satisfied, **({"details": self.details} if self.details else {})}

    def __str__(self) -> str:
        flag = "PASS" if self.satisfied else "FAIL"
        s = f"[{flag}] {self.name}: observed {self.observed:.6g} <= bound {self.bound:.6g}"
        if self.slack:
            s += f" (+ slack {self.slack:.3g})"
        return s


def theorem1_rhs(min_gap: float, epsilon: float, n: int) -> float:
    """Expected-pull bound ``4 (2 + eps) ln n / gap^2 + 1 + pi^2 / 3`` for a never-optimal arm."""
    return 4 * (2 + epsilon) * math.log(n) / min_gap**2 + 1 + math.pi**2 / 3


def evaluate_theorem1_bound(genie: GenieTables, epsilon: float, n: int, arm: int,
                            observed: float = float("nan"), observed_stderr: float = 0.0) -> BoundReport:
    """Bound on ``E[T_j(n)]`` for a non-optimal arm (0-based ``arm``)."""
    if arm not in genie.non_optimal_set:
        raise ValueError(f"arm {arm + 1} is optimal for some context; the pull bound applies to never-optimal arms")
    gap = genie.min_gap(arm)
    # The published RHS leaves out the G_i factor of the DCB confidence radius.  Keeping it,
    # the proof's exploration length becomes max_i (G_i / gap_i)^2 in place of 1 / min gap^2.
    gi = genie.reward_ranges / genie.gaps[:, arm]
    scaled_gap = float(1.0 / np.max(gi))
    return BoundReport(
        name=f"theorem1 arm {arm + 1} n={n}",
        bound=theorem1_rhs(gap, epsilon, n),
        observed=observed,
        slack=SIGMA_SLACK * observed_stderr,
        details={"min_gap": gap, "range_scaled_bound": theorem1_rhs(scaled_gap, epsilon, n)},
    )


def theorem1_reports(trace: RegretTrace, genie: GenieTables, epsilon: float,
                     ns: Sequence[int] | None = None) -> list[BoundReport]:
    """One report per (non-optimal arm, checkpoint) using the trace's mean pulls."""
    ns = list(trace.checkpoints) if ns is None else list(ns)
    mp, se = trace.mean_pulls, trace.pulls_stderr
    out = []
    for n in ns:
        c = trace.at(n)
        for j in genie.non_optimal_set:
            out.append(evaluate_theorem1_bound(genie, epsilon, int(n), j, float(mp[c, j]), float(se[c, j])))
    return out


def theorem3_coefficient(genie: GenieTables, epsilon: float) -> float:
    """Leading ``ln n`` coefficient ``4 (2 + eps) D_max |non-optimal| / D_o^2``."""
    return 4 * (2 + epsilon) * genie.delta_max * len(genie.non_optimal_set) / genie.delta_o**2


def _slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def tail_points(trace: RegretTrace) -> np.ndarray:
    return np.flatnonzero(trace.checkpoints >= trace.horizon / 10)


def evaluate_theorem3_slope(trace: RegretTrace, genie: GenieTables, epsilon: float) -> BoundReport:
    """Least-squares slope of mean regret against ``ln n`` over ``[T/10, T]``.

    ``details`` carries the slopes over the two halves of the window and the
    fit residual, for stability and linearity diagnostics.
    """
    idx = tail_points(trace)
    if idx.size < 3:
        raise ValueError(f"need at least 3 checkpoints in [T/10, T], got {idx.size}")
    x = np.log(trace.checkpoints[idx].astype(float))
    y = trace.mean_regret[idx]
    slope, rms = _slope(x, y)
    half = idx.size // 2
    first, _ = _slope(x[: half + 1], y[: half + 1])
    second, _ = _slope(x[half:], y[half:])
    return BoundReport(
        name="theorem3 tail slope",
        bound=theorem3_coefficient(genie, epsilon),
        observed=slope,
        details={"first_half_slope": first, "second_half_slope": second, "rms_residual": rms,
                 "delta_o": genie.delta_o, "delta_max": genie.delta_max,
                 "n_non_optimal": len(genie.non_optimal_set)},
    )


def compute_n_o(p_o: float, delta_o: float, epsilon: float, n_arms: int, n_max: int = 10**12) -> int:
    """Smallest ``n`` with ``floor(p_o n / 2K) > ceil(4 (2 + eps) ln n / delta_o^2)``."""
    if not 0 < p_o <= 1 or not delta_o > 0 or epsilon < 0:
        raise ValueError("need p_o in (0, 1], delta_o > 0, epsilon >= 0")
    coef = 4 * (2 + epsilon) / delta_o**2
    start, chunk = 1, 1 << 16
    while start <= n_max:
        n = np.arange(start, start + chunk, dtype=np.float64)
        lhs = np.floor(p_o * n / (2 * n_arms))
        rhs = np.ceil(coef * np.log(n))
        hit = np.flatnonzero(lhs > rhs)
        if hit.size:
            return int(start + hit[0])
        start += chunk
        chunk = min(chunk * 2, 1 << 24)
    raise ValueError(f"no n <= {n_max} satisfies the threshold")


def lemma1_bound(n_arms: int, epsilon: float, n: int) -> float:
    return 2 * n_arms ** (4 + 2 * epsilon) / n ** (2 + 2 * epsilon)


def lemma1_condition(n_arms: int, arm_means: Sequence[float], epsilon: float, n: int) -> bool:
    """``floor(n / K) > 4 (2 + eps) ln n / min gap^2``."""
    means = sorted(arm_means, reverse=True)
    gap = means[0] - means[1]
    return n // n_arms > 4 * (2 + epsilon) * math.log(n) / gap**2


def verify_lemma1(n_arms: int, arm_means: Sequence[float], epsilon: float, n_grid: Sequence[int],
                  replications: int, seed: int = 0) -> list[BoundReport]:
    """Frequency of ``T*(n) < n/K`` for UCB1(eps) on Bernoulli arms vs. the high-probability bound.

    Every grid point must satisfy the lemma's precondition; offending points
    raise ValueError.
    """
    means = np.asarray(arm_means, dtype=float)
    if means.size != n_arms:
        raise ValueError(f"expected {n_arms} arm means, got {means.size}")
    if np.any(means < 0) or np.any(means > 1):
        raise ValueError("Bernoulli means must lie in [0, 1]")
    if len(set(means)) < 2 or np.sum(means == means.max()) > 1:
        raise ValueError("need a unique best arm")
    bad = [n for n in n_grid if not lemma1_condition(n_arms, means, epsilon, n)]
    if bad:
        raise ValueError(f"grid points {bad} violate floor(n/K) > 4(2+eps) ln n / gap^2")
    grid = np.array(sorted(set(int(n) for n in n_grid)), dtype=np.int64)
    n_max = int(grid[-1])
    hits = np.zeros(grid.size, dtype=np.int64)
    for r in range(replications):
        u = replication_rng(seed, r).random((n_max, n_arms))
        t_star = kern.ucb1_optimal_pulls(u, means, float(epsilon), grid)
        hits += t_star < grid / n_arms
    reports = []
    for c, n in enumerate(grid):
        f = hits[c] / replications
        se = math.sqrt(f * (1 - f) / replications)
        reports.append(BoundReport(
            name=f"lemma1 K={n_arms} eps={epsilon:g} n={n}",
            bound=lemma1_bound(n_arms, epsilon, int(n)),
            observed=f,
            slack=SIGMA_SLACK * se,
            details={"replications": replications, "events": int(hits[c])},
        ))
    return reports


def theorem2_flatness(trace: RegretTrace, genie: GenieTables, threshold: float = 2.0) -> list[BoundReport]:
    """Growth of mean non-optimal pulls of each optimal arm over the last decade ``[T/10, T]``.

    Uses the largest checkpoint not exceeding ``T/10`` as the window start.
    """
    if trace.nonopt_pulls is None:
        raise ValueError("trace has no non-optimal pull counts (continuous environment?)")
    early = trace.checkpoints[trace.checkpoints <= trace.horizon // 10]
    if early.size == 0:
        raise ValueError("no checkpoint at or below T/10")
    c0, c1 = trace.at(int(early[-1])), trace.at(trace.horizon)
    mn = trace.mean_nonopt_pulls
    return [
        BoundReport(
            name=f"theorem2 arm {j + 1} nonopt growth {int(early[-1])}->{trace.horizon}",
            bound=threshold,
            observed=float(mn[c1, j] - mn[c0, j]),
            details={"nonopt_at_end": float(mn[c1, j])},
        )
        for j in genie.optimal_set
    ]
