"""Stochastic contextual environments, reward functions and the genie oracle.

An environment is a context law, one finite discrete value law per arm and a
known reward function ``g(y, x)``.  The genie knows all of it and plays the
arm maximizing ``E[g(y, X_j)]`` for every context.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

PROB_TOL = 1e-9


def reward_min(y, x):
    """Bits delivered when ``y`` bits are queued on a channel of capacity ``x``."""
    return np.minimum(y, x)


def reward_log(p, x):
    """Rate of a channel with gain-to-noise ``x`` at transmit power ``p`` (natural log)."""
    return np.log1p(np.multiply(p, x))


def reward_identity(y, x):
    # context-free reward: the standard MAB case
    return np.zeros(np.broadcast(y, x).shape) + x


REWARD_FUNCTIONS: dict[str, Callable] = {
    "min-capacity": reward_min,
    "log-power": reward_log,
    "identity": reward_identity,
}


@dataclass(frozen=True)
class ArmSpec:
    """Finite discrete law of one arm's state."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) == 0 or len(self.values) != len(self.probs):
            raise ValueError("arm needs matching, non-empty values and probs")
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError(f"arm probabilities must lie in [0, 1], got {self.probs}")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"arm probabilities sum to {p.sum()}, not 1")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("arm values must be finite")

    @classmethod
    def scaled_bernoulli(cls, value: float, prob: float) -> ArmSpec:
        """``value`` with probability ``prob``, else 0."""
        return cls((0.0, float(value)), (1.0 - prob, float(prob)))

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    @property
    def lo(self) -> float:
        return float(min(self.values))

    @property
    def hi(self) -> float:
        return float(max(self.values))


@dataclass(frozen=True)
class ContextSpec:
    """Either a finite context set with probabilities or a uniform interval."""

    kind: str
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind == "discrete":
            if len(self.values) == 0 or len(self.values) != len(self.probs):
                raise ValueError("discrete contexts need matching, non-empty values and probs")
            p = np.asarray(self.probs, dtype=float)
            if np.any(p <= 0):
                raise ValueError("every context must have positive probability")
            if abs(p.sum() - 1.0) > PROB_TOL:
                raise ValueError(f"context probabilities sum to {p.sum()}, not 1")
        elif self.kind == "uniform":
            if not self.lo < self.hi:
                raise ValueError(f"need lo < hi, got ({self.lo}, {self.hi})")
        else:
            raise ValueError(f"unknown context kind {self.kind!r}")

    @classmethod
    def discrete_uniform(cls, values: Sequence[float]) -> ContextSpec:
        m = len(values)
        return cls("discrete", tuple(float(v) for v in values), (1.0 / m,) * m)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> ContextSpec:
        return cls("uniform", lo=float(lo), hi=float(hi))

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def size(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class RewardSpec:
    """Known reward function ``g(y, x)`` with its sup-norm bound and Lipschitz constant.

    ``kind="custom-table"`` takes a full ``(M, V)`` table over discrete contexts
    and the sorted union of arm values; only valid with discrete contexts.
    """

    kind: str
    bound: float
    lipschitz: float = 0.0
    table: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in REWARD_FUNCTIONS and self.kind != "custom-table":
            raise ValueError(f"unknown reward kind {self.kind!r}")
        if self.kind == "custom-table" and self.table is None:
            raise ValueError("custom-table reward needs a table")
        if self.bound <= 0:
            raise ValueError("reward bound must be positive")
        if self.lipschitz < 0:
            raise ValueError("Lipschitz constant must be nonnegative")


@dataclass(frozen=True)
class GenieTables:
    theta: np.ndarray  # (M, K) expected reward
    h_star: np.ndarray  # (M,) optimal arm per context, 0-based
    gaps: np.ndarray  # (M, K)
    optimal_set: tuple[int, ...]
    non_optimal_set: tuple[int, ...]
    delta_o: float
    delta_max: float
    p_o: float
    q: np.ndarray  # (K,) context mass on which each arm is optimal
    reward_ranges: np.ndarray  # (M,) G_i

    @property
    def best(self) -> np.ndarray:
        return self.theta[np.arange(self.theta.shape[0]), self.h_star]

    def min_gap(self, arm: int) -> float:
        return float(self.gaps[:, arm].min())


@dataclass(frozen=True)
class Environment:
    name: str
    contexts: ContextSpec
    arms: tuple[ArmSpec, ...]
    reward: RewardSpec
    _value_union: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.arms) == 0:
            raise ValueError("environment needs at least one arm")
        if self.reward.kind == "custom-table":
            if not self.contexts.is_discrete:
                raise ValueError("custom-table rewards need discrete contexts")
            tab = np.asarray(self.reward.table, dtype=float)
            union = np.unique(np.concatenate([a.values for a in self.arms]))
            if tab.shape != (self.contexts.size, union.size):
                raise ValueError(f"reward table must be {self.contexts.size}x{union.size}, got {tab.shape}")
        object.__setattr__(
            self, "_value_union", np.unique(np.concatenate([np.asarray(a.values, float) for a in self.arms]))
        )

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def is_discrete(self) -> bool:
        return self.contexts.is_discrete

    @property
    def value_support(self) -> np.ndarray:
        """Sorted union of every arm's possible states."""
        return self._value_union

    def g(self, y, x):
        """Vectorized reward; for table rewards ``y`` is a context index."""
        if self.reward.kind == "custom-table":
            tab = np.asarray(self.reward.table, dtype=float)
            col = np.searchsorted(self._value_union, x)
            return tab[np.asarray(y, dtype=int), col]
        return REWARD_FUNCTIONS[self.reward.kind](y, x)

    def reward_fn(self) -> Callable:
        """``g`` as seen by a policy for a discrete context set: ``fn(context_points, x)``."""
        if self.reward.kind == "custom-table":
            return lambda ys, x: self.g(np.arange(len(ys)), x)
        return REWARD_FUNCTIONS[self.reward.kind]

    def arm_value_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded ``(K, V)`` value and probability arrays (padding has probability 0)."""
        v = max(len(a.values) for a in self.arms)
        vals = np.zeros((self.n_arms, v))
        probs = np.zeros((self.n_arms, v))
        for j, a in enumerate(self.arms):
            vals[j, : len(a.values)] = a.values
            vals[j, len(a.values):] = a.values[-1]
            probs[j, : len(a.probs)] = a.probs
        return vals, probs

    def expected_rewards(self, y) -> np.ndarray:
        """``E[g(y, X_j)]`` for every arm, exact finite sums; shape ``y.shape + (K,)``."""
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape + (self.n_arms,))
        for j, a in enumerate(self.arms):
            for v, p in zip(a.values, a.probs):
                if p > 0:
                    out[..., j] += p * self.g(y, v)
        return out

    def reward_ranges(self, contexts) -> np.ndarray:
        """``sup_x g(y, x) - inf_x g(y, x)`` over the union of arm states, per context point."""
        contexts = np.asarray(contexts, dtype=float)
        if self.reward.kind == "custom-table":
            vals = np.asarray(self.reward.table, dtype=float)
        else:
            vals = self.g(contexts[:, None], self._value_union[None, :])
        return vals.max(axis=1) - vals.min(axis=1)

    def context_points(self) -> np.ndarray:
        """Points at which a discrete-context policy evaluates ``g``."""
        if self.reward.kind == "custom-table":
            return np.arange(self.contexts.size, dtype=float)
        return np.asarray(self.contexts.values, dtype=float)


def compute_genie(env: Environment) -> GenieTables:
    """Exact expected-reward matrix and derived constants for a discrete environment."""
    if not env.is_discrete:
        raise ValueError("genie tables need a discrete context space; use genie_arm_continuous")
    pts = env.context_points()
    theta = env.expected_rewards(pts)
    m, k = theta.shape
    h_star = np.argmax(theta, axis=1)  # first max wins
    best = theta[np.arange(m), h_star]
    gaps = np.maximum(best[:, None] - theta, 0.0)
    opt = tuple(sorted(set(int(a) for a in h_star)))
    non_opt = tuple(j for j in range(k) if j not in opt)
    p = np.asarray(env.contexts.probs)
    mask = np.ones_like(gaps, dtype=bool)
    mask[np.arange(m), h_star] = False
    delta_o = float(gaps[mask].min()) if mask.any() else float("inf")
    q = np.zeros(k)
    np.add.at(q, h_star, p)
    return GenieTables(
        theta=theta,
        h_star=h_star,
        gaps=gaps,
        optimal_set=opt,
        non_optimal_set=non_opt,
        delta_o=delta_o,
        delta_max=float(gaps.max()),
        p_o=float(p.min()),
        q=q,
        reward_ranges=env.reward_ranges(pts),
    )


def genie_arm_continuous(env: Environment, y: float) -> tuple[int, float]:
    """Optimal arm (0-based) and its expected reward at context value ``y``."""
    mu = env.expected_rewards(np.asarray([y], dtype=float))[0]
    j = int(np.argmax(mu))
    return j, float(mu[j])


# ---------------------------------------------------------------- sampling


@dataclass
class Stream:
    """Pre-drawn randomness of one replication.

    ``contexts`` holds context indices (discrete) or values (continuous);
    ``value_idx[t, j]`` indexes the state of arm ``j`` at trial ``t`` into
    the padded value table.
    """

    contexts: np.ndarray
    value_idx: np.ndarray

    def __len__(self) -> int:
        return self.contexts.shape[0]


def draw_stream(env: Environment, horizon: int, rng: np.random.Generator) -> Stream:
    """Draw ``horizon`` i.i.d. rounds: a context and the state of every arm."""
    if env.is_discrete:
        cdf = np.cumsum(env.contexts.probs)
        ctx = np.searchsorted(cdf, rng.random(horizon), side="right")
        ctx = np.minimum(ctx, env.contexts.size - 1).astype(np.int64)
    else:
        ctx = rng.uniform(env.contexts.lo, env.contexts.hi, size=horizon)
    _, probs = env.arm_value_table()
    u = rng.random((horizon, env.n_arms))
    vidx = np.empty((horizon, env.n_arms), dtype=np.int64)
    for j in range(env.n_arms):
        cdf = np.cumsum(probs[j])
        vidx[:, j] = np.minimum(np.searchsorted(cdf, u[:, j], side="right"), len(env.arms[j].values) - 1)
    return Stream(ctx, vidx)


def sample_round(env: Environment, rng: np.random.Generator) -> tuple[float | int, np.ndarray]:
    """One round: the context (index if discrete, value otherwise) and every arm's state."""
    s = draw_stream(env, 1, rng)
    vals, _ = env.arm_value_table()
    ctx = s.contexts[0]
    ctx = int(ctx) if env.is_discrete else float(ctx)
    return ctx, vals[np.arange(env.n_arms), s.value_idx[0]]


# ---------------------------------------------------------------- presets


def _channel_arms(k: int) -> tuple[ArmSpec, ...]:
    # arm j is j with probability (8 - j)/10, else 0
    return tuple(ArmSpec.scaled_bernoulli(j, (8 - j) / 10) for j in range(1, k + 1))


def channel_k7() -> Environment:
    return Environment(
        "channel-k7",
        ContextSpec.discrete_uniform([1, 2, 3, 4]),
        _channel_arms(7),
        RewardSpec("min-capacity", bound=4.0),
    )


def channel_k4() -> Environment:
    return Environment(
        "channel-k4",
        ContextSpec.discrete_uniform([1, 2, 3, 4]),
        _channel_arms(4),
        RewardSpec("min-capacity", bound=4.0),
    )


def energy_harvesting_k4() -> Environment:
    return Environment(
        "energy-harvesting-k4",
        ContextSpec.uniform(0.0, 1.0),
        _channel_arms(4),
        RewardSpec("log-power", bound=float(np.log(5.0)), lipschitz=4.0),
    )


PRESETS: dict[str, Callable[[], Environment]] = {
    "channel-k7": channel_k7,
    "channel-k4": channel_k4,
    "energy-harvesting-k4": energy_harvesting_k4,
}


def get_preset(name: str) -> Environment:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown environment preset {name!r}; choose from {sorted(PRESETS)}") from None


def environment_from_dict(d: dict) -> Environment:
    """Build an inline environment from a config mapping.

    Expected keys: ``contexts`` ({values, probs} or {lo, hi}), ``arms``
    (list of {value, prob} or {values, probs}) and ``reward``
    ({kind, bound, lipschitz, table}).
    """
    c = d["contexts"]
    if "values" in c:
        vals = tuple(float(v) for v in c["values"])
        probs = tuple(float(p) for p in c.get("probs", [1.0 / len(vals)] * len(vals)))
        contexts = ContextSpec("discrete", vals, probs)
    else:
        contexts = ContextSpec.uniform(c["lo"], c["hi"])
    arms = []
    for a in d["arms"]:
        if "value" in a:
            arms.append(ArmSpec.scaled_bernoulli(float(a["value"]), float(a["prob"])))
        else:
            arms.append(ArmSpec(tuple(float(v) for v in a["values"]), tuple(float(p) for p in a["probs"])))
    r = d["reward"]
    table = r.get("table")
    reward = RewardSpec(
        r["kind"],
        bound=float(r.get("bound", 1.0)),
        lipschitz=float(r.get("lipschitz", 0.0)),
        table=None if table is None else tuple(tuple(float(v) for v in row) for row in table),
    )
    return Environment(d.get("name", "inline"), contexts, tuple(arms), reward)
