"""Experiment configuration: dataclasses, YAML ingestion and validation."""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field
from typing import Any

import yaml

from .environments import Environment, environment_from_dict, get_preset

POLICY_TYPES = ("dcb", "ucb1", "multi-ucb", "ccb", "ccb-doubling", "genie")
DISCRETE_POLICIES = {"dcb", "multi-ucb", "ucb1", "genie"}
CONTINUOUS_POLICIES = {"ccb", "ccb-doubling", "ucb1", "multi-ucb", "genie"}
MAX_SEED = 2**64


class ConfigError(ValueError):
    """Raised with every validation problem found, not just the first."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class PolicyConfig:
    type: str
    epsilon: float | None = None
    delta: float | None = None
    alpha: float | None = None
    scale_confidence: bool = False

    @property
    def eps(self) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        return 0.01 if self.type in ("dcb", "ccb", "ccb-doubling") else 0.0

    def label(self) -> str:
        t = self.type
        if t in ("dcb", "ccb"):
            s = f"{t.upper()}({self.eps:g}" + (f",{self.delta:g})" if t == "ccb" else ")")
        elif t == "ccb-doubling":
            s = f"CCB-doubling({self.eps:g},alpha={self.alpha:g})"
        elif t == "multi-ucb":
            s = "Multi-UCB" + (f"({self.delta:g})" if self.delta else "")
        elif t == "ucb1":
            s = "UCB1" + (f"({self.eps:g})" if self.eps else "")
        else:
            s = t
        return s


@dataclass
class ExperimentConfig:
    name: str
    policy: PolicyConfig
    environment: str | dict[str, Any]
    horizon: int
    replications: int = 1
    seed: int = 0
    checkpoints: list[int] | None = None
    _env: Environment | None = field(default=None, init=False, repr=False, compare=False)

    def env(self) -> Environment:
        if self._env is None:
            if isinstance(self.environment, str):
                self._env = get_preset(self.environment)
            else:
                self._env = environment_from_dict(self.environment)
        return self._env

    def validate(self) -> list[str]:
        errs: list[str] = []
        p = self.policy
        env = None
        try:
            env = self.env()
        except (ValueError, KeyError, TypeError) as e:
            errs.append(f"environment: {e}")
        if p.type not in POLICY_TYPES:
            errs.append(f"policy.type: unknown policy {p.type!r}; choose from {', '.join(POLICY_TYPES)}")
        if p.type in ("dcb", "ccb", "ccb-doubling"):
            if not p.eps > 0:
                errs.append(f"policy.epsilon: {p.type} requires epsilon > 0, got {p.eps}")
        elif p.eps < 0:
            errs.append(f"policy.epsilon: must be nonnegative, got {p.eps}")
        if p.type == "ccb" and (p.delta is None or not p.delta > 0):
            errs.append("policy.delta: ccb requires delta > 0")
        if p.type == "ccb-doubling" and (p.alpha is None or not 0 <= p.alpha <= 1):
            errs.append("policy.alpha: ccb-doubling requires alpha in [0, 1]")
        if env is not None and p.type in POLICY_TYPES:
            if env.is_discrete and p.type not in DISCRETE_POLICIES:
                errs.append(f"policy.type: {p.type} is incompatible with discrete environment {env.name!r}")
            if not env.is_discrete:
                if p.type not in CONTINUOUS_POLICIES:
                    errs.append(f"policy.type: {p.type} is incompatible with continuous environment {env.name!r}")
                elif p.type == "multi-ucb" and (p.delta is None or not p.delta > 0):
                    errs.append("policy.delta: multi-ucb on a continuous environment requires delta > 0")
                width = env.contexts.hi - env.contexts.lo
                if p.delta is not None and p.delta > width:
                    errs.append(f"policy.delta: {p.delta} exceeds the context support width {width}")
        if not _is_int(self.horizon) or self.horizon < 1:
            errs.append(f"horizon: must be a positive integer, got {self.horizon!r}")
        elif env is not None and self.horizon < env.n_arms:
            errs.append(f"horizon: {self.horizon} is smaller than the number of arms {env.n_arms}")
        if not _is_int(self.replications) or self.replications < 1:
            errs.append(f"replications: must be a positive integer, got {self.replications!r}")
        if not _is_int(self.seed) or not 0 <= self.seed < MAX_SEED:
            errs.append(f"seed: must be an integer in [0, 2^64), got {self.seed!r}")
        if self.checkpoints is not None:
            bad = [c for c in self.checkpoints if not _is_int(c) or _is_int(self.horizon)
                   and not 1 <= c <= self.horizon]
            if bad or not self.checkpoints:
                errs.append(f"checkpoints: must be integers in [1, horizon], got {self.checkpoints!r}")
        return errs

    def check(self) -> ExperimentConfig:
        errs = self.validate()
        if errs:
            raise ConfigError(errs)
        return self


def _is_int(v) -> bool:
    return isinstance(v, numbers.Integral) and not isinstance(v, bool)


def _as_int(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str):
        # PyYAML reads "1e5" as a string
        try:
            v = float(v)
        except ValueError:
            return v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def config_from_dict(d: dict[str, Any]) -> ExperimentConfig:
    """Build and validate a config from a mapping; raises ConfigError listing every problem."""
    errs = []
    if not isinstance(d, dict):
        raise ConfigError(["document must be a mapping"])
    unknown = set(d) - {"name", "policy", "environment", "horizon", "replications", "seed", "checkpoints"}
    if unknown:
        errs.append(f"unknown keys: {sorted(unknown)}")
    pol = d.get("policy")
    if isinstance(pol, str):
        pol = {"type": pol}
    if not isinstance(pol, dict) or "type" not in pol:
        errs.append("policy: missing policy.type")
        pol = {"type": None}
    extra = set(pol) - {"type", "epsilon", "delta", "alpha", "scale_confidence"}
    if extra:
        errs.append(f"policy: unknown keys {sorted(extra)}")
    for key in ("environment", "horizon"):
        if key not in d:
            errs.append(f"{key}: required")
    if errs and ("environment" not in d or "horizon" not in d or pol["type"] is None):
        raise ConfigError(errs)
    checkpoints = d.get("checkpoints")
    if isinstance(checkpoints, str):
        checkpoints = [int(float(c)) for c in checkpoints.split(",") if c.strip()]
    cfg = ExperimentConfig(
        name=str(d.get("name", "experiment")),
        policy=PolicyConfig(
            type=str(pol["type"]),
            epsilon=None if pol.get("epsilon") is None else float(pol["epsilon"]),
            delta=None if pol.get("delta") is None else float(pol["delta"]),
            alpha=None if pol.get("alpha") is None else float(pol["alpha"]),
            scale_confidence=bool(pol.get("scale_confidence", False)),
        ),
        environment=d["environment"],
        horizon=_as_int(d["horizon"]),
        replications=_as_int(d.get("replications", 1)),
        seed=_as_int(d.get("seed", 0)),
        checkpoints=None if checkpoints is None else [_as_int(c) for c in checkpoints],
    )
    errs.extend(cfg.validate())
    if errs:
        raise ConfigError(errs)
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse a YAML (or JSON, which is valid YAML) experiment document."""
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError([f"malformed document: {e}"]) from None
    return config_from_dict(d)
