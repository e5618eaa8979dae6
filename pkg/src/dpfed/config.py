"""Run configuration documents."""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .budget import Strategy
from .costmodel import CostProfile
from .execution import Policy
from .planner import DEFAULT_GRID_STEPS


class ConfigError(ValueError):
    pass


_KNOWN = {
    "epsilon", "delta", "epsilon_perf", "delta_perf", "strategy", "policy", "profile", "seed",
    "multiplicities", "distinct", "ledger", "table_budgets", "default_budget", "debug", "mparty",
    "grid_steps", "query_id", "bench",
}


@dataclass(frozen=True)
class RunConfig:
    epsilon: float = 0.5
    delta: float = 5e-5
    epsilon_perf: float | None = None
    delta_perf: float | None = None
    strategy: Strategy = Strategy.OPTIMAL
    policy: Policy = Policy.TRUE_ANSWER
    profile: CostProfile = field(default_factory=CostProfile)
    seed: int = 0
    multiplicities: Mapping[str, int] = field(default_factory=dict)
    distinct: Mapping[str, float] = field(default_factory=dict)
    ledger: str | None = None
    table_budgets: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    default_budget: tuple[float, float] | None = None
    debug: bool = False
    mparty: bool = False
    grid_steps: int = DEFAULT_GRID_STEPS
    query_id: str | None = None
    bench: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        # the performance budget defaults to everything under output policy 1
        if self.epsilon_perf is None:
            object.__setattr__(self, "epsilon_perf", self.epsilon if self.policy is Policy.TRUE_ANSWER else None)
        if self.delta_perf is None:
            object.__setattr__(self, "delta_perf", self.delta if self.policy is Policy.TRUE_ANSWER else None)
        self.validate()

    def validate(self) -> None:
        if self.epsilon_perf is None or self.delta_perf is None:
            raise ConfigError("policy 'noisy' needs explicit epsilon_perf and delta_perf")
        if not 0 <= self.epsilon_perf <= self.epsilon:
            raise ConfigError(f"need 0 <= epsilon_perf <= epsilon, got {self.epsilon_perf} and {self.epsilon}")
        if not 0 <= self.delta_perf <= self.delta:
            raise ConfigError(f"need 0 <= delta_perf <= delta, got {self.delta_perf} and {self.delta}")
        if self.delta >= 1:
            raise ConfigError("delta must be below 1")
        if self.policy is Policy.TRUE_ANSWER and (
            self.epsilon_perf != self.epsilon or self.delta_perf != self.delta
        ):
            raise ConfigError("policy 'true' spends the whole budget on performance: epsilon_perf must equal epsilon")
        if self.policy is Policy.NOISY_ANSWER and not self.epsilon_out > 0:
            raise ConfigError("policy 'noisy' needs epsilon > epsilon_perf to noise the output")
        if self.strategy is Strategy.ORACLE and not self.debug:
            raise ConfigError("the oracle strategy reads true cardinalities and needs debug mode")
        if self.grid_steps < 1:
            raise ConfigError("grid_steps must be at least 1")
        for k, m in self.multiplicities.items():
            if int(m) < 1:
                raise ConfigError(f"multiplicity of {k} must be >= 1")

    @property
    def epsilon_out(self) -> float:
        return self.epsilon - self.epsilon_perf

    @property
    def delta_out(self) -> float:
        return self.delta - self.delta_perf

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], **overrides) -> RunConfig:
        unknown = set(doc) - _KNOWN
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
        try:
            if "strategy" in kw:
                kw["strategy"] = Strategy(kw["strategy"])
            if "policy" in kw:
                kw["policy"] = Policy(kw["policy"])
            kw["profile"] = CostProfile.from_config(kw.get("profile"))
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e)) from e
        if "table_budgets" in kw:
            kw["table_budgets"] = {t: (float(b[0]), float(b[1])) for t, b in kw["table_budgets"].items()}
        if kw.get("default_budget") is not None:
            kw["default_budget"] = tuple(map(float, kw["default_budget"]))
        for key in ("epsilon", "delta", "epsilon_perf", "delta_perf"):
            if kw.get(key) is not None:
                kw[key] = float(kw[key])
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path | None, **overrides) -> RunConfig:
        doc = json.loads(Path(path).read_text()) if path is not None else {}
        return cls.from_dict(doc, **overrides)

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "epsilon_perf": self.epsilon_perf,
            "delta_perf": self.delta_perf,
            "epsilon_out": self.epsilon_out,
            "delta_out": self.delta_out,
            "strategy": self.strategy.value,
            "policy": self.policy.value,
            "profile": self.profile.to_json(),
            "seed": self.seed,
            "grid_steps": self.grid_steps,
            "mparty": self.mparty,
        }
