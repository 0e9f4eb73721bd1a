"""Conditional mixed categorical/numeric hyperparameter spaces.

Parameters are declared in order; a condition may only look at parameters
declared before it, holding the dependency structure to a DAG by construction.
Conditions are either callables on the partial assignment or declarative
``{"param": name, "equals": value}`` / ``{"param": name, "in": [...]}`` specs
(the form used in study files).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable

from fot.errors import ConfigError

KINDS = ("categorical", "int", "float")


@dataclass
class Param:
    name: str
    kind: str
    domain: Any  # categorical: sequence of choices; numeric: (low, high)
    log_scale: bool = False
    condition: Callable[[dict], bool] | dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown param kind {self.kind!r}")
        if self.kind == "categorical":
            if not list(self.domain):
                raise ConfigError(f"param {self.name}: empty domain")
        else:
            low, high = self.domain
            if not low <= high:
                raise ConfigError(f"param {self.name}: empty domain [{low}, {high}]")
            if self.log_scale and low <= 0:
                raise ConfigError(f"param {self.name}: log scale needs positive bounds")

    def active(self, assignment: dict) -> bool:
        cond = self.condition
        if cond is None:
            return True
        if callable(cond):
            return bool(cond(assignment))
        name = cond["param"]
        if name not in assignment:
            return False
        if "equals" in cond:
            return assignment[name] == cond["equals"]
        if "in" in cond:
            return assignment[name] in cond["in"]
        raise ConfigError(f"param {self.name}: unsupported condition {cond!r}")

    def contains(self, value: Any) -> bool:
        if self.kind == "categorical":
            return value in list(self.domain)
        low, high = self.domain
        return low <= value <= high

    def draw_uniform(self, rng: random.Random) -> Any:
        if self.kind == "categorical":
            return rng.choice(list(self.domain))
        low, high = self.domain
        if self.log_scale:
            raw = math.exp(rng.uniform(math.log(low), math.log(high)))
        else:
            raw = rng.uniform(low, high)
        if self.kind == "int":
            return min(int(high), max(int(low), round(raw)))
        return raw


@dataclass
class HyperparameterSpace:
    params: list[Param] = field(default_factory=list)

    def __post_init__(self):
        seen: set[str] = set()
        for param in self.params:
            if param.name in seen:
                raise ConfigError(f"duplicate param {param.name!r}")
            if isinstance(param.condition, dict) and param.condition["param"] not in seen:
                raise ConfigError(
                    f"param {param.name!r} conditions on {param.condition['param']!r}, "
                    "which is not declared earlier"
                )
            seen.add(param.name)

    def __iter__(self):
        return iter(self.params)

    @classmethod
    def from_json(cls, specs: list[dict]) -> "HyperparameterSpace":
        params = [
            Param(
                name=spec["name"],
                kind=spec["kind"],
                domain=spec["domain"],
                log_scale=spec.get("log_scale", False),
                condition=spec.get("condition"),
            )
            for spec in specs
        ]
        return cls(params=params)

    def validate(self, assignment: dict) -> bool:
        """True iff the assignment covers exactly the active params, in domain."""
        expected: dict[str, Param] = {}
        for param in self.params:
            if param.active({k: v for k, v in assignment.items() if k in expected}):
                expected[param.name] = param
        if set(assignment) != set(expected):
            return False
        return all(expected[name].contains(value) for name, value in assignment.items())


def sample_random(space: HyperparameterSpace, seed: int | random.Random) -> dict:
    """Uniform over active domains, respecting conditions; deterministic per seed."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    assignment: dict = {}
    for param in space:
        if param.active(assignment):
            assignment[param.name] = param.draw_uniform(rng)
    return assignment
