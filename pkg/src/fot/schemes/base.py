"""Scheme registry: packaged pipelines of graph builder + prompts + scorer."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

from fot.errors import ConfigError
from fot.graph.model import DONE, ExecutionGraph
from fot.runtime.controller import RunConfig, RunResult, run

logger = logging.getLogger(__name__)


class _IdAlloc:
    """Deterministic builder-scope ids: ops "root/N", connections "root/cN"."""

    def __init__(self):
        self._ops = 0
        self._conns = 0

    def op(self) -> str:
        serial = self._ops
        self._ops += 1
        return f"root/{serial}"

    def conn(self) -> str:
        serial = self._conns
        self._conns += 1
        return f"root/c{serial}"


def default_extract(g: ExecutionGraph) -> Any:
    """Payload of the run's sink operation (no outgoing connections)."""
    sinks = [
        node
        for node in g.live_ops()
        if node.status == DONE and not g.outgoing(node.id) and node.recorded_outputs
    ]
    if not sinks:
        return None
    if len(sinks) > 1:
        logger.warning("multiple sink ops, extracting from %s", sorted(n.id for n in sinks)[0])
    sink = sorted(sinks, key=lambda n: n.id)[0]
    out = sink.recorded_outputs.get("out")
    return out.value if out is not None else None


@dataclass
class SchemeSpec:
    name: str
    build: Callable[[dict, dict], ExecutionGraph]
    scorer: Callable[[Any, dict], float]
    direction: str
    default_hp: dict = field(default_factory=dict)
    hp_space: list[dict] = field(default_factory=list)
    extract: Callable[[ExecutionGraph], Any] = default_extract
    make_oracle_backend: Callable[..., Any] | None = None


SCHEMES: dict[str, SchemeSpec] = {}


def register_scheme(spec: SchemeSpec) -> SchemeSpec:
    SCHEMES[spec.name] = spec
    return spec


def get_scheme(name: str) -> SchemeSpec:
    if name not in SCHEMES:
        raise ConfigError(f"unknown scheme {name!r}; available: {sorted(SCHEMES)}")
    return SCHEMES[name]


def run_instance(
    spec: SchemeSpec, instance: dict, hp: dict | None, config: RunConfig
) -> tuple[float, Any, RunResult]:
    """Build, execute, extract, and score one instance."""
    merged = {**spec.default_hp, **(hp or {})}
    g0 = spec.build(instance, merged)
    result = run(g0, config)
    output = spec.extract(result.graph)
    score = spec.scorer(output, instance)
    return score, output, result


def check_hp_range(name: str, value, low, high) -> None:
    if not (low <= value <= high):
        raise ConfigError(f"hyperparameter {name}={value!r} outside [{low}, {high}]")
