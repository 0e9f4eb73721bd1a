"""Run metrics: per-op accounting and the longest-sequential-path runtime."""

from __future__ import annotations

from dataclasses import dataclass, field

from fot.graph.model import ExecutionGraph


@dataclass
class OpMetrics:
    duration_ms: int = 0
    cost_usd: float = 0.0
    cache_hit: bool = False
    backend_calls: int = 0
    failed: bool = False

    def to_json(self) -> dict:
        return {
            "duration_ms": self.duration_ms,
            "cost_usd": self.cost_usd,
            "cache_hit": self.cache_hit,
            "backend_calls": self.backend_calls,
            "failed": self.failed,
        }


@dataclass
class RunMetrics:
    per_op: dict[str, OpMetrics] = field(default_factory=dict)
    wall_ms: float = 0.0
    critical_path_ms: float = 0.0
    total_cost_usd: float = 0.0
    backend_calls: int = 0
    cache: dict = field(default_factory=dict)

    def finalize(self, g: ExecutionGraph, wall_ms: float, cache_stats: dict | None) -> None:
        self.wall_ms = wall_ms
        # summed in sorted-id order so totals are independent of commit order
        self.total_cost_usd = sum(self.per_op[k].cost_usd for k in sorted(self.per_op))
        self.backend_calls = sum(self.per_op[k].backend_calls for k in sorted(self.per_op))
        durations = {op_id: float(m.duration_ms) for op_id, m in self.per_op.items()}
        self.critical_path_ms = critical_path(g, durations)
        if cache_stats is not None:
            self.cache = cache_stats

    def to_json(self) -> dict:
        return {
            "per_op": {k: self.per_op[k].to_json() for k in sorted(self.per_op)},
            "wall_ms": self.wall_ms,
            "critical_path_ms": self.critical_path_ms,
            "total_cost_usd": self.total_cost_usd,
            "backend_calls": self.backend_calls,
            "cache": self.cache,
        }


def critical_path(g: ExecutionGraph, durations: dict[str, float]) -> float:
    """Max over directed paths of summed op durations, over live ops."""
    live = g.live_op_ids()
    order: list[str] = []
    indeg = {op_id: 0 for op_id in live}
    for conn in g.conns.values():
        if conn.source_op in live and conn.target_op in live:
            indeg[conn.target_op] += 1
    frontier = sorted(op_id for op_id, d in indeg.items() if d == 0)
    while frontier:
        node = frontier.pop(0)
        order.append(node)
        added = []
        for conn in g.outgoing(node):
            if conn.target_op not in live:
                continue
            indeg[conn.target_op] -= 1
            if indeg[conn.target_op] == 0:
                added.append(conn.target_op)
        if added:
            frontier.extend(added)
            frontier.sort()
    best: dict[str, float] = {}
    for node in order:
        incoming = [
            best[c.source_op]
            for c in g.incoming(node)
            if c.source_op in best
        ]
        best[node] = durations.get(node, 0.0) + (max(incoming) if incoming else 0.0)
    return max(best.values(), default=0.0)
