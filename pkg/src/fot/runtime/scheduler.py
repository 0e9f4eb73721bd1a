"""Readiness computation and scheduling strategies.

An operation is ready when it is planned and every incoming connection on a
required input port carries a thought. Kinds may declare that only a subset of
their input ports is required (``required_ports`` on the node).
"""

from __future__ import annotations

from fot.graph.model import EMPTY, ExecutionGraph, PLANNED

STRATEGIES = ("fifo", "breadth_first", "depth_first")


def compute_ready(g: ExecutionGraph) -> set[str]:
    ready: set[str] = set()
    for node in g.live_ops():
        if node.status != PLANNED:
            continue
        required = set(node.required())
        ok = True
        for conn in g.incoming(node.id):
            if conn.target[1] in required and conn.payload is EMPTY:
                ok = False
                break
        if ok:
            ready.add(node.id)
    return ready


def depth_map(g: ExecutionGraph) -> dict[str, int]:
    """Longest-path depth from the roots, over live ops."""
    live = g.live_op_ids()
    indeg = {op_id: 0 for op_id in live}
    for conn in g.conns.values():
        if conn.source_op in live and conn.target_op in live:
            indeg[conn.target_op] += 1
    frontier = sorted(op_id for op_id, d in indeg.items() if d == 0)
    depth = {op_id: 0 for op_id in frontier}
    while frontier:
        node = frontier.pop(0)
        for conn in g.outgoing(node):
            target = conn.target_op
            if target not in live:
                continue
            depth[target] = max(depth.get(target, 0), depth[node] + 1)
            indeg[target] -= 1
            if indeg[target] == 0:
                frontier.append(target)
        frontier.sort()
    return depth


def order_frontier(g: ExecutionGraph, frontier: list[str], strategy: str) -> list[str]:
    """Order the frontier for dispatch.

    fifo preserves readiness-event order; breadth_first sorts by ascending
    depth from the roots, depth_first by descending depth, ties by id.
    """
    if strategy == "fifo":
        return list(frontier)
    depths = depth_map(g)
    if strategy == "breadth_first":
        return sorted(frontier, key=lambda op_id: (depths.get(op_id, 0), op_id))
    if strategy == "depth_first":
        return sorted(frontier, key=lambda op_id: (-depths.get(op_id, 0), op_id))
    raise ValueError(f"unknown strategy {strategy!r}")
