"""Region calculus over the live (non-removed) part of an execution graph.

Ancestors are the operations a node depends on, descendants the operations
depending on it, and exclusive descendants the descendants that are reachable
from outside only through the node itself. The exclusive set is what an
operation is allowed to rewrite while others run in parallel.
"""

from __future__ import annotations

from fot.graph.model import ExecutionGraph, REMOVED

__all__ = ["ancestors", "descendants", "exclusive_descendants", "visible_subgraph"]


def _succ(g: ExecutionGraph, op_id: str) -> set[str]:
    return {
        c.target_op
        for c in g.outgoing(op_id)
        if g.ops[c.target_op].status != REMOVED
    }


def _pred(g: ExecutionGraph, op_id: str) -> set[str]:
    return {
        c.source_op
        for c in g.incoming(op_id)
        if g.ops[c.source_op].status != REMOVED
    }


def _reach(g: ExecutionGraph, starts: set[str], step) -> set[str]:
    seen: set[str] = set()
    frontier = list(starts)
    while frontier:
        node = frontier.pop()
        for nxt in step(g, node):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def ancestors(g: ExecutionGraph, op_id: str) -> set[str]:
    """All live ops with a directed path to ``op_id``."""
    g.op(op_id)
    return _reach(g, {op_id}, _pred)


def descendants(g: ExecutionGraph, op_id: str) -> set[str]:
    """All live ops with a directed path from ``op_id``."""
    g.op(op_id)
    return _reach(g, {op_id}, _succ)


def exclusive_descendants(g: ExecutionGraph, op_id: str) -> set[str]:
    """Descendants of ``op_id`` reachable from outside only through it.

    Computed as D(o) minus everything reachable, in the graph with ``o``
    deleted, from the ops outside D(o) and o itself.
    """
    g.op(op_id)
    desc = descendants(g, op_id)
    outside = g.live_op_ids() - desc - {op_id}

    def step(graph: ExecutionGraph, node: str) -> set[str]:
        if node == op_id:
            return set()
        return {n for n in _succ(graph, node) if n != op_id}

    tainted = _reach(g, outside, step) | outside
    return desc - tainted


def visible_subgraph(g: ExecutionGraph, op_id: str) -> ExecutionGraph:
    """Read-only view over ancestors, descendants, and the op itself."""
    keep = ancestors(g, op_id) | descendants(g, op_id) | {op_id}
    view = ExecutionGraph()
    for node_id in sorted(keep):
        view.add_op(g.ops[node_id].copy())
    for conn_id in sorted(g.conns):
        conn = g.conns[conn_id]
        if conn.source_op in keep and conn.target_op in keep:
            view.add_conn(conn.copy())
    view.step = g.step
    return view.freeze()
