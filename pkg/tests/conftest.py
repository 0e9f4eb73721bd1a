from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from fot.graph.model import (
    Connection,
    ExecutionGraph,
    OperationNode,
    RUNNING,
    READY,
    Thought,
    ThoughtMeta,
)


def make_graph(edges: list[tuple[str, str]], extra_nodes: tuple[str, ...] = ()) -> ExecutionGraph:
    """Small fixture builder: node names from edges, one conn per pair."""
    g = ExecutionGraph()
    names: list[str] = []
    for s, t in edges:
        for name in (s, t):
            if name not in names:
                names.append(name)
    for name in extra_nodes:
        if name not in names:
            names.append(name)
    for name in names:
        g.add_op(OperationNode(id=name, kind="stub", input_ports=("in",), output_ports=("out",)))
    for i, (s, t) in enumerate(edges):
        g.add_conn(Connection(id=f"c{i}", source=(s, "out"), target=(t, "in")))
    return g


def run_chain_to(g: ExecutionGraph, op_id: str) -> None:
    """Drive statuses so that ``op_id`` is running and its ancestors are done."""
    from fot.graph.regions import ancestors

    order = topo_order(g)
    anc = ancestors(g, op_id)
    for node_id in order:
        if node_id in anc:
            g.set_status(node_id, READY)
            g.set_status(node_id, RUNNING)
            outs = {
                conn.source[1]: Thought.make(
                    f"{node_id}:{conn.source[1]}", {"v": node_id}, ThoughtMeta(producer_op_id=node_id)
                )
                for conn in g.outgoing(node_id)
            }
            if not outs:
                outs = {"out": Thought.make(f"{node_id}:out", {"v": node_id}, ThoughtMeta(producer_op_id=node_id))}
            g.record_outputs(node_id, outs)
    g.set_status(op_id, READY)
    g.set_status(op_id, RUNNING)


def topo_order(g: ExecutionGraph) -> list[str]:
    indeg = {op_id: 0 for op_id in g.live_op_ids()}
    for c in g.conns.values():
        indeg[c.target_op] += 1
    ready = sorted(n for n, d in indeg.items() if d == 0)
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for conn in g.outgoing(node):
            indeg[conn.target_op] -= 1
            if indeg[conn.target_op] == 0:
                ready.append(conn.target_op)
        ready.sort()
    return order
