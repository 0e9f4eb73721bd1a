"""Canonical serialization, reasoning-graph derivation, and DOT export.

Graph bytes are stable across runs for identical graphs: ops and connections
are emitted in sorted-id order and encoded as canonical JSON. The reasoning
graph serialization deliberately omits volatile thought metadata (step index,
cost, duration) so that byte-identity holds across scheduling interleavings.
"""

from __future__ import annotations

from fot.canonical import canonical_bytes, parse_canonical
from fot.errors import GraphParseError
from fot.graph.model import (
    EMPTY,
    Connection,
    ExecutionGraph,
    OperationNode,
    ReasoningGraph,
)

GRAPH_SCHEMA = "fot.graph/1"
REASONING_SCHEMA = "fot.reasoning/1"


def canonical_serialize(g: ExecutionGraph) -> bytes:
    doc = {
        "schema": GRAPH_SCHEMA,
        "step": g.step,
        "ops": [g.ops[k].to_json() for k in sorted(g.ops)],
        "conns": [g.conns[k].to_json() for k in sorted(g.conns)],
    }
    return canonical_bytes(doc)


def canonical_parse(data: bytes | str) -> ExecutionGraph:
    try:
        doc = parse_canonical(data)
        if doc.get("schema") != GRAPH_SCHEMA:
            raise GraphParseError(f"unknown schema {doc.get('schema')!r}")
        g = ExecutionGraph()
        g.step = int(doc["step"])
        for op_doc in doc["ops"]:
            node = OperationNode.from_json(op_doc)
            g.ops[node.id] = node
            g._out.setdefault(node.id, set())
            g._in.setdefault(node.id, set())
        for conn_doc in doc["conns"]:
            conn = Connection.from_json(conn_doc)
            g.conns[conn.id] = conn
            g._out[conn.source_op].add(conn.id)
            g._in[conn.target_op].add(conn.id)
        return g
    except GraphParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphParseError(f"malformed graph document: {exc}") from exc


def derive_reasoning_graph(g: ExecutionGraph) -> ReasoningGraph:
    """Thoughts carried on connections, plus which thought influenced which."""
    thoughts: dict[str, object] = {}
    producer: dict[str, str] = {}
    inputs_of: dict[str, set[str]] = {}
    outputs_of: dict[str, set[str]] = {}

    for conn in g.conns.values():
        if conn.payload is EMPTY:
            continue
        t = conn.payload
        thoughts[t.id] = t
        producer[t.id] = conn.source_op
        outputs_of.setdefault(conn.source_op, set()).add(t.id)
        inputs_of.setdefault(conn.target_op, set()).add(t.id)

    deps: set[tuple[str, str]] = set()
    for op_id, outs in outputs_of.items():
        for upstream in inputs_of.get(op_id, ()):
            for downstream in outs:
                deps.add((upstream, downstream))

    return ReasoningGraph(thoughts=thoughts, deps=deps, producer=producer)


def serialize_reasoning_graph(r: ReasoningGraph) -> bytes:
    doc = {
        "schema": REASONING_SCHEMA,
        "thoughts": [
            {"id": tid, "value": r.thoughts[tid].value} for tid in sorted(r.thoughts)
        ],
        "deps": sorted(list(pair) for pair in r.deps),
        "producer": {tid: r.producer[tid] for tid in sorted(r.producer)},
    }
    return canonical_bytes(doc)


def _dot_quote(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def to_dot(g: ExecutionGraph) -> str:
    """DOT export: nodes show kind, id, status; EMPTY edges are dashed."""
    lines = ["digraph execution {", "  rankdir=TB;"]
    for op_id in sorted(g.ops):
        node = g.ops[op_id]
        label = _dot_quote(f"{node.kind}\n{node.id}\n{node.status}")
        lines.append(f'  "{_dot_quote(op_id)}" [label="{label}"];')
    for conn_id in sorted(g.conns):
        conn = g.conns[conn_id]
        label = _dot_quote(f"{conn.source[1]}→{conn.target[1]}")
        style = ', style=dashed' if conn.payload is EMPTY else ""
        lines.append(
            f'  "{_dot_quote(conn.source_op)}" -> "{_dot_quote(conn.target_op)}" '
            f'[label="{label}"{style}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = [
    "canonical_serialize",
    "canonical_parse",
    "derive_reasoning_graph",
    "serialize_reasoning_graph",
    "to_dot",
]
