"""Core data model: thoughts, operation nodes, connections, the execution graph.

The execution graph is a directed multigraph. Nodes are operations; edges are
connections that carry at most one thought each. A connection with payload
``EMPTY`` belongs to an operation that has not produced its outputs yet.
Removed operations are tombstoned (status ``removed``), never deleted, so ids
are never reused within one execution.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from typing import Any, Iterator

from fot.canonical import canonical_bytes, parse_canonical
from fot.errors import (
    FotError,
    MissingPortOutputError,
    OpNotRunningError,
    ReadOnlyGraphError,
    UnknownOperationError,
)

PLANNED = "planned"
READY = "ready"
RUNNING = "running"
DONE = "done"
REMOVED = "removed"

STATUSES = (PLANNED, READY, RUNNING, DONE, REMOVED)

# Legal status transitions. ``removed`` is only reachable from ``planned``.
_TRANSITIONS = {
    PLANNED: {READY, REMOVED},
    READY: {RUNNING},
    RUNNING: {DONE},
    DONE: set(),
    REMOVED: set(),
}

# Explicit encoding of an unexecuted connection (pi(e) undefined).
EMPTY = None


@dataclass(frozen=True)
class ThoughtMeta:
    producer_op_id: str
    created_step: int = 0
    cost_usd: float = 0.0
    duration_ms: int = 0
    tags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "producer_op_id": self.producer_op_id,
            "created_step": self.created_step,
            "cost_usd": self.cost_usd,
            "duration_ms": self.duration_ms,
            "tags": list(self.tags),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ThoughtMeta":
        return cls(
            producer_op_id=data["producer_op_id"],
            created_step=data["created_step"],
            cost_usd=data["cost_usd"],
            duration_ms=data["duration_ms"],
            tags=tuple(data.get("tags", ())),
        )


@dataclass(frozen=True)
class Thought:
    """An atomic unit of information plus provenance metadata.

    ``payload`` holds the canonical JSON bytes of the value; parsing then
    re-encoding the payload is the identity.
    """

    id: str
    payload: bytes
    meta: ThoughtMeta

    @classmethod
    def make(cls, id: str, value: Any, meta: ThoughtMeta) -> "Thought":
        return cls(id=id, payload=canonical_bytes(value), meta=meta)

    @property
    def value(self) -> Any:
        return parse_canonical(self.payload)

    def to_json(self) -> dict:
        return {"id": self.id, "value": self.value, "meta": self.meta.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "Thought":
        return cls.make(data["id"], data["value"], ThoughtMeta.from_json(data["meta"]))


@dataclass
class OperationNode:
    """A node of the execution graph.

    ``required_ports`` narrows readiness to a subset of the input ports; None
    means all of them must carry payloads. ``recorded_outputs`` keeps the
    thought generated per output port once the operation is done, so late
    connections (rewires) can still be fed.
    """

    id: str
    kind: str
    config: dict = field(default_factory=dict)
    status: str = PLANNED
    input_ports: tuple[str, ...] = ()
    output_ports: tuple[str, ...] = ()
    required_ports: tuple[str, ...] | None = None
    recorded_outputs: dict[str, Thought] | None = None

    def __post_init__(self):
        self.input_ports = tuple(self.input_ports)
        self.output_ports = tuple(self.output_ports)
        if self.required_ports is not None:
            self.required_ports = tuple(self.required_ports)
        if self.status not in STATUSES:
            raise FotError(f"unknown status {self.status!r}")

    def required(self) -> tuple[str, ...]:
        return self.input_ports if self.required_ports is None else self.required_ports

    def copy(self) -> "OperationNode":
        return replace(
            self,
            config=copy.deepcopy(self.config),
            recorded_outputs=dict(self.recorded_outputs) if self.recorded_outputs else None,
        )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "config": self.config,
            "status": self.status,
            "input_ports": list(self.input_ports),
            "output_ports": list(self.output_ports),
            "required_ports": list(self.required_ports) if self.required_ports is not None else None,
            "recorded_outputs": (
                {p: t.to_json() for p, t in sorted(self.recorded_outputs.items())}
                if self.recorded_outputs is not None
                else None
            ),
        }

    @classmethod
    def from_json(cls, data: dict) -> "OperationNode":
        rec = data.get("recorded_outputs")
        return cls(
            id=data["id"],
            kind=data["kind"],
            config=data.get("config", {}),
            status=data.get("status", PLANNED),
            input_ports=tuple(data.get("input_ports", ())),
            output_ports=tuple(data.get("output_ports", ())),
            required_ports=(
                tuple(data["required_ports"]) if data.get("required_ports") is not None else None
            ),
            recorded_outputs=(
                {p: Thought.from_json(t) for p, t in rec.items()} if rec is not None else None
            ),
        )


@dataclass
class Connection:
    """A directed edge carrying at most one thought from a source port to a
    target port. Multiple connections may share the same endpoints."""

    id: str
    source: tuple[str, str]
    target: tuple[str, str]
    payload: Thought | None = EMPTY

    def __post_init__(self):
        self.source = (self.source[0], self.source[1])
        self.target = (self.target[0], self.target[1])

    @property
    def source_op(self) -> str:
        return self.source[0]

    @property
    def target_op(self) -> str:
        return self.target[0]

    def copy(self) -> "Connection":
        return Connection(id=self.id, source=self.source, target=self.target, payload=self.payload)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "source": list(self.source),
            "target": list(self.target),
            "payload": self.payload.to_json() if self.payload is not EMPTY else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Connection":
        payload = data.get("payload")
        return cls(
            id=data["id"],
            source=tuple(data["source"]),
            target=tuple(data["target"]),
            payload=Thought.from_json(payload) if payload is not None else EMPTY,
        )


@dataclass
class MutationBatch:
    """An atomic set of proposed graph edits attributed to ``actor``.

    ``rewire`` entries move the start of an existing connection to a new
    (op, port) source; targets never move.
    """

    actor: str
    add_ops: list[OperationNode] = field(default_factory=list)
    remove_ops: list[str] = field(default_factory=list)
    add_conns: list[Connection] = field(default_factory=list)
    remove_conns: list[str] = field(default_factory=list)
    rewire: list[tuple[str, tuple[str, str]]] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.add_ops or self.remove_ops or self.add_conns or self.remove_conns or self.rewire)


@dataclass
class ReasoningGraph:
    """Derived view: thoughts and which thought influenced which."""

    thoughts: dict[str, Thought]
    deps: set[tuple[str, str]]
    producer: dict[str, str]


class ExecutionGraph:
    """Directed multigraph of operations with a monotone step counter.

    The step increments once per committed mutation batch and once per
    thought-recording. State installation happens through a single swap so a
    failure mid-apply leaves the graph untouched.
    """

    def __init__(self):
        self.ops: dict[str, OperationNode] = {}
        self.conns: dict[str, Connection] = {}
        self.step: int = 0
        self._out: dict[str, set[str]] = {}
        self._in: dict[str, set[str]] = {}
        self._read_only = False

    # -- construction (initial graph G_0) ------------------------------------

    def add_op(self, node: OperationNode) -> OperationNode:
        self._check_writable()
        if node.id in self.ops:
            raise FotError(f"duplicate op id {node.id!r}")
        self.ops[node.id] = node
        self._out.setdefault(node.id, set())
        self._in.setdefault(node.id, set())
        return node

    def add_conn(self, conn: Connection) -> Connection:
        self._check_writable()
        if conn.id in self.conns:
            raise FotError(f"duplicate conn id {conn.id!r}")
        for endpoint in (conn.source_op, conn.target_op):
            if endpoint not in self.ops or self.ops[endpoint].status == REMOVED:
                raise UnknownOperationError(endpoint)
        self.conns[conn.id] = conn
        self._out[conn.source_op].add(conn.id)
        self._in[conn.target_op].add(conn.id)
        return conn

    # -- lookups --------------------------------------------------------------

    def op(self, op_id: str) -> OperationNode:
        node = self.ops.get(op_id)
        if node is None or node.status == REMOVED:
            raise UnknownOperationError(op_id)
        return node

    def live_ops(self) -> Iterator[OperationNode]:
        for node in self.ops.values():
            if node.status != REMOVED:
                yield node

    def live_op_ids(self) -> set[str]:
        return {n.id for n in self.live_ops()}

    def outgoing(self, op_id: str) -> list[Connection]:
        return sorted((self.conns[c] for c in self._out.get(op_id, ())), key=lambda c: c.id)

    def incoming(self, op_id: str) -> list[Connection]:
        return sorted((self.conns[c] for c in self._in.get(op_id, ())), key=lambda c: c.id)

    def set_status(self, op_id: str, status: str) -> None:
        self._check_writable()
        node = self.op(op_id)
        if status not in _TRANSITIONS[node.status]:
            raise FotError(f"illegal status transition {node.status} -> {status} for {op_id}")
        node.status = status

    # -- snapshots ------------------------------------------------------------

    def snapshot(self) -> "ExecutionGraph":
        """An independent copy sharing only immutable thought objects."""
        g = ExecutionGraph()
        g.ops = {k: v.copy() for k, v in self.ops.items()}
        g.conns = {k: v.copy() for k, v in self.conns.items()}
        g.step = self.step
        g._out = {k: set(v) for k, v in self._out.items()}
        g._in = {k: set(v) for k, v in self._in.items()}
        return g

    def freeze(self) -> "ExecutionGraph":
        self._read_only = True
        return self

    def _check_writable(self) -> None:
        if self._read_only:
            raise ReadOnlyGraphError("graph view is read-only")

    # -- committed state swaps -------------------------------------------------

    def _install(self, ops: dict[str, OperationNode], conns: dict[str, Connection]) -> int:
        """Single commit point; everything before this runs on scratch copies."""
        self._check_writable()
        out: dict[str, set[str]] = {op_id: set() for op_id in ops}
        inc: dict[str, set[str]] = {op_id: set() for op_id in ops}
        for conn in conns.values():
            out[conn.source_op].add(conn.id)
            inc[conn.target_op].add(conn.id)
        self.ops = ops
        self.conns = conns
        self._out = out
        self._in = inc
        self.step += 1
        return self.step

    def record_outputs(self, op_id: str, outputs: dict[str, Thought]) -> int:
        """Attach ``outputs`` to every outgoing connection of ``op_id`` and mark
        it done. Raises if a connected source port has no thought."""
        self._check_writable()
        node = self.ops.get(op_id)
        if node is None or node.status != RUNNING:
            raise OpNotRunningError(op_id)
        new_conns = dict(self.conns)
        for conn in self.outgoing(op_id):
            port = conn.source[1]
            if port not in outputs:
                raise MissingPortOutputError(f"{op_id} produced no thought for port {port!r}")
            updated = conn.copy()
            updated.payload = outputs[port]
            new_conns[conn.id] = updated
        new_ops = dict(self.ops)
        done = node.copy()
        done.status = DONE
        done.recorded_outputs = dict(outputs)
        new_ops[op_id] = done
        return self._install(new_ops, new_conns)

    # -- invariants -----------------------------------------------------------

    def find_cycle(self) -> list[str] | None:
        """Return a list of op ids forming a cycle among live ops, or None."""
        color: dict[str, int] = {}
        stack: list[str] = []

        def visit(op_id: str) -> list[str] | None:
            color[op_id] = 1
            stack.append(op_id)
            for conn in self.outgoing(op_id):
                nxt = conn.target_op
                if self.ops[nxt].status == REMOVED:
                    continue
                state = color.get(nxt, 0)
                if state == 1:
                    return stack[stack.index(nxt):] + [nxt]
                if state == 0:
                    found = visit(nxt)
                    if found:
                        return found
            color[op_id] = 2
            stack.pop()
            return None

        for op_id in sorted(self.live_op_ids()):
            if color.get(op_id, 0) == 0:
                found = visit(op_id)
                if found:
                    return found
        return None

    def check_invariants(self) -> None:
        """Raise FotError when a structural invariant is broken."""
        live = self.live_op_ids()
        cycle = self.find_cycle()
        if cycle:
            raise FotError(f"cycle among live ops: {cycle}")
        for conn in self.conns.values():
            for endpoint in (conn.source_op, conn.target_op):
                if endpoint not in live:
                    raise FotError(f"connection {conn.id} references dead op {endpoint}")
        for node in self.live_ops():
            if node.status == DONE:
                for conn in self.outgoing(node.id):
                    if conn.payload is EMPTY and node.recorded_outputs is not None:
                        # Connections made after the op ran may legitimately miss
                        # a port that was never recorded; recorded ports must hold.
                        if conn.source[1] in node.recorded_outputs:
                            raise FotError(
                                f"done op {node.id} has EMPTY payload on {conn.id} "
                                f"for recorded port {conn.source[1]}"
                            )
            for conn in self.incoming(node.id):
                if conn.payload is not EMPTY:
                    src = self.ops[conn.source_op]
                    if src.status != DONE:
                        raise FotError(
                            f"connection {conn.id} carries a thought but source "
                            f"{src.id} is {src.status}"
                        )
