"""Validation and atomic application of mutation batches.

An operation that is currently running may propose a batch of graph edits.
The batch is accepted only if every edit stays inside the actor's safe región:

  R1  nothing ancestral is touched (ops in A, connections inside A),
  R2  nothing in the non-exclusive descendant region D\\E is removed,
      re-sourced, or given new connections,
  R3  removals are confined to the exclusive region E (connections may also
      start at the actor itself),
  R4  connections added from ancestors must target E or newly added ops,
  R5  rewires move only the start of a connection whose source is in
      E ∪ {actor} and whose target is a descendant; the new source must lie in
      E ∪ A ∪ {actor}, where E is evaluated on the post-commit graph so a batch
      can route through ops it creates itself,
  R6  newly added ops must be wired (directly or transitively) from the actor,
      so they land inside its descendant region at commit time,
  R7  the resulting graph stays a DAG with no dangling endpoints, ids are
      fresh, and referenced elements exist.

Violations carry the rule id and the offending element ids.
"""

from __future__ import annotations

from dataclasses import dataclass

from fot.errors import (
    OpNotRunningError,
    ValidationFailedError,
)
from fot.graph.model import (
    DONE,
    EMPTY,
    ExecutionGraph,
    MutationBatch,
    OperationNode,
    PLANNED,
    REMOVED,
    RUNNING,
    Thought,
)
from fot.graph.regions import ancestors, descendants, exclusive_descendants


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    elements: tuple[str, ...] = ()


def _v(out: list[Violation], rule: str, message: str, *elements: str) -> None:
    out.append(Violation(rule=rule, message=message, elements=tuple(elements)))


def validate_mutation(g: ExecutionGraph, m: MutationBatch) -> list[Violation]:
    """Return the violation list for ``m`` against ``g`` (empty list = OK)."""
    actor = g.ops.get(m.actor)
    if actor is None or actor.status != RUNNING:
        raise OpNotRunningError(m.actor)

    anc = ancestors(g, m.actor)
    desc = descendants(g, m.actor)
    excl = exclusive_descendants(g, m.actor)
    nonexcl = desc - excl
    live = g.live_op_ids()

    violations: list[Violation] = []
    structural_ok = True

    new_op_ids: set[str] = set()
    for node in m.add_ops:
        if node.id in g.ops or node.id in new_op_ids:
            _v(violations, "R7", f"op id {node.id!r} is not fresh", node.id)
            structural_ok = False
        if node.status != PLANNED:
            _v(violations, "R7", f"added op {node.id!r} must be planned", node.id)
            structural_ok = False
        new_op_ids.add(node.id)

    removed_ops = set(m.remove_ops)
    for op_id in m.remove_ops:
        if op_id not in live:
            _v(violations, "R7", f"remove_ops references unknown op {op_id!r}", op_id)
            structural_ok = False

    removed_conns = set(m.remove_conns)
    for conn_id in m.remove_conns:
        if conn_id not in g.conns:
            _v(violations, "R7", f"remove_conns references unknown connection {conn_id!r}", conn_id)
            structural_ok = False

    new_conn_ids: set[str] = set()
    for conn in m.add_conns:
        if conn.id in g.conns or conn.id in new_conn_ids:
            _v(violations, "R7", f"connection id {conn.id!r} is not fresh", conn.id)
            structural_ok = False
        new_conn_ids.add(conn.id)

    def known(op_id: str) -> bool:
        return op_id in live or op_id in new_op_ids

    def node_for(op_id: str) -> OperationNode | None:
        if op_id in new_op_ids:
            for cand in m.add_ops:
                if cand.id == op_id:
                    return cand
        node = g.ops.get(op_id)
        return node if node is not None and node.status != REMOVED else None

    # -- op removals ------------------------------------------------------
    for op_id in m.remove_ops:
        if op_id not in live:
            continue
        if op_id in anc:
            _v(violations, "R1", f"cannot remove ancestor op {op_id!r}", op_id)
        elif op_id in nonexcl:
            _v(violations, "R2", f"cannot remove non-exclusive descendant {op_id!r}", op_id)
        elif op_id not in excl:
            _v(violations, "R3", f"op {op_id!r} is outside the actor's exclusive region", op_id)
        elif g.ops[op_id].status != PLANNED:
            _v(violations, "R7", f"op {op_id!r} already started; tombstoning requires planned status", op_id)
            structural_ok = False

    # -- connection removals ----------------------------------------------
    for conn_id in m.remove_conns:
        conn = g.conns.get(conn_id)
        if conn is None:
            continue
        s, t = conn.source_op, conn.target_op
        if s in anc and t in anc:
            _v(violations, "R1", f"cannot remove connection {conn_id!r} between ancestors", conn_id)
        elif s in nonexcl or t in nonexcl:
            _v(violations, "R2", f"connection {conn_id!r} touches the non-exclusive region", conn_id)
        elif not (t in excl and (s in excl or s == m.actor)):
            _v(violations, "R3", f"connection {conn_id!r} is outside the actor's exclusive region", conn_id)

    # -- connection additions -----------------------------------------------
    for conn in m.add_conns:
        s, t = conn.source_op, conn.target_op
        if not known(s) or not known(t):
            _v(violations, "R7", f"connection {conn.id!r} has a dangling endpoint", conn.id)
            structural_ok = False
            continue
        if s in removed_ops or t in removed_ops:
            _v(violations, "R7", f"connection {conn.id!r} references an op removed by this batch", conn.id)
            structural_ok = False
            continue
        allowed_targets_new = t in excl or t in new_op_ids
        if s in anc and t in anc:
            _v(violations, "R1", f"connection {conn.id!r} would edit the ancestor subgraph", conn.id)
        elif s in anc:
            if not allowed_targets_new:
                _v(violations, "R4",
                   f"connection {conn.id!r} from an ancestor must target the exclusive region or a new op",
                   conn.id)
        elif s in nonexcl or t in nonexcl:
            _v(violations, "R2", f"connection {conn.id!r} touches the non-exclusive region", conn.id)
        elif s == m.actor or s in excl or s in new_op_ids:
            if not allowed_targets_new:
                _v(violations, "R3",
                   f"connection {conn.id!r} must target the exclusive region or a new op", conn.id)
        else:
            _v(violations, "R3", f"connection {conn.id!r} starts outside the actor's regions", conn.id)
        # Port discipline: targets use declared input ports; sources other than
        # the actor use declared output ports (the actor may mint new ones).
        target_node = node_for(t)
        if target_node is not None and conn.target[1] not in target_node.input_ports:
            _v(violations, "R7", f"connection {conn.id!r} targets unknown port {conn.target[1]!r}", conn.id)
            structural_ok = False
        source_node = node_for(s)
        if s != m.actor and source_node is not None and conn.source[1] not in source_node.output_ports:
            _v(violations, "R7", f"connection {conn.id!r} uses unknown source port {conn.source[1]!r}", conn.id)
            structural_ok = False

    # -- rewires ----------------------------------------------------------
    rewired: set[str] = set()
    for conn_id, new_source in m.rewire:
        conn = g.conns.get(conn_id)
        if conn is None or conn_id in removed_conns or conn_id in rewired:
            _v(violations, "R7", f"rewire references unknown or doubly-edited connection {conn_id!r}", conn_id)
            structural_ok = False
            continue
        rewired.add(conn_id)
        s, t = conn.source_op, conn.target_op
        if s in removed_ops or t in removed_ops:
            _v(violations, "R7", f"rewire of {conn_id!r} conflicts with an op removal in this batch", conn_id)
            structural_ok = False
            continue
        if s in anc and t in anc:
            _v(violations, "R1", f"rewire of {conn_id!r} would edit the ancestor subgraph", conn_id)
            continue
        if s in nonexcl:
            _v(violations, "R2", f"rewire of {conn_id!r} moves a connection owned by the non-exclusive region", conn_id)
            continue
        if not (s in excl or s == m.actor):
            _v(violations, "R5", f"rewired connection {conn_id!r} must start in E(actor) or at the actor", conn_id)
            continue
        if t not in desc:
            _v(violations, "R5", f"rewired connection {conn_id!r} must target a descendant", conn_id)
            continue
        ns_op, ns_port = new_source
        if not known(ns_op) or ns_op in removed_ops:
            _v(violations, "R7", f"rewire of {conn_id!r} onto unknown op {ns_op!r}", conn_id)
            structural_ok = False
            continue
        ns_node = node_for(ns_op)
        if ns_node is not None and ns_op != m.actor and ns_port not in ns_node.output_ports:
            _v(violations, "R7", f"rewire of {conn_id!r} onto unknown port {ns_port!r}", conn_id)
            structural_ok = False

    if violations:
        return violations

    # -- post-graph checks (simulate the applied batch) ----------------------
    post = _apply_unchecked(g.snapshot(), m)
    cycle = post.find_cycle()
    if cycle:
        _v(violations, "R7", f"batch would create a cycle: {cycle}", *cycle)
        return violations

    post_desc = descendants(post, m.actor)
    for op_id in sorted(new_op_ids):
        if op_id not in post_desc:
            _v(violations, "R6", f"added op {op_id!r} is not wired from the actor", op_id)

    post_excl: set[str] | None = None
    for conn_id, (ns_op, _) in m.rewire:
        if any(v.elements and conn_id in v.elements for v in violations):
            continue
        if ns_op == m.actor or ns_op in anc:
            continue
        if post_excl is None:
            post_excl = exclusive_descendants(post, m.actor)
        if ns_op not in post_excl:
            _v(violations, "R5",
               f"rewire of {conn_id!r} onto {ns_op!r}, which is outside E(actor) at commit time",
               conn_id)

    return violations


def _apply_unchecked(g: ExecutionGraph, m: MutationBatch) -> ExecutionGraph:
    """Apply ``m`` onto ``g`` in place without validation; ``g`` must be a scratch copy."""
    removed = set(m.remove_ops)
    new_ops = dict(g.ops)
    new_conns = dict(g.conns)

    for op_id in removed:
        tomb = new_ops[op_id].copy()
        tomb.status = REMOVED
        new_ops[op_id] = tomb
    if removed:
        new_conns = {
            cid: c
            for cid, c in new_conns.items()
            if c.source_op not in removed and c.target_op not in removed
        }
    for conn_id in m.remove_conns:
        new_conns.pop(conn_id, None)

    for node in m.add_ops:
        new_ops[node.id] = node.copy()

    actor_node = new_ops[m.actor].copy()
    actor_ports = list(actor_node.output_ports)
    for conn in m.add_conns:
        added = conn.copy()
        source = new_ops.get(added.source_op)
        if source is not None and source.status == DONE and source.recorded_outputs:
            added.payload = source.recorded_outputs.get(added.source[1], EMPTY)
        else:
            added.payload = EMPTY
        new_conns[added.id] = added
        if added.source_op == m.actor and added.source[1] not in actor_ports:
            actor_ports.append(added.source[1])
    actor_node.output_ports = tuple(actor_ports)
    new_ops[m.actor] = actor_node

    for conn_id, new_source in m.rewire:
        moved = new_conns[conn_id].copy()
        moved.source = (new_source[0], new_source[1])
        source = new_ops.get(moved.source_op)
        if source is not None and source.status == DONE and source.recorded_outputs:
            moved.payload = source.recorded_outputs.get(moved.source[1], EMPTY)
        else:
            moved.payload = EMPTY
        new_conns[conn_id] = moved

    g._install(new_ops, new_conns)
    return g


def apply_mutation(g: ExecutionGraph, m: MutationBatch) -> int:
    """Validate and commit ``m`` atomically; returns the new step index."""
    violations = validate_mutation(g, m)
    if violations:
        raise ValidationFailedError(violations)
    scratch = _apply_unchecked(g.snapshot(), m)
    return g._install(scratch.ops, scratch.conns)


def record_outputs(g: ExecutionGraph, op_id: str, outputs: dict[str, Thought]) -> int:
    """Module-level alias matching the graph contract; see ExecutionGraph."""
    return g.record_outputs(op_id, outputs)


__all__ = ["Violation", "validate_mutation", "apply_mutation", "record_outputs"]
