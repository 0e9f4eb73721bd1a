from __future__ import annotations

import random

import pytest

from fot.errors import OpNotRunningError, ValidationFailedError
from fot.graph.model import (
    Connection,
    ExecutionGraph,
    MutationBatch,
    OperationNode,
    REMOVED,
)
from fot.graph.mutation import apply_mutation, validate_mutation
from fot.graph.regions import ancestors, descendants, exclusive_descendants
from fot.graph.serialize import canonical_serialize

from conftest import make_graph, run_chain_to
from oracles import random_dag


def new_op(op_id: str, kind: str = "stub") -> OperationNode:
    return OperationNode(id=op_id, kind=kind, input_ports=("in",), output_ports=("out",))


def rules_of(violations) -> set[str]:
    return {v.rule for v in violations}


# -- basic accept/reject fixtures ---------------------------------------------

def test_add_child_is_ok():
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    batch = MutationBatch(
        actor="b",
        add_ops=[new_op("b/0#stub")],
        add_conns=[Connection(id="b/c0", source=("b", "out"), target=("b/0#stub", "in"))],
    )
    assert validate_mutation(g, batch) == []
    step_before = g.step
    assert apply_mutation(g, batch) == step_before + 1
    assert "b/0#stub" in g.live_op_ids()


def test_actor_must_be_running():
    g = make_graph([("a", "b")])
    with pytest.raises(OpNotRunningError):
        validate_mutation(g, MutationBatch(actor="b"))


def test_remove_connection_between_ancestors_is_r1():
    g = make_graph([("a", "b"), ("b", "c")])
    run_chain_to(g, "c")
    batch = MutationBatch(actor="c", remove_conns=["c0"])  # a->b
    assert rules_of(validate_mutation(g, batch)) == {"R1"}


def test_remove_ancestor_op_is_r1():
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    assert rules_of(validate_mutation(g, MutationBatch(actor="b", remove_ops=["a"]))) == {"R1"}


def test_diamond_remove_nonexclusive_descendant_is_r2():
    g = make_graph([("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])
    run_chain_to(g, "b")
    assert exclusive_descendants(g, "b") == set()
    batch = MutationBatch(actor="b", remove_ops=["d"])
    assert rules_of(validate_mutation(g, batch)) == {"R2"}


def test_self_removal_is_r3():
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    assert rules_of(validate_mutation(g, MutationBatch(actor="b", remove_ops=["b"]))) == {"R3"}


def test_remove_invisible_op_is_r3():
    g = make_graph([("a", "b")], extra_nodes=("x",))
    run_chain_to(g, "b")
    assert rules_of(validate_mutation(g, MutationBatch(actor="b", remove_ops=["x"]))) == {"R3"}


def test_ancestor_edge_must_target_exclusive_or_new_r4():
    g = make_graph([("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])
    run_chain_to(g, "b")
    batch = MutationBatch(
        actor="b",
        add_conns=[Connection(id="b/c0", source=("a", "out"), target=("d", "in"))],
    )
    assert rules_of(validate_mutation(g, batch)) == {"R4"}


def test_ancestor_edge_to_new_op_is_allowed():
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    batch = MutationBatch(
        actor="b",
        add_ops=[new_op("b/0#stub")],
        add_conns=[
            Connection(id="b/c0", source=("b", "out"), target=("b/0#stub", "in")),
            Connection(id="b/c1", source=("a", "out"), target=("b/0#stub", "in")),
        ],
    )
    assert validate_mutation(g, batch) == []
    # the ancestor edge carries the ancestor's recorded thought immediately
    apply_mutation(g, batch)
    assert g.conns["b/c1"].payload is not None


def test_rewire_to_outside_source_is_r5():
    g = make_graph([("a", "b"), ("b", "c"), ("c", "d"), ("a", "e"), ("e", "d")])
    run_chain_to(g, "b")
    assert "c" in exclusive_descendants(g, "b")
    batch = MutationBatch(actor="b", rewire=[("c2", ("e", "out"))])  # c->d moved to e
    assert rules_of(validate_mutation(g, batch)) == {"R5"}


def test_rewire_source_must_be_exclusive_r5():
    g = make_graph([("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"), ("d", "e")])
    run_chain_to(g, "b")
    batch = MutationBatch(actor="b", rewire=[("c4", ("b", "out"))])  # d->e, d is non-exclusive
    assert rules_of(validate_mutation(g, batch)) == {"R2"}


def test_rewire_onto_new_op_in_batch_is_allowed():
    # b -> c exists; b inserts a joiner j and moves the start of b->c onto it.
    g = make_graph([("a", "b"), ("b", "c")])
    run_chain_to(g, "b")
    batch = MutationBatch(
        actor="b",
        add_ops=[new_op("b/0#join")],
        add_conns=[Connection(id="b/c0", source=("b", "out"), target=("b/0#join", "in"))],
        rewire=[("c1", ("b/0#join", "out"))],
    )
    assert validate_mutation(g, batch) == []
    apply_mutation(g, batch)
    assert g.conns["c1"].source == ("b/0#join", "out")


def test_orphan_new_op_is_r6():
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    batch = MutationBatch(actor="b", add_ops=[new_op("b/0#stub")])
    assert rules_of(validate_mutation(g, batch)) == {"R6"}


def test_cycle_is_r7():
    g = make_graph([("a", "b"), ("b", "c"), ("c", "d")])
    run_chain_to(g, "b")
    batch = MutationBatch(
        actor="b",
        add_conns=[Connection(id="b/c0", source=("d", "out"), target=("c", "in"))],
    )
    assert "R7" in rules_of(validate_mutation(g, batch))


def test_unknown_remove_target_is_r7():
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    assert rules_of(validate_mutation(g, MutationBatch(actor="b", remove_ops=["nope"]))) == {"R7"}


def test_tombstoned_id_is_never_reused():
    g = make_graph([("a", "b"), ("b", "c")])
    run_chain_to(g, "b")
    apply_mutation(g, MutationBatch(actor="b", remove_ops=["c"]))
    assert g.ops["c"].status == REMOVED
    batch = MutationBatch(
        actor="b",
        add_ops=[OperationNode(id="c", kind="stub", input_ports=("in",))],
        add_conns=[Connection(id="b/c9", source=("b", "out"), target=("c", "in"))],
    )
    assert "R7" in rules_of(validate_mutation(g, batch))


# -- apply semantics ----------------------------------------------------------

def test_apply_grows_counts_and_step():
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    before_ops = len(g.live_op_ids())
    before_conns = len(g.conns)
    step = g.step
    batch = MutationBatch(
        actor="b",
        add_ops=[new_op("b/0#x"), new_op("b/1#y")],
        add_conns=[
            Connection(id="b/c0", source=("b", "out"), target=("b/0#x", "in")),
            Connection(id="b/c1", source=("b/0#x", "out"), target=("b/1#y", "in")),
        ],
    )
    apply_mutation(g, batch)
    assert len(g.live_op_ids()) == before_ops + 2
    assert len(g.conns) == before_conns + 2
    assert g.step == step + 1


def test_empty_batch_increments_step_only():
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    before = canonical_serialize(g)
    step = g.step
    apply_mutation(g, MutationBatch(actor="b"))
    assert g.step == step + 1
    g.step = step
    assert canonical_serialize(g) == before


def test_remove_planned_subtree_tombstones_and_keeps_dag():
    g = make_graph([("a", "b"), ("b", "c"), ("c", "d"), ("c", "e")])
    run_chain_to(g, "b")
    batch = MutationBatch(actor="b", remove_ops=["c", "d", "e"])
    assert validate_mutation(g, batch) == []
    apply_mutation(g, batch)
    assert g.live_op_ids() == {"a", "b"}
    for tomb in ("c", "d", "e"):
        assert g.ops[tomb].status == REMOVED
    assert all(
        c.source_op in g.live_op_ids() and c.target_op in g.live_op_ids()
        for c in g.conns.values()
    )
    g.check_invariants()


def test_apply_atomicity_under_injected_failure(monkeypatch):
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    before = canonical_serialize(g)
    batch = MutationBatch(
        actor="b",
        add_ops=[new_op("b/0#x")],
        add_conns=[Connection(id="b/c0", source=("b", "out"), target=("b/0#x", "in"))],
    )

    boom = RuntimeError("injected")
    real_install = ExecutionGraph._install

    def failing_install(self, ops, conns):
        if self is g:
            raise boom
        return real_install(self, ops, conns)

    monkeypatch.setattr(ExecutionGraph, "_install", failing_install)
    with pytest.raises(RuntimeError):
        apply_mutation(g, batch)
    monkeypatch.undo()
    assert canonical_serialize(g) == before


def test_validation_failure_raises_with_violations():
    g = make_graph([("a", "b")])
    run_chain_to(g, "b")
    with pytest.raises(ValidationFailedError) as err:
        apply_mutation(g, MutationBatch(actor="b", remove_ops=["a"]))
    assert err.value.violations[0].rule == "R1"


# -- fuzzing -------------------------------------------------------------------

def _running_fixture(seed: int) -> tuple[ExecutionGraph, str]:
    """Random DAG with a consistent status assignment and one running actor."""
    rng = random.Random(seed)
    g = random_dag(rng.randint(4, 9), 0.35, seed)
    candidates = sorted(g.live_op_ids())
    actor = rng.choice(candidates)
    run_chain_to(g, actor)
    return g, actor


def random_batch(g: ExecutionGraph, actor: str, rng: random.Random) -> MutationBatch:
    """Adversarial batches: edits reference arbitrary graph elements."""
    live = sorted(g.live_op_ids())
    batch = MutationBatch(actor=actor)
    serial = rng.randrange(10_000)
    for i in range(rng.randint(0, 2)):
        batch.add_ops.append(new_op(f"{actor}/f{serial}_{i}#stub"))
    if rng.random() < 0.5 and live:
        batch.remove_ops = rng.sample(live, k=min(len(live), rng.randint(1, 2)))
    new_ids = [n.id for n in batch.add_ops]
    sources = live + new_ids + [actor]
    targets = live + new_ids
    for i in range(rng.randint(0, 3)):
        batch.add_conns.append(
            Connection(
                id=f"{actor}/fc{serial}_{i}",
                source=(rng.choice(sources), "out"),
                target=(rng.choice(targets), "in"),
            )
        )
    conn_ids = sorted(g.conns)
    if conn_ids and rng.random() < 0.4:
        batch.remove_conns = rng.sample(conn_ids, k=min(len(conn_ids), rng.randint(1, 2)))
    if conn_ids and rng.random() < 0.4:
        batch.rewire = [(rng.choice(conn_ids), (rng.choice(sources), "out"))]
    return batch


def plausible_batch(g: ExecutionGraph, actor: str, rng: random.Random) -> MutationBatch:
    """Batches biased toward the actor's legal region (mostly accepted)."""
    from fot.graph.regions import ancestors, exclusive_descendants

    excl = sorted(exclusive_descendants(g, actor))
    anc = sorted(ancestors(g, actor))
    batch = MutationBatch(actor=actor)
    serial = rng.randrange(10_000)
    new_ids: list[str] = []
    for i in range(rng.randint(0, 3)):
        node = new_op(f"{actor}/p{serial}_{i}#stub")
        batch.add_ops.append(node)
        new_ids.append(node.id)
    # wire every new op from the actor, an exclusive descendant, or an earlier new op
    for i, new_id in enumerate(new_ids):
        anchor_pool = [actor] + excl + new_ids[:i]
        source = rng.choice(anchor_pool)
        batch.add_conns.append(
            Connection(
                id=f"{actor}/pc{serial}_{i}",
                source=(source, "out"),
                target=(new_id, "in"),
            )
        )
        # occasionally add a second feed from a done ancestor
        if anc and rng.random() < 0.3:
            batch.add_conns.append(
                Connection(
                    id=f"{actor}/pa{serial}_{i}",
                    source=(rng.choice(anc), "out"),
                    target=(new_id, "in"),
                )
            )
    if excl and rng.random() < 0.4:
        batch.remove_ops = rng.sample(excl, k=min(len(excl), rng.randint(1, 2)))
    removable = [
        cid
        for cid, c in g.conns.items()
        if c.target_op in excl and (c.source_op in excl or c.source_op == actor)
        and c.source_op not in batch.remove_ops and c.target_op not in batch.remove_ops
    ]
    if removable and rng.random() < 0.3:
        batch.remove_conns = [rng.choice(sorted(removable))]
    rewirable = [
        cid
        for cid, c in g.conns.items()
        if (c.source_op in excl or c.source_op == actor)
        and cid not in batch.remove_conns
        and c.source_op not in batch.remove_ops and c.target_op not in batch.remove_ops
    ]
    if rewirable and rng.random() < 0.3:
        cid = rng.choice(sorted(rewirable))
        pool = [actor] + excl + anc + new_ids
        batch.rewire = [(cid, (rng.choice(pool), "out"))]
    return batch


@pytest.mark.parametrize("chunk", range(4))
def test_fuzz_accepted_batches_preserve_invariants(chunk):
    rng = random.Random(9000 + chunk)
    accepted = 0
    for i in range(500):
        g, actor = _running_fixture(chunk * 500 + i)
        batch = random_batch(g, actor, rng)
        anc = ancestors(g, actor)
        nonexcl = descendants(g, actor) - exclusive_descendants(g, actor)
        pre_ancestor_conns = {
            cid for cid, c in g.conns.items() if c.source_op in anc and c.target_op in anc
        }
        pre_nonexcl_conns = {
            cid: c.source
            for cid, c in g.conns.items()
            if c.source_op in nonexcl and c.target_op in nonexcl
        }
        violations = validate_mutation(g, batch)
        if violations:
            continue
        accepted += 1
        apply_mutation(g, batch)
        g.check_invariants()
        # ancestor-region elements untouched
        for op_id in anc:
            assert g.ops[op_id].status != REMOVED
        for cid in pre_ancestor_conns:
            assert cid in g.conns
        # non-exclusive region: ops alive, inner connections not removed or re-sourced
        for op_id in nonexcl:
            assert g.ops[op_id].status != REMOVED
        for cid, source in pre_nonexcl_conns.items():
            assert cid in g.conns
            assert g.conns[cid].source == source
    assert accepted > 0
