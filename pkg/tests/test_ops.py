from __future__ import annotations

import pytest

from fot.backends import MockBackend, RecordingBackend, ReplayBackend
from fot.canonical import canonical_bytes
from fot.errors import ConfigError, MalformedInputError
from fot.graph.model import OperationNode, Thought, ThoughtMeta
from fot.graph.mutation import validate_mutation
from fot.ops import (
    OpContext,
    OpFingerprint,
    derive_rng_seed,
    execute_op,
    is_dead,
    parse_plan,
)

from conftest import make_graph, run_chain_to


def thought(value, op_id="src", port="out") -> Thought:
    return Thought.make(f"{op_id}:{port}", value, ThoughtMeta(producer_op_id=op_id))


def ctx_with(backend=None, **kw) -> OpContext:
    return OpContext(run_seed=0, op_id="op/0", backend=backend, **kw)


def node(kind, config=None, out=("out",), inp=("in",)) -> OperationNode:
    return OperationNode(id="op/0", kind=kind, config=config or {}, input_ports=inp, output_ports=out)


# -- identity / input ----------------------------------------------------------

def test_identity_passes_payload_through():
    result = execute_op(node("identity"), [thought({"x": 1})], ctx_with())
    assert result.outputs["out"] == {"x": 1}
    assert result.mutation is None


def test_input_emits_configured_value():
    result = execute_op(node("input", {"value": [1, 2]}, inp=()), [], ctx_with())
    assert result.outputs["out"] == [1, 2]


# -- generate -------------------------------------------------------------------

def test_generate_scripted_single():
    backend = MockBackend()
    backend.add("2+2?", "4")
    cfg = {"prompt_text": "USER:\n{input}", "n": 1, "temperature": 0.0}
    result = execute_op(node("generate", cfg), [thought("2+2?")], ctx_with(backend))
    assert result.outputs["out"] == "4"


def test_generate_n_zero_is_config_error():
    with pytest.raises(ConfigError):
        execute_op(
            node("generate", {"prompt_text": "x", "n": 0}), [thought("y")], ctx_with(MockBackend())
        )


def test_generate_fanout_ports_carry_each_sample():
    backend = MockBackend()
    backend.add("go", ["a", "b", "c"])
    cfg = {"prompt_text": "USER:\ngo", "n": 3, "fanout": True, "temperature": 0.0}
    result = execute_op(
        node("generate", cfg, out=("t0", "t1", "t2")), [thought("ignored")], ctx_with(backend)
    )
    assert [result.outputs[f"t{i}"] for i in range(3)] == ["a", "b", "c"]


# -- score ------------------------------------------------------------------------

def test_score_sums_mapped_samples():
    backend = MockBackend()
    backend.add("rate it", ["sure", "sure", "sure"])
    cfg = {"prompt_text": "USER:\nrate it", "num_samples": 3}
    result = execute_op(node("score", cfg), [thought({"candidate": 1})], ctx_with(backend))
    assert result.outputs["out"]["_value"] == pytest.approx(60.0)


def test_score_all_impossible():
    backend = MockBackend()
    backend.add("rate it", ["impossible"] * 3)
    cfg = {"prompt_text": "USER:\nrate it", "num_samples": 3}
    result = execute_op(node("score", cfg), [thought({"candidate": 1})], ctx_with(backend))
    assert result.outputs["out"]["_value"] == pytest.approx(0.003)


def test_score_garbage_label_uses_default():
    backend = MockBackend()
    backend.add("rate it", "beats me")
    cfg = {"prompt_text": "USER:\nrate it", "num_samples": 1}
    result = execute_op(node("score", cfg), [thought({"candidate": 1})], ctx_with(backend))
    assert result.outputs["out"]["_value"] == 0.0


# -- filter_keep_top ----------------------------------------------------------------

def _valued(vals):
    return [thought({"cand": i, "_value": v}, op_id=f"s{i}") for i, v in enumerate(vals)]


def test_filter_keeps_top_k_by_value():
    result = execute_op(
        node("filter_keep_top", {"k": 2}, out=("top0", "top1")), _valued([3, 1, 2]), ctx_with()
    )
    assert result.outputs["top0"]["_value"] == 3
    assert result.outputs["top1"]["_value"] == 2


def test_filter_k_at_least_len_passes_all_in_input_order():
    result = execute_op(
        node("filter_keep_top", {"k": 5}, out=tuple(f"top{i}" for i in range(5))),
        _valued([1, 2]),
        ctx_with(),
    )
    assert result.outputs["top0"]["_value"] == 1
    assert result.outputs["top1"]["_value"] == 2
    assert is_dead(result.outputs["top2"])


def test_filter_output_is_subsequence_of_input_order():
    import random

    rng = random.Random(0)
    for _ in range(200):
        values = [rng.randint(0, 9) for _ in range(rng.randint(1, 10))]
        k = rng.randint(1, 8)
        result = execute_op(
            node("filter_keep_top", {"k": k}, out=tuple(f"top{i}" for i in range(k))),
            _valued(values),
            ctx_with(),
        )
        kept = [
            result.outputs[f"top{i}"]["cand"]
            for i in range(k)
            if not is_dead(result.outputs[f"top{i}"])
        ]
        # emitted as a subsequence of the input order
        assert kept == sorted(kept)
        # and the selected set is exactly the stable top-k
        ranked = sorted(range(len(values)), key=lambda i: (-values[i], i))[:k]
        assert sorted(kept) == sorted(ranked)


def test_filter_ties_keep_earlier_input():
    result = execute_op(
        node("filter_keep_top", {"k": 1}, out=("top0",)), _valued([5, 5, 5]), ctx_with()
    )
    assert result.outputs["top0"]["cand"] == 0


def test_filter_aggregate_samples_sums_groups():
    inputs = [
        thought({"cand": "a", "_value": 20.0}, op_id="v0"),
        thought({"cand": "a", "_value": 20.0}, op_id="v1"),
        thought({"cand": "b", "_value": 1.0}, op_id="v2"),
    ]
    result = execute_op(
        node("filter_keep_top", {"k": 1, "aggregate_samples": True}, out=("top0",)),
        inputs,
        ctx_with(),
    )
    assert result.outputs["top0"] == {"cand": "a", "_value": 40.0}


# -- split / aggregate / improve ------------------------------------------------------

def test_split_partitions_contiguously():
    digits = [i % 10 for i in range(128)]
    result = execute_op(
        node("split", {"n_parts": 8}, out=tuple(f"part{i}" for i in range(8))),
        [thought({"list": digits})],
        ctx_with(),
    )
    chunks = [result.outputs[f"part{i}"]["list"] for i in range(8)]
    assert all(len(c) == 16 for c in chunks)
    rejoined = [d for chunk in chunks for d in chunk]
    assert rejoined == digits


def test_split_malformed_payload_raises():
    with pytest.raises(MalformedInputError):
        execute_op(node("split", {"n_parts": 2}), [thought("nope")], ctx_with())


def test_aggregate_merges_two_sorted_lists():
    from fot.backends import SortingOracleBackend

    a = sorted([3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3])
    b = sorted([2, 7, 1, 8, 2, 8, 1, 8, 2, 8, 4, 5, 9, 0, 4, 5])
    result = execute_op(
        node("aggregate", {"prompt": "sort_merge"}),
        [thought({"list": a, "_ref": a}, op_id="l"), thought({"list": b, "_ref": b}, op_id="r")],
        ctx_with(SortingOracleBackend()),
    )
    assert result.outputs["out"]["list"] == sorted(a + b)
    assert sorted(result.outputs["out"]["_ref"]) == sorted(a + b)


def test_aggregate_arity_is_checked():
    with pytest.raises(MalformedInputError):
        execute_op(
            node("aggregate", {"prompt": "sort_merge"}),
            [thought({"list": [1]}, op_id="a"), thought({"list": [2]}, op_id="b"), thought({"list": [3]}, op_id="c")],
            ctx_with(MockBackend()),
        )


def test_improve_zero_rounds_is_identity():
    result = execute_op(
        node("improve", {"prompt": "sort_improve", "rounds": 0}),
        [thought({"list": [3, 1, 2], "_ref": [1, 2, 3]})],
        ctx_with(),
    )
    assert result.outputs["out"]["list"] == [3, 1, 2]


# -- expand ------------------------------------------------------------------------

def expand_node(plan):
    return OperationNode(
        id="op/0",
        kind="expand",
        config={"question": "root?", "plan": plan, "child_kind": "identity"},
        output_ports=("out",),
    )


def test_expand_two_items_adds_three_ops_four_conns():
    result = execute_op(expand_node(["a?", "b?"]), [], ctx_with())
    batch = result.mutation
    assert len(batch.add_ops) == 3  # two leaves plus a join
    assert len(batch.add_conns) == 4
    kinds = sorted(n.kind for n in batch.add_ops)
    assert kinds == ["identity", "identity", "join"]


def test_expand_empty_plan_falls_back_to_passthrough():
    result = execute_op(expand_node([]), [], ctx_with())
    batch = result.mutation
    assert len(batch.add_ops) == 1
    assert batch.add_ops[0].kind == "identity"
    assert len(batch.add_conns) == 1


def test_expand_batch_passes_validation_in_graph():
    g = make_graph([("a", "b")])
    g.ops["b"].kind = "expand"
    g.ops["b"].config = {"question": "root?", "plan": ["a?", "b?"], "child_kind": "identity"}
    run_chain_to(g, "b")
    ctx = OpContext(run_seed=0, op_id="b", graph_view=g.snapshot())
    result = execute_op(g.ops["b"].copy(), [], ctx)
    assert validate_mutation(g, result.mutation) == []


def test_parse_plan_is_lenient():
    assert parse_plan("noise {\"subquestions\": [\"x?\"]} trailing") == [
        {"q": "x?", "decompose": False}
    ]
    assert parse_plan("no json here") is None
    assert parse_plan("{\"other\": 1}") is None


# -- execution contract ---------------------------------------------------------------

def test_rng_seed_is_pure_function_of_run_seed_and_op_id():
    assert derive_rng_seed(7, "op/3") == derive_rng_seed(7, "op/3")
    assert derive_rng_seed(7, "op/3") != derive_rng_seed(8, "op/3")
    assert derive_rng_seed(7, "op/3") != derive_rng_seed(7, "op/4")


def test_fingerprint_tracks_kind_config_version():
    a = OpFingerprint.of(node("score", {"num_samples": 3}))
    b = OpFingerprint.of(node("score", {"num_samples": 3}))
    c = OpFingerprint.of(node("score", {"num_samples": 2}))
    assert a.hash() == b.hash()
    assert a.hash() != c.hash()


def test_missing_declared_port_is_an_error():
    from fot.ops import register_kind, OpResult

    @register_kind("test.broken")
    def broken(nd, inputs, ctx):
        return OpResult(outputs={})

    with pytest.raises(MalformedInputError):
        execute_op(node("test.broken", out=("out",)), [], ctx_with())


def test_replay_reexecution_is_byte_identical(tmp_path):
    cfg = {"prompt_text": "USER:\nsay {input}", "n": 2, "temperature": 1.0}
    inputs = [thought("hello")]
    record = tmp_path / "calls.jsonl"

    backend = MockBackend()
    backend.add("say hello", ["one", "two"])
    recorded = execute_op(node("generate", cfg), inputs, ctx_with(RecordingBackend(backend, record)))

    replayed = execute_op(node("generate", cfg), inputs, ctx_with(ReplayBackend(record)))
    assert canonical_bytes(replayed.outputs) == canonical_bytes(recorded.outputs)
    assert replayed.cost_usd == recorded.cost_usd
    assert replayed.duration_ms == recorded.duration_ms
