"""Game-of-24 tree-search scheme.

Three propose/value/filter layers combine the four numbers down to one, a
judge step validates the assembled expression, and the final answer is only
reported as solved after an exact rational-arithmetic check; the backend's own
arithmetic is never trusted.
"""

from __future__ import annotations

from typing import Any

from fot import go24 as arith
from fot.backends.oracles import Go24OracleBackend
from fot.errors import MalformedInputError
from fot.graph.model import Connection, ExecutionGraph, MutationBatch, OperationNode
from fot.ops import (
    OpContext,
    OpResult,
    DEFAULT_VALUE_MAP,
    dead_value,
    is_dead,
    load_template,
    parse_go24_step,
    parse_label,
    register_kind,
    template_messages,
)
from fot.schemes.base import SchemeSpec, _IdAlloc, check_hp_range, register_scheme

DEFAULT_HP = {
    "num_examples": 8,
    "samples": (3, 3, 3),
    "keep_top": (5, 5),
}

HP_SPACE = [
    {"name": "num_examples", "kind": "int", "domain": [4, 12]},
    {"name": "samples_0", "kind": "int", "domain": [1, 5]},
    {"name": "samples_1", "kind": "int", "domain": [1, 5]},
    {"name": "samples_2", "kind": "int", "domain": [1, 5]},
    {"name": "keep_top_0", "kind": "int", "domain": [2, 7]},
    {"name": "keep_top_1", "kind": "int", "domain": [2, 7]},
]


def go24_check(numbers, expression: str) -> bool:
    """True iff the expression uses each input exactly once and equals 24."""
    return arith.check_expression(numbers, expression)


def _state_vars(state: dict) -> dict:
    return {"input_list": " ".join(state.get("left", []))}


@register_kind("go24.propose")
def op_go24_propose(node: OperationNode, inputs, ctx: OpContext) -> OpResult:
    """One proposal line per sample; each extends the state by one step."""
    cfg = node.config
    n = int(cfg["n"])
    state = inputs[0].value if inputs else None
    if not isinstance(state, dict) or is_dead(state):
        return OpResult(outputs={f"t{i}": dead_value("dead state") for i in range(n)})
    messages = template_messages(
        load_template("go24_propose"),
        {"num_examples": n, **_state_vars(state)},
    )
    outputs = {}
    for i in range(n):
        text = ctx.generate(messages, ordinal=i, temperature=float(cfg.get("temperature", 1.0)))
        parsed = parse_go24_step(text, state)
        outputs[f"t{i}"] = parsed if parsed is not None else dead_value("unparseable proposal")
    return OpResult(outputs=outputs)


@register_kind("go24.value")
def op_go24_value(node: OperationNode, inputs, ctx: OpContext) -> OpResult:
    """Label the state's remaining numbers and map to a numeric value."""
    cfg = node.config
    num_samples = int(cfg.get("num_samples", 1))
    base = int(cfg.get("sample_base", 0))
    value_map = {**DEFAULT_VALUE_MAP, **cfg.get("value_map", {})}
    state = inputs[0].value if inputs else None
    if not isinstance(state, dict) or is_dead(state):
        return OpResult(outputs={"out": dead_value("dead state")})
    messages = template_messages(
        load_template("go24_value"), {"left": " ".join(state.get("left", []))}
    )
    total = 0.0
    for s in range(num_samples):
        text = ctx.generate(messages, ordinal=base + s, temperature=float(cfg.get("temperature", 0.0)))
        label = parse_label(text)
        total += value_map[label] if label is not None else value_map["default"]
    return OpResult(outputs={"out": {**state, "_value": total}})


@register_kind("go24.judge")
def op_go24_judge(node: OperationNode, inputs, ctx: OpContext) -> OpResult:
    """Assemble the candidate's steps into a full expression and judge it."""
    state = inputs[0].value if inputs else None
    if not isinstance(state, dict) or is_dead(state):
        return OpResult(outputs={"out": {"_judgement": "impossible", "expression": None, "numbers": []}})
    expression = arith.assemble_expression(state.get("steps", []))
    numbers = state.get("numbers", [])
    if expression is None:
        return OpResult(
            outputs={"out": {**state, "_judgement": "impossible", "expression": None}}
        )
    messages = template_messages(
        load_template("go24_last_step_value"),
        {"left": " ".join(str(n) for n in numbers), "answer": f"{expression} = 24"},
    )
    text = ctx.generate(messages, ordinal=0, temperature=float(node.config.get("temperature", 0.0)))
    label = parse_label(text) or "impossible"
    return OpResult(outputs={"out": {**state, "_judgement": label, "expression": expression}})


@register_kind("go24.answer")
def op_go24_answer(node: OperationNode, inputs, ctx: OpContext) -> OpResult:
    """Exact local verification; never trusts the backend's arithmetic."""
    state = inputs[0].value if inputs else None
    if not isinstance(state, dict):
        raise MalformedInputError(f"{node.id}: missing judged candidate")
    numbers = state.get("numbers", [])
    expression = state.get("expression")
    solved = (
        not is_dead(state)
        and state.get("_judgement") == "sure"
        and expression is not None
        and go24_check(numbers, expression)
    )
    return OpResult(
        outputs={"out": {"solved": bool(solved), "expression": expression if solved else None, "numbers": numbers}}
    )


@register_kind("go24.expand")
def op_go24_expand(node: OperationNode, inputs, ctx: OpContext) -> OpResult:
    """Dynamic layer growth: emit a batch adding one propose/value/filter layer
    for the incoming state, then either per-survivor expand children (while
    more combining steps remain) or the judge and answer tail.

    Each expansion owns its own beam, so the search grows as a tree of layers
    rather than the static builder's global beam.
    """
    cfg = node.config
    n = int(cfg.get("num_examples", 4))
    samples = int(cfg.get("samples", 1))
    keep = int(cfg.get("keep_top", 2))
    state = cfg.get("state")
    if state is None and inputs:
        state = inputs[0].value
    if not isinstance(state, dict) or is_dead(state):
        return OpResult(outputs={"state": dead_value("dead state")}, mutation=MutationBatch(actor=node.id))

    left_count = len(state.get("left", []))
    batch = MutationBatch(actor=node.id)

    def add_node(kind: str, config: dict, input_ports, output_ports) -> str:
        op_id = ctx.new_op_id(kind)
        batch.add_ops.append(
            OperationNode(
                id=op_id, kind=kind, config=config,
                input_ports=input_ports, output_ports=output_ports,
            )
        )
        return op_id

    def connect(source: tuple[str, str], target: tuple[str, str]) -> None:
        batch.add_conns.append(Connection(id=ctx.new_conn_id(), source=source, target=target))

    if left_count <= 1:
        judge = add_node("go24.judge", {}, ("state",), ("out",))
        answer = add_node("go24.answer", {}, ("state",), ("out",))
        connect((node.id, "state"), (judge, "state"))
        connect((judge, "out"), (answer, "state"))
        return OpResult(outputs={"state": state}, mutation=batch)

    last_layer = left_count == 2
    layer_keep = 1 if last_layer else keep
    propose = add_node(
        "go24.propose", {"n": n, "temperature": 1.0},
        ("state",), tuple(f"t{i}" for i in range(n)),
    )
    connect((node.id, "state"), (propose, "state"))
    value_ids = []
    for j in range(n):
        for s in range(samples):
            vid = add_node(
                "go24.value", {"num_samples": 1, "sample_base": s}, ("state",), ("out",)
            )
            value_ids.append(vid)
            connect((propose, f"t{j}"), (vid, "state"))
    filt = add_node(
        "filter_keep_top",
        {"k": layer_keep, "aggregate_samples": True},
        ("in",), tuple(f"top{i}" for i in range(layer_keep)),
    )
    for vid in value_ids:
        connect((vid, "out"), (filt, "in"))

    if last_layer:
        judge = add_node("go24.judge", {}, ("state",), ("out",))
        answer = add_node("go24.answer", {}, ("state",), ("out",))
        connect((filt, "top0"), (judge, "state"))
        connect((judge, "out"), (answer, "state"))
    else:
        for i in range(layer_keep):
            expand = add_node(
                "go24.expand",
                {k: v for k, v in cfg.items() if k != "state"},
                ("state",), ("state",),
            )
            connect((filt, f"top{i}"), (expand, "state"))
    return OpResult(outputs={"state": state}, mutation=batch)


def build_dynamic_go24(instance: dict, hp: dict | None = None) -> ExecutionGraph:
    """Single-op initial graph; execution grows the search tree layer by layer."""
    hp = hp or {}
    numbers = [int(x) for x in (instance["input"] if "input" in instance else instance["numbers"])]
    state = {
        "numbers": numbers,
        "steps": [],
        "left": [arith.fmt_number(arith.parse_number(str(x))) for x in numbers],
    }
    g = ExecutionGraph()
    g.add_op(
        OperationNode(
            id="root/0",
            kind="go24.expand",
            config={
                "state": state,
                "num_examples": int(hp.get("num_examples", 4)),
                "samples": int(hp.get("samples", 1)),
                "keep_top": int(hp.get("keep_top", 2)),
            },
            output_ports=("state",),
        )
    )
    return g


def extract_dynamic_go24(g: ExecutionGraph):
    answers = [
        node.recorded_outputs["out"].value
        for node in sorted(g.live_ops(), key=lambda n: n.id)
        if node.kind == "go24.answer" and node.recorded_outputs
    ]
    for value in answers:
        if isinstance(value, dict) and value.get("solved"):
            return value
    return answers[0] if answers else None


def _hp_tuple(hp: dict, key: str, flat_prefix: str, count: int):
    """Accept both tuple-style ("samples") and flat ("samples_0") assignments."""
    if any(f"{flat_prefix}{i}" in hp for i in range(count)):
        base = hp.get(key, DEFAULT_HP[key])
        return tuple(int(hp.get(f"{flat_prefix}{i}", base[i])) for i in range(count))
    return tuple(int(x) for x in hp.get(key, DEFAULT_HP[key]))


def build_tot_go24(instance: dict, hp: dict | None = None) -> ExecutionGraph:
    """Initial graph: three propose/value/filter layers, judge, answer."""
    hp = {**DEFAULT_HP, **(hp or {})}
    numbers = [int(x) for x in (instance["input"] if "input" in instance else instance["numbers"])]
    if len(numbers) != 4:
        raise MalformedInputError("game-of-24 instances carry exactly four numbers")
    num_examples = int(hp["num_examples"])
    samples = _hp_tuple(hp, "samples", "samples_", 3)
    keep_top = _hp_tuple(hp, "keep_top", "keep_top_", 2)
    check_hp_range("num_examples", num_examples, 4, 12)
    for i, s in enumerate(samples):
        check_hp_range(f"samples[{i}]", s, 1, 5)
    for i, k in enumerate(keep_top):
        check_hp_range(f"keep_top[{i}]", k, 2, 7)

    alloc = _IdAlloc()
    g = ExecutionGraph()

    state = {
        "numbers": numbers,
        "steps": [],
        "left": [arith.fmt_number(arith.parse_number(str(n))) for n in numbers],
    }
    inp = g.add_op(
        OperationNode(id=alloc.op(), kind="input", config={"value": state}, output_ports=("out",))
    )

    def propose_layer(source_ports: list[tuple[str, str]], n_samples: int, keep: int):
        """One layer: a propose per source, per-sample values, one grouped filter."""
        filter_id = None
        value_ids = []
        propose_ids = []
        for src_op, src_port in source_ports:
            pid = alloc.op()
            propose_ids.append(pid)
            g.add_op(
                OperationNode(
                    id=pid,
                    kind="go24.propose",
                    config={"n": num_examples, "temperature": 1.0},
                    input_ports=("state",),
                    output_ports=tuple(f"t{i}" for i in range(num_examples)),
                )
            )
            g.add_conn(Connection(id=alloc.conn(), source=(src_op, src_port), target=(pid, "state")))
            for j in range(num_examples):
                for s in range(n_samples):
                    vid = alloc.op()
                    value_ids.append(vid)
                    g.add_op(
                        OperationNode(
                            id=vid,
                            kind="go24.value",
                            config={"num_samples": 1, "sample_base": s},
                            input_ports=("state",),
                            output_ports=("out",),
                        )
                    )
                    g.add_conn(
                        Connection(id=alloc.conn(), source=(pid, f"t{j}"), target=(vid, "state"))
                    )
        filter_id = alloc.op()
        g.add_op(
            OperationNode(
                id=filter_id,
                kind="filter_keep_top",
                config={"k": keep, "aggregate_samples": True},
                input_ports=("in",),
                output_ports=tuple(f"top{i}" for i in range(keep)),
            )
        )
        for vid in value_ids:
            g.add_conn(Connection(id=alloc.conn(), source=(vid, "out"), target=(filter_id, "in")))
        return filter_id, [(filter_id, f"top{i}") for i in range(keep)]

    f1, survivors = propose_layer([(inp.id, "out")], samples[0], keep_top[0])
    f2, survivors = propose_layer(survivors, samples[1], keep_top[1])
    f3, survivors = propose_layer(survivors, samples[2], 1)

    judge = g.add_op(
        OperationNode(
            id=alloc.op(), kind="go24.judge", input_ports=("state",), output_ports=("out",)
        )
    )
    g.add_conn(Connection(id=alloc.conn(), source=survivors[0], target=(judge.id, "state")))
    answer = g.add_op(
        OperationNode(
            id=alloc.op(), kind="go24.answer", input_ports=("state",), output_ports=("out",)
        )
    )
    g.add_conn(Connection(id=alloc.conn(), source=(judge.id, "out"), target=(answer.id, "state")))
    return g


def score_go24(output: Any, instance: dict) -> float:
    if not isinstance(output, dict) or not output.get("solved"):
        return 0.0
    numbers = instance["input"] if "input" in instance else instance["numbers"]
    return 1.0 if go24_check(numbers, output.get("expression") or "") else 0.0


register_scheme(
    SchemeSpec(
        name="tot-go24",
        build=build_tot_go24,
        scorer=score_go24,
        direction="maximize",
        default_hp=dict(DEFAULT_HP),
        hp_space=HP_SPACE,
        make_oracle_backend=lambda **kw: Go24OracleBackend(**kw),
    )
)

register_scheme(
    SchemeSpec(
        name="tot-go24-dynamic",
        build=build_dynamic_go24,
        scorer=score_go24,
        direction="maximize",
        default_hp={"num_examples": 4, "samples": 1, "keep_top": 2},
        hp_space=[
            {"name": "num_examples", "kind": "int", "domain": [4, 12]},
            {"name": "samples", "kind": "int", "domain": [1, 5]},
            {"name": "keep_top", "kind": "int", "domain": [2, 7]},
        ],
        extract=extract_dynamic_go24,
        make_oracle_backend=lambda **kw: Go24OracleBackend(**kw),
    )
)
