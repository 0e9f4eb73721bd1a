"""List-sorting schemes.

The divide-and-conquer variant splits the 128-digit list into 8 chunks, sorts
each chunk in several parallel branches, keeps the best of each, then merges
neighbours pairwise over three stages (8 -> 4 -> 2 -> 1) before a sequence of
global repair rounds. The iterative variant sorts the whole list in parallel
branches and repeatedly repairs the best candidate.

Candidates carry the exact multiset they are meant to sort under the
reserved "_ref" key, so keep-best stages can count mistakes locally.
"""

from __future__ import annotations

from typing import Any

from fot.backends.oracles import SortingOracleBackend
from fot.errors import MalformedInputError
from fot.graph.model import Connection, ExecutionGraph, OperationNode
from fot.ops import (
    OpContext,
    OpResult,
    dead_value,
    is_dead,
    live_inputs,
    load_template,
    parse_digit_list,
    register_kind,
    template_messages,
)
from fot.schemes.base import SchemeSpec, _IdAlloc, check_hp_range, register_scheme

GOT_DEFAULT_HP = {"sort_branches": 5, "merge_branches": 10, "improve_rounds": 1}
GOT_HP_SPACE = [
    {"name": "sort_branches", "kind": "int", "domain": [1, 10]},
    {"name": "merge_branches", "kind": "int", "domain": [5, 25]},
    {"name": "improve_rounds", "kind": "int", "domain": [1, 3]},
]

TOT_DEFAULT_HP = {"num_branches": 20, "improvement_levels": 4}
TOT_HP_SPACE = [
    {"name": "num_branches", "kind": "int", "domain": [5, 20]},
    {"name": "improvement_levels", "kind": "int", "domain": [1, 6]},
]


def count_mistakes(input_list: list[int], output_list: list[int]) -> int:
    """Adjacent inversions plus per-digit count differences."""
    inversions = sum(
        1 for a, b in zip(output_list, output_list[1:]) if a > b
    )
    diff = 0
    for digit in range(10):
        diff += abs(input_list.count(digit) - output_list.count(digit))
    return inversions + diff


@register_kind("sort.generate")
def op_sort_generate(node: OperationNode, inputs, ctx: OpContext) -> OpResult:
    """One sorted candidate for the input list (one branch)."""
    cfg = node.config
    base = int(cfg.get("sample_base", 0))
    value = inputs[0].value if inputs else None
    if is_dead(value):
        return OpResult(outputs={"out": dead_value("dead input")})
    items = value.get("list") if isinstance(value, dict) else value
    if not isinstance(items, list):
        raise MalformedInputError(f"{node.id}: expected a list payload")
    ref = list(value.get("_ref", items)) if isinstance(value, dict) else list(items)
    messages = template_messages(
        load_template("sort_generate"),
        {"input_list": "[" + ", ".join(str(v) for v in items) + "]"},
    )
    text = ctx.generate(messages, ordinal=base, temperature=float(cfg.get("temperature", 1.0)))
    parsed = parse_digit_list(text)
    if parsed is None:
        return OpResult(outputs={"out": dead_value("unparseable sort output")})
    return OpResult(outputs={"out": {"list": parsed, "_ref": ref}})


@register_kind("sort.keep_best")
def op_sort_keep_best(node: OperationNode, inputs, ctx: OpContext) -> OpResult:
    """Keep the candidate with the fewest mistakes against its reference;
    earlier inputs win ties."""
    best = None
    best_mistakes = None
    for t in live_inputs(inputs):
        value = t.value
        if not (isinstance(value, dict) and "list" in value):
            continue
        ref = value.get("_ref", value["list"])
        mistakes = count_mistakes(list(ref), list(value["list"]))
        if best_mistakes is None or mistakes < best_mistakes:
            best = value
            best_mistakes = mistakes
    if best is None:
        return OpResult(outputs={"out": dead_value("no live candidates")})
    return OpResult(outputs={"out": {**best, "_mistakes": best_mistakes}})


def _input_op(g: ExecutionGraph, alloc: _IdAlloc, digits: list[int]) -> OperationNode:
    return g.add_op(
        OperationNode(
            id=alloc.op(),
            kind="input",
            config={"value": {"list": digits, "_ref": digits}},
            output_ports=("out",),
        )
    )


def _branch_stage(g, alloc, sources, kind, config, branches):
    """``branches`` parallel ops fed by ``sources`` plus one keep-best."""
    branch_ids = []
    for b in range(branches):
        bid = alloc.op()
        branch_ids.append(bid)
        g.add_op(
            OperationNode(
                id=bid, kind=kind, config={**config, "sample_base": b},
                input_ports=("in",), output_ports=("out",),
            )
        )
        for src_op, src_port in sources:
            g.add_conn(Connection(id=alloc.conn(), source=(src_op, src_port), target=(bid, "in")))
    keep = alloc.op()
    g.add_op(
        OperationNode(
            id=keep, kind="sort.keep_best", input_ports=("in",), output_ports=("out",)
        )
    )
    for bid in branch_ids:
        g.add_conn(Connection(id=alloc.conn(), source=(bid, "out"), target=(keep, "in")))
    return keep


def build_got_sorting(instance: dict, hp: dict | None = None) -> ExecutionGraph:
    """split(8) -> per-chunk sort branches + keep-best -> 3 pairwise merge
    stages -> sequential repair rounds."""
    hp = {**GOT_DEFAULT_HP, **(hp or {})}
    sort_branches = int(hp["sort_branches"])
    merge_branches = int(hp["merge_branches"])
    improve_rounds = int(hp["improve_rounds"])
    check_hp_range("sort_branches", sort_branches, 1, 10)
    check_hp_range("merge_branches", merge_branches, 5, 25)
    check_hp_range("improve_rounds", improve_rounds, 1, 3)
    digits = [int(d) for d in instance["input"]]

    g = ExecutionGraph()
    alloc = _IdAlloc()
    inp = _input_op(g, alloc, digits)
    split = g.add_op(
        OperationNode(
            id=alloc.op(), kind="split", config={"n_parts": 8},
            input_ports=("in",), output_ports=tuple(f"part{i}" for i in range(8)),
        )
    )
    g.add_conn(Connection(id=alloc.conn(), source=(inp.id, "out"), target=(split.id, "in")))

    level = [
        _branch_stage(g, alloc, [(split.id, f"part{i}")], "sort.generate", {}, sort_branches)
        for i in range(8)
    ]
    while len(level) > 1:
        level = [
            _branch_stage(
                g, alloc,
                [(level[i], "out"), (level[i + 1], "out")],
                "aggregate", {"prompt": "sort_merge"}, merge_branches,
            )
            for i in range(0, len(level), 2)
        ]

    current = level[0]
    for _ in range(improve_rounds):
        improve = alloc.op()
        g.add_op(
            OperationNode(
                id=improve, kind="improve",
                config={"prompt": "sort_improve", "rounds": 1},
                input_ports=("in",), output_ports=("out",),
            )
        )
        g.add_conn(Connection(id=alloc.conn(), source=(current, "out"), target=(improve, "in")))
        current = improve
    return g


def build_tot_sorting(instance: dict, hp: dict | None = None) -> ExecutionGraph:
    """Parallel full-list sorts, then repeated branch-and-repair rounds."""
    hp = {**TOT_DEFAULT_HP, **(hp or {})}
    num_branches = int(hp["num_branches"])
    improvement_levels = int(hp["improvement_levels"])
    check_hp_range("num_branches", num_branches, 5, 20)
    check_hp_range("improvement_levels", improvement_levels, 1, 6)
    digits = [int(d) for d in instance["input"]]

    g = ExecutionGraph()
    alloc = _IdAlloc()
    inp = _input_op(g, alloc, digits)
    best = _branch_stage(g, alloc, [(inp.id, "out")], "sort.generate", {}, num_branches)
    for _ in range(improvement_levels):
        best = _branch_stage(
            g, alloc, [(best, "out")],
            "improve", {"prompt": "sort_improve", "rounds": 1}, num_branches,
        )
    return g


def score_sorting(output: Any, instance: dict) -> float:
    digits = [int(d) for d in instance["input"]]
    if not (isinstance(output, dict) and isinstance(output.get("list"), list)):
        return float(count_mistakes(digits, []))
    return float(count_mistakes(digits, [int(d) for d in output["list"]]))


register_scheme(
    SchemeSpec(
        name="got-sorting",
        build=build_got_sorting,
        scorer=score_sorting,
        direction="minimize",
        default_hp=dict(GOT_DEFAULT_HP),
        hp_space=GOT_HP_SPACE,
        make_oracle_backend=lambda **kw: SortingOracleBackend(**kw),
    )
)

register_scheme(
    SchemeSpec(
        name="tot-sorting",
        build=build_tot_sorting,
        scorer=score_sorting,
        direction="minimize",
        default_hp=dict(TOT_DEFAULT_HP),
        hp_space=TOT_HP_SPACE,
        make_oracle_backend=lambda **kw: SortingOracleBackend(**kw),
    )
)
