"""Dynamic question-decomposition demo.

The initial graph is a single expand operation holding the question. Running
it grows a tree: the backend's plan becomes answer leaves (plus nested expand
nodes for items marked decomposable) joined bottom-up by aggregation ops.
Fixtures script the decomposition so runs are fully deterministic.
"""

from __future__ import annotations

from typing import Any

from fot.backends.mock import MockBackend
from fot.graph.model import ExecutionGraph, OperationNode
from fot.ops import load_template, template_messages
from fot.schemes.base import SchemeSpec, register_scheme

ANSWER_CONFIG = {"prompt": "decomp_answer", "n": 1, "temperature": 0.0}


def build_dynamic_decomp(instance: dict, hp: dict | None = None) -> ExecutionGraph:
    question = instance["input"] if isinstance(instance.get("input"), str) else instance["input"]["question"]
    g = ExecutionGraph()
    g.add_op(
        OperationNode(
            id="root/0",
            kind="expand",
            config={
                "question": question,
                "prompt": "decomp_understand",
                "child_kind": "generate",
                "child_config": dict(ANSWER_CONFIG),
                "join_kind": "join",
            },
            output_ports=("out",),
        )
    )
    return g


def _plan_json(children: list[dict]) -> str:
    import json

    items = [
        {"q": child["q"], "decompose": bool(child.get("children"))} for child in children
    ]
    return json.dumps({"subquestions": items})


def make_decomp_backend(fixture: dict, latency_ms: int = 0) -> MockBackend:
    """Script a mock backend from a fixture tree.

    Fixture shape: {"q": question, "children": [...]} nested; leaves carry
    {"q", "answer"}.
    """
    backend = MockBackend(namespace="mock:decomp", latency_ms=latency_ms)

    def walk(node: dict) -> None:
        children = node.get("children") or []
        if children:
            backend.add(
                template_messages(load_template("decomp_understand"), {"question": node["q"]}),
                _plan_json(children),
            )
            for child in children:
                walk(child)
        else:
            backend.add(
                template_messages(load_template("decomp_understand"), {"question": node["q"]}),
                '{"subquestions": []}',
            )
            backend.add(
                template_messages(load_template("decomp_answer"), {"question": node["q"]}),
                node.get("answer", ""),
            )

    walk(fixture)
    return backend


def score_decomp(output: Any, instance: dict) -> float:
    expected = instance.get("ground_truth")
    if expected is None:
        return 0.0
    if isinstance(output, dict):
        # a passthrough (undecomposed) run answers with the question itself
        answer = output.get("answer", output.get("question"))
    else:
        answer = output
    return 1.0 if answer == expected else 0.0


register_scheme(
    SchemeSpec(
        name="dynamic-decomp",
        build=build_dynamic_decomp,
        scorer=score_decomp,
        direction="maximize",
    )
)
