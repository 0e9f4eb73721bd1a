"""Execution-graph data model, region calculus, mutation rules, serialization."""

from fot.graph.model import (
    EMPTY,
    Connection,
    ExecutionGraph,
    MutationBatch,
    OperationNode,
    ReasoningGraph,
    Thought,
    ThoughtMeta,
    PLANNED,
    READY,
    RUNNING,
    DONE,
    REMOVED,
)
from fot.graph.regions import (
    ancestors,
    descendants,
    exclusive_descendants,
    visible_subgraph,
)
from fot.graph.mutation import Violation, apply_mutation, validate_mutation, record_outputs
from fot.graph.serialize import (
    canonical_parse,
    canonical_serialize,
    derive_reasoning_graph,
    serialize_reasoning_graph,
    to_dot,
)

__all__ = [
    "EMPTY",
    "Connection",
    "ExecutionGraph",
    "MutationBatch",
    "OperationNode",
    "ReasoningGraph",
    "Thought",
    "ThoughtMeta",
    "PLANNED",
    "READY",
    "RUNNING",
    "DONE",
    "REMOVED",
    "ancestors",
    "descendants",
    "exclusive_descendants",
    "visible_subgraph",
    "Violation",
    "apply_mutation",
    "validate_mutation",
    "record_outputs",
    "canonical_parse",
    "canonical_serialize",
    "derive_reasoning_graph",
    "serialize_reasoning_graph",
    "to_dot",
]
