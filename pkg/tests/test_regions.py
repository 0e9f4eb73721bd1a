from __future__ import annotations

import pytest

from fot.errors import UnknownOperationError
from fot.graph.regions import ancestors, descendants, exclusive_descendants, visible_subgraph

from conftest import make_graph
from oracles import (
    brute_ancestors,
    brute_descendants,
    brute_exclusive_descendants,
    random_dag,
)


def test_chain_ancestors_descendants():
    g = make_graph([("a", "b"), ("b", "c")])
    assert ancestors(g, "c") == {"a", "b"}
    assert ancestors(g, "a") == set()
    assert descendants(g, "a") == {"b", "c"}
    assert descendants(g, "c") == set()


def test_isolated_node_has_no_regions():
    g = make_graph([("a", "b")], extra_nodes=("x",))
    assert ancestors(g, "x") == set()
    assert descendants(g, "x") == set()
    assert exclusive_descendants(g, "x") == set()


def test_unknown_op_raises():
    g = make_graph([("a", "b")])
    with pytest.raises(UnknownOperationError):
        ancestors(g, "zz")
    with pytest.raises(UnknownOperationError):
        descendants(g, "zz")


def test_chain_exclusive_descendants_single_entry():
    g = make_graph([("a", "b"), ("b", "c")])
    assert exclusive_descendants(g, "a") == {"b", "c"}
    assert exclusive_descendants(g, "b") == {"c"}


def test_diamond_exclusive_descendants_empty_for_branch():
    g = make_graph([("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])
    # d is reachable via c, so b owns nothing exclusively.
    assert exclusive_descendants(g, "b") == set()
    assert exclusive_descendants(g, "a") == {"b", "c", "d"}


def test_visible_subgraph_excludes_unrelated_branch():
    g = make_graph([("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])
    view = visible_subgraph(g, "b")
    assert set(view.live_op_ids()) == {"a", "b", "d"}
    assert all(c.source_op != "c" and c.target_op != "c" for c in view.conns.values())


def test_visible_subgraph_is_read_only():
    from fot.errors import ReadOnlyGraphError
    from fot.graph.model import OperationNode

    g = make_graph([("a", "b")])
    view = visible_subgraph(g, "a")
    with pytest.raises(ReadOnlyGraphError):
        view.add_op(OperationNode(id="z", kind="stub"))


def test_visible_subgraph_middle_of_chain_sees_everything():
    g = make_graph([("a", "b"), ("b", "c")])
    view = visible_subgraph(g, "b")
    assert set(view.live_op_ids()) == {"a", "b", "c"}


@pytest.mark.parametrize("seed", range(25))
def test_regions_match_path_enumeration(seed):
    g = random_dag(12, 0.3, seed)
    for op_id in sorted(g.live_op_ids()):
        assert ancestors(g, op_id) == brute_ancestors(g, op_id)
        assert descendants(g, op_id) == brute_descendants(g, op_id)
        assert exclusive_descendants(g, op_id) == brute_exclusive_descendants(g, op_id)


@pytest.mark.parametrize("seed", range(10))
def test_visible_subgraph_equals_region_union(seed):
    g = random_dag(10, 0.3, seed + 1000)
    for op_id in sorted(g.live_op_ids()):
        view = visible_subgraph(g, op_id)
        expected = ancestors(g, op_id) | descendants(g, op_id) | {op_id}
        assert set(view.live_op_ids()) == expected
