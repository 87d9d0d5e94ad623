import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfiwb.cfi import (TwistAssignment, build, build_cfi_inner, build_cfi_outer, check_round_trip, inner_gadget,
                       rebuild, strip_labels, tagset_orders, twist_sum)
from cfiwb.errors import DataError, UsageError
from cfiwb.graphs import BaseGraph, catalog_graph
from cfiwb.structures import deserialize, export_dot, serialize
from cfiwb.symmetry import brute_force_isomorphism, is_isomorphism


@pytest.mark.parametrize("variant,m,n", [("outer", 2, 24), ("outer", 4, 48), ("inner", 2, 16), ("inner", 4, 64)])
def test_universe_sizes_over_k4(k4, variant, m, n):
    assert build(variant, k4, m).n == n


def test_outer_relation_sizes(k4):
    s = build_cfi_outer(k4, 2)
    assert {k: len(r) for k, r in s.relations.items()} == {"R": 16, "C": 24, "I": 24}
    assert len(build_cfi_outer(k4, 4).relations["R"]) == 64


def test_outer_needs_regular_graph():
    g = BaseGraph(6, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3)))
    with pytest.raises(UsageError):
        build_cfi_outer(g, 2)
    assert build_cfi_inner(g, 2).n > 0


def test_inner_gadget_zero_sum(k4):
    rows = inner_gadget(k4, 4, 0)
    assert rows.shape == (16, 3) and not np.any(rows.sum(axis=1) % 4)


def test_tagset_order_starts_with_empty(k4):
    orders = tagset_orders(k4, 2)
    assert orders["N"][0] == () and orders["C"][0] == ()


def test_twist_parsing_and_sum(k4):
    lam = TwistAssignment.parse(k4, 4, "e0=1, e3=7")
    assert lam.values == (1, 0, 0, 3, 0, 0) and twist_sum(lam) == 0
    assert lam.to_terms() == "e0=1,e3=3"
    for bad in ("x0=1", "e9=1", "e0", "e0=a"):
        with pytest.raises(UsageError):
            TwistAssignment.parse(k4, 4, bad)
    with pytest.raises(DataError):
        TwistAssignment(k4, 2, (1, 0))


def test_twist_over_other_graph_rejected(k4):
    lam = TwistAssignment.zero(catalog_graph("k33"), 2)
    with pytest.raises(DataError):
        build("inner", k4, 2, lam)


@pytest.mark.parametrize("variant", ["inner", "outer"])
def test_serialize_round_trip(k4, variant):
    s = build(variant, k4, 4, TwistAssignment.from_terms(k4, 4, {2: 3}))
    data = serialize(s)
    t = deserialize(data)
    assert t.same_tables(s) and serialize(t) == data
    assert check_round_trip(t) and rebuild(t).same_tables(s)


def test_deserialize_errors():
    with pytest.raises(DataError):
        deserialize("{")
    with pytest.raises(DataError):
        deserialize('{"schema_version": 99}')


def test_strip_keeps_preorder_sorted_and_is_isomorphic(k4):
    s = build("inner", k4, 2, TwistAssignment.from_terms(k4, 2, {0: 1}))
    t, perm = strip_labels(s, 11, return_perm=True)
    assert t.provenance is None
    assert np.all(np.diff(t.preorder) >= 0)
    assert is_isomorphism(s, t, perm)
    with pytest.raises(DataError):
        rebuild(t)


def test_dot_has_one_cluster_per_gadget(k4):
    dot = export_dot(build("outer", k4, 2))
    assert dot.count("subgraph cluster_") == 4


@settings(max_examples=15, deadline=None)
@given(vals=st.lists(st.integers(0, 1), min_size=6, max_size=6), seed=st.integers(0, 1000))
def test_strip_preserves_isomorphism_type(vals, seed):
    g = catalog_graph("k4")
    s = build("inner", g, 2, TwistAssignment(g, 2, tuple(vals)))
    assert brute_force_isomorphism(s, strip_labels(s, seed)) is not None
