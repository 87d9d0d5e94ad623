import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from cfiwb.errors import DataError, GenerationError, UsageError
from cfiwb.graphs import (BaseGraph, GraphRequirements, catalog_graph, catalog_names, check_requirements,
                          from_networkx, girth, random_regular, vertex_connectivity)


def test_catalog_examples():
    k4 = catalog_graph("k4")
    assert (k4.n, len(k4.edges), k4.regular_degree) == (4, 6, 3)
    cage = catalog_graph("cage-3-5")
    assert (cage.n, len(cage.edges), cage.regular_degree, cage.girth) == (10, 15, 3, 5)
    c6 = catalog_graph("c6")
    assert c6.regular_degree == 2 and c6.girth == 6
    assert catalog_graph("cage-3-6").girth == 6


def test_unknown_catalog_name():
    with pytest.raises(UsageError):
        catalog_graph("petersen-ish")


@pytest.mark.parametrize("name", [n for n in catalog_names() if n not in ("k1", "k2")])
def test_catalog_matches_networkx_oracle(name):
    g = catalog_graph(name)
    G = nx.Graph(list(g.edges))
    want = nx.girth(G)
    assert g.girth == want
    assert g.connectivity == nx.node_connectivity(G)


def test_random_regular_is_deterministic_and_valid():
    a, b = random_regular(3, 10, 7), random_regular(3, 10, 7)
    assert a.edges == b.edges
    assert check_requirements(a, GraphRequirements(min_degree=3, regular=True)).passed
    assert random_regular(3, 4, 1).edges == catalog_graph("k4").edges


def test_random_regular_parity_is_usage_error():
    with pytest.raises(UsageError):
        random_regular(3, 5, 1)


def test_generation_budget():
    with pytest.raises(GenerationError):
        random_regular(2, 40, 0, budget=1)


def test_rejects_disconnected_and_loops():
    with pytest.raises(DataError):
        BaseGraph(4, ((0, 1), (2, 3)))
    with pytest.raises(DataError):
        BaseGraph(2, ((0, 0),))


def test_json_round_trip():
    g = catalog_graph("k33")
    assert BaseGraph.from_json(g.to_json()).edges == g.edges
    with pytest.raises(DataError):
        BaseGraph.from_json("{not json")


def test_requirements_report_failures():
    rep = check_requirements(catalog_graph("k4"), GraphRequirements(min_girth=5))
    assert not rep.passed and rep.failures


@settings(max_examples=25, deadline=None)
@given(n=st.integers(6, 14), seed=st.integers(0, 2 ** 32))
def test_girth_and_connectivity_against_networkx(n, seed):
    g = random_regular(3, n - n % 2, seed)
    G = nx.Graph(list(g.edges))
    assert girth(g) == nx.girth(G)
    assert vertex_connectivity(g) == nx.node_connectivity(G)


def test_from_networkx_relabels_in_sorted_order():
    G = nx.cycle_graph(["a", "b", "c", "d"])
    g = from_networkx(G, "c4")
    assert g.n == 4 and g.girth == 4
