import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfiwb.errors import SchemaError, UsageError
from cfiwb.graphs import catalog_graph
from cfiwb.structures import Structure, disjoint_union_graph
from cfiwb.wl import (_atomic_features, atomic_type, distinguishing_dimension, refine_joint, same_partition,
                      wl_equivalent, wl_stable)

from conftest import make


def _two_triangles():
    c3 = catalog_graph("c3")
    return disjoint_union_graph(c3, c3)


def test_c6_vs_two_triangles():
    c6 = Structure.from_graph(catalog_graph("c6"))
    tt = _two_triangles()
    assert wl_equivalent(c6, tt, 1)
    assert not wl_equivalent(c6, tt, 2)
    assert distinguishing_dimension(c6, tt, 3) == 2


def test_cfi_pair_k4():
    s = make("k4", "inner", 2, {0: 1})
    t = make("k4", "inner", 2, {}, strip_seed=1)
    assert [wl_equivalent(s, t, k) for k in (1, 2, 3)] == [True, True, False]


@pytest.mark.parametrize("k", [1, 2])
def test_atomic_features_induce_atomic_type_partition(k):
    s = make("k4", "inner", 2, {0: 1})
    idx = np.arange(s.n ** k)
    feats = _atomic_features(s, k, idx)
    _, a = np.unique(feats, axis=0, return_inverse=True)
    types = [atomic_type(s, np.unravel_index(i, (s.n,) * k)) for i in idx]
    key = {t: j for j, t in enumerate(dict.fromkeys(types))}
    assert same_partition(a.ravel(), [key[t] for t in types])


def test_threads_do_not_change_colors():
    s = make("k33", "outer", 2)
    a = wl_stable(s, 2, threads=1)
    b = wl_stable(s, 2, threads=3)
    assert np.array_equal(a.colors, b.colors) and a.rounds == b.rounds


def test_schema_mismatch():
    with pytest.raises(SchemaError):
        wl_equivalent(make("k4", "inner", 2), make("k4", "outer", 2), 1)


def test_bad_k():
    with pytest.raises(UsageError):
        wl_stable(make("k4", "inner", 2), 0)


def test_report_and_histogram():
    c = wl_stable(Structure.from_graph(catalog_graph("c6")), 1)
    rep = c.report()
    assert rep["k"] == 1 and sum(v for _, v in rep["histogram"]) == 6 and c.n_classes == 1


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_relabeling_invariance(seed):
    s = make("k4", "outer", 2, {1: 1})
    perm = np.random.default_rng(seed).permutation(s.n)
    t = s.relabel(perm)
    assert wl_equivalent(s, t, 2)
    a = wl_stable(s, 1).colors
    b = wl_stable(t, 1).colors
    assert np.array_equal(np.sort(a), np.sort(b))


def test_hierarchy_on_pairs():
    pairs = [(make("k4", v, 2, {0: 1}), make("k4", v, 2, {}, strip_seed=2)) for v in ("inner", "outer")]
    for s, t in pairs:
        eq = [wl_equivalent(s, t, k) for k in (1, 2, 3)]
        assert all(not eq[k + 1] for k in range(2) if not eq[k])


def test_same_partition():
    assert same_partition([0, 0, 1], [5, 5, 2])
    assert not same_partition([0, 0, 1], [0, 1, 1])
