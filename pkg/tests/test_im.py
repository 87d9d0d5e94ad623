import numpy as np
import pytest

from cfiwb.algebra import colored_similarity
from cfiwb.errors import SchemaError, UsageError
from cfiwb.experiments import refines
from cfiwb.im import (ImConfig, _subsets_of_interest, class_matrix, color_matrix, im_equivalent, im_refine,
                      im_stable, prime_sweep)
from cfiwb.wl import refine_joint

from conftest import make


@pytest.fixture(scope="module")
def k4_pair():
    return make("k4", "inner", 2, {0: 1}), make("k4", "inner", 2, {}, strip_seed=3)


@pytest.fixture(scope="module")
def k4_twin():
    return make("k4", "inner", 2, {0: 1}), make("k4", "inner", 2, {5: 1}, strip_seed=4)


def test_config_validation():
    with pytest.raises(UsageError):
        ImConfig(1, (2,))
    with pytest.raises(UsageError):
        ImConfig(2, (4,))
    with pytest.raises(UsageError):
        ImConfig(2, ())
    with pytest.raises(UsageError):
        ImConfig(3, (2,), positions="first")
    assert ImConfig(3, (3, 2, 3)).primes == (2, 3)
    assert ImConfig(3, (2,)).position_pairs() == [(0, 1), (0, 2), (1, 2)]
    assert ImConfig(3, (2,), positions="last").position_pairs() == [(1, 2)]


def test_color_and_class_matrices():
    n, k = 3, 3
    colors = np.arange(n ** k)
    X = color_matrix(colors, n, k, (1, 0, 2), (0, 2))
    assert X[2, 1] == np.ravel_multi_index((2, 0, 1), (n,) * k)
    assert np.array_equal(color_matrix(colors, n, k, (1, 0, 2), (2, 0)), X.T)
    assert class_matrix(colors, n, k, (1, 0, 2), int(X[0, 0]), (0, 2)).sum() == 1
    with pytest.raises(UsageError):
        color_matrix(colors, n, k, (0, 0, 0), (1, 1))


def test_transposed_matrices_share_similarity():
    rng = np.random.default_rng(0)
    X = rng.integers(0, 3, (5, 5))
    perm = rng.permutation(5)
    Y = X[np.ix_(perm, perm)]
    a = colored_similarity(X, Y, 2).status
    assert a == colored_similarity(X.T, Y.T, 2).status == "similar"


def test_non_isomorphic_pair_k2_with_certificate(k4_pair):
    v = im_equivalent(*k4_pair, 2, [2])
    assert v.verdict == "not_equivalent"
    assert v.certificate["kind"] == "similarity" and v.certificate["verified"]
    assert v.certificate["recheck"]["status"] == "not_similar"


def test_twin_is_equivalent(k4_twin):
    v = im_equivalent(*k4_twin, 2, [2, 3])
    assert v.verdict == "equivalent" and v.budget_report["unknown"] == 0
    d = v.to_dict()
    assert set(d) == {"verdict", "k", "primes", "rounds", "certificate", "budget_report"}


def test_refines_wl_and_prime_union(k4_twin):
    s, t = k4_twin
    parts = {q: np.concatenate(im_stable([s, t], 2, q).colors) for q in ((2,), (3,), (2, 3))}
    wl = np.concatenate([c.colors for c in refine_joint([s, t], 2)[0]])
    assert all(refines(p, wl) for p in parts.values())
    assert refines(parts[(2, 3)], parts[(2,)]) and refines(parts[(2, 3)], parts[(3,)])


def test_threads_and_seed_determinism(k4_twin):
    a = im_equivalent(*k4_twin, 2, [2], threads=1)
    b = im_equivalent(*k4_twin, 2, [2], threads=3)
    assert a.to_dict() == b.to_dict()
    pa = im_refine(list(k4_twin), ImConfig(2, (2,)))[0]
    pb = im_refine(list(k4_twin), ImConfig(2, (2,), threads=2))[0]
    assert all(np.array_equal(x, y) for x, y in zip(pa.colors, pb.colors))


def test_zero_budget_is_conclusive_or_unknown(k4_pair, k4_twin):
    # without random trials or enumeration, Unknown may appear but never a wrong conclusive verdict
    a = im_equivalent(*k4_twin, 2, [2], trials=0, exhaustive=0)
    assert a.verdict in ("equivalent", "unknown")
    b = im_equivalent(*k4_pair, 2, [2], trials=0, exhaustive=0)
    assert b.verdict in ("not_equivalent", "unknown")


def test_optimistic_coarser_than_pessimistic(k4_twin):
    cfg = ImConfig(2, (2,), trials=0, exhaustive=0)
    opt = np.concatenate(im_refine(list(k4_twin), cfg, "optimistic")[0].colors)
    pes = np.concatenate(im_refine(list(k4_twin), cfg, "pessimistic")[0].colors)
    assert refines(pes, opt)


def test_last_positions_mode(k4_twin):
    assert im_equivalent(*k4_twin, 2, [2], positions="last").verdict == "equivalent"


def test_size_and_schema(k4_pair):
    s = k4_pair[0]
    v = im_equivalent(s, make("k4", "inner", 4), 2, [2])
    assert v.verdict == "not_equivalent" and v.certificate["kind"] == "size"
    with pytest.raises(SchemaError):
        im_equivalent(s, make("k4", "outer", 2), 2, [2])


def test_prime_subsets():
    assert _subsets_of_interest([2, 3]) == [(2,), (3,), (2, 3)]
    assert _subsets_of_interest([2, 3, 5]) == [(2,), (3,), (5,), (2, 3), (2, 5), (3, 5), (2, 3, 5)]


def test_prime_sweep_rows(k4_twin):
    rows = prime_sweep(*k4_twin, 2, [2, 3])
    assert [r["primes"] for r in rows] == [[2], [3], [2, 3]]
    assert all(r["verdict"] == "equivalent" for r in rows)
