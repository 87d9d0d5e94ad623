import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfiwb.algebra import (batched_rank, colored_intertwiner_space, colored_intertwines, colored_invariants,
                           colored_similarity, find_invertible, fp_nullspace, fp_rank, fp_solve, intertwiner_space,
                           is_prime, simultaneous_similarity, verify_intertwiner, zm_solve)
from cfiwb.errors import UsageError


def _enum_solutions(M, b, m):
    nv = M.shape[1]
    return [x for x in itertools.product(range(m), repeat=nv) if not np.any((M @ np.array(x) - b) % m)]


def _enum_rank(M, p):
    # rank = log_p of the number of distinct images M x
    imgs = {tuple((M @ np.array(x)) % p) for x in itertools.product(range(p), repeat=M.shape[1])}
    return round(np.log(len(imgs)) / np.log(p))


def test_is_prime():
    assert [q for q in range(20) if is_prime(q)] == [2, 3, 5, 7, 11, 13, 17, 19]


@settings(max_examples=60, deadline=None)
@given(p=st.sampled_from([2, 3, 5]), r=st.integers(1, 4), c=st.integers(1, 4), data=st.data())
def test_fp_rank_against_image_count(p, r, c, data):
    M = np.array(data.draw(st.lists(st.lists(st.integers(0, p - 1), min_size=c, max_size=c), min_size=r, max_size=r)))
    assert fp_rank(M, p) == _enum_rank(M, p)
    N = fp_nullspace(M, p)
    assert N.shape[0] == c - fp_rank(M, p)
    assert not np.any((M @ N.T) % p)


@settings(max_examples=80, deadline=None)
@given(m=st.sampled_from([2, 4, 6, 8, 9]), r=st.integers(1, 3), c=st.integers(1, 3), data=st.data())
def test_zm_solve_against_enumeration(m, r, c, data):
    M = np.array(data.draw(st.lists(st.lists(st.integers(0, m - 1), min_size=c, max_size=c), min_size=r, max_size=r)))
    b = np.array(data.draw(st.lists(st.integers(0, m - 1), min_size=r, max_size=r)))
    sols = _enum_solutions(M, b, m)
    res = zm_solve(M, b, m)
    assert res.consistent == bool(sols)
    assert res.satisfies(M, b)
    if sols:
        # particular + span(generators) reaches exactly the enumerated solutions
        span = {tuple([0] * c)}
        for g in res.generators:
            span = {tuple((np.array(v) + a * np.array(g)) % m) for v in span for a in range(m)}
        got = {tuple((np.array(res.particular) + np.array(v)) % m) for v in span}
        assert got == set(sols)


def test_zm_solve_examples():
    assert not zm_solve([[2]], [1], 4).consistent
    assert zm_solve([[2]], [2], 4).consistent
    with pytest.raises(UsageError):
        zm_solve([[1, 2]], [1, 2], 4)


def test_fp_solve_prime_field():
    res = fp_solve([[1, 1], [1, 2]], [0, 1], 3)
    assert res.consistent and res.satisfies([[1, 1], [1, 2]], [0, 1])
    with pytest.raises(UsageError):
        fp_solve([[1]], [1], 4)


@settings(max_examples=40, deadline=None)
@given(p=st.sampled_from([2, 3, 5, 7]), seed=st.integers(0, 2 ** 32))
def test_batched_rank_matches_fp_rank(p, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(0, p, (4, rng.integers(1, 9), rng.integers(1, 70))) * (rng.random() < 0.7)
    assert batched_rank(A, p).tolist() == [fp_rank(a, p) for a in A]


def _inverse(P, p):
    n = P.shape[0]
    for cand in itertools.product(range(p), repeat=n * n):
        Q = np.array(cand).reshape(n, n)
        if not np.any((P @ Q - np.eye(n, dtype=int)) % p):
            return Q
    raise AssertionError


def test_simultaneous_similarity_planted_and_witness():
    rng = np.random.default_rng(3)
    p = 3
    P = np.array([[1, 2], [0, 1]])
    Pi = _inverse(P, p)
    Ms = [rng.integers(0, p, (2, 2)) for _ in range(3)]
    Ns = [(P @ M @ Pi) % p for M in Ms]
    v = simultaneous_similarity(Ms, Ns, p, rng)
    assert v.status == "similar"
    assert verify_intertwiner(v.witness, Ms, Ns, p)


def test_simultaneous_similarity_rank_mismatch():
    v = simultaneous_similarity([np.eye(2, dtype=int)], [np.array([[1, 0], [0, 0]])], 2)
    assert v.status == "not_similar"


def test_similarity_against_exhaustive_search_small():
    rng = np.random.default_rng(5)
    p, n = 2, 2
    invertibles = [np.array(c).reshape(n, n) for c in itertools.product(range(p), repeat=n * n)
                   if fp_rank(np.array(c).reshape(n, n), p) == n]
    for _ in range(40):
        Ms = [rng.integers(0, p, (n, n)) for _ in range(2)]
        Ns = [rng.integers(0, p, (n, n)) for _ in range(2)]
        truth = any(all(not np.any((S @ M - N @ S) % p) for M, N in zip(Ms, Ns)) for S in invertibles)
        v = simultaneous_similarity(Ms, Ns, p, rng)
        assert v.status == ("similar" if truth else "not_similar")


def test_intertwiner_space_identity():
    B = intertwiner_space([np.eye(3, dtype=int)], [np.eye(3, dtype=int)], 5)
    assert B.dim == 9
    assert find_invertible(B).status == "found"


@settings(max_examples=40, deadline=None)
@given(p=st.sampled_from([2, 3]), seed=st.integers(0, 2 ** 32))
def test_colored_routes_agree_with_generic(p, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    X = rng.integers(0, 3, (n, n))
    perm = rng.permutation(n)
    Y = X[np.ix_(perm, perm)] if rng.random() < 0.5 else rng.integers(0, 3, (n, n))
    colors = np.union1d(X, Y)
    fx = [(X == c).astype(int) for c in colors]
    fy = [(Y == c).astype(int) for c in colors]
    assert colored_intertwiner_space(X, Y, p).dim == intertwiner_space(fx, fy, p).dim
    a = colored_similarity(X, Y, p, np.random.default_rng(0))
    b = simultaneous_similarity(fx, fy, p, np.random.default_rng(0))
    assert a.status == b.status
    if a.status == "similar":
        assert colored_intertwines(a.witness, X, Y, p)


def test_colored_invariants_permutation_invariant():
    rng = np.random.default_rng(1)
    X = rng.integers(0, 4, (6, 6))
    perm = rng.permutation(6)
    assert colored_invariants(X, 2) == colored_invariants(X[np.ix_(perm, perm)], 2)
