import itertools

import numpy as np
import pytest

from cfiwb.cfi import TwistAssignment, build, strip_labels
from cfiwb.errors import PreconditionError, ResourceError
from cfiwb.graphs import catalog_graph
from cfiwb.symmetry import (FlowAutomorphism, apply_flow, brute_force_automorphisms, brute_force_isomorphism,
                            cfi_isomorphic_predicate, compose, flow_basis, flow_group, flow_permutation, iso_report,
                            is_isomorphism, isomorphism_witness, k_orbits, perm_order, solve_cfi_problem)

from conftest import make


@pytest.mark.parametrize("variant", ["inner", "outer"])
def test_flow_group_equals_bruteforce_k4_m2(k4, variant):
    s = build(variant, k4, 2)
    flows = {tuple(flow_permutation(s, f).tolist()) for f in flow_group(k4, 2)}
    brute = {tuple(int(x) for x in a.perm) for a in brute_force_automorphisms(s)}
    assert flows == brute and len(brute) == 8


def test_flow_validation(k4):
    with pytest.raises(Exception):
        FlowAutomorphism(k4, 2, (1, 0, 0, 0, 0, 0))
    assert len(flow_basis(k4, 4)) == 3


def test_group_abelian_and_exponent(k4):
    s = build("inner", k4, 4)
    gens = [flow_permutation(s, f) for f in flow_basis(k4, 4)]
    for p, q in itertools.combinations(gens, 2):
        assert np.array_equal(compose(p, q), compose(q, p))
    assert all(perm_order(g) == 4 for g in gens)


def test_bruteforce_bound():
    s = make("k4", "inner", 4)
    with pytest.raises(ResourceError):
        brute_force_automorphisms(s, bound=40)


@pytest.mark.parametrize("m", [2, 3])
def test_predicate_matches_oracle_sample(k4, m):
    rng = np.random.default_rng(m)
    for _ in range(12):
        a = TwistAssignment(k4, m, tuple(rng.integers(0, m, 6)))
        b = TwistAssignment(k4, m, tuple(rng.integers(0, m, 6)))
        s, t = build("inner", k4, m, a), build("inner", k4, m, b)
        found = brute_force_isomorphism(s, t, bound=64)
        assert cfi_isomorphic_predicate(a, b) == (found is not None)


def test_predicate_examples(k4):
    zero = TwistAssignment.zero(k4, 2)
    one = TwistAssignment.from_terms(k4, 2, {0: 1})
    assert not cfi_isomorphic_predicate(zero, one)
    a = TwistAssignment.from_terms(k4, 4, {0: 1})
    b = TwistAssignment.from_terms(k4, 4, {3: 1})
    assert cfi_isomorphic_predicate(a, b)


@pytest.mark.parametrize("variant", ["inner", "outer"])
def test_constructed_witness(k4, variant):
    a = TwistAssignment.from_terms(k4, 4, {0: 1})
    b = TwistAssignment.from_terms(k4, 4, {3: 3, 5: 2})
    w = isomorphism_witness(k4, 4, a, b, variant)
    assert w.verified and is_isomorphism(build(variant, k4, 4, a), build(variant, k4, 4, b), w.perm)
    rep = iso_report(True, "constructed", w)
    assert rep["isomorphic"] and len(rep["witness"]) == w.domain.n
    with pytest.raises(PreconditionError):
        isomorphism_witness(k4, 4, a, TwistAssignment.zero(k4, 4), variant)


def test_identity_witness(k4):
    a = TwistAssignment.from_terms(k4, 2, {1: 1})
    assert np.array_equal(isomorphism_witness(k4, 2, a, a, "inner").perm, np.arange(16))


def test_bruteforce_on_stripped_copy():
    s = make("k4", "outer", 2, {0: 1})
    assert brute_force_isomorphism(s, strip_labels(s, 5)) is not None


def test_k_orbits_inner_k4():
    s = make("k4", "inner", 2)
    orb = k_orbits(s, 1)
    assert sorted(np.bincount(orb).tolist()) == [4, 4, 4, 4]


@pytest.mark.parametrize("variant", ["inner", "outer"])
def test_cfi_problem_decider(variant):
    rng = np.random.default_rng(9)
    g = catalog_graph("cage-3-5")
    for i in range(6):
        vals = rng.integers(0, 4, len(g.edges))
        if i % 2:
            vals[0] = (vals[0] - vals.sum()) % 4
        lam = TwistAssignment(g, 4, tuple(vals))
        s = strip_labels(build(variant, g, 4, lam), i)
        assert solve_cfi_problem(s) == (sum(lam.values) % 4 == 0)


def test_cfi_problem_examples():
    assert solve_cfi_problem(make("k4", "inner", 2, {}, strip_seed=0))
    assert not solve_cfi_problem(make("k4", "inner", 2, {0: 1}, strip_seed=0))


def test_apply_flow_is_automorphism(k4):
    s = build("outer", k4, 4)
    for f in flow_basis(k4, 4):
        assert is_isomorphism(s, s, apply_flow(s, f).perm)
