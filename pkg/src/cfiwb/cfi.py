"""Builders for the outer-vertex and inner-vertex CFI structures over Z_m."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .algebra import Modulus
from .errors import DataError, UsageError
from .graphs import BaseGraph
from .structures import PairRankRelation, Provenance, Structure, TupleRelation


@dataclass(frozen=True)
class TwistAssignment:
    """Edge twists: ``values[i]`` is the residue on ``graph.edges[i]``."""

    graph: BaseGraph
    modulus: int
    values: tuple[int, ...]

    def __post_init__(self):
        Modulus(self.modulus)
        vals = tuple(int(v) for v in self.values)
        if len(vals) != len(self.graph.edges):
            raise DataError(f"twist has {len(vals)} values for {len(self.graph.edges)} edges")
        object.__setattr__(self, "values", tuple(v % self.modulus for v in vals))

    @classmethod
    def zero(cls, g: BaseGraph, m: int) -> TwistAssignment:
        return cls(g, m, (0,) * len(g.edges))

    @classmethod
    def from_terms(cls, g: BaseGraph, m: int, terms: dict[int, int]) -> TwistAssignment:
        vals = [0] * len(g.edges)
        for e, v in terms.items():
            if not 0 <= e < len(vals):
                raise UsageError(f"edge index e{e} out of range 0..{len(vals) - 1}")
            vals[e] = v
        return cls(g, m, tuple(vals))

    @classmethod
    def parse(cls, g: BaseGraph, m: int, text: str) -> TwistAssignment:
        """Parse ``"e0=1,e3=2"`` (indices into the sorted edge list); empty text means all zero."""
        terms: dict[int, int] = {}
        for part in filter(None, (p.strip() for p in (text or "").split(","))):
            key, sep, val = part.partition("=")
            if not sep or not key.startswith("e") or not key[1:].isdigit():
                raise UsageError(f"bad twist term {part!r}; expected e<index>=<value>")
            try:
                terms[int(key[1:])] = int(val)
            except ValueError:
                raise UsageError(f"bad twist value in {part!r}") from None
        return cls.from_terms(g, m, terms)

    def at(self, u: int, v: int) -> int:
        return self.values[self.graph.edge_id(u, v)]

    def to_terms(self) -> str:
        return ",".join(f"e{i}={v}" for i, v in enumerate(self.values) if v)


def twist_sum(lam: TwistAssignment) -> int:
    return sum(lam.values) % lam.modulus


def _check_twist(G: BaseGraph, m: int, lam: TwistAssignment | None) -> TwistAssignment:
    Modulus(m)
    if lam is None:
        return TwistAssignment.zero(G, m)
    if lam.graph != G or lam.modulus != m:
        raise DataError("twist assignment is defined over a different base graph or modulus")
    return lam


def build_cfi_outer(G: BaseGraph, m: int, lam: TwistAssignment | None = None) -> Structure:
    """Outer-vertex structure (A, R, C, I, preorder); needs a regular base graph."""
    lam = _check_twist(G, m, lam)
    d = G.regular_degree
    if d is None:
        raise UsageError("outer construction requires a regular base graph")
    adj = G.adjacency
    # (u, v) slots enumerate in lexicographic order; vertex (a, v) of A_u has id slot*m + a
    slot = {}
    for u in G.vertices:
        for v in adj[u]:
            slot[(u, v)] = len(slot)
    n = len(slot) * m

    def vid(u, v, a):
        return slot[(u, v)] * m + a % m

    gadget, labels = [], []
    for (u, v), _s in sorted(slot.items(), key=lambda kv: kv[1]):
        for a in range(m):
            gadget.append(u)
            labels.append((a, v))
    preorder = np.arange(n) // m

    R = []
    for u in G.vertices:
        nb = adj[u]
        for head in itertools.product(range(m), repeat=d - 1):
            last = (-sum(head)) % m
            R.append([vid(u, v, a) for v, a in zip(nb, head + (last,))])
    C = [[vid(u, v, a), vid(u, v, a + 1)] for (u, v) in slot for a in range(m)]
    I = []
    for (u, v), lv in zip(G.edges, lam.values):
        for a in range(m):
            x, y = vid(u, v, a), vid(v, u, lv - a)
            I += [[x, y], [y, x]]
    rels = {"R": TupleRelation(d, np.array(R, dtype=np.int64).reshape(-1, d)),
            "C": TupleRelation(2, np.array(C, dtype=np.int64)),
            "I": TupleRelation(2, np.array(I, dtype=np.int64).reshape(-1, 2))}
    prov = Provenance(G, m, lam.values, tuple(gadget), tuple(labels))
    return Structure(n, preorder, rels, "outer", prov)


def inner_gadget(G: BaseGraph, m: int, u: int) -> np.ndarray:
    """Zero-sum vectors over N(u), lexicographic; columns follow the sorted neighbor list."""
    d = len(G.adjacency[u])
    rows = [t for t in itertools.product(range(m), repeat=d) if sum(t) % m == 0]
    return np.array(rows, dtype=np.int64).reshape(-1, d)


def _tagset_ranks(G: BaseGraph, m: int, blocks, offsets, n: int, shift: int) -> tuple[np.ndarray, list]:
    """Rank table of tagset(x, y) = {(u, v) : x(v) + shift = y(v)} under the sorted-sequence order.

    Also returns the ordered list of tagsets, so ``order[r]`` is the tagset with rank r.
    """
    m_keys: dict[tuple, tuple] = {}
    per_gadget = []
    for u, coords in enumerate(blocks):
        nb = G.adjacency[u]
        k, d = coords.shape
        mask = np.zeros((k, k), dtype=np.int64)
        for j in range(d):
            hit = (coords[:, None, j] + shift) % m == coords[None, :, j]
            mask |= hit.astype(np.int64) << j
        per_gadget.append(mask)
        for bits in np.unique(mask).tolist():
            key = tuple((u, nb[j]) for j in range(d) if bits >> j & 1)
            m_keys[(u, bits)] = key
    order = sorted(set(m_keys.values()) | {()})
    rank_of = {key: r for r, key in enumerate(order)}
    ranks = np.full((n, n), rank_of[()], dtype=np.int64)
    for u, mask in enumerate(per_gadget):
        lut = {bits: rank_of[m_keys[(u, bits)]] for bits in np.unique(mask).tolist()}
        vals = np.vectorize(lut.__getitem__, otypes=[np.int64])(mask)
        o = offsets[u]
        ranks[o:o + mask.shape[0], o:o + mask.shape[0]] = vals
    return ranks, order


def tagset_orders(G: BaseGraph, m: int) -> dict[str, list]:
    """Rank-to-tagset lists of the inner variant's N and C tables; they depend only on (G, m)."""
    blocks = [inner_gadget(G, m, u) for u in G.vertices]
    offsets = np.concatenate([[0], np.cumsum([b.shape[0] for b in blocks])]).astype(np.int64)
    n = int(offsets[-1])
    return {"N": _tagset_ranks(G, m, blocks, offsets, n, 0)[1],
            "C": _tagset_ranks(G, m, blocks, offsets, n, 1)[1]}



def build_cfi_inner(G: BaseGraph, m: int, lam: TwistAssignment | None = None) -> Structure:
    """Inner-vertex structure (B, N, C, I, preorder); any connected base graph."""
    lam = _check_twist(G, m, lam)
    adj = G.adjacency
    blocks = [inner_gadget(G, m, u) for u in G.vertices]
    offsets = np.concatenate([[0], np.cumsum([b.shape[0] for b in blocks])]).astype(np.int64)
    n = int(offsets[-1])
    gadget, labels = [], []
    for u, coords in enumerate(blocks):
        gadget += [u] * coords.shape[0]
        labels += [tuple(int(x) for x in row) for row in coords]
    preorder = np.repeat(np.arange(G.n), [b.shape[0] for b in blocks])
    N, _ = _tagset_ranks(G, m, blocks, offsets, n, 0)
    C, _ = _tagset_ranks(G, m, blocks, offsets, n, 1)
    I = []
    for (u, v), lv in zip(G.edges, lam.values):
        ju, jv = adj[u].index(v), adj[v].index(u)
        xs, ys = blocks[u][:, ju], blocks[v][:, jv]
        hit = np.argwhere((xs[:, None] + ys[None, :]) % m == lv % m)
        a = hit[:, 0] + offsets[u]
        b = hit[:, 1] + offsets[v]
        I.append(np.stack([a, b], 1))
        I.append(np.stack([b, a], 1))
    Iarr = np.vstack(I) if I else np.zeros((0, 2), dtype=np.int64)
    rels = {"N": PairRankRelation(N), "C": PairRankRelation(C), "I": TupleRelation(2, Iarr)}
    prov = Provenance(G, m, lam.values, tuple(gadget), tuple(labels))
    return Structure(n, preorder, rels, "inner", prov)


def build(variant: str, G: BaseGraph, m: int, lam: TwistAssignment | None = None) -> Structure:
    if variant == "outer":
        return build_cfi_outer(G, m, lam)
    if variant == "inner":
        return build_cfi_inner(G, m, lam)
    raise UsageError(f"unknown variant {variant!r}; expected inner or outer")


def rebuild(s: Structure) -> Structure:
    """Rebuild from provenance; raises DataError when there is none."""
    pv = s.provenance
    if pv is None:
        raise DataError("structure carries no provenance")
    return build(s.variant, pv.graph, pv.modulus, TwistAssignment(pv.graph, pv.modulus, pv.twist))


def check_round_trip(s: Structure) -> bool:
    return rebuild(s).same_tables(s)


def strip_labels(s: Structure, seed: int = 0, return_perm: bool = False):
    """Drop provenance and renumber by a seeded permutation that keeps ids sorted by preorder rank."""
    rng = np.random.default_rng(seed)
    order = np.lexsort((rng.permutation(s.n), s.preorder))
    perm = np.empty(s.n, dtype=np.int64)
    perm[order] = np.arange(s.n)
    out = s.relabel(perm)
    return (out, perm) if return_perm else out
