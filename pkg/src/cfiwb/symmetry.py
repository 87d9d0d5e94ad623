"""Automorphisms, isomorphisms and the CFI problem: flows, brute-force oracles, constructive witnesses."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .algebra import zm_solve
from .cfi import TwistAssignment, build, tagset_orders, twist_sum
from .errors import DataError, InternalError, PreconditionError, ResourceError, UsageError
from .graphs import BaseGraph
from .structures import PairRankRelation, Structure, TupleRelation, encode_rows

DEFAULT_AUT_BOUND = 40
DEFAULT_ISO_BOUND = 32
DEFAULT_ENUM_BOUND = 2 ** 16


# -- flows ---------------------------------------------------------------

@dataclass(frozen=True)
class FlowAutomorphism:
    """Antisymmetric edge twist with zero sum at every vertex.

    ``values[i]`` is twist(u -> v) for ``graph.edges[i] == (u, v)`` with u < v;
    twist(v -> u) is its negative.
    """

    graph: BaseGraph
    modulus: int
    values: tuple[int, ...]

    def __post_init__(self):
        m = self.modulus
        vals = tuple(int(v) % m for v in self.values)
        if len(vals) != len(self.graph.edges):
            raise DataError("flow must give one value per edge")
        object.__setattr__(self, "values", vals)
        bal = [0] * self.graph.n
        for (u, v), t in zip(self.graph.edges, vals):
            bal[u] += t
            bal[v] -= t
        if any(b % m for b in bal):
            raise DataError("flow violates the zero-sum condition at some vertex")

    def twist(self, u: int, v: int) -> int:
        t = self.values[self.graph.edge_id(u, v)]
        return t if u < v else (-t) % self.modulus

    def oriented(self) -> dict[tuple[int, int], int]:
        out = {}
        for (u, v), t in zip(self.graph.edges, self.values):
            out[(u, v)] = t
            out[(v, u)] = (-t) % self.modulus
        return out

    def __add__(self, other: FlowAutomorphism) -> FlowAutomorphism:
        return FlowAutomorphism(self.graph, self.modulus,
                                tuple(a + b for a, b in zip(self.values, other.values)))

    def scaled(self, c: int) -> FlowAutomorphism:
        return FlowAutomorphism(self.graph, self.modulus, tuple(c * v for v in self.values))

    @classmethod
    def zero(cls, g: BaseGraph, m: int) -> FlowAutomorphism:
        return cls(g, m, (0,) * len(g.edges))


def spanning_tree(g: BaseGraph) -> tuple[list[int], list[int]]:
    """BFS tree from vertex 0: (parent array with -1 at the root, BFS order)."""
    parent = [-1] * g.n
    seen = [False] * g.n
    seen[0] = True
    order = [0]
    for u in order:
        for v in g.adjacency[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                order.append(v)
    return parent, order


def flow_basis(g: BaseGraph, m: int) -> list[FlowAutomorphism]:
    """Unit circulations around the fundamental cycles of a BFS spanning tree."""
    parent, _ = spanning_tree(g)
    tree = {tuple(sorted((v, p))) for v, p in enumerate(parent) if p >= 0}

    def path_to_root(v):
        out = [v]
        while parent[out[-1]] >= 0:
            out.append(parent[out[-1]])
        return out

    basis = []
    for u, v in g.edges:
        if (u, v) in tree:
            continue
        pu, pv = path_to_root(u), path_to_root(v)
        common = set(pu) & set(pv)
        # cycle u -> v, then v up to the meeting vertex, then down to u
        vals = [0] * len(g.edges)

        def push(a, b):
            i = g.edge_id(a, b)
            vals[i] += 1 if a < b else -1

        push(u, v)
        walk_v = list(itertools.takewhile(lambda x: x not in common, pv))
        meet = pv[len(walk_v)]
        chain_v = walk_v + [meet]
        for a, b in zip(chain_v, chain_v[1:]):
            push(a, b)
        chain_u = list(itertools.takewhile(lambda x: x != meet, pu)) + [meet]
        for a, b in zip(chain_u[::-1], chain_u[::-1][1:]):
            push(a, b)
        basis.append(FlowAutomorphism(g, m, tuple(vals)))
    return basis


def flow_group(g: BaseGraph, m: int, bound: int = DEFAULT_ENUM_BOUND) -> list[FlowAutomorphism]:
    """All elements of the group generated by the flow basis, sorted by value vector."""
    basis = flow_basis(g, m)
    order = m ** len(basis)
    if order > bound:
        raise ResourceError(f"flow group has {order} elements, above the enumeration bound {bound}")
    if not basis:
        return [FlowAutomorphism.zero(g, m)]
    B = np.array([f.values for f in basis], dtype=np.int64)
    coef = np.array(list(itertools.product(range(m), repeat=len(basis))), dtype=np.int64)
    vals = np.unique((coef @ B) % m, axis=0)
    return [FlowAutomorphism(g, m, tuple(row)) for row in vals.tolist()]


# -- structure maps ------------------------------------------------------

def _monotone_match(a: np.ndarray, b: np.ndarray) -> bool:
    """True iff b = f(a) elementwise for a strictly increasing f."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    pairs = np.unique(np.stack([a, b], 1), axis=0)
    if pairs.size == 0:
        return True
    # unique() sorts by a then b; f is a function iff a is strictly increasing, monotone iff b too
    return bool(np.all(np.diff(pairs[:, 0]) > 0) and np.all(np.diff(pairs[:, 1]) > 0))


def is_isomorphism(s: Structure, t: Structure, perm) -> bool:
    """Bidirectional check that ``x -> perm[x]`` maps s onto t."""
    perm = np.asarray(perm, dtype=np.int64)
    if s.n != t.n or s.schema != t.schema or perm.shape != (s.n,):
        return False
    if not np.array_equal(np.sort(perm), np.arange(s.n)):
        return False
    if not _monotone_match(s.preorder, t.preorder[perm]):
        return False
    for name, rel in s.relations.items():
        other = t.relations[name]
        if isinstance(rel, TupleRelation):
            # equal sizes plus forward inclusion give equality because perm is a bijection
            if len(rel) != len(other) or not rel.mapped(perm).same(other):
                return False
        elif not _monotone_match(rel.ranks, other.ranks[np.ix_(perm, perm)]):
            return False
    return True


@dataclass(frozen=True, eq=False)
class StructureMap:
    """Vertex bijection ``domain -> codomain``; ``verified`` means :func:`is_isomorphism` passed."""

    domain: Structure
    codomain: Structure
    perm: np.ndarray
    verified: bool = False

    def verify(self) -> StructureMap:
        ok = is_isomorphism(self.domain, self.codomain, self.perm)
        return StructureMap(self.domain, self.codomain, self.perm, ok)

    def pairs(self) -> list[list[int]]:
        return [[i, int(j)] for i, j in enumerate(self.perm)]

    def key(self) -> tuple[int, ...]:
        return tuple(int(x) for x in self.perm)


def _checked(s: Structure, t: Structure, perm, what: str) -> StructureMap:
    mp = StructureMap(s, t, np.asarray(perm, dtype=np.int64)).verify()
    if not mp.verified:
        raise InternalError(f"{what} failed verification; the construction is inconsistent")
    return mp


def _label_index(s: Structure) -> dict:
    pv = s.provenance
    return {(g, lab): i for i, (g, lab) in enumerate(zip(pv.gadget, pv.labels))}


def _shift_perm(s: Structure, t: Structure, shift: dict[tuple[int, int], int]) -> np.ndarray:
    """Vertex map induced by adding ``shift[(u, v)]`` to the v-coordinate of every vertex in gadget u."""
    pv = s.provenance
    if pv is None or t.provenance is None:
        raise UsageError("structure has no provenance; strip_labels removed it")
    m = pv.modulus
    adj = pv.graph.adjacency
    target = _label_index(t)
    perm = np.empty(s.n, dtype=np.int64)
    for i, (u, lab) in enumerate(zip(pv.gadget, pv.labels)):
        if s.variant == "outer":
            a, v = lab
            new = ((a + shift[(u, v)]) % m, v)
        else:
            new = tuple((x + shift[(u, v)]) % m for x, v in zip(lab, adj[u]))
        perm[i] = target[(u, new)]
    return perm


def _flow_compatible(s: Structure, f: FlowAutomorphism):
    pv = s.provenance
    if pv is None:
        raise UsageError("apply_flow needs a structure with provenance")
    if pv.graph != f.graph or pv.modulus != f.modulus:
        raise UsageError("flow is defined over a different base graph or modulus")


def flow_permutation(s: Structure, f: FlowAutomorphism) -> np.ndarray:
    _flow_compatible(s, f)
    return _shift_perm(s, s, f.oriented())


def apply_flow(s: Structure, f: FlowAutomorphism) -> StructureMap:
    """The automorphism induced by ``f``, verified against every relation and the preorder."""
    return _checked(s, s, flow_permutation(s, f), "flow automorphism")


def compose(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Apply ``p`` first, then ``q``."""
    return np.asarray(q)[np.asarray(p)]


def perm_order(p: np.ndarray) -> int:
    p = np.asarray(p)
    ident = np.arange(p.size)
    cur, k = p.copy(), 1
    while not np.array_equal(cur, ident):
        cur = p[cur]
        k += 1
    return k


# -- brute force ---------------------------------------------------------

class _Search:
    """Backtracking over preorder-compatible bijections with incremental relation checks."""

    def __init__(self, s: Structure, t: Structure):
        self.s, self.t = s, t
        self.n = s.n
        self.feasible = self._setup()

    def _setup(self) -> bool:
        s, t = self.s, self.t
        if s.n != t.n or s.schema != t.schema:
            return False
        ps = np.unique(s.preorder, return_inverse=True)[1]
        pt = np.unique(t.preorder, return_inverse=True)[1]
        if not np.array_equal(np.bincount(ps), np.bincount(pt)):
            return False
        self.mats = []      # pairs of n x n integer tables that must agree entrywise
        self.higher = []    # (arity, tuples of s, code set of t)
        feats_s, feats_t = [ps[:, None]], [pt[:, None]]
        for name, rs in s.relations.items():
            rt = t.relations[name]
            if isinstance(rs, PairRankRelation):
                us, ds = np.unique(rs.ranks, return_inverse=True)
                ut, dt = np.unique(rt.ranks, return_inverse=True)
                if us.size != ut.size:
                    return False
                ds, dt = ds.reshape(s.n, s.n), dt.reshape(t.n, t.n)
            elif rs.arity == 2:
                if len(rs) != len(rt):
                    return False
                ds = np.zeros((s.n, s.n), dtype=np.int64)
                dt = np.zeros((t.n, t.n), dtype=np.int64)
                ds[rs.tuples[:, 0], rs.tuples[:, 1]] = 1
                dt[rt.tuples[:, 0], rt.tuples[:, 1]] = 1
            else:
                if len(rs) != len(rt):
                    return False
                self.higher.append((rs.arity, rs.tuples, set(rt.codes(t.n).tolist())))
                for rel, feats, n in ((rs, feats_s, s.n), (rt, feats_t, t.n)):
                    for j in range(rel.arity):
                        feats.append(np.bincount(rel.tuples[:, j], minlength=n)[:, None])
                continue
            self.mats.append((ds, dt))
            k = int(max(ds.max(initial=0), dt.max(initial=0))) + 1
            for d, feats in ((ds, feats_s), (dt, feats_t)):
                rows = np.stack([np.bincount(r, minlength=k) for r in d])
                cols = np.stack([np.bincount(c, minlength=k) for c in d.T])
                feats += [rows, cols, np.diag(d)[:, None]]
        fs, ft = np.hstack(feats_s), np.hstack(feats_t)
        _, inv = np.unique(np.vstack([fs, ft]), axis=0, return_inverse=True)
        inv = inv.ravel()
        self.color_s, self.color_t = inv[:s.n], inv[s.n:]
        if not np.array_equal(np.sort(self.color_s), np.sort(self.color_t)):
            return False
        self.order = self._order()
        self.order_arr = np.asarray(self.order, dtype=np.int64)
        # entry (x, y) holds every table at (x, y) and at (y, x), so one comparison checks both directions
        if self.mats:
            self.S = np.stack([d for ds, _ in self.mats for d in (ds, ds.T)], axis=-1)
            self.T = np.stack([d for _, dt in self.mats for d in (dt, dt.T)], axis=-1)
        else:
            self.S = self.T = None
        pos = np.empty(self.n, dtype=np.int64)
        pos[self.order] = np.arange(self.n)
        # tuples of higher relations are checked when their last vertex is placed
        self.closing = [[] for _ in range(self.n)]
        for h, (arity, tuples, codes) in enumerate(self.higher):
            last = np.asarray(self.order)[pos[tuples].max(axis=1)]
            for row, x in zip(tuples, last):
                self.closing[x].append((h, row))
        return True

    def _order(self) -> list[int]:
        n = self.n
        link = np.zeros((n, n), dtype=np.int64)
        for ds, _ in self.mats:
            base = np.bincount(ds.ravel()).argmax()
            link += (ds != base) | (ds.T != base)
        for _, tuples, _ in self.higher:
            for a, b in itertools.permutations(range(tuples.shape[1]), 2):
                link[tuples[:, a], tuples[:, b]] = 1
        size = np.bincount(self.color_t, minlength=self.color_s.max() + 1)[self.color_s]
        placed = np.zeros(n, dtype=bool)
        score = np.zeros(n, dtype=np.int64)
        order = []
        for _ in range(n):
            cand = np.flatnonzero(~placed)
            key = np.lexsort((cand, size[cand], -score[cand]))
            x = int(cand[key[0]])
            order.append(x)
            placed[x] = True
            score += link[x] > 0
        return order

    def _candidates(self, depth: int, img: np.ndarray, used: np.ndarray) -> np.ndarray:
        x = self.order[depth]
        cand = np.flatnonzero((self.color_t == self.color_s[x]) & ~used)
        if cand.size == 0:
            return cand
        if self.S is not None:
            ok = np.all(self.T[cand, cand] == self.S[x, x], axis=1)
            if depth:
                done = self.order_arr[:depth]
                ok &= np.all(self.T[cand[:, None], img[done][None, :]] == self.S[x, done], axis=(1, 2))
        else:
            ok = np.ones(cand.size, dtype=bool)
        cand = cand[ok]
        if self.closing[x] and cand.size:
            keep = []
            for c in cand:
                img[x] = c
                keep.append(all(int(encode_rows(img[row][None, :], self.n)[0]) in self.higher[h][2]
                                for h, row in self.closing[x]))
            img[x] = -1
            cand = cand[np.array(keep, dtype=bool)]
        return cand

    def run(self, find_all: bool, limit: int | None = None) -> list[np.ndarray]:
        found: list[np.ndarray] = []
        if not self.feasible:
            return found
        n = self.n
        img = np.full(n, -1, dtype=np.int64)
        used = np.zeros(n, dtype=bool)
        stack = [iter(self._candidates(0, img, used).tolist())] if n else []
        if n == 0:
            return [np.zeros(0, dtype=np.int64)]
        while stack:
            depth = len(stack) - 1
            x = self.order[depth]
            if img[x] >= 0:
                used[img[x]] = False
                img[x] = -1
            c = next(stack[-1], None)
            if c is None:
                stack.pop()
                continue
            img[x] = c
            used[c] = True
            if depth + 1 == n:
                found.append(img.copy())
                if not find_all or (limit is not None and len(found) > limit):
                    return found
                continue
            stack.append(iter(self._candidates(depth + 1, img, used).tolist()))
        return found


def brute_force_automorphisms(s: Structure, bound: int = DEFAULT_AUT_BOUND,
                              max_maps: int = DEFAULT_ENUM_BOUND) -> list[StructureMap]:
    """Every relation- and preorder-preserving bijection of ``s``, sorted by vertex image tuple."""
    if s.n > bound:
        raise ResourceError(f"universe of {s.n} elements exceeds the brute-force bound {bound}")
    perms = _Search(s, s).run(True, max_maps)
    if len(perms) > max_maps:
        raise ResourceError(f"more than {max_maps} automorphisms; raise the enumeration bound")
    maps = [_checked(s, s, p, "brute-force automorphism") for p in perms]
    return sorted(maps, key=StructureMap.key)


def brute_force_isomorphism(s: Structure, t: Structure, bound: int = DEFAULT_ISO_BOUND) -> StructureMap | None:
    """A verified isomorphism s -> t, or None when none exists."""
    if s.n > bound or t.n > bound:
        raise ResourceError(f"universe of {max(s.n, t.n)} elements exceeds the brute-force bound {bound}")
    perms = _Search(s, t).run(False)
    return _checked(s, t, perms[0], "brute-force isomorphism") if perms else None


# -- orbits --------------------------------------------------------------

def k_orbits(s: Structure, k: int, bound: int = DEFAULT_ENUM_BOUND) -> np.ndarray:
    """Orbit id of every k-tuple (row-major index over universe^k) under the flow group.

    Orbit ids are numbered by the smallest tuple index in each orbit.
    """
    if k < 1:
        raise UsageError("k must be at least 1")
    pv = s.provenance
    if pv is None:
        raise UsageError("k_orbits needs a structure with provenance")
    basis = flow_basis(pv.graph, pv.modulus)
    order = pv.modulus ** len(basis)
    if order > bound:
        raise ResourceError(f"flow group order {order} exceeds the enumeration bound {bound}")
    n = s.n
    total = n ** k
    idx = np.arange(total, dtype=np.int64)
    digits = [(idx // n ** (k - 1 - j)) % n for j in range(k)]
    src, dst = [], []
    # orbits of a group are the connected components of its generators' action
    for f in basis:
        p = apply_flow(s, f).perm
        img = np.zeros(total, dtype=np.int64)
        for j in range(k):
            img = img * n + p[digits[j]]
        src.append(idx)
        dst.append(img)
    if not src:
        return idx.copy()
    A = coo_matrix((np.ones(total * len(src)), (np.concatenate(src), np.concatenate(dst))),
                   shape=(total, total))
    _, comp = connected_components(A, directed=True, connection="weak")
    first = np.full(comp.max() + 1, total, dtype=np.int64)
    np.minimum.at(first, comp, idx)
    return np.unique(first[comp], return_inverse=True)[1].ravel()


# -- isomorphism criterion and witnesses ---------------------------------

def _same_base(lam: TwistAssignment, sigma: TwistAssignment):
    if lam.graph != sigma.graph or lam.modulus != sigma.modulus:
        raise UsageError("twists are defined over different base graphs or moduli")


def cfi_isomorphic_predicate(lam: TwistAssignment, sigma: TwistAssignment) -> bool:
    _same_base(lam, sigma)
    return twist_sum(lam) == twist_sum(sigma)


def _edge_system(g: BaseGraph, m: int, edge_rhs, vertex_rhs):
    """Unknowns delta(u -> v) for every ordered edge; pair and vertex-sum equations."""
    arcs = [(u, v) for u, v in g.edges] + [(v, u) for u, v in g.edges]
    col = {a: i for i, a in enumerate(arcs)}
    rows, rhs = [], []
    for i, (u, v) in enumerate(g.edges):
        r = [0] * len(arcs)
        r[col[(u, v)]] = r[col[(v, u)]] = 1
        rows.append(r)
        rhs.append(edge_rhs[i] % m)
    for u in g.vertices:
        r = [0] * len(arcs)
        for v in g.adjacency[u]:
            r[col[(u, v)]] = 1
        rows.append(r)
        rhs.append(vertex_rhs[u] % m)
    return np.array(rows, dtype=np.int64).reshape(-1, len(arcs)), np.array(rhs, dtype=np.int64), arcs


def isomorphism_witness(G: BaseGraph, m: int, lam: TwistAssignment, sigma: TwistAssignment,
                        variant: str) -> StructureMap:
    """Constructive isomorphism CFI[G, m, lam] -> CFI[G, m, sigma] via a shift solving the edge system."""
    _same_base(lam, sigma)
    if lam.graph != G or lam.modulus != m:
        raise UsageError("twists are defined over a different base graph or modulus")
    if twist_sum(lam) != twist_sum(sigma):
        raise PreconditionError("twist sums differ; the structures are not isomorphic")
    diff = [b - a for a, b in zip(lam.values, sigma.values)]
    M, b, arcs = _edge_system(G, m, diff, [0] * G.n)
    sol = zm_solve(M, b, m)
    if not sol.consistent:
        raise InternalError("edge system unsolvable although twist sums agree")
    shift = dict(zip(arcs, sol.particular))
    s, t = build(variant, G, m, lam), build(variant, G, m, sigma)
    return _checked(s, t, _shift_perm(s, t, shift), "constructed isomorphism")


def iso_report(isomorphic: bool, method: str, witness: StructureMap | None = None) -> dict:
    doc = {"isomorphic": bool(isomorphic), "method": method}
    if witness is not None:
        doc["witness"] = witness.pairs()
    return doc


# -- CFI problem ---------------------------------------------------------

def _dense(a: np.ndarray) -> np.ndarray:
    return np.unique(a, return_inverse=True)[1].ravel()


def _i_pairs(s: Structure) -> np.ndarray:
    if "I" not in s.relations or not isinstance(s.relations["I"], TupleRelation):
        raise DataError("structure has no binary relation I")
    return s.relations["I"].tuples


def _cycle_labels(members: list[int], succ: dict[int, int], m: int) -> dict[int, int]:
    """Number ``members`` along the successor cycle, starting from the smallest."""
    lab, x = {}, min(members)
    for step in range(m):
        if x in lab:
            raise DataError("successor relation is not a single cycle")
        lab[x] = step
        x = succ.get(x)
        if x is None:
            raise DataError("successor relation is not total")
    if set(lab) != set(members) or x != min(members):
        raise DataError("successor relation is not a single cycle")
    return lab


def _recover_outer(s: Structure):
    slot = _dense(s.preorder)
    nslots = int(slot.max()) + 1
    R = s.relations.get("R")
    C = s.relations.get("C")
    if not isinstance(R, TupleRelation) or not isinstance(C, TupleRelation) or C.arity != 2:
        raise DataError("outer structure needs relations R and C")
    # slots that share an R tuple belong to one gadget
    parent = list(range(nslots))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for row in R.tuples:
        for a in slot[row[1:]]:
            parent[find(a)] = find(slot[row[0]])
    roots = sorted({find(a) for a in range(nslots)}, key=lambda r: min(a for a in range(nslots) if find(a) == r))
    gid = {r: i for i, r in enumerate(roots)}
    gadget_of_slot = [gid[find(a)] for a in range(nslots)]
    members = [[] for _ in range(nslots)]
    for x in range(s.n):
        members[slot[x]].append(x)
    m = len(members[0])
    if any(len(c) != m for c in members):
        raise DataError("preorder classes have unequal sizes")
    succ = {int(a): int(b) for a, b in C.tuples}
    lab = {}
    for c in members:
        lab.update(_cycle_labels(c, succ, m))
    # each slot (u, v) is linked by I to exactly one slot of gadget v
    partner: dict[int, int] = {}
    for x, y in _i_pairs(s):
        a, b = int(slot[x]), int(slot[y])
        if partner.setdefault(a, b) != b:
            raise DataError("I links one preorder class to several others")
    if len(partner) != nslots:
        raise DataError("some preorder class has no I partner")
    edges = sorted({tuple(sorted((gadget_of_slot[a], gadget_of_slot[b]))) for a, b in partner.items()})
    G = BaseGraph(len(roots), edges)
    key = {}
    for a, b in partner.items():
        key[a] = (gadget_of_slot[a], gadget_of_slot[b])
    s_u = {}
    for row in R.tuples:
        u = gadget_of_slot[slot[row[0]]]
        val = sum(lab[int(x)] for x in row) % m
        if s_u.setdefault(u, val) != val:
            raise DataError("R tuples do not have a constant label sum")
    coord = {x: (key[int(slot[x])], lab[x]) for x in range(s.n)}
    return G, m, coord, s_u


def _recover_inner(s: Structure):
    gad = _dense(s.preorder)
    ng = int(gad.max()) + 1
    I = _i_pairs(s)
    edges = sorted({(int(a), int(b)) for a, b in zip(gad[I[:, 0]], gad[I[:, 1]]) if a < b})
    if any(a == b for a, b in zip(gad[I[:, 0]], gad[I[:, 1]])):
        raise DataError("I links vertices inside one preorder class")
    G = BaseGraph(ng, edges)
    sizes = np.bincount(gad)
    deg = np.array(G.degrees)
    m = None
    for cand in range(2, s.n + 1):
        if np.array_equal(sizes, cand ** (deg - 1)):
            m = cand
            break
    if m is None:
        raise DataError("gadget sizes do not match m**(deg-1) for any modulus m")
    orders = tagset_orders(G, m)
    tables = {}
    for name in ("N", "C"):
        rel = s.relations.get(name)
        if not isinstance(rel, PairRankRelation) or rel.ranks.max() >= len(orders[name]):
            raise DataError(f"relation {name} is not a tagset rank table for the recovered base graph")
        tables[name] = rel.ranks
    members = [np.flatnonzero(gad == u) for u in range(ng)]
    coord: dict[int, dict] = {int(x): {} for x in range(s.n)}
    for u in range(ng):
        B = members[u]
        for v in G.adjacency[u]:
            inN = np.array([[(u, v) in orders["N"][r] for r in row] for row in tables["N"][np.ix_(B, B)]])
            inC = np.array([[(u, v) in orders["C"][r] for r in row] for row in tables["C"][np.ix_(B, B)]])
            cls = np.full(B.size, -1)
            for i in range(B.size):
                if cls[i] < 0:
                    cls[inN[i]] = i
            reps = sorted(set(cls.tolist()))
            if len(reps) != m or not np.array_equal(inN, cls[:, None] == cls[None, :]):
                raise DataError("N does not induce m equality classes per coordinate")
            succ = {}
            for i, j in zip(*np.nonzero(inC)):
                if succ.setdefault(int(cls[i]), int(cls[j])) != cls[j]:
                    raise DataError("C is not a successor relation on coordinate classes")
            lab = _cycle_labels(reps, succ, m)
            for i, x in enumerate(B):
                coord[int(x)][(u, v)] = lab[int(cls[i])]
    s_u = {}
    for u in range(ng):
        for x in members[u]:
            val = sum(coord[int(x)].values()) % m
            if s_u.setdefault(u, val) != val:
                raise DataError("gadget labels do not have a constant coordinate sum")
    return G, m, coord, s_u


def _edge_constants(s: Structure, G: BaseGraph, m: int, value) -> list[int]:
    r: dict[int, int] = {}
    for x, y in _i_pairs(s):
        (u, v), a = value(int(x), int(y))
        e = G.edge_id(u, v)
        if r.setdefault(e, a) != a:
            raise DataError("I does not pair labels with a constant sum along an edge")
    if len(r) != len(G.edges):
        raise DataError("some base edge carries no I pairs")
    return [r[e] for e in range(len(G.edges))]


def solve_cfi_problem(s: Structure) -> bool:
    """Decide whether a stripped CFI structure is isomorphic to the untwisted one (total twist zero)."""
    if s.variant == "outer":
        G, m, coord, s_u = _recover_outer(s)

        def value(x, y):
            (uv, a), (_, b) = coord[x], coord[y]
            return uv, (a + b) % m
    elif s.variant == "inner":
        G, m, coord, s_u = _recover_inner(s)
        gad = _dense(s.preorder)

        def value(x, y):
            u, v = int(gad[x]), int(gad[y])
            return (u, v), (coord[x][(u, v)] + coord[y][(v, u)]) % m
    else:
        raise DataError(f"variant {s.variant!r} is not a CFI variant")
    r = _edge_constants(s, G, m, value)
    # true labels are the recovered ones plus a shift c(u -> v); zero twist needs
    # c(u -> v) + c(v -> u) = -r_e and sum_v c(u -> v) = -s_u
    M, b, _ = _edge_system(G, m, [-x for x in r], [-s_u[u] for u in G.vertices])
    return zm_solve(M, b, m).consistent
