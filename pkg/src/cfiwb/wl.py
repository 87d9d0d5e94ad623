"""k-dimensional Weisfeiler-Leman refinement on relational structures with a preorder.

Convention: the new color of a k-tuple is its old color together with the
multiset, over universe elements x, of the k-vector of old colors of the tuples
obtained by replacing position i with x (i = 1..k). For k = 1 this convention
carries no relational information, so k = 1 uses color refinement: the multiset
is over pairs (atomic type of (a, x), old color of x).

Several structures can be refined together with one shared palette; this is
how equivalence is decided (equal palettes make histograms comparable).
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ResourceError, SchemaError, UsageError
from .structures import PairRankRelation, Structure

DEFAULT_MEMORY = 2 ** 30
_CHUNK = 1 << 14


@dataclass
class TupleColoring:
    """Stable coloring of k-tuples, indexed row-major over universe**k."""

    k: int
    n: int
    colors: np.ndarray
    rounds: int
    class_counts: list[int] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return int(np.unique(self.colors).size)

    def histogram(self) -> dict[int, int]:
        vals, cnt = np.unique(self.colors, return_counts=True)
        return dict(zip(vals.tolist(), cnt.tolist()))

    def color_of(self, tup) -> int:
        idx = 0
        for a in tup:
            idx = idx * self.n + int(a)
        return int(self.colors[idx])

    def vertex_classes(self) -> np.ndarray:
        """Colors of the diagonal tuples (x, ..., x), as dense class ids."""
        diag = np.arange(self.n) * sum(self.n ** j for j in range(self.k))
        return np.unique(self.colors[diag], return_inverse=True)[1].ravel()

    def report(self) -> dict:
        return {"k": self.k, "n": self.n, "rounds": self.rounds, "stable_round": self.rounds,
                "class_counts": list(self.class_counts),
                "histogram": [[c, k] for c, k in sorted(self.histogram().items())]}


# -- atomic types --------------------------------------------------------

def atomic_type(s: Structure, tup) -> tuple:
    """Signature of a tuple: equality pattern, preorder pattern, and relation incidences.

    Relation incidences are, per relation, the position maps [r] -> [k] whose
    induced tuple lies in the relation.
    """
    tup = [int(a) for a in tup]
    k = len(tup)
    if any(not 0 <= a < s.n for a in tup):
        raise UsageError("tuple entries must be universe ids")
    pairs = list(itertools.combinations(range(k), 2))
    eq = tuple(tup[i] == tup[j] for i, j in pairs)
    pre = tuple(int(np.sign(s.preorder[tup[i]] - s.preorder[tup[j]])) for i, j in pairs)
    rels = []
    for name, rel in s.relations.items():
        hits = []
        for f in itertools.product(range(k), repeat=rel.arity):
            row = np.array([[tup[i] for i in f]])
            if rel.contains(row, s.n)[0]:
                hits.append(f)
        rels.append((name, tuple(hits)))
    return eq, pre, tuple(rels)


def _digits(idx: np.ndarray, n: int, k: int) -> list[np.ndarray]:
    return [(idx // n ** (k - 1 - j)) % n for j in range(k)]


def _atomic_features(s: Structure, k: int, idx: np.ndarray) -> np.ndarray:
    """Integer feature rows equivalent to :func:`atomic_type` for the tuples ``idx``."""
    d = _digits(idx, s.n, k)
    cols = []
    for i, j in itertools.combinations(range(k), 2):
        cols.append(d[i] == d[j])
        cols.append(np.sign(s.preorder[d[i]] - s.preorder[d[j]]) + 1)
    for rel in s.relations.values():
        if isinstance(rel, PairRankRelation):
            # the membership pattern of all position maps is the order pattern of the k*k pair ranks
            r = [rel.ranks[d[i], d[j]] for i in range(k) for j in range(k)]
            for a, b in itertools.combinations(range(len(r)), 2):
                cols.append(np.sign(r[a] - r[b]) + 1)
        else:
            codes = np.sort(rel.codes(s.n))
            for f in itertools.product(range(k), repeat=rel.arity):
                code = np.zeros(idx.size, dtype=np.int64)
                for i in f:
                    code = code * s.n + d[i]
                if codes.size:
                    pos = np.minimum(np.searchsorted(codes, code), codes.size - 1)
                    cols.append(codes[pos] == code)
                else:
                    cols.append(np.zeros(idx.size, dtype=bool))
    if not cols:
        return np.zeros((idx.size, 1), dtype=np.int64)
    return np.stack([np.asarray(c, dtype=np.int64) for c in cols], axis=1)


def _check_schema(structs: list[Structure]):
    ref = structs[0].schema
    for t in structs[1:]:
        if t.schema != ref:
            raise SchemaError("structures have different relation schemas")


def _canonical(rows: list[np.ndarray]) -> list[np.ndarray]:
    """Joint canonical ids: rank of each row among all distinct rows of all parts."""
    sizes = [r.shape[0] for r in rows]
    allrows = np.ascontiguousarray(np.vstack(rows), dtype=np.int64)
    return np.split(_row_ids(allrows), np.cumsum(sizes)[:-1])


_WEIGHTS = np.random.default_rng(0xC0105).integers(1, 2 ** 62, size=(2, 4096), dtype=np.int64)


def _row_ids(A: np.ndarray) -> np.ndarray:
    """Dense ids of the distinct rows of A; the id depends only on the row's content.

    Rows are grouped by two 64-bit fingerprints and the grouping is checked
    exactly; a collision falls back to a lexicographic unique.
    """
    if A.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    w = A.shape[1]
    W = _WEIGHTS[:, :w] if w <= _WEIGHTS.shape[1] else \
        np.random.default_rng(0xC0105).integers(1, 2 ** 62, size=(2, w), dtype=np.int64)
    with np.errstate(over="ignore"):
        h = np.stack([A @ W[0], A @ W[1]], axis=1)
    _, first, inv = np.unique(h, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    if np.array_equal(A[first][inv], A):
        return inv.astype(np.int64)
    _, inv = np.unique(A, axis=0, return_inverse=True)
    return inv.ravel().astype(np.int64)


def initial_colors(structs: list[Structure], k: int) -> list[np.ndarray]:
    _check_schema(structs)
    return _canonical([_atomic_features(s, k, np.arange(s.n ** k, dtype=np.int64)) for s in structs])


# -- refinement ----------------------------------------------------------

class Refiner:
    """One refinement round at a time over a list of structures with a shared palette."""

    def __init__(self, structs: list[Structure], k: int, threads: int = 1, memory: int = DEFAULT_MEMORY):
        if k < 1:
            raise UsageError("k must be at least 1")
        self.structs = list(structs)
        _check_schema(self.structs)
        self.k = k
        self.threads = max(1, int(threads))
        need = sum(s.n ** k * (s.n + 1) * 8 for s in self.structs)
        if need > memory:
            raise ResourceError(f"k={k} refinement needs about {need >> 20} MiB, above the budget {memory >> 20} MiB")
        if k == 1:
            self.pair_types = _canonical([_atomic_features(s, 2, np.arange(s.n ** 2, dtype=np.int64))
                                          for s in self.structs])

    def initial(self) -> list[np.ndarray]:
        return initial_colors(self.structs, self.k)

    def _chunk_rows(self, si: int, C: np.ndarray, lo: int, hi: int, nc: int) -> np.ndarray:
        n, k = self.structs[si].n, self.k
        idx = np.arange(lo, hi, dtype=np.int64)
        xs = np.arange(n, dtype=np.int64)
        if k == 1:
            pt = self.pair_types[si].reshape(n, n)[lo:hi]
            codes = pt * nc + C[None, :]
        else:
            d = _digits(idx, n, k)
            codes = np.zeros((idx.size, n), dtype=np.int64)
            for i in range(k):
                w = n ** (k - 1 - i)
                sub = idx[:, None] + (xs[None, :] - d[i][:, None]) * w
                codes = codes * nc + C[sub]
        codes.sort(axis=1)
        return np.hstack([C[idx][:, None], codes])

    def step(self, colors: list[np.ndarray]) -> list[np.ndarray]:
        nc = int(max(c.max(initial=0) for c in colors)) + 1
        if self.k == 1:
            width = float(nc) * (max(int(t.max(initial=0)) for t in self.pair_types) + 1)
        else:
            width = float(nc) ** self.k
        if width >= 2.0 ** 62:
            raise ResourceError("color codes would overflow 64-bit integers")
        jobs = []
        for si, C in enumerate(colors):
            total = C.size
            for lo in range(0, total, _CHUNK):
                jobs.append((si, C, lo, min(total, lo + _CHUNK)))
        if self.threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                parts = list(ex.map(lambda j: self._chunk_rows(j[0], j[1], j[2], j[3], nc), jobs))
        else:
            parts = [self._chunk_rows(*j, nc) for j in jobs]
        per_struct: list[list[np.ndarray]] = [[] for _ in colors]
        for (si, *_), rows in zip(jobs, parts):
            per_struct[si].append(rows)
        rows = [np.vstack(p) for p in per_struct]
        return _canonical(rows)


def _n_classes(colors: list[np.ndarray]) -> int:
    return int(np.unique(np.concatenate(colors)).size)


def refine_joint(structs: list[Structure], k: int, threads: int = 1, memory: int = DEFAULT_MEMORY,
                 stop_on_split: bool = False) -> tuple[list[TupleColoring], bool]:
    """Refine all structures to the joint stable coloring.

    With ``stop_on_split`` the run halts at the first round where the color
    histograms of the structures differ; the second return value reports
    whether that happened.
    """
    ref = Refiner(structs, k, threads, memory)
    colors = ref.initial()
    counts = [[int(np.unique(c).size)] for c in colors]
    rounds = 0
    split = False
    while True:
        if stop_on_split and len(colors) > 1 and not _same_histograms(colors):
            split = True
            break
        new = ref.step(colors)
        if _n_classes(new) == _n_classes(colors):
            break
        colors = new
        rounds += 1
        for cnt, c in zip(counts, colors):
            cnt.append(int(np.unique(c).size))
    out = [TupleColoring(k, s.n, c, rounds, cnt) for s, c, cnt in zip(structs, colors, counts)]
    return out, split


def _same_histograms(colors: list[np.ndarray]) -> bool:
    ref = np.sort(colors[0])
    return all(c.size == ref.size and np.array_equal(np.sort(c), ref) for c in colors[1:])


def wl_stable(s: Structure, k: int, threads: int = 1, memory: int = DEFAULT_MEMORY) -> TupleColoring:
    return refine_joint([s], k, threads, memory)[0][0]


def wl_equivalent(s: Structure, t: Structure, k: int, threads: int = 1, memory: int = DEFAULT_MEMORY) -> bool:
    """True iff the stable k-WL color histograms of s and t agree under a shared palette."""
    _check_schema([s, t])
    if s.n != t.n:
        return False
    cols, split = refine_joint([s, t], k, threads, memory, stop_on_split=True)
    return not split and _same_histograms([c.colors for c in cols])


def distinguishing_dimension(s: Structure, t: Structure, k_max: int, threads: int = 1,
                             memory: int = DEFAULT_MEMORY) -> int | None:
    """Smallest k <= k_max with s and t not k-WL-equivalent, or None."""
    if k_max < 1:
        raise UsageError("k_max must be at least 1")
    for k in range(1, k_max + 1):
        if not wl_equivalent(s, t, k, threads, memory):
            return k
    return None


def coloring_report(c: TupleColoring) -> dict:
    return c.report()


def same_partition(a, b) -> bool:
    """True iff two label arrays induce the same partition of their index set."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        return False
    pairs = np.unique(np.stack([a, b], 1), axis=0)
    return pairs.shape[0] == np.unique(a).size == np.unique(b).size
