"""Invertible-map equivalence: k-tuple refinement by simultaneous similarity of substitution matrices.

One round refines the current partition by a counting step (one k-WL round)
and then a similarity step. For every prime p and position pair (i, j), the
color matrix of a tuple a is X[x, y] = color of a[i -> x, j -> y]; its class
matrices are the indicators 1[X == c]. Two tuples stay together only if their
families are simultaneously similar over F_p. The matrix depends only on the
context (a with positions i, j removed), so similarity classes are computed
per context.

Budget-limited similarity searches can end in Unknown. The refinement is run
optimistically (Unknown merges) and, if needed, pessimistically (Unknown
separates). The optimistic partition is coarser and the pessimistic one finer
than the exact one, so a split in the former or a match in the latter is
conclusive.
"""

from __future__ import annotations

import itertools
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .algebra import (DEFAULT_EXHAUSTIVE, DEFAULT_TRIALS, colored_invariants, colored_similarity,
                      is_prime, simultaneous_similarity)
from .errors import InternalError, ResourceError, SchemaError, UsageError
from .structures import Structure
from .wl import DEFAULT_MEMORY, Refiner, _canonical, _same_histograms, wl_equivalent

@dataclass
class ImConfig:
    k: int
    primes: tuple[int, ...]
    positions: str = "all"
    trials: int = DEFAULT_TRIALS
    exhaustive: int = DEFAULT_EXHAUSTIVE
    seed: int = 0
    threads: int = 1
    max_rounds: int | None = None
    memory: int = DEFAULT_MEMORY

    def __post_init__(self):
        if self.k < 2:
            raise UsageError("invertible-map equivalence needs k >= 2")
        if not self.primes:
            raise UsageError("the prime set must be non-empty")
        bad = [p for p in self.primes if not is_prime(int(p))]
        if bad:
            raise UsageError(f"not prime: {bad}")
        self.primes = tuple(sorted({int(p) for p in self.primes}))
        if self.positions not in ("all", "last"):
            raise UsageError("positions must be 'all' or 'last'")

    def position_pairs(self) -> list[tuple[int, int]]:
        # (j, i) gives the transposed matrices, which are similar exactly when these are
        if self.positions == "last":
            return [(self.k - 2, self.k - 1)]
        return list(itertools.combinations(range(self.k), 2))


@dataclass
class ImPartition:
    """Per-side colors of k-tuples under a shared palette, with the refinement history."""

    k: int
    primes: tuple[int, ...]
    colors: list[np.ndarray]
    rounds: int = 0
    history: list[dict] = field(default_factory=list)
    unknowns: list[dict] = field(default_factory=list)
    stats: dict = field(default_factory=lambda: {"similarity_calls": 0, "cache_hits": 0})
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_classes(self) -> int:
        return int(np.unique(np.concatenate(self.colors)).size)


@dataclass
class EquivalenceVerdict:
    verdict: str
    k: int
    primes: tuple[int, ...]
    rounds: int
    certificate: dict
    budget_report: dict
    partition: ImPartition | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "k": self.k, "primes": list(self.primes), "rounds": self.rounds,
                "certificate": self.certificate, "budget_report": self.budget_report}


# -- matrices ------------------------------------------------------------

def color_matrix(colors: np.ndarray, n: int, k: int, tup, positions: tuple[int, int]) -> np.ndarray:
    """X[x, y] = color of tup[i -> x, j -> y]."""
    i, j = positions
    if k < 2:
        raise UsageError("class matrices need k >= 2")
    if i == j or not (0 <= i < k and 0 <= j < k):
        raise UsageError("positions must be two distinct indices below k")
    C = np.asarray(colors).reshape((n,) * k)
    index = [int(a) for a in tup]
    index[i] = slice(None)
    index[j] = slice(None)
    X = C[tuple(index)]
    return X if i < j else X.T


def class_matrix(colors: np.ndarray, n: int, k: int, tup, c: int, positions: tuple[int, int]) -> np.ndarray:
    """0/1 matrix with entry (x, y) = 1 iff tup[i -> x, j -> y] has color c."""
    return (color_matrix(colors, n, k, tup, positions) == c).astype(np.int64)


def _contexts(C: np.ndarray, n: int, k: int, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """All color matrices for pair (i, j), shape (n**(k-2), n, n), and each tuple's context index."""
    A = np.moveaxis(C.reshape((n,) * k), (i, j), (0, 1))
    mats = np.ascontiguousarray(A.reshape(n, n, -1).transpose(2, 0, 1))
    others = [q for q in range(k) if q not in (i, j)]
    idx = np.arange(n ** k, dtype=np.int64)
    ctx = np.zeros(n ** k, dtype=np.int64)
    for q in others:
        ctx = ctx * n + (idx // n ** (k - 1 - q)) % n
    return mats, ctx


def _context_tuple(ctx: int, n: int, k: int, i: int, j: int) -> list[int]:
    others = [q for q in range(k) if q not in (i, j)]
    tup = [0] * k
    for q in reversed(others):
        tup[q] = ctx % n
        ctx //= n
    return tup


def _pattern_key(p: int, X: np.ndarray, Y: np.ndarray) -> tuple:
    """Cache key invariant under joint renaming of colors that keeps their order."""
    _, inv = np.unique(np.concatenate([X.ravel(), Y.ravel()]), return_inverse=True)
    return p, X.shape[0], inv.astype(np.int32).tobytes()


# -- similarity grouping ---------------------------------------------------

class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _group(mats: list[np.ndarray], p: int, cfg: ImConfig, mode: str, tag: tuple, shared: dict):
    """Similarity class id for every context matrix of every side.

    ``shared`` is a read-only verdict cache; new verdicts go to the returned local cache.
    """
    flat = [(s, c) for s, M in enumerate(mats) for c in range(M.shape[0])]
    distinct: dict[bytes, int] = {}
    owner = np.empty(len(flat), dtype=np.int64)
    reps = []
    for q, (s, c) in enumerate(flat):
        key = mats[s][c].tobytes()
        if key not in distinct:
            distinct[key] = len(reps)
            reps.append((s, c))
        owner[q] = distinct[key]
    inv = [colored_invariants(mats[s][c], p) for s, c in reps]
    order = sorted(range(len(reps)), key=lambda r: (inv[r], r))
    uf = _UnionFind(len(reps))
    local: dict = {}
    unknown = []
    calls = hits = 0
    bucket_heads: dict = {}
    for r in order:
        X = mats[reps[r][0]][reps[r][1]]
        heads = bucket_heads.setdefault(inv[r], [])
        similar = False
        for h in heads:
            Y = mats[reps[h][0]][reps[h][1]]
            key = _pattern_key(p, Y, X)
            status = shared.get(key) or local.get(key)
            if status is not None:
                hits += 1
            else:
                # seeded by the pattern alone, so a cached verdict equals a recomputed one
                rng = np.random.default_rng([cfg.seed, p, zlib.crc32(key[2])])
                status = colored_similarity(Y, X, p, rng, cfg.trials, cfg.exhaustive,
                                            invariants=(inv[h], inv[r])).status
                local[key] = status
                calls += 1
            if status == "similar":
                uf.union(h, r)
                similar = True
                break
            if status == "unknown":
                unknown.append({"round": tag[0], "p": p, "positions": list(tag[2:4]),
                                "contexts": [list(reps[h]), list(reps[r])]})
                if mode == "optimistic":
                    uf.union(h, r)
        if not similar:
            heads.append(r)
    root = np.array([uf.find(r) for r in range(len(reps))], dtype=np.int64)
    ids = root[owner]
    out, pos = [], 0
    for M in mats:
        out.append(ids[pos:pos + M.shape[0]])
        pos += M.shape[0]
    return out, unknown, calls, hits, local


# -- refinement ------------------------------------------------------------

def _similarity_columns(colors: list[np.ndarray], n: int, cfg: ImConfig, mode: str, state: ImPartition):
    jobs = [(p, i, j) for p in cfg.primes for i, j in cfg.position_pairs()]

    shared = dict(state.cache)

    def run(job):
        p, i, j = job
        pairs = [_contexts(C, n, cfg.k, i, j) for C in colors]
        ids, unknown, calls, hits, local = _group([m for m, _ in pairs], p, cfg, mode,
                                                  (state.rounds, p, i, j), shared)
        return [g[ctx] for g, (_, ctx) in zip(ids, pairs)], unknown, calls, hits, local

    if cfg.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    cols = [[] for _ in colors]
    for job, (per_side, unknown, calls, hits, local) in zip(jobs, results):
        for side, col in enumerate(per_side):
            cols[side].append(col)
        state.cache.update(local)
        state.unknowns += unknown
        state.stats["similarity_calls"] += calls
        state.stats["cache_hits"] += hits
    return jobs, cols


def im_step(state: ImPartition, structs: list[Structure], cfg: ImConfig, mode: str = "optimistic",
            refiner: Refiner | None = None) -> tuple[ImPartition, dict]:
    """One round: counting refinement, then the similarity refinement. Returns the new state and the
    intermediate data used for certificates."""
    n = structs[0].n
    refiner = refiner or Refiner(structs, cfg.k, cfg.threads, cfg.memory)
    counted = refiner.step(state.colors)
    jobs, cols = _similarity_columns(counted, n, cfg, mode, state)
    rows = [np.column_stack([c] + sc) for c, sc in zip(counted, cols)]
    new = _canonical(rows)
    state.rounds += 1
    state.history.append({"round": state.rounds, "after_counting": int(np.unique(np.concatenate(counted)).size),
                          "after_similarity": int(np.unique(np.concatenate(new)).size)})
    state.colors = new
    return state, {"counted": counted, "jobs": jobs, "cols": cols}


def _check_inputs(structs: list[Structure], cfg: ImConfig):
    ref = structs[0]
    for s in structs[1:]:
        if s.schema != ref.schema:
            raise SchemaError("structures have different relation schemas")
    need = sum(s.n ** cfg.k * s.n * 8 for s in structs)
    if need > cfg.memory:
        raise ResourceError(f"k={cfg.k} needs about {need >> 20} MiB, above the budget {cfg.memory >> 20} MiB")


def im_refine(structs: list[Structure], cfg: ImConfig, mode: str = "optimistic",
              stop_on_split: bool = False) -> tuple[ImPartition, dict | None]:
    """Iterate :func:`im_step` to the stable partition (or the first histogram split)."""
    _check_inputs(structs, cfg)
    refiner = Refiner(structs, cfg.k, cfg.threads, cfg.memory)
    state = ImPartition(cfg.k, cfg.primes, refiner.initial())
    split = None
    n = structs[0].n
    limit = cfg.max_rounds if cfg.max_rounds is not None else n ** cfg.k
    if stop_on_split and not _same_histograms(state.colors):
        return state, {"round": 0, "stage": "initial", "prev": state.colors}
    while state.rounds < limit:
        before = state.n_classes
        prev = state.colors
        state, info = im_step(state, structs, cfg, mode, refiner)
        if stop_on_split and len(structs) > 1:
            if not _same_histograms(info["counted"]):
                split = {"round": state.rounds, "stage": "counting", "prev": prev, **info}
                break
            if not _same_histograms(state.colors):
                split = {"round": state.rounds, "stage": "similarity", "prev": prev, **info}
                break
        if state.n_classes == before:
            break
    else:
        raise ResourceError(f"no stable partition within {limit} rounds")
    return state, split


# -- certificates ------------------------------------------------------------

def _mismatch_class(colors: list[np.ndarray]) -> tuple[int, int, int]:
    a, b = colors
    cls = np.union1d(a, b)
    ca = np.array([np.count_nonzero(a == c) for c in cls])
    cb = np.array([np.count_nonzero(b == c) for c in cls])
    q = int(np.flatnonzero(ca != cb)[0])
    return int(cls[q]), int(ca[q]), int(cb[q])


def _similarity_certificate(structs, cfg: ImConfig, split: dict, verify_exhaustive: int) -> dict:
    n, k = structs[0].n, cfg.k
    counted = split["counted"]
    rows = [np.column_stack([c] + sc) for c, sc in zip(counted, split["cols"])]
    combined = _canonical(rows)
    c, cnt_s, cnt_t = _mismatch_class(combined)
    big, small = (0, 1) if cnt_s > cnt_t else (1, 0)
    a = int(np.flatnonzero(combined[big] == c)[0])
    color = counted[big][a]
    pool = np.flatnonzero((counted[small] == color) & (combined[small] != c))
    if pool.size == 0:
        raise InternalError("no partner tuple for the similarity certificate")
    b = int(pool[0])
    q = next(q for q in range(len(split["jobs"])) if split["cols"][big][q][a] != split["cols"][small][q][b])
    p, i, j = split["jobs"][q]
    ta = [int(x) for x in np.unravel_index(a, (n,) * k)]
    tb = [int(x) for x in np.unravel_index(b, (n,) * k)]
    X = color_matrix(counted[big], n, k, ta, (i, j))
    Y = color_matrix(counted[small], n, k, tb, (i, j))
    colors = np.union1d(X, Y)
    fam_x = [(X == col).astype(np.int64) for col in colors]
    fam_y = [(Y == col).astype(np.int64) for col in colors]
    # independent route: dense stacked intertwiner system and the generic invariants
    # products of length 3 over dozens of colors are too many; ranks and pair traces suffice here
    check = simultaneous_similarity(fam_x, fam_y, p, np.random.default_rng(cfg.seed), cfg.trials, verify_exhaustive,
                                    invariant_len=2)
    sides = ["s", "t"]
    return {"kind": "similarity", "round": split["round"], "p": p, "positions": [i, j],
            "class": c, "counts": {sides[big]: max(cnt_s, cnt_t), sides[small]: min(cnt_s, cnt_t)},
            "tuples": {sides[big]: ta, sides[small]: tb}, "n_colors": int(colors.size),
            "recheck": {"status": check.status, "reason": check.reason},
            "verified": check.status == "not_similar"}


def _certificate(structs, cfg: ImConfig, split: dict, verify_exhaustive: int) -> dict:
    if split["stage"] == "initial":
        c, a, b = _mismatch_class(split["prev"])
        return {"kind": "atomic", "round": 0, "class": c, "counts": {"s": a, "t": b},
                "verified": not wl_equivalent(structs[0], structs[1], cfg.k)}
    if split["stage"] == "counting":
        c, a, b = _mismatch_class(split["counted"])
        # the counting step is a k-WL round, so k-WL must separate the pair as well
        return {"kind": "counting", "round": split["round"], "class": c, "counts": {"s": a, "t": b},
                "verified": not wl_equivalent(structs[0], structs[1], cfg.k, cfg.threads)}
    return _similarity_certificate(structs, cfg, split, verify_exhaustive)


# -- public API ------------------------------------------------------------

def _budget_report(cfg: ImConfig, runs: list[ImPartition]) -> dict:
    return {"trials": cfg.trials, "exhaustive": cfg.exhaustive, "positions": cfg.positions,
            "similarity_calls": sum(r.stats["similarity_calls"] for r in runs),
            "cache_hits": sum(r.stats["cache_hits"] for r in runs),
            "unknown": sum(len(r.unknowns) for r in runs),
            "runs": [{"rounds": r.rounds, "history": r.history} for r in runs]}


def im_equivalent(s: Structure, t: Structure, k: int, primes, positions: str = "all",
                  trials: int = DEFAULT_TRIALS, exhaustive: int = DEFAULT_EXHAUSTIVE, seed: int = 0,
                  threads: int = 1, max_rounds: int | None = None, memory: int = DEFAULT_MEMORY,
                  verify_exhaustive: int = DEFAULT_EXHAUSTIVE) -> EquivalenceVerdict:
    cfg = ImConfig(k, tuple(primes), positions, trials, exhaustive, seed, threads, max_rounds, memory)
    if s.schema != t.schema:
        raise SchemaError("structures have different relation schemas")
    if s.n != t.n:
        return EquivalenceVerdict("not_equivalent", k, cfg.primes, 0,
                                  {"kind": "size", "sizes": [s.n, t.n], "verified": True},
                                  _budget_report(cfg, []))
    opt, split = im_refine([s, t], cfg, "optimistic", stop_on_split=True)
    if split is not None:
        cert = _certificate([s, t], cfg, split, verify_exhaustive)
        if not cert["verified"] and cert.get("recheck", {}).get("status") == "similar":
            raise InternalError("certificate contradicted by an independent similarity check")
        return EquivalenceVerdict("not_equivalent", k, cfg.primes, opt.rounds, cert, _budget_report(cfg, [opt]))
    if not opt.unknowns:
        return EquivalenceVerdict("equivalent", k, cfg.primes, opt.rounds,
                                  {"kind": "stable", "classes": opt.n_classes, "exact": True},
                                  _budget_report(cfg, [opt]), opt)
    pes, split = im_refine([s, t], cfg, "pessimistic", stop_on_split=True)
    runs = [opt, pes]
    if split is None:
        return EquivalenceVerdict("equivalent", k, cfg.primes, pes.rounds,
                                  {"kind": "stable", "classes": pes.n_classes, "exact": False},
                                  _budget_report(cfg, runs), pes)
    return EquivalenceVerdict("unknown", k, cfg.primes, pes.rounds,
                              {"kind": "budget", "unknown": opt.unknowns[:20]}, _budget_report(cfg, runs))


def im_stable(structs: list[Structure], k: int, primes, mode: str = "pessimistic", **kw) -> ImPartition:
    """Stable joint partition (no early stop); used for refinement comparisons."""
    cfg = ImConfig(k, tuple(primes), **kw)
    return im_refine(list(structs), cfg, mode)[0]


def _subsets_of_interest(primes: list[int]) -> list[tuple[int, ...]]:
    ps = sorted(set(primes))
    out = [(p,) for p in ps]
    out += list(itertools.combinations(ps, 2)) if len(ps) > 2 else []
    if len(ps) > 1:
        out.append(tuple(ps))
    rest = tuple(p for p in ps if p != 2)
    if 2 in ps and len(rest) > 1:
        out.append(rest)
    seen, uniq = set(), []
    for q in out:
        if q not in seen:
            seen.add(q)
            uniq.append(q)
    return uniq


def prime_sweep(s: Structure, t: Structure, k: int, primes, **kw) -> list[dict]:
    """Verdict per prime subset: singletons, pairs, all primes, and all primes except 2."""
    rows = []
    for q in _subsets_of_interest(list(primes)):
        v = im_equivalent(s, t, k, q, **kw)
        rows.append({"primes": list(q), "verdict": v.verdict, "rounds": v.rounds,
                     "certificate_kind": v.certificate.get("kind"),
                     "unknown": v.budget_report["unknown"]})
    return rows
