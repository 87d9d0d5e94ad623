"""Ordered base graphs: catalog, random regular sampling, girth and vertex connectivity."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

from .errors import DataError, GenerationError, UsageError

INF = math.inf


@dataclass(frozen=True)
class BaseGraph:
    """Simple connected graph on vertices 0..n-1, ordered by integer value.

    ``edges`` holds pairs ``(u, v)`` with ``u < v`` in lexicographic order; the
    position of an edge in this tuple is its index everywhere else (twists,
    flows, the CLI ``e<index>=<value>`` syntax).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        norm = sorted({(min(u, v), max(u, v)) for u, v in self.edges})
        if len(norm) != len(self.edges):
            raise DataError("parallel edges are not allowed")
        for u, v in norm:
            if u == v:
                raise DataError(f"loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DataError(f"edge ({u}, {v}) outside vertex range 0..{self.n - 1}")
        object.__setattr__(self, "edges", tuple(norm))
        if not self.is_connected():
            raise DataError("base graph must be connected")

    @property
    def vertices(self) -> range:
        return range(self.n)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(a)) for a in nbrs)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges)}

    def edge_id(self, u: int, v: int) -> int:
        return self.edge_index[(min(u, v), max(u, v))]

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.adjacency)

    @property
    def regular_degree(self) -> int | None:
        degs = set(self.degrees)
        return degs.pop() if len(degs) == 1 else None

    @cached_property
    def girth(self) -> float:
        return girth(self)

    @cached_property
    def connectivity(self) -> int:
        return vertex_connectivity(self)

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        seen = {0}
        todo = [0]
        while todo:
            u = todo.pop()
            for w in nbrs[u]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == self.n

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        meta = {"name": self.name, **self.meta}
        return {
            "schema_version": 1,
            "vertices": list(range(self.n)),
            "edges": [list(e) for e in self.edges],
            "meta": meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> BaseGraph:
        if not isinstance(doc, dict) or doc.get("schema_version") != 1:
            raise DataError("graph document: missing or unsupported schema_version")
        try:
            verts = list(doc["vertices"])
            edges = [tuple(int(x) for x in e) for e in doc["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"graph document: malformed field ({exc})") from None
        if verts != list(range(len(verts))):
            raise DataError("graph document: vertices must be 0..n-1 in order")
        for i, e in enumerate(edges):
            if len(e) != 2:
                raise DataError(f"graph document: edges[{i}] is not a pair")
        meta = dict(doc.get("meta") or {})
        name = meta.pop("name", "")
        return cls(len(verts), tuple(edges), name=name, meta=meta)

    @classmethod
    def from_json(cls, text: str) -> BaseGraph:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"graph document: invalid JSON at line {exc.lineno} column {exc.colno}") from None
        return cls.from_dict(doc)

    def to_dot(self) -> str:
        lines = [f'graph "{self.name or "G"}" {{']
        lines += [f"  {v};" for v in range(self.n)]
        lines += [f"  {u} -- {v};" for u, v in self.edges]
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GraphRequirements:
    min_degree: int = 0
    regular: bool = False
    min_connectivity: int = 0
    min_girth: int = 0

    def __post_init__(self):
        if min(self.min_degree, self.min_connectivity, self.min_girth) < 0:
            raise UsageError("requirement bounds must be non-negative")


@dataclass(frozen=True)
class RequirementCheck:
    name: str
    required: object
    actual: object
    passed: bool


@dataclass(frozen=True)
class RequirementReport:
    checks: tuple[RequirementCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[RequirementCheck]:
        return [c for c in self.checks if not c.passed]


def check_requirements(g: BaseGraph, r: GraphRequirements) -> RequirementReport:
    mindeg = min(g.degrees) if g.n else 0
    checks = [
        RequirementCheck("min_degree", r.min_degree, mindeg, mindeg >= r.min_degree),
        RequirementCheck("regular", r.regular, g.regular_degree is not None,
                         (not r.regular) or g.regular_degree is not None),
        RequirementCheck("min_connectivity", r.min_connectivity, g.connectivity,
                         g.connectivity >= r.min_connectivity),
        RequirementCheck("min_girth", r.min_girth, g.girth, g.girth >= r.min_girth),
    ]
    return RequirementReport(tuple(checks))


def girth(g: BaseGraph) -> float:
    """Shortest cycle length by breadth-first search from every vertex; ``inf`` for forests."""
    best = INF
    adj = g.adjacency
    for root in range(g.n):
        dist = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            if 2 * dist[u] + 1 >= best:
                break
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue.append(w)
                elif parent[u] != w:
                    best = min(best, dist[u] + dist[w] + 1)
    return best


def _disjoint_paths(adj, s: int, t: int, n: int) -> int:
    # vertex x splits into x_in = 2x and x_out = 2x+1 with capacity 1 (inf for s, t)
    cap: dict[tuple[int, int], int] = {}
    out: list[list[int]] = [[] for _ in range(2 * n)]

    def arc(a, b, c):
        if (a, b) not in cap:
            out[a].append(b)
            out[b].append(a)
            cap[(a, b)] = 0
            cap.setdefault((b, a), 0)
        cap[(a, b)] += c

    big = n + 1
    for x in range(n):
        arc(2 * x, 2 * x + 1, big if x in (s, t) else 1)
        for y in adj[x]:
            arc(2 * x + 1, 2 * y, big)
    src, snk = 2 * s + 1, 2 * t
    flow = 0
    while True:
        prev = {src: None}
        queue = deque([src])
        while queue and snk not in prev:
            a = queue.popleft()
            for b in out[a]:
                if b not in prev and cap[(a, b)] > 0:
                    prev[b] = a
                    queue.append(b)
        if snk not in prev:
            return flow
        b = snk
        while prev[b] is not None:
            a = prev[b]
            cap[(a, b)] -= 1
            cap[(b, a)] += 1
            b = a
        flow += 1


def vertex_connectivity(g: BaseGraph) -> int:
    """Minimum number of vertices whose removal disconnects ``g`` (``n - 1`` for complete graphs)."""
    n = g.n
    if n <= 1:
        return 0
    adj = g.adjacency
    best = n - 1
    for s in range(n):
        nb = set(adj[s])
        for t in range(s + 1, n):
            if t in nb:
                continue
            best = min(best, _disjoint_paths(adj, s, t, n))
    return best


# -- catalog -------------------------------------------------------------

PETERSEN_EDGES = [(i, (i + 1) % 5) for i in range(5)] + [(i, i + 5) for i in range(5)] + \
    [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
# Heawood graph as the LCF graph [5, -5]^7
HEAWOOD_EDGES = [(i, (i + 1) % 14) for i in range(14)] + \
    [(i, (i + (5 if i % 2 == 0 else -5)) % 14) for i in range(0, 14, 2)]


def _complete(n):
    return list(combinations(range(n), 2))


def _catalog_entry(name: str):
    """Return (n, edges, annotations) for a catalog key, or None."""
    if name.startswith("k") and name[1:].isdigit():
        n = int(name[1:])
        if 1 <= n <= 8:
            return n, _complete(n), {"degree": n - 1, "girth": 3 if n >= 3 else None,
                                     "connectivity": n - 1}
    if name == "k33":
        edges = [(a, b) for a in range(3) for b in range(3, 6)]
        return 6, edges, {"degree": 3, "girth": 4, "connectivity": 3}
    if name.startswith("c") and name[1:].isdigit():
        n = int(name[1:])
        if 3 <= n <= 20:
            return n, [(i, (i + 1) % n) for i in range(n)], {"degree": 2, "girth": n, "connectivity": 2}
    if name == "cage-3-5":
        return 10, PETERSEN_EDGES, {"degree": 3, "girth": 5, "connectivity": 3}
    if name == "cage-3-6":
        return 14, HEAWOOD_EDGES, {"degree": 3, "girth": 6, "connectivity": 3}
    if name.startswith("circulant-") and name[10:].isdigit():
        # Moebius ladder: circulant C_n(1, n/2)
        n = int(name[10:])
        if n % 2 == 0 and 6 <= n <= 20:
            edges = {(min(i, j), max(i, j)) for i in range(n) for j in ((i + 1) % n, (i + n // 2) % n)}
            return n, sorted(edges), {"degree": 3, "girth": 4, "connectivity": 3}
    return None


def catalog_names() -> list[str]:
    names = [f"k{n}" for n in range(1, 9)] + ["k33"] + [f"c{n}" for n in range(3, 21)]
    names += ["cage-3-5", "cage-3-6"] + [f"circulant-{n}" for n in range(6, 21, 2)]
    return names


def catalog_graph(name: str) -> BaseGraph:
    entry = _catalog_entry(name)
    if entry is None:
        raise UsageError(f"unknown catalog graph {name!r}; known: {', '.join(catalog_names())}")
    n, edges, ann = entry
    girth_ann = ann["girth"] if ann["girth"] is not None else None
    return BaseGraph(n, tuple(edges), name=name,
                     meta={"annotated_degree": ann["degree"], "annotated_girth": girth_ann,
                           "annotated_connectivity": ann["connectivity"]})


def random_regular(d: int, n: int, seed: int, budget: int = 10_000) -> BaseGraph:
    """Sample a connected simple d-regular graph with the pairing model."""
    if d < 1 or n <= d or (n * d) % 2:
        raise UsageError(f"no {d}-regular graph sampling for n={n} (need d >= 1, n > d, n*d even)")
    rng = np.random.default_rng(seed)
    points = np.repeat(np.arange(n), d)
    for _ in range(budget):
        perm = rng.permutation(points)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        edges = {(int(min(a, b)), int(max(a, b))) for a, b in pairs}
        if len(edges) != len(pairs):
            continue
        try:
            return BaseGraph(n, tuple(sorted(edges)), name=f"random-{d}-{n}-{seed}")
        except DataError:
            continue
    raise GenerationError(f"no connected simple {d}-regular graph on {n} vertices after {budget} attempts")


def from_networkx(G, name: str = "") -> BaseGraph:
    """Relabel a networkx graph to 0..n-1 following sorted node order."""
    nodes = sorted(G.nodes())
    idx = {v: i for i, v in enumerate(nodes)}
    return BaseGraph(len(nodes), tuple((idx[u], idx[v]) for u, v in G.edges()), name=name)
