"""Finite relational structures with a preorder, plus JSON and DOT encodings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError
from .graphs import BaseGraph


def _frozen(a, dtype=np.int64) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


def encode_rows(rows: np.ndarray, n: int) -> np.ndarray:
    """Injective integer code of each row of ids in [0, n)."""
    rows = np.asarray(rows, dtype=np.int64)
    code = np.zeros(rows.shape[0], dtype=np.int64)
    for j in range(rows.shape[1]):
        code = code * n + rows[:, j]
    return code


@dataclass(frozen=True, eq=False)
class TupleRelation:
    """Explicit relation: sorted, duplicate-free rows of universe ids."""

    arity: int
    tuples: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tuples, dtype=np.int64).reshape(-1, self.arity)
        t = np.unique(t, axis=0) if t.shape[0] else t
        object.__setattr__(self, "tuples", _frozen(t))

    def __len__(self):
        return int(self.tuples.shape[0])

    def codes(self, n: int) -> np.ndarray:
        return encode_rows(self.tuples, n)

    def contains(self, rows, n: int) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, self.arity)
        return np.isin(encode_rows(rows, n), self.codes(n))

    def mapped(self, perm: np.ndarray) -> TupleRelation:
        return TupleRelation(self.arity, np.asarray(perm)[self.tuples])

    def same(self, other) -> bool:
        return isinstance(other, TupleRelation) and other.arity == self.arity and \
            np.array_equal(self.tuples, other.tuples)


@dataclass(frozen=True, eq=False)
class PairRankRelation:
    """4-ary relation {(a, b, c, d) : rank[a, b] <= rank[c, d]} given by a rank per ordered pair.

    Stored as the rank table because the tuple set has up to n**4 members.
    """

    ranks: np.ndarray
    arity: int = field(default=4, init=False)

    def __post_init__(self):
        object.__setattr__(self, "ranks", _frozen(self.ranks))

    def contains(self, rows, n: int | None = None) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, 4)
        r = self.ranks
        return r[rows[:, 0], rows[:, 1]] <= r[rows[:, 2], rows[:, 3]]

    @property
    def n_classes(self) -> int:
        return int(np.unique(self.ranks).size)

    def mapped(self, perm: np.ndarray) -> PairRankRelation:
        perm = np.asarray(perm)
        new = np.empty_like(self.ranks)
        new[np.ix_(perm, perm)] = self.ranks
        return PairRankRelation(new)

    def same(self, other) -> bool:
        return isinstance(other, PairRankRelation) and np.array_equal(self.ranks, other.ranks)

    def default_rank(self) -> int:
        vals, cnt = np.unique(self.ranks, return_counts=True)
        return int(vals[np.argmax(cnt)])


@dataclass(frozen=True, eq=False)
class Provenance:
    """How a structure was built: base graph, modulus, twist values, and per-vertex gadget and label."""

    graph: BaseGraph
    modulus: int
    twist: tuple[int, ...]
    gadget: tuple[int, ...]
    labels: tuple[tuple, ...]

    def to_dict(self) -> dict:
        return {"graph": self.graph.to_dict(), "modulus": self.modulus, "twist": list(self.twist)}


@dataclass(frozen=True, eq=False)
class Structure:
    """Universe 0..n-1, named relations, and a total preorder given as per-vertex ranks."""

    n: int
    preorder: np.ndarray
    relations: dict
    variant: str = "plain"
    provenance: Provenance | None = None

    def __post_init__(self):
        pre = _frozen(self.preorder)
        if pre.shape != (self.n,):
            raise DataError("preorder must give one rank per universe element")
        object.__setattr__(self, "preorder", pre)
        object.__setattr__(self, "relations", dict(sorted(self.relations.items())))
        for name, rel in self.relations.items():
            if isinstance(rel, TupleRelation):
                t = rel.tuples
                if t.size and (t.min() < 0 or t.max() >= self.n):
                    raise DataError(f"relation {name}: tuple entry outside the universe")
            elif isinstance(rel, PairRankRelation):
                if rel.ranks.shape != (self.n, self.n):
                    raise DataError(f"relation {name}: rank table must be n x n")
            else:
                raise DataError(f"relation {name}: unsupported relation type")

    @property
    def schema(self) -> tuple:
        return tuple((name, rel.arity, type(rel).__name__) for name, rel in self.relations.items())

    def relabel(self, perm, keep_provenance: bool = False) -> Structure:
        """Image under the bijection ``i -> perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise UsageError("relabel needs a permutation of the universe")
        pre = np.empty(self.n, dtype=np.int64)
        pre[perm] = self.preorder
        rels = {k: r.mapped(perm) for k, r in self.relations.items()}
        prov = None
        if keep_provenance and self.provenance is not None:
            inv = np.argsort(perm)
            pv = self.provenance
            prov = Provenance(pv.graph, pv.modulus, pv.twist,
                              tuple(pv.gadget[i] for i in inv), tuple(pv.labels[i] for i in inv))
        return Structure(self.n, pre, rels, self.variant, prov)

    def same_tables(self, other: Structure) -> bool:
        """Identical universe size, preorder and relation tables (provenance ignored)."""
        if self.n != other.n or self.schema != other.schema:
            return False
        if not np.array_equal(self.preorder, other.preorder):
            return False
        return all(r.same(other.relations[k]) for k, r in self.relations.items())

    def binary_pairs(self, name: str) -> np.ndarray:
        rel = self.relations[name]
        if isinstance(rel, TupleRelation) and rel.arity == 2:
            return rel.tuples
        if isinstance(rel, PairRankRelation):
            d = rel.default_rank()
            return np.argwhere(rel.ranks != d)
        raise UsageError(f"relation {name} has no pair view")

    @classmethod
    def from_graph(cls, g: BaseGraph) -> Structure:
        """Plain graph as a structure with one symmetric binary relation E and a flat preorder."""
        e = np.array(g.edges, dtype=np.int64).reshape(-1, 2)
        both = np.vstack([e, e[:, ::-1]])
        return cls(g.n, np.zeros(g.n, dtype=np.int64), {"E": TupleRelation(2, both)}, "graph")


def disjoint_union_graph(a: BaseGraph, b: BaseGraph) -> Structure:
    """Plain structure of the disjoint union of two graphs (not necessarily connected)."""
    ea = np.array(a.edges, dtype=np.int64).reshape(-1, 2)
    eb = np.array(b.edges, dtype=np.int64).reshape(-1, 2) + a.n
    e = np.vstack([ea, eb])
    both = np.vstack([e, e[:, ::-1]])
    n = a.n + b.n
    return Structure(n, np.zeros(n, dtype=np.int64), {"E": TupleRelation(2, both)}, "graph")


# -- JSON ----------------------------------------------------------------

def _label_json(label):
    if label is None:
        return None
    return [list(x) if isinstance(x, tuple) else x for x in label]


def to_dict(s: Structure) -> dict:
    universe = []
    for i in range(s.n):
        rec = {"id": i, "preorder_rank": int(s.preorder[i])}
        if s.provenance is not None:
            rec["gadget"] = int(s.provenance.gadget[i])
            rec["label"] = _label_json(s.provenance.labels[i])
        universe.append(rec)
    rels = {}
    for name, rel in s.relations.items():
        if isinstance(rel, TupleRelation):
            rels[name] = {"arity": rel.arity, "tuples": rel.tuples.tolist()}
        else:
            d = rel.default_rank()
            idx = np.argwhere(rel.ranks != d)
            rels[name] = {"arity": 4, "encoding": "pair_rank", "default_rank": d,
                          "ranks": [[int(x), int(y), int(rel.ranks[x, y])] for x, y in idx]}
    doc = {"schema_version": 1, "variant": s.variant, "universe": universe, "relations": rels}
    if s.provenance is not None:
        doc["provenance"] = s.provenance.to_dict()
    return doc


def serialize(s: Structure) -> bytes:
    return (json.dumps(to_dict(s), sort_keys=True, separators=(",", ":")) + "\n").encode()


def _need(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise DataError(f"structure document: missing {where}.{key}" if where else
                        f"structure document: missing {key}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise DataError(f"structure document: {where}.{key} has the wrong type")
    return val


def from_dict(doc) -> Structure:
    if not isinstance(doc, dict):
        raise DataError("structure document: top level must be an object")
    if doc.get("schema_version") != 1:
        raise DataError("structure document: missing or unsupported schema_version")
    variant = _need(doc, "variant", "", str)
    universe = _need(doc, "universe", "", list)
    n = len(universe)
    pre = np.zeros(n, dtype=np.int64)
    for i, rec in enumerate(universe):
        where = f"universe[{i}]"
        if _need(rec, "id", where, int) != i:
            raise DataError(f"structure document: {where}.id must equal {i}")
        pre[i] = _need(rec, "preorder_rank", where, int)
    rels = {}
    for name, body in _need(doc, "relations", "", dict).items():
        where = f"relations.{name}"
        arity = _need(body, "arity", where, int)
        if body.get("encoding") == "pair_rank":
            if arity != 4:
                raise DataError(f"structure document: {where} pair_rank needs arity 4")
            ranks = np.full((n, n), _need(body, "default_rank", where, int), dtype=np.int64)
            for j, ent in enumerate(_need(body, "ranks", where, list)):
                if not (isinstance(ent, list) and len(ent) == 3 and all(isinstance(v, int) for v in ent)):
                    raise DataError(f"structure document: {where}.ranks[{j}] must be [x, y, rank]")
                x, y, r = ent
                if not (0 <= x < n and 0 <= y < n):
                    raise DataError(f"structure document: {where}.ranks[{j}] outside the universe")
                ranks[x, y] = r
            rels[name] = PairRankRelation(ranks)
        else:
            tuples = _need(body, "tuples", where, list)
            for j, t in enumerate(tuples):
                if not (isinstance(t, list) and len(t) == arity and all(isinstance(v, int) for v in t)):
                    raise DataError(f"structure document: {where}.tuples[{j}] must be {arity} ids")
                if any(not 0 <= v < n for v in t):
                    raise DataError(f"structure document: {where}.tuples[{j}] outside the universe")
            rels[name] = TupleRelation(arity, np.array(tuples, dtype=np.int64).reshape(-1, arity))
    prov = None
    if doc.get("provenance") is not None:
        pv = doc["provenance"]
        graph = BaseGraph.from_dict(_need(pv, "graph", "provenance", dict))
        modulus = _need(pv, "modulus", "provenance", int)
        twist = tuple(_need(pv, "twist", "provenance", list))
        gadget, labels = [], []
        for i, rec in enumerate(universe):
            gadget.append(_need(rec, "gadget", f"universe[{i}]", int))
            lab = rec.get("label")
            labels.append(tuple(tuple(x) if isinstance(x, list) else x for x in lab) if lab is not None else None)
        prov = Provenance(graph, modulus, twist, tuple(gadget), tuple(labels))
    return Structure(n, pre, rels, variant, prov)


def deserialize(data: bytes | str) -> Structure:
    if isinstance(data, bytes):
        data = data.decode()
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DataError(f"structure document: invalid JSON at line {exc.lineno} column {exc.colno}") from None
    return from_dict(doc)


def export_dot(s: Structure) -> str:
    """DOT text: gadgets (or preorder classes) as clusters, binary views of I and C as edges."""
    groups: dict[int, list[int]] = {}
    if s.provenance is not None:
        keys = s.provenance.gadget
    else:
        keys = s.preorder.tolist()
    for i, g in enumerate(keys):
        groups.setdefault(int(g), []).append(i)
    lines = ["digraph structure {"]
    for g, members in sorted(groups.items()):
        lines.append(f"  subgraph cluster_{g} {{")
        lines.append(f'    label="{g}";')
        lines += [f"    v{i};" for i in members]
        lines.append("  }")
    for name in ("I", "C"):
        if name in s.relations:
            style = "dir=none" if name == "I" else "color=gray"
            for x, y in s.binary_pairs(name):
                if name == "I" and x > y:
                    continue
                lines.append(f'  v{x} -> v{y} [{style},label="{name}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
