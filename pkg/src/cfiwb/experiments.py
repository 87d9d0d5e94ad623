"""Canned experiments. Each returns a report dict and can write it as JSON plus CSV.

Reports hold the full configuration, the package version, one row per
measured case, and a ``passed`` flag (None for exploratory experiments).
Thread counts change wall time only and are therefore not echoed.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from collections.abc import Callable
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import DEFAULT_EXHAUSTIVE, DEFAULT_TRIALS, fp_rank, rref_mod_p, simultaneous_similarity, zm_solve
from .cfi import TwistAssignment, build, strip_labels, twist_sum
from .errors import UsageError
from .graphs import BaseGraph, catalog_graph
from .im import im_equivalent, prime_sweep
from .symmetry import (brute_force_automorphisms, brute_force_isomorphism, cfi_isomorphic_predicate, compose,
                       flow_basis, flow_group, flow_permutation, k_orbits, perm_order, solve_cfi_problem)
from .wl import distinguishing_dimension, refine_joint, same_partition, wl_equivalent, wl_stable

EXPLORATORY = {"prime-sweep"}


# -- helpers ---------------------------------------------------------------

def _twist(g: BaseGraph, m: int, values) -> TwistAssignment:
    return TwistAssignment(g, m, tuple(int(v) for v in values))


def _sparse_pairs(n_edges: int, m: int, max_nonzero: int):
    """All (lam, sigma) whose combined number of nonzero entries is at most ``max_nonzero``."""
    slots = 2 * n_edges
    for r in range(max_nonzero + 1):
        for pos in itertools.combinations(range(slots), r):
            for vals in itertools.product(range(1, m), repeat=r):
                v = [0] * slots
                for q, a in zip(pos, vals):
                    v[q] = a
                yield v[:n_edges], v[n_edges:]


def _sampled_pairs(n_edges: int, m: int, count: int, rng):
    """Uniform random pairs; every second pair is forced to equal twist sums so both outcomes occur."""
    for i in range(count):
        lam = rng.integers(0, m, n_edges)
        sigma = rng.integers(0, m, n_edges)
        if i % 2 == 0:
            sigma[-1] = (sigma[-1] + lam.sum() - sigma.sum()) % m
        yield lam.tolist(), sigma.tolist()


def refines(fine, coarse) -> bool:
    """True iff every class of ``fine`` lies inside one class of ``coarse``."""
    fine, coarse = np.asarray(fine).ravel(), np.asarray(coarse).ravel()
    pairs = np.unique(np.stack([fine, coarse], 1), axis=0)
    return pairs.shape[0] == np.unique(fine).size


def _matrix_inverse(P: np.ndarray, p: int) -> np.ndarray:
    n = P.shape[0]
    R, piv = rref_mod_p(np.hstack([P, np.eye(n, dtype=np.int64)]), p)
    if piv[:n] != list(range(n)):
        raise UsageError("matrix is singular")
    return R[:, n:]


def _random_invertible(n: int, p: int, rng) -> np.ndarray:
    while True:
        P = rng.integers(0, p, (n, n))
        if fp_rank(P, p) == n:
            return P


# -- experiments -------------------------------------------------------------

def iso_oracle(cfg: dict) -> dict:
    g = catalog_graph(cfg["graph"])
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for m in cfg["moduli"]:
        cases = list(_sparse_pairs(len(g.edges), m, cfg["max_nonzero"]))
        cases += list(_sampled_pairs(len(g.edges), m, cfg["samples"], rng))
        for variant in cfg["variants"]:
            mismatches, iso = 0, 0
            examples = []
            for lam, sigma in cases:
                a, b = _twist(g, m, lam), _twist(g, m, sigma)
                s, t = build(variant, g, m, a), build(variant, g, m, b)
                pred = cfi_isomorphic_predicate(a, b)
                found = brute_force_isomorphism(s, t, bound=max(s.n, t.n)) is not None
                iso += found
                if pred != found:
                    mismatches += 1
                    examples.append({"lambda": lam, "sigma": sigma, "predicate": pred, "oracle": found})
            rows.append({"variant": variant, "m": m, "n": s.n, "pairs": len(cases), "isomorphic": iso,
                         "mismatches": mismatches, "examples": examples[:5]})
    return {"rows": rows, "passed": all(r["mismatches"] == 0 for r in rows)}


def aut_group(cfg: dict) -> dict:
    rows = []
    for gname in cfg["graphs"]:
        g = catalog_graph(gname)
        for m in cfg["moduli"]:
            for variant in cfg["variants"]:
                s = build(variant, g, m)
                flows = flow_group(g, m, cfg["enum_bound"])
                flow_set = {tuple(flow_permutation(s, f).tolist()) for f in flows}
                brute = brute_force_automorphisms(s, bound=s.n, max_maps=cfg["enum_bound"])
                brute_set = {tuple(int(x) for x in a.perm) for a in brute}
                gens = [flow_permutation(s, f) for f in flow_basis(g, m)]
                abelian = all(np.array_equal(compose(p, q), compose(q, p)) for p, q in itertools.combinations(gens, 2))
                orders = sorted({perm_order(np.array(p)) for p in brute_set})
                expected = m ** (len(g.edges) - g.n + 1)
                if m & (m - 1) == 0:
                    orders_ok = all(o & (o - 1) == 0 and m % o == 0 for o in orders)
                else:
                    orders_ok = all(o in (1, m) for o in orders) and orders.count(1) == 1
                rows.append({"graph": gname, "variant": variant, "m": m, "n": s.n, "order": len(brute_set),
                             "expected_order": expected, "flow_equals_bruteforce": flow_set == brute_set,
                             "abelian": abelian, "element_orders": orders, "orders_ok": orders_ok})
    ok = all(r["flow_equals_bruteforce"] and r["order"] == r["expected_order"] and r["abelian"] and r["orders_ok"]
             for r in rows)
    return {"rows": rows, "passed": ok}


def homogeneity(cfg: dict) -> dict:
    g = catalog_graph(cfg["graph"])
    s = build(cfg["variant"], g, cfg["modulus"])
    orbits = k_orbits(s, 1, cfg["enum_bound"])
    classes = wl_stable(s, cfg["k"], cfg["threads"]).vertex_classes()
    equal = same_partition(orbits, classes)
    row = {"graph": cfg["graph"], "variant": cfg["variant"], "m": cfg["modulus"], "n": s.n, "k": cfg["k"],
           "orbits": int(np.unique(orbits).size), "wl_classes": int(np.unique(classes).size), "equal": equal}
    return {"rows": [row], "passed": equal}


def cfi_theorem(cfg: dict) -> dict:
    rows = []
    ok = True
    g = catalog_graph(cfg["graph"])
    m = cfg["modulus"]
    for variant in cfg["variants"]:
        lam, zero = TwistAssignment.from_terms(g, m, {0: 1}), TwistAssignment.zero(g, m)
        s, t = build(variant, g, m, lam), build(variant, g, m, zero)
        pred = cfi_isomorphic_predicate(lam, zero)
        oracle = brute_force_isomorphism(s, t, bound=max(s.n, t.n)) is not None
        wl1 = wl_equivalent(s, t, 1, cfg["threads"])
        rows.append({"case": "pair", "graph": cfg["graph"], "variant": variant, "m": m, "n": s.n,
                     "isomorphic_predicate": pred, "isomorphic_oracle": oracle, "wl1_equivalent": wl1})
        ok &= (not pred) and (not oracle) and wl1
    big = catalog_graph(cfg["dimension_graph"])
    for variant in cfg["variants"]:
        lam, zero = TwistAssignment.from_terms(big, m, {0: 1}), TwistAssignment.zero(big, m)
        s, t = build(variant, big, m, lam), build(variant, big, m, zero)
        dim = distinguishing_dimension(s, t, cfg["k_max"], cfg["threads"])
        rows.append({"case": "dimension", "graph": cfg["dimension_graph"], "variant": variant, "m": m, "n": s.n,
                     "k_max": cfg["k_max"], "distinguishing_dimension": dim})
        ok &= dim is None or dim >= 2
    return {"rows": rows, "passed": bool(ok)}


def im_prime2(cfg: dict) -> dict:
    g = catalog_graph(cfg["graph"])
    m = cfg["modulus"]
    kw = {"trials": cfg["trials"], "exhaustive": cfg["exhaustive"], "seed": cfg["seed"], "threads": cfg["threads"]}
    rows = []
    ok = True
    for variant in cfg["variants"] + cfg["report_variants"]:
        asserted = variant in cfg["variants"]
        s = build(variant, g, m, TwistAssignment.from_terms(g, m, {0: 1}))
        twin = strip_labels(build(variant, g, m, TwistAssignment.from_terms(g, m, {len(g.edges) - 1: 1})), cfg["seed"])
        other = strip_labels(build(variant, g, m), cfg["seed"])
        for label, t, want in (("non-isomorphic", other, "not_equivalent"), ("twin", twin, "equivalent")):
            v = im_equivalent(s, t, cfg["k"], cfg["primes"], **kw)
            verified = v.certificate.get("verified", v.verdict == "equivalent")
            unknown = v.budget_report["unknown"]
            good = v.verdict == want and bool(verified) and unknown == 0
            rows.append({"variant": variant, "pair": label, "asserted": asserted, "k": cfg["k"],
                         "primes": list(cfg["primes"]), "verdict": v.verdict, "expected": want if asserted else None,
                         "certificate": v.certificate.get("kind"), "verified": bool(verified), "rounds": v.rounds,
                         "unknown": unknown, "similarity_calls": v.budget_report["similarity_calls"]})
            if asserted:
                ok &= good
    return {"rows": rows, "passed": bool(ok)}


def _soundness_pairs(cfg: dict):
    for gname, variant, m, lam, sigma in cfg["pairs"]:
        g = catalog_graph(gname)
        a, b = TwistAssignment.parse(g, m, lam), TwistAssignment.parse(g, m, sigma)
        if twist_sum(a) != twist_sum(b):
            raise UsageError(f"soundness pair {gname}/{variant}/{lam}/{sigma} has different twist sums")
        yield gname, variant, m, lam, sigma, build(variant, g, m, a), strip_labels(build(variant, g, m, b), cfg["seed"])


def im_soundness(cfg: dict) -> dict:
    kw = {"trials": cfg["trials"], "exhaustive": cfg["exhaustive"], "seed": cfg["seed"], "threads": cfg["threads"]}
    rows = []
    ok = True
    for gname, variant, m, lam, sigma, s, t in _soundness_pairs(cfg):
        for k in cfg["ks"]:
            parts = {}
            for Q in cfg["prime_sets"]:
                v = im_equivalent(s, t, k, Q, **kw)
                good = v.verdict == "equivalent"
                parts[tuple(Q)] = np.concatenate(v.partition.colors) if v.partition is not None else None
                rows.append({"graph": gname, "variant": variant, "m": m, "n": s.n, "lambda": lam, "sigma": sigma,
                             "k": k, "primes": list(Q), "check": "verdict", "value": v.verdict, "ok": good,
                             "rounds": v.rounds, "unknown": v.budget_report["unknown"]})
                ok &= good
            wl = np.concatenate([c.colors for c in refine_joint([s, t], k, cfg["threads"])[0]])
            for Q, colors in parts.items():
                good = colors is not None and refines(colors, wl)
                rows.append({"graph": gname, "variant": variant, "m": m, "n": s.n, "lambda": lam, "sigma": sigma,
                             "k": k, "primes": list(Q), "check": "refines_wl", "value": good, "ok": good})
                ok &= good
            for Q in parts:
                for q1, q2 in itertools.combinations([x for x in parts if len(x) < len(Q)], 2):
                    if set(q1) | set(q2) != set(Q):
                        continue
                    good = all(parts[x] is not None for x in (Q, q1, q2)) and \
                        refines(parts[Q], parts[q1]) and refines(parts[Q], parts[q2])
                    rows.append({"graph": gname, "variant": variant, "m": m, "n": s.n, "lambda": lam,
                                 "sigma": sigma, "k": k, "primes": list(Q), "check": f"refines {list(q1)} {list(q2)}",
                                 "value": good, "ok": good})
                    ok &= good
    return {"rows": rows, "passed": bool(ok)}


def algebra_oracles(cfg: dict) -> dict:
    rng = np.random.default_rng(cfg["seed"])
    wrong = 0
    for _ in range(cfg["systems"]):
        m = int(rng.choice(cfg["system_moduli"]))
        nv = int(rng.integers(1, cfg["max_vars"] + 1))
        nr = int(rng.integers(1, cfg["max_vars"] + 1))
        M = rng.integers(0, m, (nr, nv))
        b = rng.integers(0, m, nr)
        sols = [x for x in itertools.product(range(m), repeat=nv) if not np.any((M @ np.array(x) - b) % m)]
        res = zm_solve(M, b, m)
        wrong += res.consistent != bool(sols) or not res.satisfies(M, b)
    rows = [{"check": "zm_solve", "cases": cfg["systems"], "wrong": int(wrong), "unknown": 0}]
    counts = {"planted": [0, 0], "perturbed": [0, 0]}
    for kind in ("planted", "perturbed"):
        for _ in range(cfg["families"]):
            p = int(rng.choice(cfg["primes"]))
            n = int(rng.integers(2, cfg["max_dim"] + 1))
            size = int(rng.integers(1, cfg["max_family"] + 1))
            Ms = [rng.integers(0, p, (n, n)) for _ in range(size)]
            P = _random_invertible(n, p, rng)
            Pi = _matrix_inverse(P, p)
            Ns = [(P @ M @ Pi) % p for M in Ms]
            if kind == "perturbed":
                j = int(rng.integers(size))
                while True:
                    R = rng.integers(0, p, (n, n)) * (rng.random((n, n)) < 0.5)
                    if fp_rank(R, p) != fp_rank(Ms[j], p):
                        break
                Ns[j] = R
            v = simultaneous_similarity(Ms, Ns, p, rng, cfg["trials"], cfg["exhaustive"])
            want = "similar" if kind == "planted" else "not_similar"
            counts[kind][0] += v.status not in (want, "unknown")
            counts[kind][1] += v.status == "unknown"
    for kind, (w, u) in counts.items():
        rows.append({"check": f"similarity {kind}", "cases": cfg["families"], "wrong": w, "unknown": u})
    limit = cfg["max_unknown_fraction"]
    ok = all(r["wrong"] == 0 and r["unknown"] <= limit * r["cases"] for r in rows)
    return {"rows": rows, "passed": bool(ok)}


def cfi_problem(cfg: dict) -> dict:
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for gname, m, count in cfg["instances"]:
        g = catalog_graph(gname)
        for i in range(count):
            vals = rng.integers(0, m, len(g.edges))
            if i % 2 == 0:
                vals[-1] = (vals[-1] - vals.sum()) % m
            lam = _twist(g, m, vals)
            for variant in cfg["variants"]:
                s = strip_labels(build(variant, g, m, lam), int(rng.integers(2 ** 31)))
                want = twist_sum(lam) == 0
                got = solve_cfi_problem(s)
                rows.append({"graph": gname, "variant": variant, "m": m, "instance": i, "twist": lam.to_terms(),
                             "sum_zero": want, "decided": got, "ok": got == want})
    return {"rows": rows, "passed": all(r["ok"] for r in rows)}


def prime_sweep_experiment(cfg: dict) -> dict:
    g = catalog_graph(cfg["graph"])
    m = cfg["modulus"]
    kw = {"trials": cfg["trials"], "exhaustive": cfg["exhaustive"], "seed": cfg["seed"], "threads": cfg["threads"]}
    rows = []
    for variant in cfg["variants"]:
        s = build(variant, g, m, TwistAssignment.from_terms(g, m, {0: 1}))
        t = strip_labels(build(variant, g, m), cfg["seed"])
        for k in cfg["ks"]:
            for r in prime_sweep(s, t, k, cfg["primes"], **kw):
                rows.append({"graph": cfg["graph"], "variant": variant, "m": m, "n": s.n, "k": k, **r})
    return {"rows": rows, "passed": None}


# -- registry ----------------------------------------------------------------

_SHARED = {"seed": 0, "threads": 1, "trials": DEFAULT_TRIALS, "exhaustive": DEFAULT_EXHAUSTIVE}

EXPERIMENTS: dict[str, tuple[Callable[[dict], dict], dict]] = {
    "iso-oracle": (iso_oracle, {"graph": "k4", "moduli": [2, 3, 4], "variants": ["inner", "outer"],
                                "max_nonzero": 2, "samples": 50}),
    "aut-group": (aut_group, {"graphs": ["k4", "k33"], "moduli": [2, 3, 4], "variants": ["inner", "outer"],
                              "enum_bound": 2 ** 16}),
    "homogeneity": (homogeneity, {"graph": "k5", "variant": "inner", "modulus": 2, "k": 3, "enum_bound": 2 ** 16}),
    "cfi-theorem": (cfi_theorem, {"graph": "k4", "modulus": 2, "variants": ["inner", "outer"],
                                  "dimension_graph": "cage-3-5", "k_max": 3}),
    "im-prime2": (im_prime2, {"graph": "k4", "modulus": 2, "k": 3, "primes": [2], "variants": ["inner"],
                              "report_variants": ["outer"]}),
    "im-soundness": (im_soundness, {
        "ks": [2, 3], "prime_sets": [[2], [3], [2, 3]],
        "pairs": [["k4", "inner", 2, "e0=1", "e5=1"], ["k4", "inner", 2, "", "e0=1,e1=1"],
                  ["k4", "outer", 2, "e0=1", "e5=1"], ["k4", "outer", 2, "", "e1=1,e2=1"],
                  ["k33", "inner", 2, "e0=1", "e8=1"], ["k33", "inner", 2, "", "e0=1,e4=1"],
                  ["k33", "outer", 2, "e0=1", "e8=1"], ["k33", "outer", 2, "", "e3=1,e5=1"],
                  ["k4", "outer", 4, "e0=1", "e5=1"], ["k4", "outer", 4, "e0=2", "e1=1,e2=1"]]}),
    "algebra-oracles": (algebra_oracles, {"systems": 200, "max_vars": 4, "system_moduli": [2, 4, 8],
                                          "families": 100, "primes": [2, 3, 5], "max_dim": 6, "max_family": 3,
                                          "max_unknown_fraction": 0.05}),
    "cfi-problem": (cfi_problem, {"instances": [["cage-3-5", 4, 20], ["k4", 2, 20]], "variants": ["inner", "outer"]}),
    "prime-sweep": (prime_sweep_experiment, {"graph": "k4", "modulus": 3, "variants": ["inner", "outer"],
                                             "ks": [2], "primes": [2, 3]}),
}


def config_for(name: str, overrides: dict | None = None) -> dict:
    if name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {name!r}; choose from {', '.join(sorted(EXPERIMENTS))}")
    cfg = {**_SHARED, **EXPERIMENTS[name][1]}
    for key, val in (overrides or {}).items():
        if key not in cfg:
            raise UsageError(f"experiment {name} has no parameter {key!r}")
        cfg[key] = val
    return cfg


def run_experiment(name: str, overrides: dict | None = None) -> dict:
    cfg = config_for(name, overrides)
    fn = EXPERIMENTS[name][0]
    result = fn(cfg)
    echo = {k: v for k, v in cfg.items() if k != "threads"}
    return {"experiment": name, "version": __version__, "config": echo, "exploratory": name in EXPLORATORY,
            **result}


def _cell(v):
    if isinstance(v, (list, dict, tuple)):
        return json.dumps(v, sort_keys=True)
    return "" if v is None else v


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def report_csv(report: dict) -> str:
    fields: list[str] = []
    for row in report["rows"]:
        fields += [k for k in row if k not in fields]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in report["rows"]:
        w.writerow({k: _cell(json.loads(json.dumps(row.get(k), default=_json_default))) for k in fields})
    return buf.getvalue()


def write_report(report: dict, outdir: str | Path) -> tuple[Path, Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    base = out / report["experiment"]
    jp, cp = base.with_suffix(".json"), base.with_suffix(".csv")
    jp.write_text(report_json(report))
    cp.write_text(report_csv(report))
    return jp, cp
