"""Command-line front end: ``cfiwb graph|cfi|iso|wl|im|experiment``.

Exit codes: 0 positive verdict or success, 1 negative verdict, 2 unknown,
64 usage, 65 data, 70 internal, 71 resource.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .algebra import DEFAULT_EXHAUSTIVE, DEFAULT_TRIALS
from .cfi import TwistAssignment, build, strip_labels
from .errors import CfiwbError, DataError, SchemaError, UsageError
from .experiments import EXPERIMENTS, report_json, run_experiment, write_report
from .graphs import BaseGraph, catalog_graph, catalog_names, random_regular
from .im import im_equivalent
from .structures import Structure, deserialize, export_dot, serialize
from .symmetry import (DEFAULT_ISO_BOUND, brute_force_isomorphism, cfi_isomorphic_predicate, iso_report,
                       isomorphism_witness)
from .wl import coloring_report, refine_joint, wl_equivalent

EXIT_OK, EXIT_NO, EXIT_UNKNOWN = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_seed() -> int:
    raw = os.environ.get("CFIWB_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CFIWB_SEED must be an integer, got {raw!r}") from None


_NOT_ECHOED = {"func", "threads", "out", "in_file"}


def _config(a) -> dict:
    return {k: v for k, v in sorted(vars(a).items()) if k not in _NOT_ECHOED}


def _emit(doc: dict, out: str | None = None, args=None):
    if args is not None:
        doc = {**doc, "version": __version__, "config": _config(args)}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write(text: str | bytes, out: str | None):
    if out is None:
        sys.stdout.write(text.decode() if isinstance(text, bytes) else text)
        return
    Path(out).write_bytes(text if isinstance(text, bytes) else text.encode())


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_graph(ref: str) -> BaseGraph:
    """A graph file, or a catalog name when no such file exists."""
    if not Path(ref).exists() and ref in catalog_names():
        return catalog_graph(ref)
    return BaseGraph.from_json(_read(ref))


def _load_structure(path: str) -> Structure:
    return deserialize(_read(path))


# -- commands ------------------------------------------------------------------

def cmd_graph(a) -> int:
    if a.action == "gen":
        if bool(a.catalog) == bool(a.random):
            raise UsageError("graph gen needs exactly one of --catalog NAME or --random D N SEED")
        g = catalog_graph(a.catalog) if a.catalog else random_regular(*a.random)
        _write(g.to_dot() if a.dot else g.to_json(), a.out)
        return EXIT_OK
    if not a.input:
        raise UsageError("graph inspect needs --in FILE (or a catalog name)")
    g = _load_graph(a.input)
    girth = g.girth
    _emit({"name": g.name, "n": g.n, "edges": len(g.edges), "degrees": list(g.degrees),
           "regular_degree": g.regular_degree, "girth": None if girth == float("inf") else int(girth),
           "connectivity": g.connectivity, "connected": g.is_connected()}, a.out, a)
    return EXIT_OK


def cmd_cfi(a) -> int:
    g = _load_graph(a.graph)
    if a.variant == "outer" and g.regular_degree is None:
        raise DataError(f"outer construction requires a regular base graph; {a.graph} has degrees {sorted(set(g.degrees))}")
    lam = TwistAssignment.parse(g, a.modulus, a.twist)
    s = build(a.variant, g, a.modulus, lam)
    if a.strip:
        s = strip_labels(s, a.seed)
    _write(export_dot(s) if a.dot else serialize(s), a.out)
    return EXIT_OK


def _pair(a) -> tuple[Structure, Structure]:
    return _load_structure(a.left), _load_structure(a.right)


def cmd_iso(a) -> int:
    s, t = _pair(a)
    ps, pt = s.provenance, t.provenance
    if a.method in ("auto", "predicate") and ps is not None and pt is not None and s.variant == t.variant \
            and ps.graph == pt.graph and ps.modulus == pt.modulus:
        lam = TwistAssignment(ps.graph, ps.modulus, ps.twist)
        sigma = TwistAssignment(pt.graph, pt.modulus, pt.twist)
        iso = cfi_isomorphic_predicate(lam, sigma)
        wit = isomorphism_witness(ps.graph, ps.modulus, lam, sigma, s.variant) if iso else None
        doc = iso_report(iso, "constructed" if iso else "predicate", wit)
    elif a.method == "predicate":
        raise UsageError("the predicate needs two structures with provenance over one base graph and modulus")
    else:
        if s.schema != t.schema:
            raise SchemaError("structures have different relation schemas")
        wit = brute_force_isomorphism(s, t, a.bound)
        doc = iso_report(wit is not None, "bruteforce", wit)
    _emit(doc, a.out, a)
    return EXIT_OK if doc["isomorphic"] else EXIT_NO


def cmd_wl(a) -> int:
    s, t = _pair(a)
    eq = wl_equivalent(s, t, a.k, a.threads)
    doc = {"equivalent": eq, "k": a.k}
    if a.report and s.n == t.n:
        doc["colorings"] = [coloring_report(c) for c in refine_joint([s, t], a.k, a.threads)[0]]
    _emit(doc, a.out, a)
    return EXIT_OK if eq else EXIT_NO


def _primes(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad prime list {text!r}") from None


def cmd_im(a) -> int:
    s, t = _pair(a)
    v = im_equivalent(s, t, a.k, _primes(a.primes), a.positions, a.budget_similarity, a.budget_enum, a.seed,
                      a.threads, a.max_rounds)
    _emit(v.to_dict(), a.out, a)
    return {"equivalent": EXIT_OK, "not_equivalent": EXIT_NO}.get(v.verdict, EXIT_UNKNOWN)


def _overrides(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"override {item!r} must be key=value")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def cmd_experiment(a) -> int:
    over = {"seed": a.seed, "threads": a.threads, "trials": a.budget_similarity, "exhaustive": a.budget_enum}
    over.update(_overrides(a.set))
    report = run_experiment(a.name, over)
    if a.out_dir:
        write_report(report, a.out_dir)
    sys.stdout.write(report_json(report))
    return EXIT_OK if report["passed"] in (True, None) else EXIT_NO


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed (default: $CFIWB_SEED or 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; never changes output")
    common.add_argument("--budget-similarity", type=int, default=DEFAULT_TRIALS,
                        help="random trials per similarity search")
    common.add_argument("--budget-enum", type=int, default=DEFAULT_EXHAUSTIVE,
                        help="largest exhaustive enumeration in a similarity search")
    common.add_argument("--out", default=None, help="output file (default: stdout)")

    p = _Parser(prog="cfiwb", description="CFI structures, isomorphism, k-WL and invertible-map equivalence.")
    p.add_argument("--version", action="version", version=f"cfiwb {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("graph", parents=[common], help="generate or inspect base graphs")
    g.add_argument("action", choices=["gen", "inspect"])
    g.add_argument("input", nargs="?", help="graph file or catalog name (inspect)")
    g.add_argument("--in", dest="in_file", default=None, help="graph file or catalog name (inspect)")
    g.add_argument("--catalog", default=None, help="catalog name: " + ", ".join(catalog_names()[:12]) + ", ...")
    g.add_argument("--random", type=int, nargs=3, metavar=("D", "N", "SEED"), help="random D-regular graph")
    g.add_argument("--dot", action="store_true", help="emit DOT instead of JSON")
    g.set_defaults(func=cmd_graph)

    c = sub.add_parser("cfi", parents=[common], help="build a CFI structure")
    c.add_argument("--graph", required=True, help="graph file or catalog name")
    c.add_argument("--variant", choices=["inner", "outer"], default="inner")
    c.add_argument("--modulus", type=int, default=2)
    c.add_argument("--twist", default="", help='edge twists, e.g. "e0=1,e3=2" (indices into the sorted edge list)')
    c.add_argument("--strip", action="store_true", help="drop provenance and renumber by a seeded permutation")
    c.add_argument("--dot", action="store_true", help="emit DOT instead of JSON")
    c.set_defaults(func=cmd_cfi)

    for name, func, helptext in (("iso", cmd_iso, "decide isomorphism"), ("wl", cmd_wl, "k-WL equivalence"),
                                 ("im", cmd_im, "invertible-map equivalence")):
        q = sub.add_parser(name, parents=[common], help=helptext)
        q.add_argument("left")
        q.add_argument("right")
        if name == "iso":
            q.add_argument("--method", choices=["auto", "predicate", "bruteforce"], default="auto")
            q.add_argument("--bound", type=int, default=DEFAULT_ISO_BOUND, help="brute-force universe bound")
        else:
            q.add_argument("--k", type=int, required=True)
        if name == "wl":
            q.add_argument("--report", action="store_true", help="include the stable colorings")
        if name == "im":
            q.add_argument("--primes", required=True, help="comma-separated primes")
            q.add_argument("--positions", choices=["all", "last"], default="all")
            q.add_argument("--max-rounds", type=int, default=None)
        q.set_defaults(func=func)

    e = sub.add_parser("experiment", parents=[common], help="run a canned experiment")
    e.add_argument("name", help=", ".join(sorted(EXPERIMENTS)))
    e.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a parameter (JSON value)")
    e.add_argument("--out-dir", default=None, help="write <name>.json and <name>.csv here")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing command; see cfiwb --help")
        if args.seed is None:
            args.seed = _default_seed()
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        if args.command == "graph":
            args.input = args.in_file or args.input
        return args.func(args)
    except CfiwbError as exc:
        print(f"cfiwb: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        print("cfiwb: ResourceError: out of memory", file=sys.stderr)
        return 71


if __name__ == "__main__":
    sys.exit(main())
