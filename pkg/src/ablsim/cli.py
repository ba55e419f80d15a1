"""Command-line front end.

Every command builds a report document (a plain JSON-compatible tree) and
prints it either as a human-readable table or, with ``--format machine``,
as canonical JSON.  Exit codes: 0 success, 1 a check failed (``table``,
``verify``), 2 usage or parse error, 3 invariant violation, 4 impossible
post-selection.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Any, Sequence

from . import __version__
from .abl import abl
from .cohen import (
    D1Variant,
    Scenario,
    abl_conditionals,
    abl_query,
    build_scenario,
    decomposition,
    forward_probabilities,
    reproduce_table,
)
from .errors import EmptySample, ImpossiblePostSelection, ValidationError
from .montecarlo import estimate
from .scenario_file import ScenarioParseError, load_scenario

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_INVALID, EXIT_IMPOSSIBLE = 0, 1, 2, 3, 4

VARIANTS = {"original": D1Variant.SUBSPACE, "plusminus": D1Variant.PLUS_MINUS}


class UsageError(Exception):
    pass


# -- report documents ---------------------------------------------------------

def _num(x: float | None) -> float | str | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def emit(doc: dict) -> str:
    """Canonical machine form; ``emit(parse(emit(d))) == emit(d)``."""
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def parse(text: str) -> dict:
    return json.loads(text)


def forward_report(s: Scenario) -> dict:
    doc: dict[str, Any] = {
        "kind": "forward",
        "scenario": s.name,
        "d3_present": s.d3_present,
        "probabilities": {k: _num(v) for k, v in forward_probabilities(s).items()},
    }
    if s.d3_present:
        doc["intermediate"] = s.intermediate_name
        doc["conditionals"] = {
            k: _num(v) for k, v in abl_conditionals(s, skip_impossible=True).items()
        }
    return doc


def table_report() -> dict:
    report = reproduce_table()
    rows = []
    for r in report.rows:
        marker = "FALLACY" if r.fallacy else ("OK" if r.match else "MISMATCH")
        row = {
            "key": r.key,
            "quantity": r.quantity,
            "arrangement": r.arrangement,
            "kind": r.kind,
            "computed": _num(r.computed),
            "published": str(r.published),
            "match": r.match,
            "fallacy": r.fallacy,
            "marker": marker,
        }
        if r.kind == "decomposition":
            row["direct"] = _num(r.direct)
            row["note"] = r.note
            row["terms"] = [[f, _num(c), _num(m)] for f, c, m in r.terms]
        rows.append(row)
    return {"kind": "table", "all_match": report.all_match, "rows": rows}


def abl_report(s: Scenario, condition: str) -> dict:
    if condition not in s.detector_names:
        raise UsageError(f"scenario {s.name!r} has no detector {condition!r} "
                         f"(detectors: {', '.join(s.detector_names)})")
    q = abl_query(s, condition)
    return {
        "kind": "abl",
        "scenario": s.name,
        "intermediate": s.intermediate_name,
        "condition": condition,
        "rule": "complete" if q.complete_final else "generalized",
        "distribution": {k: _num(v) for k, v in abl(q).items()},
    }


def estimate_report(s: Scenario, shots: int, seed: int, workers: int) -> dict:
    rep = estimate(s, shots, seed, workers=workers)
    doc: dict[str, Any] = {
        "kind": "estimate",
        "scenario": rep.scenario,
        "shots": rep.shots,
        "seed": rep.seed,
        "streams": rep.streams,
        "counts": rep.counts,
        "passed": rep.passed,
        "entries": [
            {"name": e.name, "kind": e.kind, "hits": e.hits, "n": e.n,
             "frequency": _num(e.frequency), "analytic": _num(e.analytic),
             "stderr": _num(e.stderr), "z": _num(e.z), "passed": e.passed}
            for e in rep.entries
        ],
    }
    if s.d3_present:
        mix, direct = rep.mixture_identity()
        doc["mixture"] = {"sum_conditional_times_marginal": str(mix),
                          "click_frequency": str(direct), "identical": mix == direct}
    return doc


def decompose_report(variant: str, marginals_from: str, published: bool) -> dict:
    dec = decomposition(VARIANTS[variant], marginals_from, published)
    return {
        "kind": "decomposition",
        "variant": variant,
        "marginals_from": marginals_from,
        "marginal_note": f"marginals computed with D3 {marginals_from}",
        "published_conditional": published,
        "terms": [
            {"outcome": f, "conditional": _num(c), "marginal": _num(m), "product": _num(c * m)}
            for f, c, m in dec.inputs.terms()
        ],
        "value": _num(dec.value),
        "direct": _num(dec.direct),
        "mismatch": dec.fallacy,
    }


# -- human rendering ----------------------------------------------------------

def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return "n/a" if x is None else str(x)


def _frac(x: Any) -> str:
    """Nearest small fraction, for display next to the decimal."""
    if not isinstance(x, float):
        return ""
    f = Fraction(x).limit_denominator(100)
    return f" (~{f})" if abs(float(f) - x) < 1e-9 else ""


def render_forward(doc: dict) -> str:
    lines = [f"scenario {doc['scenario']} (D3 {'present' if doc['d3_present'] else 'absent'})",
             "forward probabilities:"]
    for k, v in doc["probabilities"].items():
        lines.append(f"  Prob({k}) = {_fmt(v)}{_frac(v)}")
    if "conditionals" in doc:
        lines.append("ABL conditionals:")
        for k, v in doc["conditionals"].items():
            lines.append(f"  Prob({doc['intermediate']}|{k}) = {_fmt(v)}{_frac(v)}")
    return "\n".join(lines)


def render_table(doc: dict) -> str:
    header = f"{'row':<32} {'quantity':<22} {'arrangement':<22} {'computed':>15} {'published':>9}  status"
    lines = [header, "-" * len(header)]
    for r in doc["rows"]:
        lines.append(f"{r['key']:<32} {r['quantity']:<22} {r['arrangement']:<22} "
                     f"{_fmt(r['computed']):>15} {r['published']:>9}  {r['marker']}")
        if r["kind"] == "decomposition":
            terms = " + ".join(f"({_fmt(c)})({_fmt(m)})" for _, c, m in r["terms"])
            lines.append(f"{'':<34}{terms}; {r['note']}; direct Prob(D3) = {_fmt(r['direct'])}")
    lines.append("")
    lines.append("all rows match" if doc["all_match"] else "MISMATCHES PRESENT")
    return "\n".join(lines)


def render_abl(doc: dict) -> str:
    dist = doc["distribution"]
    name = doc["intermediate"]
    lines = [f"scenario {doc['scenario']}, post-selected on {doc['condition']} "
             f"({doc['rule']} final measurement)"]
    for k, v in dist.items():
        label = name if k == "click" else f"no {name}"
        lines.append(f"  Prob({label}|{doc['condition']}) = {_fmt(v)}{_frac(v)}")
    return "\n".join(lines)


def render_estimate(doc: dict) -> str:
    lines = [f"scenario {doc['scenario']}: {doc['shots']} shots, seed {doc['seed']}, "
             f"{doc['streams']} streams",
             f"  {'quantity':<14} {'n':>9} {'empirical':>15} {'analytic':>15} {'stderr':>12} "
             f"{'z':>8}"]
    for e in doc["entries"]:
        z = "n/a" if e["z"] is None else (f"{e['z']:+.3f}" if isinstance(e["z"], float)
                                          else e["z"])
        stderr = "n/a" if e["stderr"] is None else f"{e['stderr']:.3e}"
        lines.append(f"  {e['name']:<14} {e['n']:>9} {_fmt(e['frequency']):>15} "
                     f"{_fmt(e['analytic']):>15} {stderr:>12} {z:>8}"
                     f"{'' if e['passed'] else '  FAIL'}")
    if "mixture" in doc:
        m = doc["mixture"]
        lines.append(f"  sample mixture {m['sum_conditional_times_marginal']} vs click "
                     f"frequency {m['click_frequency']}: "
                     f"{'identical' if m['identical'] else 'DIFFERENT'}")
    lines.append("all within 4 standard errors" if doc["passed"] else "CHECK FAILED")
    return "\n".join(lines)


def render_decomposition(doc: dict) -> str:
    terms = doc["terms"]
    lines = [f"{doc['variant']} variant, {doc['marginal_note']}"
             + (", published Prob(D3|D1)" if doc["published_conditional"] else "")]
    for t in terms:
        lines.append(f"  Prob(D3|{t['outcome']})·Prob({t['outcome']}) = "
                     f"{_fmt(t['conditional'])} × {_fmt(t['marginal'])} = {_fmt(t['product'])}")
    expr = " + ".join(f"({Fraction(t['conditional']).limit_denominator(100)})"
                      f"({Fraction(t['marginal']).limit_denominator(100)})" for t in terms)
    lines.append(f"  Prob(D3) = {expr} = {_fmt(doc['value'])}{_frac(doc['value'])}")
    if doc["mismatch"]:
        lines.append(f"  MISMATCH: direct Prob(D3) with D3 present is {_fmt(doc['direct'])}")
    else:
        lines.append(f"  agrees with direct Prob(D3) = {_fmt(doc['direct'])}")
    return "\n".join(lines)


RENDERERS = {
    "forward": render_forward,
    "table": render_table,
    "abl": render_abl,
    "estimate": render_estimate,
    "decomposition": render_decomposition,
}


def render(doc: dict, fmt: str) -> str:
    if fmt == "machine":
        return emit(doc)
    return RENDERERS[doc["kind"]](doc) + "\n"


# -- argument parsing ---------------------------------------------------------

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("human", "machine"), default=argparse.SUPPRESS,
                        help="output format (default: human)")

    parser = argparse.ArgumentParser(
        prog="ablsim", parents=[common],
        description="ABL-rule calculator and which-way interferometer simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", parents=[common], help="run a built-in scenario")
    p.add_argument("--variant", choices=tuple(VARIANTS), default="original")
    p.add_argument("--d3", choices=("present", "absent"), default="present")

    sub.add_parser("table", parents=[common], help="reproduce the published probability table")

    p = sub.add_parser("run", parents=[common], help="forward probabilities of a scenario file")
    p.add_argument("path")

    p = sub.add_parser("abl", parents=[common],
                       help="intermediate distribution given a final detector")
    p.add_argument("path")
    p.add_argument("--condition", required=True, help="detector name to post-select on")

    p = sub.add_parser("verify", parents=[common], help="Monte-Carlo check of a scenario")
    p.add_argument("path", nargs="?", help="scenario file (default: --preset)")
    p.add_argument("--preset", choices=tuple(VARIANTS), default=None)
    p.add_argument("--d3", choices=("present", "absent"), default="present")
    p.add_argument("--shots", type=_positive_int, default=1_000_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("decompose", parents=[common],
                       help="total-probability mixture with labeled marginals")
    p.add_argument("--variant", choices=tuple(VARIANTS), default="original")
    p.add_argument("--marginals-from", choices=("present", "absent"), default="present",
                   help="arrangement the detector marginals are computed in")
    p.add_argument("--published", action="store_true",
                   help="use the published Prob(D3|D1)=1/4 (original variant only)")
    return parser


def _dispatch(args: argparse.Namespace) -> tuple[dict, int]:
    cmd = args.command
    if cmd == "preset":
        doc = forward_report(build_scenario(args.d3 == "present", VARIANTS[args.variant]))
        return doc, EXIT_OK
    if cmd == "table":
        doc = table_report()
        return doc, EXIT_OK if doc["all_match"] else EXIT_CHECK_FAILED
    if cmd == "run":
        return forward_report(load_scenario(args.path)), EXIT_OK
    if cmd == "abl":
        s = load_scenario(args.path)
        if not s.d3_present:
            raise UsageError(f"scenario {s.name!r} defines no intermediate measurement")
        return abl_report(s, args.condition), EXIT_OK
    if cmd == "verify":
        if args.path is not None and args.preset is not None:
            raise UsageError("give either a scenario file or --preset, not both")
        if args.path is not None:
            s = load_scenario(args.path)
        else:
            s = build_scenario(args.d3 == "present", VARIANTS[args.preset or "original"])
        doc = estimate_report(s, args.shots, args.seed, args.workers)
        return doc, EXIT_OK if doc["passed"] else EXIT_CHECK_FAILED
    if cmd == "decompose":
        if args.published and args.variant != "original":
            raise UsageError("--published applies to the original variant only")
        return decompose_report(args.variant, args.marginals_from, args.published), EXIT_OK
    raise UsageError(f"unknown command {cmd!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fmt = getattr(args, "format", "human")
    try:
        doc, code = _dispatch(args)
    except (UsageError, ScenarioParseError, EmptySample) as exc:
        print(f"ablsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"ablsim: invalid scenario ({exc.invariant}): {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ImpossiblePostSelection as exc:
        print(f"ablsim: impossible post-selection: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    sys.stdout.write(render(doc, fmt))
    return code


if __name__ == "__main__":
    sys.exit(main())
