"""Command-line frontend. Every subcommand prints one JSON document."""
import argparse
import json
import logging
import sys
import time
from fractions import Fraction

from . import optimal, oracle
from .errors import CandidateCapExceeded, InputError, UndefinedMeasure
from .gpr import build_frequency_system, check_gpr_cause, emit_smt
from .model import EFFECT, INF, format_value, load_model, parse_rational
from .optimal import EXISTS, UNKNOWN
from .quality import quality_report
from .spr import canonical_spr_cause, check_spr_cause, exists_pr_cause, singleton_spr_states
from .transforms import normalize
from .witness import UNKNOWN as VERDICT_UNKNOWN

EXIT_OK, EXIT_UNKNOWN, EXIT_INPUT = 0, 2, 3
BACKEND_ALIASES = {"auto": "auto", "mc": "mc_exact", "search": "search", "smt": "smt_export"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _value(x):
    if x is None:
        return None
    if isinstance(x, (Fraction, int)) and not isinstance(x, bool) or x == INF:
        return format_value(x)
    return x


def _states(names):
    return sorted(names) if names is not None else None


def _cause_arg(text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise UsageError("--cause needs at least one state")
    return parts


def _witness(sched):
    return None if sched is None else sched.to_json()


def _verdict_json(v, emit):
    out = {"verdict": v.verdict, "certification": v.certification}
    if v.margins is not None:
        out["margins"] = [_value(x) for x in v.margins]
    details = {k: _value(x) if not isinstance(x, dict) else {a: _value(b) for a, b in x.items()}
               for k, x in v.details.items() if k != "smt_problem"}
    if details:
        out["details"] = details
    if emit and v.witness is not None:
        out["witness"] = _witness(v.witness[1])
    return out


def _quality_json(rep, emit):
    out = {"cause": _states(rep.cause)}
    out.update({k: _value(x) for k, x in rep.values().items()})
    if emit:
        out["witness"] = {"recall": _witness(rep.worst_recall_sched),
                          "covratio": _witness(rep.worst_covratio_sched),
                          "fscore": _witness(rep.worst_fscore_sched),
                          "precision": _witness(rep.worst_precision_sched)}
    return out


def cmd_validate(m, args):
    return {"verdict": "Valid", "states": m.n, "initial": m.names[m.init],
            "effect": _states(m.names[e] for e in m.labelled(args.eff_label)),
            "markov_chain": m.is_markov_chain()}


def cmd_check_spr(m, args):
    return _verdict_json(check_spr_cause(m, args.cause), args.emit_witness)


def cmd_check_gpr(m, args):
    smt_output = None
    if args.smt_output:
        with open(args.smt_output) as fh:
            smt_output = fh.read()
    v = check_gpr_cause(m, args.cause, backend=BACKEND_ALIASES[args.backend],
                        smt_solver=args.smt_solver, smt_output=smt_output, smt_timeout=args.smt_timeout)
    if args.smt_problem:
        with open(args.smt_problem, "wb") as fh:
            fh.write(emit_smt(build_frequency_system(normalize(m, args.cause))))
    return _verdict_json(v, args.emit_witness)


def cmd_exists_cause(m, args):
    c = exists_pr_cause(m)
    return {"verdict": EXISTS if c else "NotExists", "cause": [c] if c else None,
            "singleton_causes": _states(singleton_spr_states(m))}


def cmd_canonical(m, args):
    c = canonical_spr_cause(m)
    return {"verdict": EXISTS if c is not None else "NotExists", "cause": _states(c)}


def cmd_quality(m, args):
    rep = quality_report(m, args.cause, waive=args.waive_cause_check)
    return _quality_json(rep, args.emit_witness)


def cmd_optimize(m, args):
    if args.kind == "gpr":
        res = optimal.optimal_gpr(m, measure=args.measure)
        return {"verdict": res.status, "cause": _states(res.cause), "value": _value(res.value),
                "measure": args.measure}
    if args.measure == "fscore":
        found = (optimal.fscore_optimal_cause_mc(m) if m.is_markov_chain() and singleton_spr_states(m)
                 else optimal.optimal_spr_fscore(m))
        cause, value = found if found else (None, None)
    else:
        found = optimal.optimal_spr_ratio_recall(m)
        cause, value = (found[0], getattr(found[1], args.measure)) if found else (None, None)
    return {"verdict": "found" if cause else "none", "cause": _states(cause), "value": _value(value),
            "measure": args.measure}


def cmd_threshold(m, args):
    theta = parse_rational(args.theta)
    if args.kind == "spr":
        if args.measure != "fscore":
            raise UsageError("strict thresholds are supported for the f-score only")
        res = optimal.spr_fscore_threshold(m, theta=theta, cmp=args.cmp or "gt")
    else:
        res = optimal.gpr_threshold(m, measure=args.measure, theta=theta, cmp=args.cmp or "ge")
    return {"verdict": res.verdict, "cause": _states(res.cause)}


def cmd_oracle_compare(m, args):
    out = {}
    if args.cause:
        spr_v = check_spr_cause(m, args.cause).verdict
        gpr_v = check_gpr_cause(m, args.cause).verdict
        o_spr = oracle.oracle_spr(m, args.cause)
        o_gpr = oracle.oracle_gpr(m, args.cause, grid=args.grid)
        out["spr"] = {"analytic": spr_v, "oracle": "Cause" if o_spr else "NotCause"}
        out["gpr"] = {"analytic": gpr_v, "oracle": "Cause" if o_gpr else "NotCause"}
        agree = (spr_v == out["spr"]["oracle"]) and (gpr_v == VERDICT_UNKNOWN or gpr_v == out["gpr"]["oracle"]
                                                    or gpr_v == "NotCause")
        if spr_v == "Cause" or gpr_v == "Cause":
            a = quality_report(m, args.cause, waive=True).values()
            o = oracle.oracle_quality(m, args.cause)
            out["quality"] = {k: {"analytic": _value(a[k]), "oracle": _value(o[k])} for k in a}
            agree = agree and all(a[k] == o[k] for k in a)
    else:
        spr = optimal.optimal_spr_ratio_recall(m)
        o = oracle.oracle_optimal_cause(m, kind="SPR", measure="recall")
        out["optimal_recall"] = {"analytic": _value(spr[1].recall) if spr else None,
                                 "oracle": _value(o[1]) if o else None}
        agree = (spr is None) == (o is None) and (spr is None or spr[1].recall == o[1])
    out["verdict"] = "Agree" if agree else "Disagree"
    return out


COMMANDS = {
    "validate": cmd_validate,
    "check-spr": cmd_check_spr,
    "check-gpr": cmd_check_gpr,
    "exists-cause": cmd_exists_cause,
    "canonical": cmd_canonical,
    "quality": cmd_quality,
    "optimize": cmd_optimize,
    "threshold": cmd_threshold,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("model")
    common.add_argument("--eff-label", default=EFFECT)
    common.add_argument("--no-timing", action="store_true")
    common.add_argument("--emit-witness", action="store_true")
    common.add_argument("--jobs", type=int, default=1, help="worker cap (work currently runs sequentially)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="prcause", description="Probability-raising causes in Markov decision processes.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    sub.add_parser("validate", parents=[common])
    for name in ("check-spr", "quality"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--cause", type=_cause_arg, required=True)
        if name == "quality":
            sp.add_argument("--waive-cause-check", action="store_true")
    sp = sub.add_parser("check-gpr", parents=[common])
    sp.add_argument("--cause", type=_cause_arg, required=True)
    sp.add_argument("--backend", choices=sorted(BACKEND_ALIASES), default="auto")
    sp.add_argument("--smt-solver")
    sp.add_argument("--smt-output", help="file with solver output to consume instead of running a solver")
    sp.add_argument("--smt-problem", help="write the generated SMT-LIB problem to this file")
    sp.add_argument("--smt-timeout", type=float)
    sub.add_parser("exists-cause", parents=[common])
    sub.add_parser("canonical", parents=[common])
    sp = sub.add_parser("optimize", parents=[common])
    sp.add_argument("--kind", choices=("spr", "gpr"), default="spr")
    sp.add_argument("--measure", choices=optimal.MEASURES, default="fscore")
    sp = sub.add_parser("threshold", parents=[common])
    sp.add_argument("--kind", choices=("spr", "gpr"), default="spr")
    sp.add_argument("--measure", choices=optimal.MEASURES, default="fscore")
    sp.add_argument("--theta", required=True)
    sp.add_argument("--cmp", choices=("gt", "ge"))
    sp = sub.add_parser("oracle-compare", parents=[common])
    sp.add_argument("--cause", type=_cause_arg)
    sp.add_argument("--grid", type=int, default=8)
    return p


def run(argv=None, out=None, err=None):
    """Run one command; returns the exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"prcause: {e}", file=err)
        return EXIT_INPUT
    if args.verbose:
        logging.basicConfig(level=logging.INFO)
    started = time.perf_counter()
    try:
        m = load_model(args.model, args.eff_label)
        doc = COMMANDS[args.command](m, args)
    except (InputError, UsageError, UndefinedMeasure, CandidateCapExceeded, OSError) as e:
        print(f"prcause: {e}", file=err)
        return EXIT_INPUT
    if not args.no_timing:
        doc["timing"] = {"seconds": round(time.perf_counter() - started, 6)}
    print(json.dumps(doc, sort_keys=True), file=out)
    return EXIT_UNKNOWN if doc.get("verdict") in (UNKNOWN, VERDICT_UNKNOWN, "unknown") else EXIT_OK


def main():
    sys.exit(run())
