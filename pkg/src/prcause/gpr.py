"""Global probability-raising causes.

For Markov chains the condition is a direct comparison of two exact
probabilities. For MDPs refuting it means finding a scheduler under which
reaching the cause does not raise the effect probability; on the normalized
model that is a frequency vector satisfying linear balance equations and one
quadratic inequality. The search here is sound but incomplete; certifying a
cause needs either the strict condition (which implies the global one) or an
external SMT solver.
"""
import logging
import os
import re
import subprocess
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .errors import InputError, NotNormalized
from .model import MrScheduler, effect_set, validate_cause_candidate
from .spr import check_spr_cause
from .transforms import check_normalized, normalize
from .witness import (
    CAUSE, NOT_CAUSE, UNKNOWN, CauseVerdict, Triple, _segment, cause_statistics,
    derandomize_tau, evaluate, gpr_violated, lift_witness, margin, md_schedulers, mix,
    scheduler_from_frequencies, segment_point, violates,
)

log = logging.getLogger(__name__)

SOLVER_ENV = "CAUSAL_MDP_SMT_SOLVER"
BACKENDS = ("auto", "mc_exact", "search", "smt_export")


# --- the constraint system ----------------------------------------------------------

@dataclass
class FrequencySystem:
    """Frequency variables of a normalized model with their constraints.

    ``balance`` holds one ``(coefficients, rhs)`` row per non-terminal state:
    outflow minus inflow equals 1 at init and 0 elsewhere. ``uncovered`` is
    the inflow of ``eff_unc`` and ``cause_terms`` lists ``(variable, w_c)``.
    """

    normalized: object = field(repr=False)
    variables: list  # (state, action index) per variable
    names: list
    balance: list
    uncovered: dict
    cause_terms: list

    def triple(self, x):
        xc = sum((x[v] for v, _ in self.cause_terms), Fraction(0))
        cov = sum((x[v] * w for v, w in self.cause_terms), Fraction(0))
        unc = sum((x[v] * k for v, k in self.uncovered.items()), Fraction(0))
        return Triple(xc, unc, cov)

    def satisfies_linear(self, x):
        return all(v >= 0 for v in x) and all(
            sum((k * x[v] for v, k in row.items()), Fraction(0)) == rhs for row, rhs in self.balance)

    def satisfies(self, x):
        """Exact check of all constraints for a vector indexed like ``variables``."""
        return self.satisfies_linear(x) and violates(self.triple(x))


def _smt_name(text):
    return re.sub(r"[^A-Za-z0-9_]", "_", text)


def build_frequency_system(n):
    try:
        check_normalized(n)
    except ValueError as e:
        raise NotNormalized(str(e)) from None
    m = n.base
    variables = [(s, a) for s in range(m.n) for a in range(len(m.actions[s]))]
    index = {v: i for i, v in enumerate(variables)}
    names, used = [], set()
    for s, a in variables:
        base = _smt_name(f"x_{m.names[s]}_{m.actions[s][a].name}")
        name, k = base, 1
        while name in used:
            name, k = f"{base}_{k}", k + 1
        used.add(name)
        names.append(name)
    rows = {s: {} for s in range(m.n) if m.actions[s]}
    unc = {}
    target = n.roles["eff_unc"]
    for (s, a), i in index.items():
        rows[s][i] = rows[s].get(i, 0) + 1
        for t, p in m.actions[s][a].dist:
            if t in rows:
                rows[t][i] = rows[t].get(i, 0) - p
            elif t == target:
                unc[i] = unc.get(i, 0) + p
    balance = [({i: k for i, k in row.items() if k}, Fraction(int(s == m.init)))
               for s, row in rows.items()]
    cause_terms = [(index[(c, 0)], n.w[c]) for c in sorted(n.cause)]
    return FrequencySystem(n, variables, names, balance, unc, cause_terms)


def _lit(q):
    q = Fraction(q)
    body = str(abs(q.numerator)) if q.denominator == 1 else f"(/ {abs(q.numerator)} {q.denominator})"
    return f"(- {body})" if q < 0 else body


def _sum(terms):
    terms = list(terms)
    if not terms:
        return "0"
    return terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})"


def _lin(fs, coeffs):
    return _sum(fs.names[v] if k == 1 else f"(* {_lit(k)} {fs.names[v]})" for v, k in sorted(coeffs.items()))


def emit_smt(fs):
    """SMT-LIB 2 problem (QF_NRA) whose models are refuting frequency vectors."""
    out = ["(set-logic QF_NRA)", "(set-option :produce-models true)"]
    out += [f"(declare-fun {name} () Real)" for name in fs.names]
    out += [f"(assert (>= {name} 0))" for name in fs.names]
    for row, rhs in fs.balance:
        out.append(f"(assert (= {_lin(fs, row)} {_lit(rhs)}))")
    xc = _sum(fs.names[v] for v, _ in fs.cause_terms)
    cov = _lin(fs, {v: w for v, w in fs.cause_terms if w})
    unc = _lin(fs, fs.uncovered)
    out.append(f"(assert (>= (* {xc} {unc}) (* (- 1 {xc}) {cov})))")
    out.append(f"(assert (> {xc} 0))")
    out.append("(check-sat)")
    out.append(f"(get-value ({' '.join(fs.names)}))")
    return ("\n".join(out) + "\n").encode()


def _tokens(text):
    return re.findall(r"\(|\)|[^\s()]+", text)


def _sexprs(tokens):
    stack, top = [[]], None
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            top = stack.pop()
            stack[-1].append(top)
        else:
            stack[-1].append(tok)
    return stack[0]


def _value(e):
    if isinstance(e, str):
        return Fraction(e)
    if len(e) == 2 and e[0] == "-":
        return -_value(e[1])
    if len(e) == 3 and e[0] == "/":
        return _value(e[1]) / _value(e[2])
    raise ValueError(f"not a rational value: {e}")


def parse_smt_output(fs, text):
    """``("sat", vector | None)``, ``("unsat", None)`` or ``("unknown", None)``.

    The vector is None when the model is missing or not rational.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] not in ("sat", "unsat"):
        return "unknown", None
    if lines[0] == "unsat":
        return "unsat", None
    try:
        exprs = _sexprs(_tokens("\n".join(lines[1:])))
        pairs = {}
        for group in exprs:
            for item in group:
                pairs[item[0]] = _value(item[1])
        return "sat", [pairs[name] for name in fs.names]
    except (ValueError, KeyError, IndexError, TypeError, ZeroDivisionError):
        return "sat", None


def run_smt_solver(solver, problem, timeout=None):
    """Run ``solver <file>`` on the problem text and return its stdout."""
    with tempfile.NamedTemporaryFile("wb", suffix=".smt2", delete=False) as f:
        f.write(problem)
        path = f.name
    try:
        proc = subprocess.run([solver, path], capture_output=True, text=True, timeout=timeout)
    finally:
        os.unlink(path)
    return proc.stdout


def scheduler_from_vector(fs, x):
    n = fs.normalized
    freq = {v: x[i] for i, v in enumerate(fs.variables)}
    fallback = MrScheduler.deterministic(n.base, {})
    return scheduler_from_frequencies(n.base, freq, fallback)


# --- refutation search -----------------------------------------------------------

class SearchOutcome(NamedTuple):
    scheduler: MrScheduler  # None when nothing was found
    stage: str  # "a", "b", "c" or None
    md_count: int
    points: int


def _md_points(n, limit):
    points = {}
    count = 0
    for picks in md_schedulers(n.base, limit):
        count += 1
        sched = MrScheduler.deterministic(n.base, picks)
        t, f = evaluate(n, sched)
        if t not in points:
            points[t] = (sched, f)
    return points, count


def _segment_may_violate(p0, p1):
    (x0, dx), (a, b, c) = _segment(p0, p1)
    cands = [Fraction(0), Fraction(1)]
    if a < 0 and 0 < -b / (2 * a) < 1:
        cands.append(-b / (2 * a))
    return any((a * lam + b) * lam + c >= 0 for lam in cands)


def _numeric(n, points, seed, restarts, iterations):
    import numpy as np
    trip = list(points)
    P = np.array([[float(t.cause), float(t.uncovered), float(t.covered)] for t in trip])
    X, U, W = P[:, 0], P[:, 1], P[:, 2]
    k = len(trip)
    rng = np.random.default_rng(seed)
    for r in range(restarts):
        mu = rng.dirichlet(np.ones(k))
        for _ in range(iterations):
            x, u, w = mu @ X, mu @ U, mu @ W
            grad = X * (u + w) + x * (U + W) - W
            mu = mu * np.exp(0.5 * (grad - grad.max()))
            mu /= mu.sum()
        x, u, w = mu @ X, mu @ U, mu @ W
        if x <= 1e-12 or x * u - (1 - x) * w < -1e-9:
            continue
        lam = [Fraction(float(v)).limit_denominator(10 ** 6) for v in mu]
        total = sum(lam)
        if not total:
            continue
        lam = [v / total for v in lam]
        t = Triple(*(sum((li * getattr(p, f) for li, p in zip(lam, trip)), Fraction(0))
                     for f in Triple._fields))
        if violates(t):
            freq = mix([(li, points[p][1]) for li, p in zip(lam, trip)])
            return scheduler_from_frequencies(n.base, freq, points[trip[0]][0])
    return None


def search_refutation(n, md_limit=4096, pair_limit=300, seed=0, restarts=24, iterations=300,
                      stages="abc"):
    """Staged search for a scheduler refuting the global condition on ``n``.

    (a) memoryless deterministic schedulers, (b) exact analysis of mixtures
    of two of them, (c) numeric ascent over mixtures of all of them, rounded
    and re-checked exactly. Every returned scheduler is verified exactly.
    """
    points, count = _md_points(n, md_limit)
    order = sorted(points, key=lambda t: (-margin(t), -t.cause))

    def done(sched, stage):
        if sched is not None and violates(evaluate(n, sched)[0]):
            return SearchOutcome(sched, stage, count, len(points))
        return None

    if "a" in stages:
        for t in order:
            if violates(t):
                return done(points[t][0], "a")
    if "b" in stages:
        top = order[:pair_limit]
        for i, p in enumerate(top):
            for q in top[i + 1:]:
                if p.cause == 0 and q.cause == 0 or not _segment_may_violate(p, q):
                    continue
                lam = segment_point(p, q)
                if lam is None:
                    continue
                freq = mix([(1 - lam, points[p][1]), (lam, points[q][1])])
                res = done(scheduler_from_frequencies(n.base, freq, points[p][0]), "b")
                if res:
                    return res
    if "c" in stages and len(points) > 2:
        res = done(_numeric(n, {t: points[t] for t in order[:pair_limit]}, seed, restarts, iterations), "c")
        if res:
            return res
    return SearchOutcome(None, None, count, len(points))


def refutation_search(n, **options):
    """A verified refuting MR scheduler on ``n``, or None."""
    return search_refutation(n, **options).scheduler


# --- verdicts ----------------------------------------------------------------------

def _lift(n, w, cause, effs, certification, details):
    w, evaluations = derandomize_tau(n, w)
    fm = lift_witness(n, w)
    st = cause_statistics(n.original, fm, cause, effs)
    if not gpr_violated(st):
        raise AssertionError("lifted witness does not refute the global condition")
    details = {**details, "tau_evaluations": evaluations}
    return CauseVerdict(NOT_CAUSE, certification, (w, fm),
                        (st.p_cause * st.p_uncovered, (1 - st.p_cause) * st.p_both), n, details)


def _decide_chain(m, n, cause, effs):
    only = MrScheduler.deterministic(m, {})
    st = cause_statistics(m, only, cause, effs)
    details = {"p_effect": st.p_effect, "p_cause": st.p_cause,
               "conditional": st.p_both / st.p_cause}
    if st.p_both > st.p_effect * st.p_cause:
        t, _ = evaluate(n, MrScheduler.deterministic(n.base, {}))
        return CauseVerdict(CAUSE, "ExactMC", None,
                            (t.cause * t.uncovered, (1 - t.cause) * t.covered), n, details)
    return _lift(n, MrScheduler.deterministic(n.base, {}), cause, effs, "ExactMC", details)


def _solver_path(smt_solver):
    return smt_solver or os.environ.get(SOLVER_ENV) or None


def _smt(n, cause, effs, solver, output, timeout):
    fs = build_frequency_system(n)
    problem = emit_smt(fs)
    if output is None and solver:
        output = run_smt_solver(solver, problem, timeout)
    if output is None:
        return CauseVerdict(UNKNOWN, "HeuristicExhausted", normalized=n,
                            details={"smt_problem": problem.decode()})
    status, x = parse_smt_output(fs, output)
    if status == "unsat":
        return CauseVerdict(CAUSE, "ExactSMT", normalized=n, details={"solver": "unsat"})
    if status == "sat" and x is not None and fs.satisfies(x):
        return _lift(n, scheduler_from_vector(fs, x), cause, effs, "ExactSMT", {"solver": "sat"})
    return CauseVerdict(UNKNOWN, "HeuristicExhausted", normalized=n,
                        details={"solver": status, "reason": "no usable model"})


def check_gpr_cause(m, cause, eff=None, backend="auto", smt_solver=None, smt_output=None,
                    smt_timeout=None, **search):
    """Decide whether ``cause`` is a global probability-raising cause.

    ``backend``: ``auto`` (exact for chains, strict-condition shortcut,
    search, then SMT if a solver is configured), ``mc_exact``, ``search`` or
    ``smt_export``. ``smt_output`` supplies solver output directly.
    """
    if backend not in BACKENDS:
        raise InputError(f"unknown backend {backend!r}")
    cause = m.ids(cause)
    effs = effect_set(m, eff)
    validate_cause_candidate(m, cause, effs)
    n = normalize(m, cause, effs)
    if backend == "mc_exact" or backend == "auto" and m.is_markov_chain():
        if not m.is_markov_chain():
            raise InputError("the mc_exact backend needs a Markov chain")
        return _decide_chain(m, n, cause, effs)
    if backend == "smt_export":
        return _smt(n, cause, effs, _solver_path(smt_solver), smt_output, smt_timeout)
    if backend == "auto":
        sv = check_spr_cause(m, cause, effs)
        if sv.is_cause:
            return CauseVerdict(CAUSE, "ExactSPR", None, None, n, {"spr": sv.details})
        if len(cause) == 1:
            # one state: the strict and the global condition coincide
            fm = sv.witness[1]
            st = cause_statistics(m, fm, cause, effs)
            if not gpr_violated(st):
                raise AssertionError("strict witness does not refute the global condition")
            return CauseVerdict(NOT_CAUSE, "WitnessVerified", sv.witness,
                                (st.p_cause * st.p_uncovered, (1 - st.p_cause) * st.p_both),
                                sv.normalized, {"source": "spr", **sv.details})
    out = search_refutation(n, **search)
    if out.scheduler is not None:
        return _lift(n, out.scheduler, cause, effs, "WitnessVerified",
                     {"stage": out.stage, "md_schedulers": out.md_count})
    if n.base.is_markov_chain():
        # stage (a) evaluated the only scheduler of the normal form exactly
        t, _ = evaluate(n, MrScheduler.deterministic(n.base, {}))
        return CauseVerdict(CAUSE, "ExactMC", None, (t.cause * t.uncovered, (1 - t.cause) * t.covered),
                            n, {"normal_form_chain": True, "md_schedulers": out.md_count})
    solver = _solver_path(smt_solver)
    if backend == "auto" and (solver or smt_output is not None):
        return _smt(n, cause, effs, solver, smt_output, smt_timeout)
    return CauseVerdict(UNKNOWN, "HeuristicExhausted", normalized=n,
                        details={"md_schedulers": out.md_count})
