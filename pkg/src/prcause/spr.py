"""Strict probability-raising causes.

A state ``c`` passes the strict test when no scheduler that reaches ``c``
achieves an effect probability at least the minimal effect probability from
``c``. The test compares that minimum ``w_c`` with the maximal effect
probability in the model where ``c`` is replaced by a single action realising
``w_c``; ties are broken by whether ``c`` stays reachable along maximising
actions.
"""
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InputError, MInvalid
from .model import (
    FiniteMemoryScheduler, MrScheduler, effect_set, reachable, validate_cause_candidate,
)
from .numerics import MAX, MIN, _attractor_layers, extremal_reach
from .transforms import _mcause, normalize
from .witness import (
    CAUSE, NOT_CAUSE, CauseVerdict, cause_statistics, derandomize_tau, evaluate, lift_witness,
    mix, scheduler_from_frequencies, segment_point, spr_violated_at, violates,
)

HOLDS, FAILS = "Holds", "Fails"
CASE1, CASE2, CASE3_1, CASE3_2 = "Case1", "Case2", "Case3_1", "Case3_2"


@dataclass
class SprStateReport:
    state: str
    w_c: Fraction
    q_init: Fraction
    verdict: str
    case: str
    witness: FiniteMemoryScheduler = None
    normalized_witness: MrScheduler = field(default=None, repr=False)
    normalized: object = field(default=None, repr=False)
    lam: Fraction = None

    @property
    def holds(self):
        return self.verdict == HOLDS


def _towards(m, goal, allowed):
    """MD scheduler reaching ``goal`` with positive probability where possible."""
    states = [s for s in range(m.n) if m.actions[s]]
    picks = _attractor_layers(m, set(goal), states, allowed)
    return MrScheduler.deterministic(m, {s: picks.get(s, allowed[s][0] if allowed[s] else 0)
                                          for s in states})


def _optimal_actions(m, v):
    return {s: tuple(a for a, act in enumerate(m.actions[s])
                     if sum(p * v[t] for t, p in act.dist) == v[s])
            for s in range(m.n)}


def _singleton_witness(m, c, effs, case):
    """Refuting two-mode scheduler on ``m`` for the singleton cause ``{c}``."""
    n = normalize(m, {c}, effs)
    b = n.base
    nc = next(iter(n.cause))
    allacts = {s: tuple(range(len(b.actions[s]))) for s in range(b.n)}
    v, best = extremal_reach(b, n.effect, MAX)
    lam = None
    if case == CASE3_1:
        w = _towards(b, {nc}, _optimal_actions(b, v))
    else:
        reach_c = _towards(b, {nc}, allacts)
        t1, f1 = evaluate(n, best)
        t0, f0 = evaluate(n, reach_c)
        lam = segment_point(t0, t1)
        if lam is None:
            q, wc = t1.uncovered + t1.covered, n.w[nc]
            lam = (wc / q + 1) / 2
        w = scheduler_from_frequencies(b, mix([(1 - lam, f0), (lam, f1)]), best)
    if not violates(evaluate(n, w)[0]):
        raise AssertionError("constructed witness does not refute the strict condition")
    w, _ = derandomize_tau(n, w)
    return n, w, lift_witness(n, w), lam


def spr_condition_holds(m, c, eff=None, witness=True):
    """Run the strict test for one state and report the deciding case."""
    c = m.state(c)
    effs = effect_set(m, eff)
    if not effs:
        raise InputError("the effect set is empty")
    if c in effs:
        raise InputError(f"{m.names[c]!r} is an effect state")
    if c not in reachable(m):
        raise InputError(f"{m.names[c]!r} is unreachable")
    vmin, _ = extremal_reach(m, effs, MIN)
    w_c = vmin[c]
    reduced, _ = _mcause(m, {c}, effs)
    q, _ = extremal_reach(reduced, effs, MAX)
    q_init = q[reduced.init]
    if q_init < w_c:
        verdict, case = HOLDS, CASE1
    elif q_init > w_c:
        verdict, case = FAILS, CASE2
    else:
        opt = _optimal_actions(reduced, q)
        if c in reachable(reduced, allowed=opt):
            verdict, case = FAILS, CASE3_1
        else:
            verdict, case = HOLDS, CASE3_2
    report = SprStateReport(m.names[c], w_c, q_init, verdict, case)
    if verdict == FAILS and witness:
        n, w, fm, lam = _singleton_witness(m, c, effs, case)
        st = cause_statistics(m, fm, {c}, effs)
        if not spr_violated_at(st, c):
            raise AssertionError("lifted witness does not refute the strict condition")
        report.normalized, report.normalized_witness, report.witness, report.lam = n, w, fm, lam
    return report


def check_spr_cause(m, cause, eff=None):
    """Decide whether ``cause`` is a strict probability-raising cause."""
    cause = m.ids(cause)
    effs = effect_set(m, eff)
    try:
        validate_cause_candidate(m, cause, effs)
    except MInvalid as e:
        return CauseVerdict(NOT_CAUSE, "ExactSPR", details={"reason": "MInvalid", "state": e.state})
    reduced, _ = _mcause(m, cause, effs)
    states = {}
    for c in sorted(cause):
        r = spr_condition_holds(reduced, c, effs)
        states[m.names[c]] = r.case
        if r.holds:
            continue
        # the reduced model shares state indices with m; extra states are terminal
        before = {s: d for (mode, s), d in r.witness.decisions.items()
                  if mode == "before" and s not in cause}
        _, mins = extremal_reach(m, effs, MIN)
        fm = FiniteMemoryScheduler.two_mode(m, before, cause, mins)
        st = cause_statistics(m, fm, cause, effs)
        if not spr_violated_at(st, c):
            raise AssertionError("transferred witness does not refute the strict condition")
        return CauseVerdict(
            NOT_CAUSE, "WitnessVerified", (r.normalized_witness, fm),
            (st.first_effect[c] / st.first[c], st.p_effect), r.normalized,
            {"state": m.names[c], "case": r.case, "lambda": r.lam, "states": states})
    return CauseVerdict(CAUSE, "ExactSPR", details={"states": states})


def _spr_states(m, effs):
    """``{c: w_c}`` for every state forming a singleton strict cause."""
    if not effs:
        return {}
    live = reachable(m)
    out = {}
    for c in range(m.n):
        if c in effs or c == m.init or c not in live:
            continue
        r = spr_condition_holds(m, c, effs, witness=False)
        if r.holds:
            out[c] = r.w_c
    return out


def singleton_spr_states(m, eff=None):
    """States that on their own form a strict (equivalently, global) cause."""
    return frozenset(m.names[c] for c in _spr_states(m, effect_set(m, eff)))


def exists_pr_cause(m, eff=None):
    """A singleton cause with the largest minimal effect probability, or None."""
    cands = _spr_states(m, effect_set(m, eff))
    if not cands:
        return None
    return m.names[min(cands, key=lambda c: (-cands[c], m.names[c]))]


def _canonical(m, effs):
    cands = _spr_states(m, effs)
    if not cands:
        return None
    seen = reachable(m, avoid=set(cands))
    hit = {t for s in seen for t in m.successors(s)}
    return frozenset(c for c in cands if c in hit)


def canonical_spr_cause(m, eff=None):
    """Singleton-cause states reachable without passing another one, or None."""
    can = _canonical(m, effect_set(m, eff))
    return None if can is None else frozenset(m.names[c] for c in can)
