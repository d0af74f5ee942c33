"""Quality-optimal causes.

Strict causes are exactly the subsets of the singleton-cause states that
satisfy minimality, which makes their optimisation tractable: the canonical
cause is recall- and ratio-optimal, f-score optimality in chains reduces to
one expected-weight problem, and the f-score threshold question in MDPs to
an expected-weight game. Global causes are optimised by brute force.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .errors import CandidateCapExceeded, InputError, NoSprCause
from .gpr import check_gpr_cause
from .model import (
    INF, Action, Mdp, condition_m_violations, effect_set, reachable, sccs,
)
from .numerics import MIN, PLAYER0, GameArena, WeightedMdp, extremal_reach, ssp_expectation, ssp_game_value
from .quality import quality_report
from .spr import _canonical, _spr_states
from .transforms import fresh_name, mec_quotient

log = logging.getLogger(__name__)

MEASURES = ("recall", "covratio", "fscore")
EXISTS, NOT_EXISTS, UNKNOWN = "Exists", "NotExists", "Unknown"


@dataclass
class ThresholdResult:
    verdict: str
    cause: frozenset = None
    value: Fraction = None  # game value or measure value, when computed


@dataclass
class OptimalResult:
    status: str  # "found", "none" or "unknown"
    cause: frozenset = None
    value: object = None
    audit: list = field(default_factory=list, repr=False)


def _names(m, ids):
    return frozenset(m.names[s] for s in ids)


def _m_filter(m, chosen):
    """Members of ``chosen`` reachable without passing another member."""
    seen = reachable(m, avoid=set(chosen))
    hit = {t for s in seen for t in m.successors(s)}
    return {c for c in chosen if c in hit}


def optimal_spr_ratio_recall(m, eff=None):
    """The canonical cause with its quality report, or None without strict causes."""
    effs = effect_set(m, eff)
    can = _canonical(m, effs)
    if can is None:
        return None
    return _names(m, can), quality_report(m, can, effs, kind="spr", waive=True)


def _collapse_cycles(m):
    """States of cyclic bottom components of a chain (they never terminate)."""
    succ = [set(t for t, _ in m.actions[s][0].dist) if m.actions[s] else set() for s in range(m.n)]
    out = set()
    for comp in sccs(range(m.n), lambda s: succ[s]):
        comp = set(comp)
        if all(succ[s] <= comp for s in comp) and any(succ[s] for s in comp):
            out |= comp
    return out


def fscore_optimal_cause_mc(m, eff=None):
    """An f-score-optimal strict cause of a Markov chain and its f-score."""
    if not m.is_markov_chain():
        raise InputError("f-score optimisation by reduction needs a Markov chain")
    effs = effect_set(m, eff)
    cands = _spr_states(m, effs)
    if not cands:
        raise NoSprCause("the chain has no strict probability-raising cause")
    stuck = _collapse_cycles(m)
    names = list(m.names)
    cov = len(names)
    names.append(fresh_name(set(names), "eff_cov"))
    noeff = len(names)
    names.append(fresh_name(set(names), "noeff_c"))
    reset = Action("reset", ((m.init, Fraction(1)),))
    actions = []
    for s in range(m.n):
        if s in stuck or not m.actions[s]:
            actions.append([reset])
        elif s in cands:
            w = cands[s]
            actions.append([m.actions[s][0], Action("gamma", ((cov, w), (noeff, 1 - w)))])
        else:
            actions.append([m.actions[s][0]])
    actions += [[], [reset]]
    k = Mdp(names, m.init, actions)
    weight = {e: 1 for e in effs}
    weight[noeff] = 1
    f, sched = ssp_expectation(WeightedMdp(k, weight, [cov]), MIN)
    chosen = {c for c in cands if sched.choice[c].get(1)}
    cause = _m_filter(m, chosen)
    return _names(m, cause), 2 / (f + 2)


def _positive_effect_model(nm, effs):
    """The quotient itself if every scheduler reaches an effect, else the model
    with a fresh initial state choosing one of the ways out of the zero region."""
    vmin, _ = extremal_reach(nm, effs, MIN)
    if vmin[nm.init] > 0:
        return nm
    d = {s for s in range(nm.n) if vmin[s] == 0}
    act_min = {s: tuple(a for a, act in enumerate(nm.actions[s]) if all(t in d for t, _ in act.dist))
               for s in d}
    region = reachable(nm, allowed=act_min)
    pi = [(s, a) for s in sorted(region) for a in range(len(nm.actions[s])) if a not in act_min[s]]
    names = list(nm.names)
    start = fresh_name(set(names), "init_k")
    names.append(start)
    used = set()
    out = []
    for s, a in pi:
        name = fresh_name(used, f"pick_{nm.names[s]}_{nm.actions[s][a].name}")
        used.add(name)
        out.append(Action(name, nm.actions[s][a].dist))
    actions = [list(acts) for acts in nm.actions] + [out]
    return Mdp(names, len(names) - 1, actions, list(nm.labels) + [frozenset()])


def _fscore_game(m, effs, cands, theta):
    """Expected-weight game whose value is positive iff a cause beats ``theta``.

    Returns ``(game arena, choice state per candidate)``.
    """
    q = mec_quotient(m)
    k = _positive_effect_model(q.mdp, {q.state_map[e] for e in effs})
    qc = {q.state_map[c]: c for c in cands}
    keff = {q.state_map[e] for e in effs}
    names, actions, index, keys = [], [], {}, {}

    def node(key):
        if key not in index:
            index[key] = len(names)
            keys[len(names)] = key
            names.append(f"{key[0]}:{k.names[key[1]]}")
            actions.append(None)
        return index[key]

    sink = None
    weight = {}
    queue = [node(("no", k.init))]
    done = set()
    while queue:
        i = queue.pop()
        if i in done:
            continue
        done.add(i)
        copy, s = keys[i]
        if copy == "choice":
            acts = [Action("alpha", ((node(("yes", s)), Fraction(1)),)),
                    Action("beta", ((node(("no", s)), Fraction(1)),))]
        elif not k.actions[s]:
            w = 0
            if copy == "yes":
                w = 2 * (1 - theta) if s in keff else -theta
            elif s in keff:
                w = -theta
            if sink is None:
                sink = len(names)
                names.append("sink")
                actions.append([])
                done.add(sink)
            acts = [Action("end", ((sink, Fraction(1)),))]
            if w:
                weight[i] = w
        else:
            acts = []
            for act in k.actions[s]:
                dist = {}
                for t, p in act.dist:
                    if copy == "no" and t in qc:
                        j = node(("choice", t))
                    else:
                        j = node((copy, t))
                    dist[j] = dist.get(j, 0) + p
                acts.append(Action(act.name, tuple(dist.items())))
        actions[i] = acts
        queue.extend(t for act in acts for t, _ in act.dist if t not in done)
    game = Mdp(names, 0, actions)
    owner = {j: PLAYER0 for key, j in index.items() if key[0] == "choice"}
    choice = {qc[key[1]]: j for key, j in index.items() if key[0] == "choice"}
    return GameArena(WeightedMdp(game, weight, [sink]), owner), choice


def spr_fscore_threshold(m, eff=None, theta=Fraction(1, 2), cmp="gt"):
    """Is there a strict cause whose f-score exceeds ``theta`` (``cmp="ge"``: reaches it)?"""
    if cmp not in ("gt", "ge"):
        raise InputError("cmp must be 'gt' or 'ge'")
    theta = Fraction(theta)
    if theta < 0:
        raise InputError("theta must be non-negative")
    effs = effect_set(m, eff)
    cands = _spr_states(m, effs)
    if not cands:
        return ThresholdResult(NOT_EXISTS)
    if theta == 0 and cmp == "ge":
        return ThresholdResult(EXISTS, _names(m, _canonical(m, effs)))
    arena, choice = _fscore_game(m, effs, cands, theta)
    value, (zeta, _) = ssp_game_value(arena)
    if value > 0 or cmp == "ge" and value == 0:
        chosen = {c for c, j in choice.items() if zeta.get(j) == 0}
        cause = _m_filter(m, chosen)
        if cause:
            return ThresholdResult(EXISTS, _names(m, cause), value)
    return ThresholdResult(NOT_EXISTS, value=value)


def _key(value):
    return INF if value == INF else Fraction(value)


def _candidates(m, effs, cap):
    pool = sorted((s for s in range(m.n) if s not in effs and s != m.init), key=lambda s: m.names[s])
    total = 2 ** len(pool) - 1
    if total > cap:
        raise CandidateCapExceeded(f"{total} candidate sets exceed the cap of {cap}")
    for size in range(1, len(pool) + 1):
        for combo in combinations(pool, size):
            if not condition_m_violations(m, combo):
                yield frozenset(combo)


def _better(a, b):
    return b is None or _key(a) > _key(b)


def optimal_spr_fscore(m, eff=None):
    """Best f-score over all strict causes by enumeration (any MDP)."""
    effs = effect_set(m, eff)
    cands = _spr_states(m, effs)
    if not cands:
        return None
    best, best_val = None, None
    pool = sorted(cands, key=lambda s: m.names[s])
    for size in range(1, len(pool) + 1):
        for combo in combinations(pool, size):
            if condition_m_violations(m, combo):
                continue
            val = quality_report(m, combo, effs, waive=True).fscore
            if _better(val, best_val):
                best, best_val = combo, val
    return _names(m, best), best_val


def _gpr_scan(m, effs, measure, cap, search):
    if measure not in MEASURES:
        raise InputError(f"measure must be one of {MEASURES}")
    for cand in _candidates(m, effs, cap):
        v = check_gpr_cause(m, cand, effs, **search)
        if v.verdict == "NotCause":
            yield cand, v.verdict, None
            continue
        rep = quality_report(m, cand, effs, waive=True)
        yield cand, v.verdict, getattr(rep, measure)


def optimal_gpr(m, eff=None, measure="fscore", cap=2 ** 20, **search):
    """Best global cause for ``measure`` by exhaustive enumeration.

    Ties go to the smaller set, then to the lexicographically smaller ids.
    ``status`` is ``unknown`` when an undecided candidate would win.
    """
    effs = effect_set(m, eff)
    best, best_val, audit, pending = None, None, [], []
    for cand, verdict, val in _gpr_scan(m, effs, measure, cap, search):
        audit.append((_names(m, cand), verdict, val))
        if verdict == "Cause" and _better(val, best_val):
            best, best_val = cand, val
        elif verdict == "Unknown":
            pending.append((cand, val))
    for cand, val in pending:
        if _better(val, best_val):
            log.info("undecided candidate %s could be optimal", sorted(_names(m, cand)))
            return OptimalResult("unknown", _names(m, best) if best else None, best_val, audit)
    if best is None:
        return OptimalResult("none", audit=audit)
    return OptimalResult("found", _names(m, best), best_val, audit)


def _meets(val, theta, cmp):
    return _key(val) > theta if cmp == "gt" else _key(val) >= theta


def gpr_threshold(m, eff=None, measure="fscore", theta=Fraction(1, 2), cmp="ge", cap=2 ** 20, **search):
    """Is there a global cause whose ``measure`` reaches ``theta``?"""
    effs = effect_set(m, eff)
    theta = Fraction(theta)
    unknown = False
    for cand, verdict, val in _gpr_scan(m, effs, measure, cap, search):
        if val is None or not _meets(val, theta, cmp):
            continue
        if verdict == "Cause":
            return ThresholdResult(EXISTS, _names(m, cand), val)
        unknown = True
    return ThresholdResult(UNKNOWN if unknown else NOT_EXISTS)
