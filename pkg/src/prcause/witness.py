"""Refuting schedulers on normalized models and their translation back.

On a normalized model everything the global condition needs from a scheduler
is captured by three numbers: the probability of reaching a cause state, the
probability of an uncovered effect, and the cause-weighted sum of covered
effect mass. They are affine in the frequency vector, so mixing schedulers
mixes these triples linearly.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import NamedTuple

from .errors import PreconditionViolated
from .model import (
    FiniteMemoryScheduler, MrScheduler, chain_reach, chain_visits, frequencies,
    induced_chain,
)


CAUSE, NOT_CAUSE, UNKNOWN = "Cause", "NotCause", "Unknown"


@dataclass
class CauseVerdict:
    """Outcome of a cause check.

    ``certification`` says why the verdict can be trusted: ``ExactMC``,
    ``ExactSMT``, ``ExactSPR`` (strict check, which implies the global one),
    ``WitnessVerified`` or ``HeuristicExhausted`` (Unknown only).
    ``witness`` is ``(scheduler on normalized.base, scheduler on the original model)``.
    ``margins`` are the two sides compared by the violated inequality.
    """

    verdict: str
    certification: str
    witness: tuple = None
    margins: tuple = None
    normalized: object = field(default=None, repr=False)
    details: dict = field(default_factory=dict)

    @property
    def is_cause(self):
        return self.verdict == CAUSE


class Triple(NamedTuple):
    cause: Fraction  # Pr(reach a cause state)
    uncovered: Fraction  # Pr(reach eff_unc)
    covered: Fraction  # sum over cause states of Pr(reach c) * w_c


def margin(t):
    """``>= 0`` means the global condition is violated (given ``t.cause > 0``)."""
    return t.cause * t.uncovered - (1 - t.cause) * t.covered


def violates(t):
    return t.cause > 0 and margin(t) >= 0


def triple_of(n, pair_freq, state_freq):
    x = sum((state_freq[c] for c in n.cause), Fraction(0))
    cov = sum((state_freq[c] * n.w[c] for c in n.cause), Fraction(0))
    return Triple(x, state_freq[n.roles["eff_unc"]], cov)


def evaluate(n, sched):
    """Triple and frequencies of an MR scheduler on the normalized model."""
    state_freq, pair_freq = frequencies(n.base, sched)
    return triple_of(n, pair_freq, state_freq), pair_freq


def mix(parts):
    """Convex combination of frequency dicts given as ``[(weight, freq), ...]``."""
    out = {}
    for lam, f in parts:
        if not lam:
            continue
        for k, v in f.items():
            out[k] = out.get(k, 0) + lam * v
    return out


def scheduler_from_frequencies(m, pair_freq, fallback):
    """MR scheduler with the given state-action frequencies (end-component-free models)."""
    total = {}
    for (s, a), v in pair_freq.items():
        total[s] = total.get(s, 0) + v
    choice = {}
    for s in range(m.n):
        if not m.actions[s]:
            continue
        if total.get(s):
            choice[s] = {a: pair_freq[(s, a)] / total[s]
                         for a in range(len(m.actions[s])) if pair_freq.get((s, a))}
        else:
            choice[s] = fallback.choice[s]
    return MrScheduler(m, choice)


def _segment(p0, p1):
    x0, dx = p0.cause, p1.cause - p0.cause
    u0, du = p0.uncovered, p1.uncovered - p0.uncovered
    w0, dw = p0.covered, p1.covered - p0.covered
    a = dx * (du + dw)
    b = x0 * (du + dw) + dx * (u0 + w0) - dw
    c = x0 * (u0 + w0) - w0
    return (x0, dx), (a, b, c)


def segment_point(p0, p1, max_den=16):
    """Simplest ``lam`` in [0, 1] with ``(1-lam)*p0 + lam*p1`` violating, or None.

    Small denominators are tried first, then the vertex of the quadratic
    margin and points approaching both ends of the segment. The margin along
    the segment is a quadratic, so its maximum sits at the vertex or an end;
    the approach points cover ends excluded by a zero cause probability.
    """
    (x0, dx), (a, b, c) = _segment(p0, p1)

    def ok(lam):
        return x0 + dx * lam > 0 and (a * lam + b) * lam + c >= 0

    for den in range(1, max_den + 1):
        for num in range(den + 1):
            if gcd(num, den) == 1 and ok(Fraction(num, den)):
                return Fraction(num, den)
    extra = []
    if a < 0:
        extra.append(-b / (2 * a))
    for k in range(5, 64):
        extra += [Fraction(1, 2 ** k), 1 - Fraction(1, 2 ** k)]
    for lam in extra:
        if 0 <= lam <= 1 and ok(lam):
            return lam
    return None


def md_schedulers(m, limit=None):
    """MD schedulers that differ on the states they actually reach.

    Choices are only branched on states reachable under the choices made so
    far; unreached states take action 0. Yields ``{state: action}`` dicts.
    """
    count = 0

    def extend(picks, frontier, seen):
        nonlocal count
        while frontier and not m.actions[frontier[-1]]:
            frontier = frontier[:-1]
        if not frontier:
            count += 1
            yield dict(picks)
            return
        s = frontier[-1]
        rest = frontier[:-1]
        for a in range(len(m.actions[s])):
            if limit is not None and count >= limit:
                return
            new = [t for t, _ in m.actions[s][a].dist if t not in seen]
            picks[s] = a
            yield from extend(picks, rest + sorted(set(new), reverse=True), seen | set(new))
            del picks[s]

    yield from extend({}, [m.init], {m.init})


def derandomize_tau(n, w):
    """Make the tau choices deterministic while keeping the violation.

    Tau states are processed in index order; at each one the two endpoint
    schedulers (tau surely / tau never, other actions rescaled) are evaluated
    and a violating one kept. Returns ``(scheduler, evaluations)``.
    """
    t, _ = evaluate(n, w)
    if not violates(t):
        raise PreconditionViolated("scheduler does not violate the global condition")
    m = n.base
    choice = dict(w.choice)
    evaluations = 0
    for u, tau in n.tau_states().items():
        p = choice[u].get(tau, 0)
        if p in (0, 1):
            continue
        v0 = {**choice, u: {tau: Fraction(1)}}
        v1 = {**choice, u: {a: q / (1 - p) for a, q in choice[u].items() if a != tau}}
        for cand in (v0, v1):
            sched = MrScheduler(m, cand)
            evaluations += 1
            if violates(evaluate(n, sched)[0]):
                choice = cand
                break
        else:
            raise AssertionError("neither tau endpoint keeps the violation")
    return MrScheduler(m, choice), evaluations


def quotient_scheduler(n, w):
    """Extend a normalized scheduler to the (unpruned) MEC quotient."""
    q = n.quotient
    qm = q.mdp
    choice = {}
    for s in range(qm.n):
        if not qm.actions[s]:
            continue
        b = n.base_of_quotient.get(s)
        if b is not None:
            choice[s] = w.choice[b]
        elif s in q.tau:
            choice[s] = {q.tau[s]: Fraction(1)}
        else:
            choice[s] = {0: Fraction(1)}
    return MrScheduler(qm, choice)


def lift_witness(n, w):
    """Two-mode scheduler on the original model behaving like ``w`` before the
    first cause state and minimizing the effect probability afterwards."""
    from .transforms import lift_scheduler
    pre = lift_scheduler(quotient_scheduler(n, w), n.quotient)
    m = n.original
    before = {s: pre.choice[i] for s, i in n.pre_index.items()
              if m.actions[s] and s not in n.original_cause}
    after = {s: {a: Fraction(1)} for s, a in n.min_picks.items()}
    return FiniteMemoryScheduler.two_mode(m, before, n.original_cause, after)


class CauseStats(NamedTuple):
    p_effect: Fraction  # Pr(reach Eff)
    p_cause: Fraction  # Pr(reach Cause)
    p_both: Fraction  # Pr(reach Cause and reach Eff)
    p_uncovered: Fraction  # Pr(reach Eff without passing Cause)
    first: dict  # c -> Pr(not Cause until c)
    first_effect: dict  # c -> Pr(not Cause until c, then Eff)


def cause_statistics(m, sched, cause, effs):
    """Probabilities of the cause/effect events under ``sched`` on ``m``."""
    nodes, succ = induced_chain(m, sched)
    cause, effs = set(cause), set(effs)
    r = chain_reach(succ, [i for i, (_, s) in enumerate(nodes) if s in effs])
    cut = [{} if s in cause else row for (_, s), row in zip(nodes, succ)]
    vis = chain_visits(cut, 0)
    first = {c: Fraction(0) for c in cause}
    first_eff = {c: Fraction(0) for c in cause}
    unc = Fraction(0)
    for i, (_, s) in enumerate(nodes):
        if s in cause:
            first[s] += vis[i]
            first_eff[s] += vis[i] * r[i]
        elif s in effs:
            unc += vis[i]
    return CauseStats(r[0], sum(first.values(), Fraction(0)), sum(first_eff.values(), Fraction(0)),
                      unc, first, first_eff)


def gpr_violated(st):
    return st.p_cause > 0 and st.p_both <= st.p_effect * st.p_cause


def spr_violated_at(st, c):
    return st.first[c] > 0 and st.first_effect[c] <= st.p_effect * st.first[c]
