"""Quality of a cause: recall, coverage ratio, precision and f-score.

Each measure is its value under the worst scheduler that reaches the cause.
On the normalized model the four role terminals classify runs as true
positives (``eff_cov``), false negatives (``eff_unc``), false positives
(``noeff_fp``) and true negatives, and every measure is a monotone function
of a ratio between terminal probabilities. Extremal ratios are expected
weights in a model that restarts from init on the terminals outside the
denominator set.
"""
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import NoProperScheduler, NotACause, UndefinedMeasure
from .gpr import check_gpr_cause
from .model import (
    INF, FiniteMemoryScheduler, MrScheduler, effect_set, reachable, validate_cause_candidate,
)
from .numerics import MAX, MIN, _attractor_layers, extremal_reach, ssp_expectation
from .spr import check_spr_cause
from .transforms import normalize, reset_ratio_mdp
from .witness import cause_statistics, lift_witness


@dataclass
class QualityReport:
    recall: Fraction
    covratio: object  # Fraction or INF
    precision: Fraction
    fscore: Fraction
    worst_recall_sched: FiniteMemoryScheduler = field(repr=False)
    worst_covratio_sched: FiniteMemoryScheduler = field(repr=False)
    worst_fscore_sched: FiniteMemoryScheduler = field(repr=False)
    worst_precision_sched: FiniteMemoryScheduler = field(repr=False)
    cause: frozenset = None

    def values(self):
        return {"recall": self.recall, "covratio": self.covratio,
                "precision": self.precision, "fscore": self.fscore}


def _ratio(n, u, v, mode):
    """Extremal ``Pr(reach u) / Pr(reach v)`` and an attaining MD scheduler on ``n.base``.

    ``None`` as value means no scheduler reaches ``v``.
    """
    b = n.base
    reset = reset_ratio_mdp(b, [n.roles[r] for r in u], [n.roles[r] for r in v])
    try:
        value, sched = ssp_expectation(reset, mode)
    except NoProperScheduler:
        return None, None
    if sched is None:
        return INF, None
    picks = {s: a for s, a in sched.picks().items() if b.actions[s]}
    return value, MrScheduler.deterministic(b, picks)


def _avoiding(n):
    """Choices of the largest sub-model that never enters a cause state."""
    b = n.base
    live = set(range(b.n)) - set(n.cause)
    while True:
        allowed = {s: tuple(a for a, act in enumerate(b.actions[s])
                            if all(t in live for t, _ in act.dist)) for s in live}
        keep = {s for s in live if not b.actions[s] or allowed[s]}
        if keep == live:
            return live, allowed
        live = keep


def fscore_zero_check(n):
    """A scheduler reaching an effect but never the cause, or None.

    Such a scheduler exists exactly when the f-score (and the recall) is 0.
    """
    b = n.base
    live, allowed = _avoiding(n)
    unc = n.roles["eff_unc"]
    if b.init not in live or unc not in reachable(b, allowed=allowed):
        return None
    states = [s for s in live if b.actions[s]]
    picks = _attractor_layers(b, {unc}, states, allowed)
    for s in states:
        picks.setdefault(s, allowed[s][0])
    return MrScheduler.deterministic(b, picks)


def _towards_cause(n):
    b = n.base
    states = [s for s in range(b.n) if b.actions[s]]
    allacts = {s: tuple(range(len(b.actions[s]))) for s in states}
    return MrScheduler.deterministic(b, _attractor_layers(b, set(n.cause), states, allacts))


def _measures(st):
    tp = st.p_both
    fn = st.p_uncovered
    fp = st.p_cause - st.p_both
    return tp, fn, fp


def _require_cause(m, cause, effs, kind):
    if kind in ("any", "spr"):
        v = check_spr_cause(m, cause, effs)
        if v.is_cause or kind == "spr":
            return v
    v = check_gpr_cause(m, cause, effs)
    return v


def quality_report(m, cause, eff=None, kind="any", waive=False):
    """Worst-case quality measures of ``cause`` with their schedulers.

    Unless ``waive`` is set the cause is verified first: ``kind="spr"`` needs
    the strict condition, ``"gpr"`` the global one and ``"any"`` either.
    Minimality is required regardless.
    """
    cause = m.ids(cause)
    effs = effect_set(m, eff)
    validate_cause_candidate(m, cause, effs)
    if not waive:
        v = _require_cause(m, cause, effs, kind)
        if not v.is_cause:
            raise NotACause(f"not a {kind} cause ({v.verdict}, {v.certification})")
    vmax, _ = extremal_reach(m, effs, MAX)
    if vmax[m.init] == 0:
        raise UndefinedMeasure("no scheduler reaches an effect state")
    n = normalize(m, cause, effs)

    def lift(w):
        return lift_witness(n, w)

    cov, cov_sched = _ratio(n, ["eff_cov"], ["eff_unc"], MIN)
    if cov is None:
        cov, cov_sched = INF, _towards_cause(n)
    recall = Fraction(1) if cov == INF else cov / (1 + cov)
    zero = fscore_zero_check(n)
    if zero is not None:
        fscore, f_sched = Fraction(0), zero
    else:
        x, f_sched = _ratio(n, ["noeff_fp", "eff_unc"], ["eff_cov"], MAX)
        if x == INF or x is None:
            fscore = Fraction(0)
            f_sched = f_sched or _towards_cause(n)
        else:
            fscore = 2 / (x + 2)
    if f_sched is None:
        f_sched = _towards_cause(n)
    r, p_sched = _ratio(n, ["eff_cov"], ["noeff_fp"], MIN)
    if r is None:
        precision, p_sched = Fraction(1), _towards_cause(n)
    else:
        precision = r / (1 + r)
    cov_fm = lift(cov_sched)
    return QualityReport(recall, cov, precision, fscore, cov_fm, cov_fm, lift(f_sched), lift(p_sched),
                         frozenset(m.names[c] for c in cause))


def scheduler_measures(m, sched, cause, eff=None):
    """tp, fn, fp and the four measures under one scheduler of ``m``.

    Measures that are undefined under this scheduler are ``None``.
    """
    cause = m.ids(cause)
    effs = effect_set(m, eff)
    st = cause_statistics(m, sched, cause, effs)
    tp, fn, fp = _measures(st)
    out = {"tp": tp, "fn": fn, "fp": fp, "recall": None, "covratio": None,
           "precision": None, "fscore": None}
    if tp + fn:
        out["recall"] = tp / (tp + fn)
    if st.p_cause:
        out["covratio"] = INF if not fn else tp / fn
        out["precision"] = tp / (tp + fp)
    if 2 * tp + fp + fn:
        out["fscore"] = 2 * tp / (2 * tp + fp + fn)
    return out
