import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from corpus import cause_candidates, effect_model
from prcause.errors import CauseError, MInvalid, NotACause, UndefinedMeasure
from prcause.model import INF, Mdp
from prcause.oracle import oracle_quality
from prcause.quality import fscore_zero_check, quality_report, scheduler_measures
from prcause.spr import check_spr_cause
from prcause.transforms import normalize


def test_two_causes_two_state_cause(chain2):
    r = quality_report(chain2, {"c1", "c2"})
    assert (r.covratio, r.recall, r.precision, r.fscore) == (5, Fraction(5, 6), Fraction(5, 8), Fraction(5, 7))
    assert r.cause == {"c1", "c2"}


def test_two_causes_single_cause(chain2):
    r = quality_report(chain2, {"c1"}, kind="spr")
    assert (r.covratio, r.recall, r.precision, r.fscore) == (2, Fraction(2, 3), 1, Fraction(4, 5))


def test_canonical_suboptimal_chain(subopt):
    r1 = quality_report(subopt, {"s1"})
    assert (r1.precision, r1.recall, r1.fscore) == (Fraction(3, 4), Fraction(3, 5), Fraction(2, 3))
    r2 = quality_report(subopt, {"s2"})
    assert (r2.precision, r2.recall, r2.fscore) == (1, Fraction(3, 5), Fraction(3, 4))


def test_cause_check_and_waiver(chain2, mixed):
    with pytest.raises(NotACause):
        quality_report(chain2, {"c2"})
    with pytest.raises(NotACause):
        quality_report(chain2, {"c1", "c2"}, kind="spr")
    r = quality_report(mixed, {"c"}, waive=True)
    assert r.recall == 0 and r.fscore == 0 and r.covratio == 0


def test_minimality_not_waived(subopt):
    with pytest.raises(MInvalid):
        quality_report(subopt, {"s1", "s2"}, waive=True)


def test_unreachable_effect():
    m = Mdp.build(["init", "c", "eff", "z"], "init", {"init": {"a": {"c": 1}}, "c": {"a": {"z": 1}}},
                  {"eff": ["effect"]})
    with pytest.raises(UndefinedMeasure):
        quality_report(m, {"c"}, waive=True)


def test_infinite_coverage_ratio():
    m = Mdp.build(["init", "c", "eff", "z"], "init",
                  {"init": {"a": {"c": "1/2", "z": "1/2"}}, "c": {"a": {"eff": "1/2", "z": "1/2"}}},
                  {"eff": ["effect"]})
    r = quality_report(m, {"c"})
    assert r.covratio == INF and r.recall == 1 and r.precision == Fraction(1, 2)


def test_fscore_zero_check(chain2):
    assert fscore_zero_check(normalize(chain2, {"c1", "c2"})) is None
    m = Mdp.build(["init", "c", "eff", "z"], "init",
                  {"init": {"a": {"c": 1}, "b": {"eff": 1}}, "c": {"a": {"eff": "1/2", "z": "1/2"}}},
                  {"eff": ["effect"]})
    n = normalize(m, {"c"})
    w = fscore_zero_check(n)
    assert w is not None and w.choice[n.base.init] == {1: 1}


def test_worst_schedulers_attain_the_values(chain2, mixed):
    for m, cause in ((chain2, {"c1", "c2"}), (mixed, {"c"})):
        r = quality_report(m, cause, waive=True)
        assert scheduler_measures(m, r.worst_recall_sched, cause)["recall"] == r.recall
        assert scheduler_measures(m, r.worst_precision_sched, cause)["precision"] == r.precision
        assert scheduler_measures(m, r.worst_fscore_sched, cause)["fscore"] == r.fscore


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_matches_oracle_and_identities(seed):
    m = effect_model(seed, max_states=6)
    for cause in cause_candidates(m, random.Random(seed)):
        try:
            if not check_spr_cause(m, cause).is_cause:
                continue
        except CauseError:
            continue
        r = quality_report(m, cause)
        assert r.values() == oracle_quality(m, cause)
        assert r.recall == (1 if r.covratio == INF else r.covratio / (1 + r.covratio))
        assert (r.fscore == 0) == (r.recall == 0)
