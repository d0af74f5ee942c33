"""Hypothesis properties over the seeded random-model corpus."""
import random
import shutil
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpus import cause_candidates, effect_model, random_model
from prcause.errors import CauseError
from prcause.gpr import build_frequency_system, check_gpr_cause
from prcause.model import (
    INF, MrScheduler, can_reach, effect_set, end_components, frequencies, mc_reach_probability,
    parse_model, reachable, serialize_model,
)
from prcause.numerics import (
    MAX, MIN, PLAYER0, PLAYER1, GameArena, WeightedMdp, best_response, extremal_reach,
    ssp_expectation, ssp_game_value,
)
from prcause.optimal import _fscore_game, fscore_optimal_cause_mc, optimal_gpr
from prcause.oracle import oracle_gpr, oracle_gpr_refute, oracle_spr
from prcause.quality import quality_report, scheduler_measures
from prcause.spr import _spr_states, canonical_spr_cause, check_spr_cause, singleton_spr_states
from prcause.transforms import check_normalized, normalize, reset_ratio_mdp
from prcause.witness import cause_statistics, evaluate, lift_witness

seeds = st.integers(0, 10 ** 6)
slow = settings(max_examples=40, deadline=None)


def verified_causes(m, seed):
    for cause in cause_candidates(m, random.Random(seed)):
        try:
            normalize(m, cause)
        except CauseError:
            continue
        yield cause


# --- model -----------------------------------------------------------------------

@slow
@given(seeds)
def test_serialization_round_trip(seed):
    m = random_model(seed)
    assert parse_model(serialize_model(m)) == m


@slow
@given(seeds)
def test_every_state_reachable(seed):
    m = random_model(seed)
    assert reachable(m) == set(range(m.n))


@slow
@given(seeds)
def test_chain_reachability_matches_power_iteration(seed):
    m = effect_model(seed, chain=True, max_states=20)
    effs = effect_set(m)
    P = np.zeros((m.n, m.n))
    for s in range(m.n):
        for t, p in (m.actions[s][0].dist if m.actions[s] else ()):
            P[s, t] = float(p)
    x = np.zeros(m.n)
    hit = np.zeros(m.n)
    hit[list(effs)] = 1
    for _ in range(20000):
        x = np.where(hit == 1, 1.0, P @ x)
    assert abs(float(mc_reach_probability(m, m.init, effs)) - x[m.init]) < 1e-12


# --- numerics --------------------------------------------------------------------

@slow
@given(seeds, st.sampled_from([MIN, MAX]))
def test_reach_values_are_fixed_points(seed, mode):
    m = effect_model(seed)
    effs = effect_set(m)
    v, _ = extremal_reach(m, effs, mode)
    pick = min if mode == MIN else max
    for s in range(m.n):
        if s in effs:
            assert v[s] == 1
        elif m.actions[s]:
            assert v[s] == pick(sum(p * v[t] for t, p in act.dist) for act in m.actions[s])
        else:
            assert v[s] == 0


@slow
@given(seeds, st.sampled_from([MIN, MAX]))
def test_reach_monotone_in_target(seed, mode):
    m = effect_model(seed)
    effs = effect_set(m)
    more = set(effs) | {s for s in range(m.n) if s % 3 == 1}
    small, _ = extremal_reach(m, effs, mode)
    big, _ = extremal_reach(m, more, mode)
    assert all(a <= b for a, b in zip(small, big))


@slow
@given(seeds)
def test_ssp_min_below_max(seed):
    m = random_model(seed, acyclic=True)
    terms = sorted(s for s in range(m.n) if not m.actions[s])
    if len(terms) < 2:
        return
    w = reset_ratio_mdp(m, terms[:1], terms[1:])
    lo, _ = ssp_expectation(w, MIN)
    hi, _ = ssp_expectation(w, MAX)
    assert hi == INF or lo <= hi


@slow
@given(seeds)
def test_game_value_is_saddle_point(seed):
    rng = random.Random(seed)
    m = random_model(seed, acyclic=True)
    owner = {s: rng.choice([PLAYER0, PLAYER1]) for s in range(m.n) if m.actions[s]}
    weight = {s: Fraction(rng.randint(0, 3)) for s in range(m.n) if m.actions[s]}
    g = GameArena(WeightedMdp(m, weight, [s for s in range(m.n) if not m.actions[s]]), owner)
    value, (zeta, sigma) = ssp_game_value(g)
    assert best_response(g, zeta, PLAYER1)[0] == value
    assert best_response(g, sigma, PLAYER0)[0] == value


# --- transforms ------------------------------------------------------------------

@slow
@given(seeds)
def test_normal_form_invariants(seed):
    m = effect_model(seed)
    for cause in verified_causes(m, seed):
        n = normalize(m, cause)
        check_normalized(n)
        assert not end_components(n.base)
        assert all(not n.base.actions[r] for r in n.roles.values())
        terms = {s for s in range(n.base.n) if not n.base.actions[s]}
        assert can_reach(n.base, terms) >= set(range(n.base.n))


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_normalize_preserves_oracle_verdicts(seed):
    m = effect_model(seed, max_states=6)
    for cause in verified_causes(m, seed):
        n = normalize(m, cause)
        assert oracle_spr(m, cause) == oracle_spr(n.base, n.cause, n.effect)
        assert oracle_gpr(m, cause, grid=4) == oracle_gpr(n.base, n.cause, n.effect, grid=4)


@slow
@given(seeds)
def test_normalize_preserves_chain_quality(seed):
    m = effect_model(seed, chain=True)
    for cause in verified_causes(m, seed):
        n = normalize(m, cause)
        assert quality_report(m, cause, waive=True).values() == \
            quality_report(n.base, n.cause, n.effect, waive=True).values()


# --- spr -------------------------------------------------------------------------

@slow
@given(seeds)
def test_spr_witnesses_are_sound(seed):
    m = effect_model(seed)
    for cause in verified_causes(m, seed):
        v = check_spr_cause(m, cause)
        if v.verdict != "NotCause":
            continue
        c = m.state(v.details["state"])
        st_ = cause_statistics(m, v.witness[1], m.ids(cause), effect_set(m))
        assert st_.first[c] > 0
        assert st_.first_effect[c] / st_.first[c] <= st_.p_effect


@slow
@given(seeds)
def test_spr_implies_gpr(seed):
    m = effect_model(seed)
    for c in _spr_states(m, effect_set(m)):
        assert check_gpr_cause(m, {c}).is_cause
    for cause in verified_causes(m, seed):
        if check_spr_cause(m, cause).is_cause:
            assert check_gpr_cause(m, cause).verdict != "NotCause"


def _sample_path(m, rng, length=40):
    path = [m.init]
    while m.actions[path[-1]] and len(path) < length:
        act = rng.choice(m.actions[path[-1]])
        path.append(rng.choice([t for t, _ in act.dist]))
    return path


def _until(path, avoid, goal):
    for s in path:
        if s in goal:
            return True
        if s in avoid:
            return False
    return False


@slow
@given(seeds)
def test_canonical_cause_dominates_pathwise(seed):
    m = effect_model(seed)
    can = canonical_spr_cause(m)
    if can is None:
        return
    can = m.ids(can)
    effs = effect_set(m)
    causes = [c for c in verified_causes(m, seed) if check_spr_cause(m, c).is_cause]
    rng = random.Random(seed)
    for _ in range(30):
        path = _sample_path(m, rng)
        for c in causes:
            if _until(path, can, effs):
                assert _until(path, m.ids(c), effs)


# --- gpr -------------------------------------------------------------------------

@slow
@given(seeds, st.integers(1, 4))
def test_frequencies_satisfy_balance(seed, k):
    m = effect_model(seed)
    for cause in verified_causes(m, seed):
        n = normalize(m, cause)
        fs = build_frequency_system(n)
        choice = {s: {a: Fraction(1 + (a * k + s) % 3) for a in range(len(acts))}
                  for s, acts in enumerate(n.base.actions) if acts}
        choice = {s: {a: p / sum(d.values()) for a, p in d.items()} for s, d in choice.items()}
        sched = MrScheduler(n.base, choice)
        _, pairs = frequencies(n.base, sched)
        assert fs.satisfies_linear([pairs[v] for v in fs.variables])


@slow
@given(seeds)
def test_lifted_witness_reproduces_values(seed):
    m = effect_model(seed)
    effs = effect_set(m)
    for cause in verified_causes(m, seed):
        v = check_gpr_cause(m, cause)
        if v.verdict != "NotCause" or "stage" not in v.details:
            continue
        n = v.normalized
        w, fm = v.witness
        t, _ = evaluate(n, w)
        st_ = cause_statistics(m, fm, m.ids(cause), effs)
        assert st_.p_cause == t.cause
        assert st_.p_uncovered == t.uncovered
        assert fm.to_json() == lift_witness(n, w).to_json()


@slow
@given(seeds)
def test_oracle_refutation_excludes_cause(seed):
    m = effect_model(seed, max_states=6)
    for cause in verified_causes(m, seed):
        n = normalize(m, cause)
        if oracle_gpr_refute(n, grid=4) is not None:
            assert check_gpr_cause(m, cause).verdict == "NotCause"


@pytest.mark.skipif(shutil.which("z3") is None, reason="z3 not installed")
@settings(max_examples=12, deadline=None)
@given(seeds)
def test_solver_results_are_decisive(seed):
    m = effect_model(seed, max_states=5)
    for cause in verified_causes(m, seed):
        n = normalize(m, cause)
        v = check_gpr_cause(m, cause, backend="smt_export", smt_solver="z3", smt_timeout=20)
        assert v.verdict != "Unknown" or v.details.get("solver") not in ("sat", "unsat")
        if oracle_gpr_refute(n, grid=4) is not None:
            assert v.verdict == "NotCause"


# --- quality ---------------------------------------------------------------------

@slow
@given(seeds)
def test_quality_bounds_and_certificates(seed):
    m = effect_model(seed)
    effs = effect_set(m)
    for cause in verified_causes(m, seed):
        if not check_spr_cause(m, cause).is_cause:
            continue
        r = quality_report(m, cause)
        assert 0 <= r.fscore <= 1
        if r.precision + r.recall:
            assert r.fscore <= 2 * r.precision * r.recall / (r.precision + r.recall)
        if m.is_markov_chain() and r.precision + r.recall:
            assert r.fscore == 2 * r.precision * r.recall / (r.precision + r.recall)
        assert scheduler_measures(m, r.worst_fscore_sched, cause, effs)["fscore"] == r.fscore
        assert scheduler_measures(m, r.worst_precision_sched, cause, effs)["precision"] == r.precision
        if r.recall < 1:
            assert scheduler_measures(m, r.worst_recall_sched, cause, effs)["recall"] == r.recall


# --- optimal ---------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(["recall", "covratio", "fscore"]))
def test_gpr_optimum_dominates_audit(seed, measure):
    m = effect_model(seed, max_states=6)
    r = optimal_gpr(m, measure=measure)
    if r.status != "found":
        return
    key = (lambda x: INF if x == INF else Fraction(x))
    for _, verdict, val in r.audit:
        if verdict == "Cause" and val is not None:
            assert key(val) <= key(r.value)


@slow
@given(seeds)
def test_chain_optimum_is_spr_cause(seed):
    m = effect_model(seed, chain=True)
    if not singleton_spr_states(m):
        return
    cause, _ = fscore_optimal_cause_mc(m)
    assert check_spr_cause(m, cause).is_cause


@slow
@given(seeds, st.integers(1, 9))
def test_threshold_arena_is_end_component_free(seed, k):
    m = effect_model(seed)
    effs = effect_set(m)
    cands = _spr_states(m, effs)
    if not cands:
        return
    arena, _ = _fscore_game(m, effs, cands, Fraction(k, 10))
    assert not end_components(arena.base.base)
