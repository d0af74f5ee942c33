"""Brute-force reference implementations for differential testing.

Nothing here uses the analytic modules; only the data model, the induced
chain of a scheduler and the exact linear solver are shared. Everything is
exponential and meant for models of a handful of states.
"""
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product

from .linalg import solve
from .model import INF, Action, Mdp, MrScheduler, effect_set, induced_chain

ACCEPT, REJECT = "accept", "reject"


# --- path events ----------------------------------------------------------------

@dataclass(frozen=True)
class Eventually:
    """``<> target``"""
    target: frozenset

    def start(self):
        return 0

    def step(self, mem, s):
        return ACCEPT if s in self.target else mem


@dataclass(frozen=True)
class Until:
    """``(not avoid) U goal``"""
    avoid: frozenset
    goal: frozenset

    def start(self):
        return 0

    def step(self, mem, s):
        if s in self.goal:
            return ACCEPT
        return REJECT if s in self.avoid else mem


@dataclass(frozen=True)
class EventuallyThen:
    """``<> (first and <> then)``"""
    first: frozenset
    then: frozenset

    def start(self):
        return 0

    def step(self, mem, s):
        if mem == 0 and s in self.first:
            mem = 1
        return ACCEPT if mem == 1 and s in self.then else mem


@dataclass(frozen=True)
class Both:
    """``<> a and <> b``"""
    a: frozenset
    b: frozenset

    def start(self):
        return (False, False)

    def step(self, mem, s):
        mem = (mem[0] or s in self.a, mem[1] or s in self.b)
        return ACCEPT if all(mem) else mem


def _event_probability(nodes, succ, event):
    # product of the induced chain with the event's memory, then a linear solve
    start = event.step(event.start(), nodes[0][1])
    if start in (ACCEPT, REJECT):
        return Fraction(int(start == ACCEPT))
    keys = [(0, start)]
    pos = {keys[0]: 0}
    rows = []
    k = 0
    while k < len(keys):
        i, mem = keys[k]
        row = {}
        for j, p in succ[i].items():
            nm = event.step(mem, nodes[j][1])
            if nm in (ACCEPT, REJECT):
                row[nm] = row.get(nm, 0) + p
                continue
            key = (j, nm)
            if key not in pos:
                pos[key] = len(keys)
                keys.append(key)
            row[pos[key]] = row.get(pos[key], 0) + p
        rows.append(row)
        k += 1
    # keep only product states with a path to acceptance
    good = {i for i, row in enumerate(rows) if ACCEPT in row}
    changed = True
    while changed:
        changed = False
        for i, row in enumerate(rows):
            if i not in good and any(j in good for j in row if isinstance(j, int)):
                good.add(i)
                changed = True
    if 0 not in good:
        return Fraction(0)
    order = sorted(good)
    idx = {i: r for r, i in enumerate(order)}
    eqs, rhs = [], []
    for i in order:
        eq = {idx[i]: Fraction(1)}
        for j, p in rows[i].items():
            if isinstance(j, int) and j in idx:
                eq[idx[j]] = eq.get(idx[j], 0) - p
        eqs.append(eq)
        rhs.append(rows[i].get(ACCEPT, Fraction(0)))
    return solve(eqs, rhs)[idx[0]]


def oracle_chain_eval(m, sched, events):
    """Exact probabilities of ``events`` under ``sched`` (any scheduler type)."""
    nodes, succ = induced_chain(m, sched)
    return [_event_probability(nodes, succ, e) for e in events]


def oracle_md_enumerate(m):
    """All memoryless deterministic schedulers, lexicographic in action order."""
    states = [s for s in range(m.n) if m.actions[s]]
    for combo in product(*(range(len(m.actions[s])) for s in states)):
        yield MrScheduler.deterministic(m, dict(zip(states, combo)))


# --- helpers -----------------------------------------------------------------------

def _fs(xs):
    return frozenset(xs)


def _reach_avoiding(m, cause, c):
    seen, stack = {m.init}, [m.init]
    if m.init in cause:
        return m.init == c
    while stack:
        s = stack.pop()
        for act in m.actions[s]:
            for t, _ in act.dist:
                if t == c:
                    return True
                if t not in seen and t not in cause:
                    seen.add(t)
                    stack.append(t)
    return False


def oracle_minimal(m, cause):
    """Every cause state reachable without passing another one."""
    cause = set(cause)
    return all(_reach_avoiding(m, cause - {c}, c) for c in cause)


def _min_effect_from(m, c, effs):
    best = None
    for sched in oracle_md_enumerate(Mdp(m.names, c, m.actions, m.labels)):
        (p,) = oracle_chain_eval(sched.mdp, sched, [Eventually(_fs(effs))])
        best = p if best is None else min(best, p)
    return best


def oracle_reduced(m, cause, effs):
    """Cause states replaced by one action realising their minimal effect probability."""
    effs = set(effs)
    star = min(effs)
    names, labels = list(m.names), list(m.labels)
    noeff = len(names)
    names.append("__oracle_noeff")
    labels.append(frozenset())
    actions = [list(a) for a in m.actions] + [[]]
    w = {}
    for c in cause:
        w[c] = _min_effect_from(m, c, effs)
        actions[c] = [Action("gamma", ((star, w[c]), (noeff, 1 - w[c])))]
    return Mdp(names, m.init, actions, labels), w


def _cause_events(cause, effs):
    cause, effs = _fs(cause), _fs(effs)
    return [Eventually(cause), Eventually(effs), EventuallyThen(cause, effs), Until(cause, effs)]


# --- cause checks ----------------------------------------------------------------

def oracle_spr(m, cause, eff=None):
    """Strict condition by scheduler enumeration on the cause-reduced model."""
    effs = effect_set(m, eff)
    cause = set(m.ids(cause))
    if not oracle_minimal(m, cause):
        return False
    red, w = oracle_reduced(m, cause, effs)
    pts = []
    for sched in oracle_md_enumerate(red):
        firsts = oracle_chain_eval(red, sched, [Until(_fs(cause - {c}), _fs({c})) for c in sorted(cause)])
        (pe,) = oracle_chain_eval(red, sched, [Eventually(_fs(effs))])
        pts.append((dict(zip(sorted(cause), firsts)), pe))
    for c in cause:
        # some mixture reaching c with effect probability >= w_c refutes
        if any(f[c] > 0 and pe >= w[c] for f, pe in pts):
            return False
        if any(f[c] > 0 for f, _ in pts) and any(pe > w[c] for _, pe in pts):
            return False
    return True


def _grid_points(k, grid):
    for combo in product(range(grid + 1), repeat=k - 1):
        if sum(combo) <= grid:
            yield tuple(Fraction(x, grid) for x in combo) + (1 - Fraction(sum(combo), grid),)


def _grid_size(m, states, grid):
    total = 1
    for s in states:
        count = 1
        for i in range(1, len(m.actions[s])):
            count = count * (grid + i) // i
        total *= count
    return total


def _grid_schedulers(m, grid, limit):
    states = [s for s in range(m.n) if m.actions[s]]
    while grid > 1 and _grid_size(m, states, grid) > limit:
        grid //= 2
    return states, [list(_grid_points(len(m.actions[s]), grid)) for s in states]


def _float_chain(m, states, dists):
    import numpy as np
    # batch of transition matrices for a batch of MR schedulers
    b = len(dists)
    P = np.zeros((b, m.n, m.n))
    for si, s in enumerate(states):
        for a, act in enumerate(m.actions[s]):
            col = np.array([d[si][a] for d in dists], dtype=float)
            for t, p in act.dist:
                P[:, s, t] += col * float(p)
    return P


def _float_reach(P, targets, n):
    import numpy as np
    b = P.shape[0]
    tgt = np.zeros(n)
    tgt[list(targets)] = 1
    A = np.eye(n)[None].repeat(b, 0) - P
    idx = list(targets)
    A[:, idx, :] = 0
    A[:, idx, idx] = 1
    rhs = np.broadcast_to(tgt, (b, n)).copy()
    try:
        return np.linalg.solve(A, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return None


def oracle_gpr_refute(n, grid=8, limit=200_000, chunk=4096):
    """Grid search over MR schedulers of a normalized model.

    Every state's action distribution ranges over the simplex grid of
    resolution ``grid`` (coarsened when the product exceeds ``limit``).
    Candidates are prefiltered in floating point and confirmed exactly.
    """
    base = n.base
    cause = _fs(n.cause)
    effs = _fs((n.roles["eff_cov"], n.roles["eff_unc"]))
    states, choices = _grid_schedulers(base, grid, limit)
    batch = []

    def flush():
        import numpy as np
        if not batch:
            return None
        P = _float_chain(base, states, batch)
        rc = _float_reach(P, cause, base.n)
        re = _float_reach(P, effs, base.n)
        rcov = _float_reach(P, {n.roles["eff_cov"]}, base.n)
        if rc is None or re is None or rcov is None:
            order = range(len(batch))
        else:
            x, e, both = rc[:, base.init], re[:, base.init], rcov[:, base.init]
            order = np.nonzero((x > 1e-12) & (both - e * x <= 1e-9))[0]
        for i in order:
            sched = MrScheduler(base, {s: {a: p for a, p in enumerate(batch[i][si])}
                                       for si, s in enumerate(states)})
            pc, pe, pb, _ = oracle_chain_eval(base, sched, _cause_events(cause, effs))
            if pc > 0 and pb <= pe * pc:
                batch.clear()
                return sched
        batch.clear()
        return None

    for combo in product(*choices):
        batch.append(combo)
        if len(batch) >= chunk:
            hit = flush()
            if hit is not None:
                return hit
    return flush()


def oracle_gpr(m, cause, eff=None, grid=8, limit=200_000):
    """Global condition: exact for chains, grid-refutation based otherwise."""
    effs = effect_set(m, eff)
    cause = set(m.ids(cause))
    if not oracle_minimal(m, cause):
        return False
    if all(len(a) <= 1 for a in m.actions):
        sched = MrScheduler.deterministic(m, {})
        pc, pe, pb, _ = oracle_chain_eval(m, sched, _cause_events(cause, effs))
        return pb > pe * pc
    red, _ = oracle_reduced(m, cause, effs)
    states, choices = _grid_schedulers(red, grid, limit)
    for combo in product(*choices):
        sched = MrScheduler(red, {s: dict(enumerate(combo[i])) for i, s in enumerate(states)})
        pc, pe, pb, _ = oracle_chain_eval(red, sched, _cause_events(cause, effs))
        if pc > 0 and pb <= pe * pc:
            return False
    return True


# --- measures ----------------------------------------------------------------------

def oracle_quality(m, cause, eff=None):
    """Worst-case recall, coverage ratio, precision and f-score over MD schedulers
    of the cause-reduced model."""
    effs = effect_set(m, eff)
    cause = set(m.ids(cause))
    red, _ = oracle_reduced(m, cause, effs)
    rec, cov, prec, fs = [], [], [], []
    zero = False
    for sched in oracle_md_enumerate(red):
        pc, pe, tp, fn = oracle_chain_eval(red, sched, _cause_events(cause, effs))
        fp = pc - tp
        if pe > 0:
            rec.append(tp / (tp + fn))
            cov.append(INF if fn == 0 else tp / fn)
            if pc == 0:
                zero = True
        if pc > 0:
            prec.append(tp / (tp + fp))
            fs.append(2 * tp / (2 * tp + fp + fn))
    out = {"recall": min(rec) if rec else None,
           "covratio": min(cov, key=_key) if cov else None,
           "precision": min(prec) if prec else Fraction(1),
           "fscore": Fraction(0) if zero else (min(fs) if fs else None)}
    return out


def oracle_extremal_ratio(m, u, v, mode):
    """Extremal ``Pr(<>u) / Pr(<>v)`` over MD schedulers with ``Pr(<>v) > 0``.

    For ``max`` the value is ``INF`` if some scheduler reaches ``u`` but never
    ``v`` (restarting it forever accumulates unbounded ratio). ``None`` when
    no scheduler reaches ``v``.
    """
    u, v = _fs(m.ids(u)), _fs(m.ids(v))
    vals = []
    unbounded = False
    for sched in oracle_md_enumerate(m):
        pu, pv = oracle_chain_eval(m, sched, [Eventually(u), Eventually(v)])
        if pv > 0:
            vals.append(pu / pv)
        elif pu > 0:
            unbounded = True
    if mode == "max" and unbounded:
        return INF
    if not vals:
        return None
    return min(vals) if mode == "min" else max(vals)


def _key(x):
    return INF if x == INF else Fraction(x)


def oracle_optimal_cause(m, eff=None, kind="SPR", measure="fscore", grid=8):
    """Best cause over all minimal subsets, by the oracle checks and measures."""
    effs = effect_set(m, eff)
    pool = sorted((s for s in range(m.n) if s not in effs and s != m.init), key=lambda s: m.names[s])
    check = oracle_spr if kind.upper() == "SPR" else (lambda mm, c, e: oracle_gpr(mm, c, e, grid))
    best, best_val = None, None
    for size in range(1, len(pool) + 1):
        for combo in combinations(pool, size):
            if not oracle_minimal(m, combo) or not check(m, combo, effs):
                continue
            val = oracle_quality(m, combo, effs)[measure]
            if val is not None and (best_val is None or _key(val) > _key(best_val)):
                best, best_val = combo, val
    if best is None:
        return None
    return frozenset(m.names[s] for s in best), best_val
