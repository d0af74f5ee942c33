"""Exact optimization kernels: extremal reachability, stochastic shortest
paths and their two-player game variant.

All kernels use policy iteration with exact linear solves. Among equally good
actions the one with the lowest index wins.
"""
from fractions import Fraction

from .errors import ArenaHasEC, InputError, NoProperScheduler
from .linalg import solve
from .model import INF, MrScheduler, can_reach, chain_reach, end_components, reachable

MIN, MAX = "min", "max"


def _check_mode(mode):
    if mode not in (MIN, MAX):
        raise InputError(f"mode must be 'min' or 'max', got {mode!r}")


def _better(mode, a, b):
    return a < b if mode == MIN else a > b


def _best(mode, values):
    return min(values) if mode == MIN else max(values)


def _q(m, s, a, v):
    return sum(p * v[t] for t, p in m.actions[s][a].dist)


def _attractor_layers(m, goal, states, allowed):
    """MD choice moving towards ``goal`` with positive probability.

    Works in rounds; a state picks its lowest-index ``allowed`` action that
    enters a state finalised in an earlier round. States of ``states`` that
    cannot reach ``goal`` get no pick.
    """
    done = set(goal)
    picks = {}
    while True:
        layer = {}
        for s in sorted(states):
            if s in done:
                continue
            for a in allowed[s]:
                if any(t in done for t, _ in m.actions[s][a].dist):
                    layer[s] = a
                    break
        if not layer:
            return picks
        picks.update(layer)
        done |= set(layer)


def extremal_reach(m, target, mode):
    """Optimal reachability values (list by state index) and an optimal MD scheduler."""
    _check_mode(mode)
    target = set(target)
    n = m.n
    allacts = {s: tuple(range(len(m.actions[s]))) for s in range(n)}
    v = [Fraction(0)] * n
    for t in target:
        v[t] = Fraction(1)
    picks = {}
    if mode == MIN:
        # states that can avoid the target forever
        zero = set(range(n)) - target
        while True:
            keep = {s for s in zero if not m.actions[s] or any(
                all(t in zero for t, _ in m.actions[s][a].dist) for a in allacts[s])}
            if keep == zero:
                break
            zero = keep
        for s in zero:
            if m.actions[s]:
                picks[s] = next(a for a in allacts[s] if all(t in zero for t, _ in m.actions[s][a].dist))
        rest = sorted(set(range(n)) - zero - target)
        # no end component inside ``rest``, so every policy leaves it
        policy = {s: 0 for s in rest}
        while True:
            v = _evaluate_reach(m, policy, target, zero | {t for t in range(n) if not m.actions[t]} - target, n)
            changed = False
            for s in rest:
                qs = [_q(m, s, a, v) for a in allacts[s]]
                best = _best(mode, qs)
                if _better(mode, best, qs[policy[s]]):
                    policy[s] = qs.index(best)
                    changed = True
            if not changed:
                break
        for s in rest:
            qs = [_q(m, s, a, v) for a in allacts[s]]
            picks[s] = qs.index(min(qs))
    else:
        good = can_reach(m, target)
        zero = set(range(n)) - good
        for s in zero:
            if m.actions[s]:
                picks[s] = 0
        rest = sorted(good - target)
        policy = _attractor_layers(m, target, rest, allacts)
        while True:
            v = _evaluate_reach(m, policy, target, zero, n)
            changed = False
            for s in rest:
                qs = [_q(m, s, a, v) for a in allacts[s]]
                best = max(qs)
                if best > qs[policy[s]]:
                    policy[s] = qs.index(best)
                    changed = True
            if not changed:
                break
        # lowest-index optimal actions that still make progress to the target
        opt = {s: tuple(a for a in allacts[s] if _q(m, s, a, v) == v[s]) for s in rest}
        picks.update(_attractor_layers(m, target, rest, opt))
    for t in target:
        picks.pop(t, None)
    return v, MrScheduler.deterministic(m, picks)


def _evaluate_reach(m, policy, target, sinks, n):
    succ = []
    for s in range(n):
        if s in target or s in sinks or s not in policy:
            succ.append({})
        else:
            succ.append(dict(m.actions[s][policy[s]].dist))
    return chain_reach(succ, target)


def reach_extremal(m, target, mode):
    """Pr^min / Pr^max of eventually reaching ``target`` from every state.

    Returns ``({state id: value}, scheduler)``; the scheduler is memoryless
    deterministic and optimal from every state.
    """
    target = m.ids(target)
    if not target:
        raise InputError("target set is empty")
    v, sched = extremal_reach(m, target, mode)
    return {m.names[s]: v[s] for s in range(m.n)}, sched


# --- stochastic shortest paths --------------------------------------------------

class WeightedMdp:
    """An MDP with state weights accumulated on every visit before the target."""

    __slots__ = ("base", "weight", "target")

    def __init__(self, base, weight, target):
        target = base.ids(target)
        weight = {base.state(s): Fraction(w) for s, w in weight.items() if w}
        for t in target:
            if base.actions[t]:
                raise InputError(f"target state {base.names[t]!r} is not terminal")
            if weight.get(t):
                raise InputError(f"target state {base.names[t]!r} carries weight")
        self.base = base
        self.weight = weight
        self.target = target

    def w(self, s):
        return self.weight.get(s, 0)


def _almost_sure(m, target):
    """States from which some scheduler reaches ``target`` with probability 1."""
    live = set(range(m.n))
    while True:
        allowed = {s: tuple(a for a in range(len(m.actions[s]))
                            if all(t in live for t, _ in m.actions[s][a].dist))
                   for s in live}
        nxt = can_reach(m, target, allowed) & live
        if nxt == live:
            return live, allowed
        live = nxt


def ssp_solve(w, mode):
    """Optimal expected accumulated weight from init.

    Returns ``(value, picks, values)`` where ``picks`` is an optimal MD choice
    on the states reachable under proper schedulers and ``values`` the optimal
    values there (``INF`` with ``picks = None`` for unbounded maxima).
    """
    _check_mode(mode)
    m = w.base
    target = set(w.target)
    live, allowed = _almost_sure(m, target)
    if m.init not in live:
        raise NoProperScheduler("no scheduler reaches the target almost surely")
    region = reachable(m, allowed=allowed)
    inner = {s: allowed[s] for s in region if s not in target}
    negative = any(w.w(s) < 0 for s in region)
    ecs = end_components(m, inner)
    if negative and ecs:
        raise InputError("negative weights require a model without end components")
    if mode == MAX and any(w.w(s) > 0 for states, _ in ecs for s in states):
        return INF, None, None
    zero_inner = {s: tuple(a for a in acts if all(w.w(t) == 0 and t not in target
                                                   for t, _ in m.actions[s][a].dist))
                  for s, acts in inner.items() if w.w(s) == 0}
    zero_ecs = end_components(m, zero_inner)
    # collapsed model: node per zero-weight end component, singleton otherwise
    node_of = {}
    members = []
    internal = []
    for states, acts in zero_ecs:
        for s in states:
            node_of[s] = len(members)
        members.append(sorted(states))
        internal.append(acts)
    for s in sorted(region):
        if s not in node_of:
            node_of[s] = len(members)
            members.append([s])
            internal.append({})
    k = len(members)
    tnodes = {node_of[t] for t in target}
    # actions of a node: (state, action) pairs leaving the node
    nacts = []
    for i, group in enumerate(members):
        acts = []
        if i not in tnodes:
            for s in group:
                for a in inner[s]:
                    if a in internal[i].get(s, ()):
                        continue
                    dist = {}
                    for t, p in m.actions[s][a].dist:
                        dist[node_of[t]] = dist.get(node_of[t], 0) + p
                    acts.append(((s, a), dist))
        nacts.append(acts)
    weight = [w.w(group[0]) if len(group) == 1 else Fraction(0) for group in members]

    def q(i, j, v):
        return weight[i] + sum(p * v[t] for t, p in nacts[i][j][1].items())

    # initial proper policy: attractor towards the target nodes
    done = set(tnodes)
    policy = {}
    while True:
        layer = {}
        for i in range(k):
            if i in done:
                continue
            for j, (_, dist) in enumerate(nacts[i]):
                if any(t in done for t in dist):
                    layer[i] = j
                    break
        if not layer:
            break
        policy.update(layer)
        done |= set(layer)
    if len(done) != k:
        raise NoProperScheduler("no scheduler reaches the target almost surely")
    order = [i for i in range(k) if i not in tnodes]
    pos = {i: r for r, i in enumerate(order)}
    while True:
        rows, rhs = [], []
        for i in order:
            row = {pos[i]: Fraction(1)}
            for t, p in nacts[i][policy[i]][1].items():
                if t in pos:
                    row[pos[t]] = row.get(pos[t], 0) - p
            rows.append(row)
            rhs.append(weight[i])
        sol = solve(rows, rhs) if order else []
        v = [Fraction(0)] * k
        for i, r in pos.items():
            v[i] = sol[r]
        changed = False
        for i in order:
            qs = [q(i, j, v) for j in range(len(nacts[i]))]
            best = _best(mode, qs)
            if _better(mode, best, qs[policy[i]]):
                policy[i] = qs.index(best)
                changed = True
        if not changed:
            break
    for i in order:
        qs = [q(i, j, v) for j in range(len(nacts[i]))]
        policy[i] = qs.index(_best(mode, qs))
    picks = {}
    for i in order:
        (u, a), _ = nacts[i][policy[i]]
        picks[u] = a
        if len(members[i]) > 1:
            acts = internal[i]
            picks.update(_attractor_layers(m, {u}, set(members[i]), acts))
    values = {s: v[node_of[s]] for s in region}
    return v[node_of[m.init]], picks, values


def ssp_expectation(w, mode):
    """Optimal expected weight until the target over almost-surely-terminating schedulers.

    Returns ``(value, scheduler)``. For ``mode="max"`` the value is ``INF``
    (and the scheduler ``None``) when an end component with positive weight
    is reachable.
    """
    value, picks, _ = ssp_solve(w, mode)
    if picks is None:
        return INF, None
    return value, MrScheduler.deterministic(w.base, picks)


# --- games ---------------------------------------------------------------------

PLAYER0, PLAYER1 = 0, 1


class GameArena:
    """A weighted MDP whose non-terminal states are split between two players.

    Player 0 maximizes and Player 1 minimizes the expected accumulated weight.
    """

    __slots__ = ("base", "owner")

    def __init__(self, base, owner):
        m = base.base
        self.base = base
        self.owner = {s: owner.get(s, PLAYER1) for s in range(m.n) if m.actions[s]}


def ssp_game_value(g):
    """Exact value and optimal MD strategies of an end-component-free SSP game.

    Hoffman-Karp strategy iteration over Player 0 with an exact one-player
    solve as inner step. Returns ``(value, (player0 picks, player1 picks))``
    with picks mapping states to action indices.
    """
    w = g.base
    m = w.base
    if end_components(m):
        raise ArenaHasEC("the game arena has an end component")
    p0 = sorted(s for s, o in g.owner.items() if o == PLAYER0)
    zeta = {s: 0 for s in p0}
    memo = {}
    while True:
        key = tuple(zeta[s] for s in p0)
        if key not in memo:
            memo[key] = _respond(w, zeta)
        v, sigma = memo[key]
        changed = False
        for s in p0:
            qs = [w.w(s) + _q(m, s, a, v) for a in range(len(m.actions[s]))]
            best = max(qs)
            if best > qs[zeta[s]]:
                zeta[s] = qs.index(best)
                changed = True
        if not changed:
            return v[m.init], (dict(zeta), sigma)


def _respond(w, zeta, mode=MIN):
    """Values (all states) and optimal picks for the other player, given fixed choices."""
    m = w.base
    n = m.n
    fixed = dict(zeta)
    free = [s for s in range(n) if m.actions[s] and s not in fixed]
    policy = {s: 0 for s in free}
    while True:
        full = {**fixed, **policy}
        v = _evaluate_weight(w, full)
        changed = False
        for s in free:
            qs = [w.w(s) + _q(m, s, a, v) for a in range(len(m.actions[s]))]
            best = _best(mode, qs)
            if _better(mode, best, qs[policy[s]]):
                policy[s] = qs.index(best)
                changed = True
        if not changed:
            break
    for s in free:
        qs = [w.w(s) + _q(m, s, a, v) for a in range(len(m.actions[s]))]
        policy[s] = qs.index(_best(mode, qs))
    return v, policy


def _evaluate_weight(w, picks):
    # expected accumulated weight of a terminating MD policy, every state
    m = w.base
    order = [s for s in range(m.n) if m.actions[s]]
    pos = {s: i for i, s in enumerate(order)}
    rows, rhs = [], []
    for s in order:
        row = {pos[s]: Fraction(1)}
        for t, p in m.actions[s][picks[s]].dist:
            if t in pos:
                row[pos[t]] = row.get(pos[t], 0) - p
        rows.append(row)
        rhs.append(Fraction(w.w(s)))
    sol = solve(rows, rhs) if order else []
    v = [Fraction(0)] * m.n
    for s, i in pos.items():
        v[s] = sol[i]
    return v


def best_response(g, fixed, player):
    """Value when ``player``'s opponent plays ``fixed`` and ``player`` answers optimally."""
    w = g.base
    mode = MAX if player == PLAYER0 else MIN
    v, picks = _respond(w, fixed, mode)
    return v[w.base.init], picks
