"""Model surgeries used by the cause analyses.

* ``build_mcause`` replaces the behaviour of cause states by one action that
  reaches the effect with the minimal effect probability.
* ``mec_quotient`` collapses maximal end components; ``normalize`` combines
  both and merges the terminal states into four roles.
* ``reset_ratio_mdp`` turns ratio objectives into expected-weight objectives.
* ``lift_scheduler`` carries a quotient scheduler back to the original MDP.
"""
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import AlphaOnlyAction, InputError, MInvalid, OverlapError, TauFractional
from .model import (
    EFFECT, Action, Mdp, MrScheduler, chain_visits, condition_m_violations, effect_set, end_components,
    prune_unreachable,
)
from .numerics import MIN, WeightedMdp, _attractor_layers, extremal_reach

ROLES = ("eff_cov", "eff_unc", "noeff_fp", "noeff_tn")


def fresh_name(taken, base):
    name = base
    k = 1
    while name in taken:
        name = f"{base}_{k}"
        k += 1
    return name


def _fresh_action(names, base):
    return fresh_name(set(names), base)


def build_mcause(m, cause, eff=None):
    """The model where every cause state only has an action ``gamma`` that
    moves to an effect state with its minimal effect probability and to a
    non-effect terminal otherwise."""
    cause = m.ids(cause)
    effs = effect_set(m, eff)
    if cause & effs:
        raise OverlapError("cause and effect overlap")
    if not cause:
        return m
    mcause, _ = _mcause(m, cause, effs)
    return mcause


def _mcause(m, cause, effs):
    values, _ = extremal_reach(m, effs, MIN)
    names = list(m.names)
    labels = list(m.labels)
    star = min(effs)
    noeff = next((t for t in range(m.n) if not m.actions[t] and t not in effs and t not in cause), None)
    if noeff is None:
        noeff = len(names)
        names.append(fresh_name(set(names), "noeff"))
        labels.append(frozenset())
    actions = [list(m.actions[s]) for s in range(m.n)] + [[] for _ in range(len(names) - m.n)]
    for c in cause:
        w = values[c]
        actions[c] = [Action("gamma", ((star, w), (noeff, 1 - w)))]
    return Mdp(names, m.init, actions, labels), {c: values[c] for c in cause}


@dataclass(frozen=True)
class MecDecomposition:
    mecs: tuple  # ((frozenset of states, {state: action indices}), ...)
    membership: dict  # state -> mec index (absent for states outside every MEC)

    def ec_actions(self, i):
        return {(s, a) for s, acts in self.mecs[i][1].items() for a in acts}


def mec_decompose(m):
    """Maximal end components of ``m`` by iterated SCC refinement."""
    mecs = tuple(end_components(m))
    membership = {s: i for i, (states, _) in enumerate(mecs) for s in states}
    return MecDecomposition(mecs, membership)


@dataclass(frozen=True)
class MecQuotient:
    """Result of :func:`mec_quotient` with everything needed to map back."""

    mdp: Mdp
    source: Mdp
    decomposition: MecDecomposition
    state_map: dict  # original state -> quotient state
    action_map: dict  # (quotient state, quotient action) -> (original state, action), None for tau
    node_of_mec: dict  # mec index -> quotient state
    tau: dict  # quotient state of a MEC -> index of its tau action
    trap: int  # quotient state playing the role of the trap


def mec_quotient(m, trap=None):
    """Collapse every MEC into one state; each gets an extra action ``tau``
    leading to a terminal trap state (fresh unless ``trap`` names an existing
    terminal state)."""
    dec = mec_decompose(m)
    if trap is not None:
        trap = m.state(trap)
        if m.actions[trap]:
            raise InputError("trap state must be terminal")
    names, labels, order = [], [], []
    state_map, node_of_mec = {}, {}
    taken = set(m.names)
    for s in range(m.n):
        i = dec.membership.get(s)
        if i is None:
            state_map[s] = len(names)
            names.append(m.names[s])
            labels.append(m.labels[s])
            order.append(("state", s))
        elif i not in node_of_mec:
            node = len(names)
            node_of_mec[i] = node
            members = sorted(dec.mecs[i][0])
            for u in members:
                state_map[u] = node
            label = fresh_name(taken, "{" + ",".join(m.names[u] for u in members) + "}")
            taken.add(label)
            names.append(label)
            labels.append(frozenset().union(*(m.labels[u] for u in members)))
            order.append(("mec", i))
    if trap is None:
        trap_q = len(names)
        names.append(fresh_name(taken, "bottom"))
        labels.append(frozenset())
    else:
        trap_q = state_map[trap]
    actions = [[] for _ in names]
    action_map, tau = {}, {}

    def project(dist):
        out = {}
        for t, p in dist:
            out[state_map[t]] = out.get(state_map[t], 0) + p
        return tuple(sorted(out.items()))

    for kind, x in order:
        if kind == "state":
            q = state_map[x]
            for a, act in enumerate(m.actions[x]):
                action_map[(q, a)] = (x, a)
                actions[q].append(Action(act.name, project(act.dist)))
        else:
            q = node_of_mec[x]
            states, inside = dec.mecs[x]
            exits = [(u, a) for u in sorted(states) for a in range(len(m.actions[u]))
                     if a not in inside[u]]
            plain = [m.actions[u][a].name for u, a in exits]
            used = set()
            for u, a in exits:
                name = m.actions[u][a].name
                if plain.count(name) > 1 or name in used:
                    name = f"{m.names[u]}.{name}"
                name = fresh_name(used, name)
                used.add(name)
                action_map[(q, len(actions[q]))] = (u, a)
                actions[q].append(Action(name, project(m.actions[u][a].dist)))
            tau[q] = len(actions[q])
            action_map[(q, tau[q])] = None
            actions[q].append(Action(fresh_name(used, "tau"), ((trap_q, Fraction(1)),)))
    init = state_map[m.init]
    return MecQuotient(Mdp(names, init, actions, labels), m, dec, state_map, action_map,
                       node_of_mec, tau, trap_q)


@dataclass(frozen=True)
class NormalizedMdp:
    """A model with four role terminals, single-action cause states and no end components.

    ``base`` is the normalized model, ``roles`` maps role names to its states,
    ``cause`` and ``w`` refer to its states, ``provenance`` maps its states to
    original state ids. The remaining fields let witnesses travel back to
    ``original``.
    """

    base: Mdp
    roles: dict
    cause: frozenset
    w: dict
    provenance: dict
    original: Mdp = field(repr=False)
    original_cause: frozenset = field(repr=False)
    original_effect: frozenset = field(repr=False)
    pre: Mdp = field(repr=False)  # cause-reduced model before the quotient
    pre_index: dict = field(repr=False)  # original state -> state of ``pre`` (non-terminal ones)
    quotient: MecQuotient = field(repr=False)
    base_of_quotient: dict = field(repr=False)  # quotient state -> base state (reachable ones)
    min_picks: dict = field(repr=False)  # minimal-effect MD choice on ``original``

    @property
    def effect(self):
        return frozenset((self.roles["eff_cov"], self.roles["eff_unc"]))

    def tau_states(self):
        """Normalized states offering a tau action, with its index."""
        out = {}
        for q, a in self.quotient.tau.items():
            b = self.base_of_quotient.get(q)
            if b is not None:
                out[b] = a
        return dict(sorted(out.items()))


def normalize(m, cause, eff=None):
    """Bring ``m`` with the given cause into the normalized form."""
    cause = m.ids(cause)
    effs = effect_set(m, eff)
    if cause & effs:
        raise OverlapError("cause and effect overlap")
    bad = condition_m_violations(m, cause)
    if bad:
        raise MInvalid(m.names[bad[0]])
    values, min_sched = extremal_reach(m, effs, MIN)
    w_orig = {c: values[c] for c in cause}
    keep = [s for s in range(m.n) if m.actions[s] or s in cause]
    names = [m.names[s] for s in keep]
    taken = set(m.names)
    role_names = {}
    for role in ROLES:
        role_names[role] = fresh_name(taken, role)
        taken.add(role_names[role])
    names += [role_names[r] for r in ROLES]
    pre_index = {s: i for i, s in enumerate(keep)}
    role_idx = {r: len(keep) + k for k, r in enumerate(ROLES)}

    def target(t):
        if t in pre_index:
            return pre_index[t]
        return role_idx["eff_unc"] if t in effs else role_idx["noeff_tn"]

    actions = []
    for s in keep:
        if s in cause:
            w = w_orig[s]
            actions.append([Action("gamma", ((role_idx["eff_cov"], w), (role_idx["noeff_fp"], 1 - w)))])
            continue
        acts = []
        for act in m.actions[s]:
            dist = {}
            for t, p in act.dist:
                dist[target(t)] = dist.get(target(t), 0) + p
            acts.append(Action(act.name, tuple(dist.items())))
        actions.append(acts)
    actions += [[] for _ in ROLES]
    labels = [m.labels[s] - {EFFECT} for s in keep] + [
        frozenset({EFFECT}) if r.startswith("eff") else frozenset() for r in ROLES]
    pre = Mdp(names, pre_index[m.init], actions, labels)
    quotient = mec_quotient(pre, trap=role_idx["noeff_tn"])
    qm = quotient.mdp
    role_q = {r: quotient.state_map[role_idx[r]] for r in ROLES}
    base, _ = prune_unreachable(qm, keep=role_q.values())
    base_of_quotient = {q: base.index[qm.names[q]] for q in range(qm.n) if qm.names[q] in base.index}
    roles = {r: base_of_quotient[q] for r, q in role_q.items()}
    ncause = frozenset(base_of_quotient[quotient.state_map[pre_index[c]]] for c in cause)
    w = {base_of_quotient[quotient.state_map[pre_index[c]]]: w_orig[c] for c in cause}
    back = {}
    for s, i in pre_index.items():
        q = quotient.state_map[i]
        if q in base_of_quotient:
            back.setdefault(base_of_quotient[q], set()).add(m.names[s])
    back.setdefault(roles["eff_unc"], set()).update(m.names[e] for e in effs)
    back.setdefault(roles["noeff_tn"], set()).update(
        m.names[t] for t in range(m.n) if not m.actions[t] and t not in effs and t not in cause)
    back.setdefault(roles["eff_cov"], set())
    back.setdefault(roles["noeff_fp"], set())
    provenance = {b: frozenset(v) for b, v in sorted(back.items())}
    return NormalizedMdp(base, roles, ncause, w, provenance, m, cause, effs, pre, pre_index,
                         quotient, base_of_quotient, min_sched.picks())


def check_normalized(n):
    """Raise ``ValueError`` describing the first violated normal-form invariant."""
    m = n.base
    for r in ROLES:
        if r not in n.roles or m.actions[n.roles[r]]:
            raise ValueError(f"role state {r} missing or not terminal")
    if end_components(m):
        raise ValueError("normalized model has an end component")
    cov, fp, tn = n.roles["eff_cov"], n.roles["noeff_fp"], n.roles["noeff_tn"]
    gammas = set()
    for c in n.cause:
        acts = m.actions[c]
        want = {t: p for t, p in ((cov, n.w[c]), (fp, 1 - n.w[c])) if p}
        if len(acts) != 1 or dict(acts[0].dist) != want:
            raise ValueError(f"cause state {m.names[c]} is not in single-action form")
        gammas.add(c)
    for s in range(m.n):
        for act in m.actions[s]:
            hits = {t for t, _ in act.dist} & {cov, fp}
            if hits and s not in gammas:
                raise ValueError(f"state {m.names[s]} enters a covered-effect role without being a cause")
    for s, a in n.tau_states().items():
        if dict(m.actions[s][a].dist) != {tn: 1}:
            raise ValueError("tau action does not lead to the true-negative trap")


def reset_ratio_mdp(m, u, v):
    """Add a reset from every terminal outside ``v`` back to init; weight 1 on ``u``."""
    u, v = m.ids(u), m.ids(v)
    if u & v:
        raise InputError("u and v must be disjoint")
    for t in u | v:
        if m.actions[t]:
            raise InputError(f"{m.names[t]!r} is not terminal")
    actions = [list(acts) for acts in m.actions]
    for t in range(m.n):
        if not m.actions[t] and t not in v:
            actions[t] = [Action("reset", ((m.init, Fraction(1)),))]
    reset = Mdp(m.names, m.init, actions, m.labels)
    return WeightedMdp(reset, {s: 1 for s in u}, v)


def lift_scheduler(quotient_sched, quotient):
    """Carry a scheduler on the MEC quotient back to the collapsed model.

    ``quotient_sched`` must play tau with probability 0 or 1. Inside a MEC
    without tau the exits are tried one after another, reaching each exit
    state by an in-component attractor; frequencies of this finite-memory
    traversal are then turned into a memoryless scheduler. A MEC with tau
    probability 1 is never left.
    """
    q = quotient
    m = q.source
    dec = q.decomposition
    tau_one, exits = {}, {}
    for i, node in q.node_of_mec.items():
        p_tau = quotient_sched.choice[node].get(q.tau[node], 0)
        if p_tau not in (0, 1):
            raise TauFractional(f"tau is played with probability {p_tau} at {q.mdp.names[node]!r}")
        if p_tau == 1:
            tau_one[i] = True
        else:
            exits[i] = [(q.action_map[(node, a)], p)
                        for a, p in sorted(quotient_sched.choice[node].items())]
    attract = {}
    for i, lst in exits.items():
        states, inside = dec.mecs[i]
        for j, ((u, _), _) in enumerate(lst):
            attract[(i, j)] = _attractor_layers(m, {u}, states, inside)
    qprob = {}
    for i, lst in exits.items():
        rest = Fraction(1)
        for j, (_, p) in enumerate(lst):
            qprob[(i, j)] = p / rest if rest else Fraction(1)
            rest -= p

    def decide(mode, s):
        i = dec.membership.get(s)
        if i is None:
            node = q.state_map[s]
            return {q.action_map[(node, a)][1]: p for a, p in quotient_sched.choice[node].items()}
        if i in tau_one:
            return {"tau": Fraction(1)}
        lst = exits[i]
        dist, rem, j = {}, Fraction(1), mode[1]
        while rem:
            (u, a), _ = lst[j]
            if s == u:
                take = rem * qprob[(i, j)]
                if take:
                    dist[a] = dist.get(a, 0) + take
                rem -= take
                j += 1
            else:
                b = attract[(i, j)][s]
                dist[b] = dist.get(b, 0) + rem
                rem = 0
        return dist

    def branch(mode, s, a):
        # mode whose in-component move selected internal action ``a`` at ``s``
        i, j = mode
        lst = exits[i]
        while lst[j][0][0] == s:
            j += 1
        return j

    def entry(t):
        i = dec.membership.get(t)
        return None if i is None else (i, 0)

    start = (entry(m.init), m.init)
    nodes, pos, succ = [start], {start: 0}, []
    bottom = None
    k = 0
    while k < len(nodes):
        mode, s = nodes[k]
        row = {}
        if s is not None and m.actions[s]:
            i = dec.membership.get(s)
            for a, pa in decide(mode, s).items():
                if a == "tau":
                    if bottom is None:
                        bottom = len(nodes)
                        nodes.append((None, None))
                        pos[(None, None)] = bottom
                    row[bottom] = row.get(bottom, 0) + pa
                    continue
                internal = i is not None and a in dec.mecs[i][1].get(s, ())
                for t, pt in m.actions[s][a].dist:
                    nmode = (i, branch(mode, s, a)) if internal else entry(t)
                    key = (nmode, t)
                    if key not in pos:
                        pos[key] = len(nodes)
                        nodes.append(key)
                    row[pos[key]] = row.get(pos[key], 0) + pa * pt
        succ.append(row)
        k += 1
    visits = chain_visits(succ, 0)
    fs = {}
    fsa = {}
    for (mode, s), x in zip(nodes, visits):
        if s is None or not m.actions[s] or not x:
            continue
        fs[s] = fs.get(s, 0) + x
        for a, pa in decide(mode, s).items():
            fsa[(s, a)] = fsa.get((s, a), 0) + x * pa
    choice = {}
    for s in range(m.n):
        if not m.actions[s]:
            continue
        i = dec.membership.get(s)
        if i is not None and i in tau_one:
            choice[s] = {dec.mecs[i][1][s][0]: Fraction(1)}
        elif fs.get(s):
            choice[s] = {a: fsa[(s, a)] / fs[s] for (u, a) in fsa if u == s and fsa[(u, a)]}
        else:
            mode = None if i is None else (i, 0)
            choice[s] = decide(mode, s)
    return MrScheduler(m, choice)


def action_causality_mdp(m, s, alpha):
    """Product model asking whether taking ``alpha`` in ``s`` raises the effect probability.

    A fresh initial state moves with probability 1/2 each into a copy that
    must take ``alpha`` at ``s`` and a copy where ``alpha`` is disabled at
    ``s``. Returns ``(model, id of the first copy's initial state)``.
    """
    s = m.state(s)
    a = m.action_index(s, alpha)
    if len(m.actions[s]) == 1:
        raise AlphaOnlyAction(f"{alpha!r} is the only action of {m.names[s]!r}")
    taken = set()
    copies = []
    for k in (0, 1):
        ids = [fresh_name(taken, f"{name}@{k}") for name in m.names]
        taken.update(ids)
        copies.append(ids)
    start = fresh_name(taken, "start")
    names = [start] + copies[0] + copies[1]
    off = (1, 1 + m.n)
    actions = [[Action("split", ((off[0] + m.init, Fraction(1, 2)), (off[1] + m.init, Fraction(1, 2))))]]
    for k in (0, 1):
        for x in range(m.n):
            acts = list(enumerate(m.actions[x]))
            if x == s:
                acts = [(b, act) for b, act in acts if (b == a) == (k == 0)]
            actions.append([Action(act.name, tuple((off[k] + t, p) for t, p in act.dist)) for _, act in acts])
    labels = [frozenset()] + list(m.labels) + list(m.labels)
    return Mdp(names, 0, actions, labels), copies[0][m.init]
