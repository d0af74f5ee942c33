"""MDP data model, JSON model files, schedulers and graph/chain helpers.

States are stored as dense integers ``0..n-1`` with their string ids in
``Mdp.names``. An action is identified by the pair (state, local index), which
keeps action identities disjoint across states even when two states reuse the
same action name in a model file.
"""
import json
import math
import re
import warnings
from fractions import Fraction
from typing import NamedTuple

from .errors import (
    CauseError, DistributionError, DuplicateIdError, EffectNotTerminalError,
    InitInCause, InitIsEffectError, InputError, MInvalid, ModelSyntaxError,
    OverlapError,
)
from .linalg import solve

EFFECT = "effect"
INF = math.inf

_RATIONAL = re.compile(r"\s*(\d+)\s*(?:/\s*(\d+)\s*)?$")


class UnreachableStateWarning(UserWarning):
    pass


def parse_rational(text):
    """Parse ``"p/q"`` or ``"p"`` into a Fraction. Floats are rejected."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"expected a rational string like '1/2', got {text!r}")
    match = _RATIONAL.match(text)
    if not match:
        raise ValueError(f"not a rational literal: {text!r}")
    num, den = int(match.group(1)), int(match.group(2) or 1)
    if den == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(num, den)


def format_value(x):
    """Serialize a rational (or infinity) the way reports do."""
    if x == INF:
        return "inf"
    return str(Fraction(x))


class Action(NamedTuple):
    name: str
    dist: tuple  # ((target, Fraction), ...) sorted by target


class Mdp:
    """An immutable finite MDP with exact rational probabilities."""

    __slots__ = ("names", "init", "actions", "labels", "index")

    def __init__(self, names, init, actions, labels=None):
        names = tuple(names)
        index = {}
        for i, name in enumerate(names):
            if name in index:
                raise DuplicateIdError(f"duplicate state id {name!r}")
            index[name] = i
        n = len(names)
        if not 0 <= init < n:
            raise InputError("initial state out of range")
        acts = []
        for s, alist in enumerate(actions):
            seen = set()
            clean = []
            for act in alist:
                if act.name in seen:
                    raise DuplicateIdError(f"duplicate action {act.name!r} at state {names[s]!r}")
                seen.add(act.name)
                dist = {}
                for t, p in act.dist:
                    if not 0 <= t < n:
                        raise InputError(f"transition target out of range at {names[s]!r}")
                    p = Fraction(p)
                    if p < 0 or p > 1:
                        raise DistributionError(f"probability {p} outside [0,1] at {names[s]!r}/{act.name}")
                    if p:
                        dist[t] = dist.get(t, 0) + p
                if sum(dist.values()) != 1:
                    raise DistributionError(
                        f"distribution of {names[s]!r}/{act.name} sums to {sum(dist.values())}, not 1")
                clean.append(Action(act.name, tuple(sorted(dist.items()))))
            acts.append(tuple(clean))
        if len(acts) != n:
            raise InputError("one action list per state expected")
        if labels is None:
            labels = [frozenset()] * n
        self.names = names
        self.init = init
        self.actions = tuple(acts)
        self.labels = tuple(frozenset(x) for x in labels)
        self.index = index

    @classmethod
    def build(cls, states, init, transitions, labels=None):
        """Construct from string ids.

        ``transitions`` maps a state id to ``{action: {target: prob}}``;
        probabilities may be Fractions, ints or ``"p/q"`` strings. ``labels``
        maps state ids to label collections.
        """
        states = list(states)
        index = {s: i for i, s in enumerate(states)}
        actions = [[] for _ in states]
        for s, acts in transitions.items():
            for a, dist in acts.items():
                actions[index[s]].append(
                    Action(a, tuple((index[t], parse_rational(p)) for t, p in dist.items())))
        labels = labels or {}
        return cls(states, index[init], actions, [frozenset(labels.get(s, ())) for s in states])

    def __repr__(self):
        return f"Mdp({len(self.names)} states, init={self.names[self.init]!r})"

    def __eq__(self, other):
        if not isinstance(other, Mdp):
            return NotImplemented
        return (self.names, self.init, self.actions, self.labels) == (
            other.names, other.init, other.actions, other.labels)

    def __hash__(self):
        return hash((self.names, self.init, self.actions))

    @property
    def n(self):
        return len(self.names)

    def is_terminal(self, s):
        return not self.actions[s]

    def is_markov_chain(self):
        return all(len(a) <= 1 for a in self.actions)

    def terminals(self):
        return frozenset(s for s in range(self.n) if not self.actions[s])

    def labelled(self, label=EFFECT):
        return frozenset(s for s in range(self.n) if label in self.labels[s])

    def state(self, x):
        """Resolve a state id or index to an index."""
        if isinstance(x, str):
            try:
                return self.index[x]
            except KeyError:
                raise InputError(f"unknown state {x!r}") from None
        if not 0 <= x < self.n:
            raise InputError(f"state index {x} out of range")
        return x

    def ids(self, states):
        return frozenset(self.state(x) for x in states)

    def name_set(self, ids):
        """Names of ``ids`` in model order."""
        return tuple(self.names[s] for s in sorted(ids))

    def dist(self, s, a):
        return self.actions[s][a].dist

    def action_index(self, s, name):
        s = self.state(s)
        for i, act in enumerate(self.actions[s]):
            if act.name == name:
                return i
        raise InputError(f"state {self.names[s]!r} has no action {name!r}")

    def successors(self, s):
        return {t for act in self.actions[s] for t, _ in act.dist}


def effect_set(m, eff=None, label=EFFECT):
    """The effect states: explicit ids if given, else the labelled ones."""
    return m.labelled(label) if eff is None else m.ids(eff)


# --- graph helpers -----------------------------------------------------------

def reachable(m, start=None, avoid=(), allowed=None):
    """States reachable from ``start`` without entering ``avoid``.

    ``allowed`` optionally maps a state to the action indices that may be used.
    States in ``avoid`` are never entered (and not expanded).
    """
    start = m.init if start is None else start
    avoid = set(avoid)
    if start in avoid:
        return set()
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        acts = range(len(m.actions[s])) if allowed is None else allowed.get(s, ())
        for a in acts:
            for t, _ in m.actions[s][a].dist:
                if t not in seen and t not in avoid:
                    seen.add(t)
                    stack.append(t)
    return seen


def can_reach(m, targets, allowed=None):
    """States with a path into ``targets`` (graph-based, all actions unless restricted)."""
    pred = [set() for _ in range(m.n)]
    for s in range(m.n):
        acts = range(len(m.actions[s])) if allowed is None else allowed.get(s, ())
        for a in acts:
            for t, _ in m.actions[s][a].dist:
                pred[t].add(s)
    seen = set(targets)
    stack = list(seen)
    while stack:
        t = stack.pop()
        for s in pred[t]:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return seen


def sccs(nodes, succ):
    """Strongly connected components (iterative Tarjan).

    ``nodes`` is an iterable of hashable nodes, ``succ(v)`` yields successors;
    successors outside ``nodes`` are ignored. Components come out in reverse
    topological order.
    """
    nodes = list(nodes)
    member = set(nodes)
    index, low, on_stack = {}, {}, set()
    stack, out = [], []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter([w for w in succ(root) if w in member]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter([x for x in succ(w) if x in member])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


# --- finite Markov chains given as successor lists -----------------------------

def chain_reach(succ, targets):
    """Reachability probabilities in a finite chain.

    ``succ[i]`` is a dict ``j -> probability``. Returns a list of Fractions.
    """
    n = len(succ)
    targets = set(targets)
    pred = [[] for _ in range(n)]
    for i, row in enumerate(succ):
        for j in row:
            pred[j].append(i)
    good = set(targets)
    stack = list(targets)
    while stack:
        j = stack.pop()
        for i in pred[j]:
            if i not in good:
                good.add(i)
                stack.append(i)
    unknown = sorted(good - targets)
    pos = {v: k for k, v in enumerate(unknown)}
    rows, rhs = [], []
    for v in unknown:
        row = {pos[v]: Fraction(1)}
        b = Fraction(0)
        for j, p in succ[v].items():
            if j in targets:
                b += p
            elif j in pos:
                row[pos[j]] = row.get(pos[j], 0) - p
        rows.append(row)
        rhs.append(b)
    sol = solve(rows, rhs) if unknown else []
    out = [Fraction(0)] * n
    for v in targets:
        out[v] = Fraction(1)
    for v, k in pos.items():
        out[v] = sol[k]
    return out


def chain_visits(succ, start):
    """Expected number of visits to every node, starting in ``start``.

    Nodes on a closed cycle that is reachable get ``INF``; terminal nodes (no
    successors) count the single visit that ends the run.
    """
    n = len(succ)
    reach = {start}
    stack = [start]
    while stack:
        i = stack.pop()
        for j in succ[i]:
            if j not in reach:
                reach.add(j)
                stack.append(j)
    recurrent = set()
    for comp in sccs(sorted(reach), lambda v: succ[v]):
        cset = set(comp)
        closed = all(j in cset for v in comp for j in succ[v])
        if closed and succ[comp[0]]:
            recurrent |= cset
    transient = sorted(reach - recurrent)
    pos = {v: k for k, v in enumerate(transient)}
    rows = [{k: Fraction(1)} for k in range(len(transient))]
    for i in transient:
        for j, p in succ[i].items():
            if j in pos:
                row = rows[pos[j]]
                row[pos[i]] = row.get(pos[i], 0) - p
    rhs = [Fraction(int(v == start)) for v in transient]
    sol = solve(rows, rhs) if transient else []
    out = [Fraction(0)] * n
    for v, k in pos.items():
        out[v] = sol[k]
    for v in recurrent:
        out[v] = INF
    return out


# --- schedulers ----------------------------------------------------------------

def _check_dist(m, s, dist, what):
    if not m.actions[s]:
        raise InputError(f"{what}: terminal state {m.names[s]!r} has no actions to choose")
    total = 0
    for a, p in dist.items():
        if not 0 <= a < len(m.actions[s]):
            raise InputError(f"{what}: action index {a} not enabled at {m.names[s]!r}")
        if p < 0:
            raise DistributionError(f"{what}: negative probability at {m.names[s]!r}")
        total += p
    if total != 1:
        raise DistributionError(f"{what}: distribution at {m.names[s]!r} sums to {total}")


def _clean(dist):
    return {a: Fraction(p) for a, p in sorted(dist.items()) if p}


class MrScheduler:
    """Memoryless randomized scheduler: non-terminal state -> action distribution."""

    __slots__ = ("mdp", "choice")

    def __init__(self, mdp, choice):
        clean = {}
        for s, dist in choice.items():
            if mdp.is_terminal(s):
                continue
            d = _clean(dist)
            _check_dist(mdp, s, d, "scheduler")
            clean[s] = d
        missing = [mdp.names[s] for s in range(mdp.n) if mdp.actions[s] and s not in clean]
        if missing:
            raise InputError(f"scheduler undefined at {missing}")
        self.mdp = mdp
        self.choice = clean

    @classmethod
    def deterministic(cls, mdp, picks):
        """Build from ``{state: action index}``; states not listed take action 0."""
        return cls(mdp, {s: {picks.get(s, 0): Fraction(1)} for s in range(mdp.n) if mdp.actions[s]})

    @classmethod
    def from_named(cls, mdp, table):
        """Build from ``{state id: action id | {action id: prob}}``."""
        choice = {}
        for s, spec in table.items():
            s = mdp.state(s)
            if isinstance(spec, str):
                spec = {spec: 1}
            choice[s] = {mdp.action_index(s, a): parse_rational(p) for a, p in spec.items()}
        return cls(mdp, choice)

    def dist(self, s):
        return self.choice[s]

    def decide(self, mode, s):
        return self.choice[s]

    def next_mode(self, mode, s, a, t):
        return mode

    initial_mode = None

    def is_deterministic(self):
        return all(len(d) == 1 for d in self.choice.values())

    def picks(self):
        """The chosen action per state (deterministic schedulers only)."""
        return {s: next(iter(d)) for s, d in self.choice.items()}

    def to_json(self):
        m = self.mdp
        return {m.names[s]: {m.actions[s][a].name: format_value(p) for a, p in d.items()}
                for s, d in sorted(self.choice.items())}

    def __eq__(self, other):
        return isinstance(other, MrScheduler) and self.choice == other.choice and self.mdp == other.mdp

    def __repr__(self):
        return f"MrScheduler({self.to_json()})"


class FiniteMemoryScheduler:
    """Scheduler with a finite mode automaton.

    ``decisions[(mode, s)]`` is an action distribution; ``update`` maps
    ``(mode, s, a, t)`` to the next mode and every missing entry means the
    mode stays unchanged.
    """

    __slots__ = ("mdp", "modes", "initial_mode", "decisions", "update")

    def __init__(self, mdp, modes, initial_mode, decisions, update=None):
        modes = tuple(modes)
        if initial_mode not in modes:
            raise InputError("initial mode not among modes")
        clean = {}
        for (q, s), dist in decisions.items():
            if q not in modes:
                raise InputError(f"unknown mode {q!r}")
            if mdp.is_terminal(s):
                continue
            d = _clean(dist)
            _check_dist(mdp, s, d, f"mode {q}")
            clean[(q, s)] = d
        update = dict(update or {})
        for q in update.values():
            if q not in modes:
                raise InputError(f"unknown mode {q!r}")
        self.mdp = mdp
        self.modes = modes
        self.initial_mode = initial_mode
        self.decisions = clean
        self.update = update

    @classmethod
    def two_mode(cls, mdp, before, switch, after):
        """"before" plays ``before`` until a state of ``switch`` is entered, then ``after``.

        ``before``/``after`` are MrSchedulers or plain ``{state: dist}`` dicts.
        """
        bd = before.choice if isinstance(before, MrScheduler) else before
        ad = after.choice if isinstance(after, MrScheduler) else after
        switch = set(switch)
        decisions = {("before", s): d for s, d in bd.items() if s not in switch}
        decisions.update({("after", s): d for s, d in ad.items()})
        update = {}
        for s in range(mdp.n):
            if s in switch:
                continue
            for a, act in enumerate(mdp.actions[s]):
                for t, _ in act.dist:
                    if t in switch:
                        update[("before", s, a, t)] = "after"
        start = "after" if mdp.init in switch else "before"
        return cls(mdp, ("before", "after"), start, decisions, update)

    def decide(self, mode, s):
        try:
            return self.decisions[(mode, s)]
        except KeyError:
            raise InputError(f"no decision for mode {mode!r} at {self.mdp.names[s]!r}") from None

    def next_mode(self, mode, s, a, t):
        return self.update.get((mode, s, a, t), mode)

    def to_json(self):
        m = self.mdp
        table = {}
        for (q, s), d in sorted(self.decisions.items(), key=lambda kv: (self.modes.index(kv[0][0]), kv[0][1])):
            table.setdefault(q, {})[m.names[s]] = {m.actions[s][a].name: format_value(p) for a, p in d.items()}
        upd = [{"mode": q, "state": m.names[s], "action": m.actions[s][a].name,
                "next": m.names[t], "to": r}
               for (q, s, a, t), r in sorted(self.update.items(), key=lambda kv: (
                   self.modes.index(kv[0][0]), kv[0][1], kv[0][2], kv[0][3]))]
        return {"modes": list(self.modes), "initial": self.initial_mode,
                "decisions": table, "updates": upd}


def as_finite_memory(sched):
    if isinstance(sched, FiniteMemoryScheduler):
        return sched
    m = sched.mdp
    return FiniteMemoryScheduler(m, ("only",), "only", {("only", s): d for s, d in sched.choice.items()})


def induced_chain(m, sched):
    """The finite Markov chain induced by ``sched`` on ``m`` (reachable part).

    Returns ``(nodes, succ)`` where ``nodes[i] = (mode, state)``, node 0 is the
    start and ``succ[i]`` is a dict ``j -> probability``.
    """
    start = (sched.initial_mode, m.init)
    nodes = [start]
    pos = {start: 0}
    succ = []
    k = 0
    while k < len(nodes):
        q, s = nodes[k]
        row = {}
        if m.actions[s]:
            for a, pa in sched.decide(q, s).items():
                for t, pt in m.actions[s][a].dist:
                    node = (sched.next_mode(q, s, a, t), t)
                    j = pos.get(node)
                    if j is None:
                        j = pos[node] = len(nodes)
                        nodes.append(node)
                    row[j] = row.get(j, 0) + pa * pt
        succ.append(row)
        k += 1
    return nodes, succ


def frequencies(m, sched):
    """Expected visits per state and per state-action pair under an MR scheduler.

    Terminal states get the probability of ending there. States visited
    infinitely often get ``INF``.
    """
    nodes, succ = induced_chain(m, sched)
    visits = chain_visits(succ, 0)
    state = {s: Fraction(0) for s in range(m.n)}
    for (_, s), v in zip(nodes, visits):
        state[s] = v
    pairs = {}
    for s in range(m.n):
        if m.actions[s]:
            for a in range(len(m.actions[s])):
                p = sched.choice[s].get(a, 0)
                if state[s] == INF:
                    pairs[(s, a)] = INF if p else Fraction(0)
                else:
                    pairs[(s, a)] = state[s] * p
    return state, pairs


def reach_probability(m, sched, targets):
    """Pr(eventually targets) under any scheduler, on the induced chain."""
    nodes, succ = induced_chain(m, sched)
    targets = set(targets)
    values = chain_reach(succ, [i for i, (_, s) in enumerate(nodes) if s in targets])
    return values[0]


# --- model files -----------------------------------------------------------------

def prune_unreachable(m, keep=()):
    """Drop states unreachable from init (except those in ``keep``)."""
    live = reachable(m) | set(keep)
    if len(live) == m.n:
        return m, []
    order = [s for s in range(m.n) if s in live]
    new = {s: i for i, s in enumerate(order)}
    acts = []
    for s in order:
        acts.append([Action(a.name, tuple((new[t], p) for t, p in a.dist)) for a in m.actions[s]])
    dropped = [m.names[s] for s in range(m.n) if s not in live]
    return Mdp([m.names[s] for s in order], new[m.init], acts, [m.labels[s] for s in order]), dropped


def _fail(msg, path):
    raise ModelSyntaxError(msg, path=path)


def parse_model(text, effect_label=EFFECT):
    """Parse and validate a JSON model; unreachable states are pruned with a warning."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        _fail("top level must be an object", "$")
    for key in ("states", "init", "transitions"):
        if key not in doc:
            _fail(f"missing key {key!r}", "$")
    states = doc["states"]
    if not isinstance(states, list) or not states:
        _fail("'states' must be a non-empty list", "$.states")
    names, labels = [], {}
    for i, entry in enumerate(states):
        path = f"$.states[{i}]"
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
            _fail("state entries need a string 'id'", path)
        sid = entry["id"]
        if sid in labels:
            raise DuplicateIdError(f"duplicate state id {sid!r} at {path}")
        labs = entry.get("labels", [])
        if not isinstance(labs, list) or not all(isinstance(x, str) for x in labs):
            _fail("'labels' must be a list of strings", path + ".labels")
        labs = frozenset(labs)
        if effect_label != EFFECT:
            # the chosen label becomes the effect marker used downstream
            labs = labs - {EFFECT} | ({EFFECT} if effect_label in labs else frozenset())
        names.append(sid)
        labels[sid] = labs
    init = doc["init"]
    if not isinstance(init, str) or init not in labels:
        _fail(f"unknown initial state {init!r}", "$.init")
    trans = doc["transitions"]
    if not isinstance(trans, list):
        _fail("'transitions' must be a list", "$.transitions")
    table = {}
    for i, entry in enumerate(trans):
        path = f"$.transitions[{i}]"
        if not isinstance(entry, dict):
            _fail("transition entries must be objects", path)
        src, act, to = entry.get("from"), entry.get("action"), entry.get("to")
        if src not in labels:
            _fail(f"unknown source state {src!r}", path + ".from")
        if not isinstance(act, str):
            _fail("'action' must be a string", path + ".action")
        if not isinstance(to, dict) or not to:
            _fail("'to' must be a non-empty object", path + ".to")
        if act in table.setdefault(src, {}):
            raise DuplicateIdError(f"duplicate action {act!r} at state {src!r} ({path})")
        dist = {}
        for t, p in to.items():
            if t not in labels:
                _fail(f"unknown target state {t!r}", f"{path}.to")
            if not isinstance(p, str):
                _fail(f"probability must be a string 'p/q', got {p!r}", f"{path}.to.{t}")
            try:
                dist[t] = parse_rational(p)
            except ValueError as exc:
                _fail(str(exc), f"{path}.to.{t}")
        total = sum(dist.values())
        if total != 1:
            raise DistributionError(f"distribution of {src!r}/{act!r} sums to {total}, not 1 ({path})")
        table[src][act] = dist
    for sid in names:
        if EFFECT in labels[sid] and table.get(sid):
            raise EffectNotTerminalError(f"effect state {sid!r} has enabled actions")
    if EFFECT in labels[init]:
        raise InitIsEffectError(f"initial state {init!r} carries the {effect_label!r} label")
    m = Mdp.build(names, init, table, labels)
    m, dropped = prune_unreachable(m)
    if dropped:
        warnings.warn(f"pruned unreachable states: {', '.join(dropped)}", UnreachableStateWarning, stacklevel=2)
    return m


def load_model(path, effect_label=EFFECT):
    with open(path, "rb") as fh:
        return parse_model(fh.read(), effect_label)


def model_to_dict(m):
    return {
        "states": [{"id": name, "labels": sorted(m.labels[s])} for s, name in enumerate(m.names)],
        "init": m.names[m.init],
        "transitions": [
            {"from": m.names[s], "action": act.name,
             "to": {m.names[t]: format_value(p) for t, p in act.dist}}
            for s in range(m.n) for act in m.actions[s]
        ],
    }


def serialize_model(m):
    return json.dumps(model_to_dict(m), indent=2) + "\n"


# --- cause candidates and chains -------------------------------------------------

def condition_m_violations(m, cause):
    """Cause states that cannot be reached without passing another cause state."""
    cause = set(cause)
    bad = []
    for c in sorted(cause):
        if c not in reachable(m, avoid=cause - {c}):
            bad.append(c)
    return bad


def validate_cause_candidate(m, cause, eff=None):
    """Raise unless ``cause`` is a well-formed candidate satisfying minimality."""
    cause = m.ids(cause)
    effs = effect_set(m, eff)
    if not effs:
        raise CauseError("the effect set is empty")
    if any(m.actions[e] for e in effs):
        raise CauseError("effect states must be terminal")
    if cause & effs:
        raise OverlapError(f"cause and effect overlap in {list(m.name_set(cause & effs))}")
    if m.init in cause:
        raise InitInCause(f"the initial state {m.names[m.init]!r} cannot be a cause state")
    bad = condition_m_violations(m, cause)
    if bad:
        raise MInvalid(m.names[bad[0]])


def chain_successors(m):
    if not m.is_markov_chain():
        raise InputError("model is not a Markov chain")
    return [dict(m.actions[s][0].dist) if m.actions[s] else {} for s in range(m.n)]


def mc_reach_probability(m, start, target):
    """Exact probability of eventually reaching ``target`` from ``start`` in a chain."""
    succ = chain_successors(m)
    return chain_reach(succ, m.ids(target))[m.state(start)]


def end_components(m, allowed=None):
    """Maximal end components, optionally within a sub-MDP.

    ``allowed`` maps states to permitted action indices (default: all). Returns
    a list of ``(states, actions)`` with ``actions`` a dict state -> sorted
    action indices, ordered by smallest member state.
    """
    if allowed is None:
        acts = {s: set(range(len(m.actions[s]))) for s in range(m.n) if m.actions[s]}
    else:
        acts = {s: set(a) for s, a in allowed.items() if a}
    while True:
        comps = sccs(sorted(acts), lambda v: {t for a in acts[v] for t, _ in m.actions[v][a].dist})
        where = {v: i for i, comp in enumerate(comps) for v in comp}
        changed = False
        for s in list(acts):
            keep = {a for a in acts[s]
                    if all(where.get(t) == where[s] for t, _ in m.actions[s][a].dist)}
            if keep != acts[s]:
                changed = True
                if keep:
                    acts[s] = keep
                else:
                    del acts[s]
        if not changed:
            break
    out = []
    for comp in comps:
        if all(s in acts for s in comp):
            out.append((frozenset(comp), {s: tuple(sorted(acts[s])) for s in sorted(comp)}))
    out.sort(key=lambda e: min(e[0]))
    return out
