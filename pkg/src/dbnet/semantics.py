"""Operational semantics: snapshots, binding enumeration, firing, and the
bounded breadth-first construction of the labeled transition system.

A snapshot pairs a compliant database instance with a marking whose view
places hold exactly the answers of their assigned queries. Firing consumes
control tokens matched by the input inscriptions, applies the induced action
instance transactionally, and routes output tokens along the normal or the
rollback flow depending on whether the update committed.
"""

from __future__ import annotations

import hashlib
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .control import DbNet, Inscription, Transition, token_key, tuple_key
from .datalogic import ActionInstance, apply_raw, instantiate
from .datatypes import (
    FreshSource,
    Substitution,
    Term,
    Value,
    Variable,
    apply_substitution,
    fresh_value,
)
from .errors import BindingError, ConfigError, DefinitionError
from .multiset import EMPTY, Multiset
from .persistence import (
    DatabaseInstance,
    check_compliance,
    fact_to_text,
    validate_instance,
)
from .query import answers, eval_guard

Token = tuple[Value, ...]

#: Values offered for external ("arbitrary input") variables, per type name.
InputDomains = Mapping[str, Sequence[Value]]


class Marking:
    """An immutable distribution of tokens over places."""

    __slots__ = ("_places", "_adom", "_hash")

    def __init__(self, places: Mapping[str, Multiset]):
        self._places: dict[str, Multiset] = {
            name: ms for name, ms in places.items() if ms
        }
        self._adom: dict[str, frozenset[Value]] = {}
        self._hash: int | None = None

    def tokens(self, place_name: str) -> Multiset:
        return self._places.get(place_name, EMPTY)

    def place_names(self) -> frozenset[str]:
        return frozenset(self._places)

    def active_domain(self, type_name: str) -> frozenset[Value]:
        cached = self._adom.get(type_name)
        if cached is None:
            cached = frozenset(
                v
                for ms in self._places.values()
                for token in ms.distinct()
                for v in token
                if v.type_name == type_name
            )
            self._adom[type_name] = cached
        return cached

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Marking):
            return NotImplemented
        return self._places == other._places

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._places.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"Marking({self._places!r})"


@dataclass(frozen=True)
class Snapshot:
    """The global state of a db-net: database instance plus aligned marking."""

    instance: DatabaseInstance
    marking: Marking


def check_tokens(net: DbNet, place_name: str, tokens: Multiset) -> None:
    """Raise unless every token is compatible with the place color."""
    place = net.places[place_name]
    for token in tokens.distinct():
        if len(token) != len(place.color):
            raise DefinitionError(
                f"token {token!r} has {len(token)} components, place "
                f"{place_name!r} has color arity {len(place.color)}"
            )
        for v, col in zip(token, place.color):
            if v.type_name != col:
                raise DefinitionError(
                    f"token {token!r} in {place_name!r}: component is "
                    f"{v.type_name!r}, color says {col!r}"
                )
            net.types.check_value(v)


def align_view_places(net: DbNet, instance: DatabaseInstance) -> dict[str, Multiset]:
    """Marking fragment holding, for each view place, exactly the answers of
    its query over `instance`, each with multiplicity one."""
    fragment: dict[str, Multiset] = {}
    for place in net.view_places():
        named = net.logic.queries[place.query_name]
        fragment[place.name] = Multiset(answers(named, instance, types=net.types))
    return fragment


def make_snapshot(
    net: DbNet,
    instance: DatabaseInstance,
    control_tokens: Mapping[str, Multiset] = (),
) -> Snapshot:
    """Build and check a snapshot; view places are computed, never supplied."""
    validate_instance(net.persistence.schema, net.types, instance)
    report = check_compliance(net.persistence, instance)
    if not report.ok:
        raise DefinitionError(
            f"instance violates constraints: {', '.join(report.violated)}"
        )
    entries: dict[str, Multiset] = {}
    for place_name, tokens in dict(control_tokens).items():
        if place_name not in net.places:
            raise DefinitionError(f"unknown place {place_name!r} in marking")
        if net.places[place_name].kind != "control":
            raise DefinitionError(
                f"place {place_name!r} is a view place; its marking is computed "
                "from the database instance and cannot be set"
            )
        check_tokens(net, place_name, tokens)
        entries[place_name] = tokens
    entries.update(align_view_places(net, instance))
    return Snapshot(instance, Marking(entries))


def inscription_binding(inscription: Inscription, theta: Substitution) -> Multiset:
    """Substitute every tuple of the inscription, preserving multiplicities."""
    counts: dict[Token, int] = {}
    for tup, mult in inscription.items():
        token = tuple(apply_substitution(term, theta) for term in tup)
        counts[token] = counts.get(token, 0) + mult
    return Multiset.from_counts(counts)


def snapshot_active_domain(snap: Snapshot, type_name: str) -> frozenset[Value]:
    return snap.instance.active_domain(type_name) | snap.marking.active_domain(type_name)


def is_enabled(net: DbNet, snap: Snapshot, t: Transition, sigma: Substitution) -> bool:
    """The three enablement clauses: token matching, guard, freshness."""
    for v in t.variables():
        if v not in sigma:
            raise BindingError(f"binding does not cover {v!r}")
        if sigma[v].type_name != v.type_name:
            raise BindingError(f"binding maps {v!r} to a {sigma[v].type_name!r} value")
    for place_name, inscription in t.inputs.items():
        if not snap.marking.tokens(place_name).includes(inscription_binding(inscription, sigma)):
            return False
    if not eval_guard(t.guard, sigma, types=net.types):
        return False
    fresh = t.fresh_vars()
    chosen = [sigma[v] for v in fresh]
    if len(set(chosen)) != len(chosen):
        return False
    for v in fresh:
        if sigma[v] in snapshot_active_domain(snap, v.type_name):
            return False
    return True


def induced_action_instance(
    net: DbNet, t: Transition, sigma: Substitution
) -> Optional[ActionInstance]:
    """Ground the bound action's formal parameters, if the transition has one."""
    if t.action is None:
        return None
    action = net.logic.actions[t.action.action_name]
    theta: Substitution = {}
    for param, term in zip(action.params, t.action.args):
        if isinstance(term, Variable):
            try:
                theta[param] = sigma[term]
            except KeyError:
                raise BindingError(f"binding does not cover action argument {term!r}") from None
        else:
            theta[param] = term
    return instantiate(action, theta)


def _match_tuple(tup: tuple[Term, ...], token: Token, sigma: Substitution) -> Optional[list[Variable]]:
    """Try to unify an inscription tuple with a token under (and extending)
    sigma; returns the newly bound variables, or None on mismatch."""
    bound: list[Variable] = []
    for term, value in zip(tup, token):
        if isinstance(term, Variable):
            current = sigma.get(term)
            if current is None:
                sigma[term] = value
                bound.append(term)
            elif current != value:
                for b in bound:
                    del sigma[b]
                return None
        elif term != value:
            for b in bound:
                del sigma[b]
            return None
    return bound


def enumerate_bindings(
    net: DbNet,
    snap: Snapshot,
    t: Transition,
    domains: InputDomains | None = None,
    *,
    fresh_exclusions: frozenset[Value] = frozenset(),
) -> list[Substitution]:
    """All enabled bindings of `t` in `snap`, in a canonical order.

    Input variables are bound by matching tokens arc by arc; external normal
    variables range over the configured per-type input domains; each fresh
    variable receives one deterministically generated value per binding.

    The enablement clause only forbids fresh values from the pre-state's
    active domains; `fresh_exclusions` lets a caller additionally rule out
    values seen earlier in a run (strict, run-global freshness).
    """
    domains = domains or {}

    # One matching slot per tuple occurrence, in canonical arc/tuple order.
    slots: list[tuple[str, tuple[Term, ...]]] = []
    for place_name in sorted(t.inputs):
        inscription = t.inputs[place_name]
        for tup, mult in inscription.sorted_items(tuple_key):
            slots.extend([(place_name, tup)] * mult)

    tokens_cache = {
        place_name: snap.marking.tokens(place_name).sorted_items(token_key)
        for place_name in t.inputs
    }

    matched: list[Substitution] = []
    seen: set[tuple] = set()
    sigma: Substitution = {}
    used: dict[tuple[str, Token], int] = {}

    def backtrack(i: int) -> None:
        if i == len(slots):
            key = tuple(sorted(((v.name, v.type_name, v.fresh), val) for v, val in sigma.items()),)
            key = tuple((name, val) for name, val in key)
            if key not in seen:
                seen.add(key)
                matched.append(dict(sigma))
            return
        place_name, tup = slots[i]
        for token, avail in tokens_cache[place_name]:
            if used.get((place_name, token), 0) >= avail:
                continue
            bound = _match_tuple(tup, token, sigma)
            if bound is None:
                continue
            used[place_name, token] = used.get((place_name, token), 0) + 1
            backtrack(i + 1)
            used[place_name, token] -= 1
            for b in bound:
                del sigma[b]

    backtrack(0)

    out: list[Substitution] = []
    external = sorted(t.external_vars() - t.fresh_vars(), key=lambda v: (v.name, v.type_name))
    fresh = sorted(t.fresh_vars(), key=lambda v: (v.name, v.type_name))
    for base in matched:
        if not eval_guard(t.guard, base, types=net.types):
            continue
        pools: list[Sequence[Value]] = []
        for v in external:
            pool = domains.get(v.type_name)
            if pool is None:
                raise ConfigError(
                    f"transition {t.name!r}: external variable {v.name!r} needs an "
                    f"input domain for type {v.type_name!r}"
                )
            pools.append(pool)
        for combo in itertools.product(*pools):
            full = dict(base)
            full.update(zip(external, combo))
            source = FreshSource()
            excluded: set[Value] = set(fresh_exclusions)
            for v in fresh:
                dt = net.types.type(v.type_name)
                pre = snapshot_active_domain(snap, v.type_name)
                full[v] = fresh_value(dt, pre | excluded, source)
                excluded.add(full[v])
            out.append(full)
    return out


def fire(
    net: DbNet,
    snap: Snapshot,
    t: Transition,
    sigma: Substitution,
    *,
    check: bool = True,
    intern: Callable[[DatabaseInstance], DatabaseInstance] | None = None,
) -> tuple[Snapshot, bool]:
    """Fire `t` under binding `sigma`.

    The database is updated through the induced action instance (identity
    when the transition has no action); the control marking follows
    m2(p) = (m1(p) - in) + k*out + (1-k)*rollback with k = 1 iff committed;
    view places are realigned against the resulting instance.
    """
    if check and not is_enabled(net, snap, t, sigma):
        raise BindingError(f"transition {t.name!r} is not enabled under {sigma!r}")
    induced = induced_action_instance(net, t, sigma)
    if induced is None:
        instance2, committed = snap.instance, True
    else:
        candidate = apply_raw(induced, snap.instance)
        if intern is not None:
            candidate = intern(candidate)
        if check_compliance(net.persistence, candidate).ok:
            instance2, committed = candidate, True
        else:
            instance2, committed = snap.instance, False
    k = 1 if committed else 0

    entries: dict[str, Multiset] = {}
    for place in net.control_places():
        m1 = snap.marking.tokens(place.name)
        w_in = t.inputs.get(place.name, EMPTY)
        w_out = t.outputs.get(place.name, EMPTY)
        w_rb = t.rollbacks.get(place.name, EMPTY)
        m2 = (
            (m1 - inscription_binding(w_in, sigma))
            + inscription_binding(w_out, sigma) * k
            + inscription_binding(w_rb, sigma) * (1 - k)
        )
        if m2:
            entries[place.name] = m2
    entries.update(align_view_places(net, instance2))
    return Snapshot(instance2, Marking(entries)), committed


def enabled_firings(
    net: DbNet,
    snap: Snapshot,
    domains: InputDomains | None = None,
    *,
    fresh_exclusions: frozenset[Value] = frozenset(),
) -> list[tuple[Transition, Substitution]]:
    """Every enabled (transition, binding) pair, transitions in name order."""
    out = []
    for t in net.sorted_transitions():
        for sigma in enumerate_bindings(net, snap, t, domains, fresh_exclusions=fresh_exclusions):
            out.append((t, sigma))
    return out


def run_values(snap: Snapshot) -> frozenset[Value]:
    """All values occurring in a snapshot; accumulate these across a run and
    feed them back as `fresh_exclusions` for strict global freshness."""
    values = {v for f in snap.instance.facts for v in f.args}
    for name in snap.marking.place_names():
        for token in snap.marking.tokens(name).distinct():
            values.update(token)
    return frozenset(values)


# --- canonical forms and digests ---------------------------------------------


def token_text(token: Token) -> str:
    from .datatypes import render_literal

    return "<" + ", ".join(render_literal(v) for v in token) + ">"


def marking_text(net: DbNet, marking: Marking) -> str:
    lines = []
    for name in sorted(marking.place_names()):
        ms = marking.tokens(name)
        body = ", ".join(
            f"{n} * {token_text(tok)}" if n > 1 else token_text(tok)
            for tok, n in ms.sorted_items(token_key)
        )
        lines.append(f"{name}: {body}\n")
    return "".join(lines)


def snapshot_digest(net: DbNet, snap: Snapshot) -> str:
    """A process-independent fingerprint of the snapshot's canonical form."""
    h = hashlib.sha256()
    for fact in snap.instance.canonical():
        h.update(fact_to_text(fact).encode("utf-8"))
        h.update(b"\n")
    h.update(b"--\n")
    h.update(marking_text(net, snap.marking).encode("utf-8"))
    return h.hexdigest()


def state_key(net: DbNet, snap: Snapshot):
    """Hashable identity used for deduplication: instance plus control
    marking (view places are functionally dependent and excluded)."""
    control = frozenset(
        (name, snap.marking.tokens(name))
        for name in snap.marking.place_names()
        if net.places[name].kind == "control"
    )
    return (snap.instance.facts, control)


# --- bounded exploration ------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    src: int
    transition: str
    binding: Substitution
    committed: bool
    dst: int


@dataclass
class Monitors:
    """Width/depth boundedness observations over all stored states."""

    max_place_tokens: int = 0
    max_instance_facts: int = 0
    max_depth: int = 0

    def observe(self, snap: Snapshot, depth: int) -> None:
        for name in snap.marking.place_names():
            n = len(snap.marking.tokens(name))
            if n > self.max_place_tokens:
                self.max_place_tokens = n
        if len(snap.instance) > self.max_instance_facts:
            self.max_instance_facts = len(snap.instance)
        if depth > self.max_depth:
            self.max_depth = depth


@dataclass
class LTS:
    """The explored fragment of the snapshot transition graph."""

    snapshots: list[Snapshot]
    edges: list[Edge]
    depths: list[int]
    parents: list[Optional[tuple[int, str, Substitution, bool]]]
    initial: int = 0
    truncated: bool = False
    truncation_reason: str = ""
    monitors: Monitors = field(default_factory=Monitors)
    goal_state: Optional[int] = None

    @property
    def state_count(self) -> int:
        return len(self.snapshots)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def witness_path(self) -> list[tuple[str, Substitution, bool]]:
        """Firing sequence from the initial state to the goal state."""
        if self.goal_state is None:
            return []
        path = []
        sid = self.goal_state
        while self.parents[sid] is not None:
            parent, tname, sigma, committed = self.parents[sid]
            path.append((tname, sigma, committed))
            sid = parent
        path.reverse()
        return path


class InstanceInterner:
    """Canonicalizes equal instances to one object so that compliance and
    query-answer caches are shared across the whole exploration."""

    def __init__(self) -> None:
        self._store: dict[frozenset, DatabaseInstance] = {}

    def __call__(self, instance: DatabaseInstance) -> DatabaseInstance:
        return self._store.setdefault(instance.facts, instance)


def build_lts(
    net: DbNet,
    s0: Snapshot,
    *,
    domains: InputDomains | None = None,
    max_states: int | None = None,
    max_depth: int | None = None,
    workers: int = 1,
    goal: Callable[[Snapshot], bool] | None = None,
    stop_at_goal: bool = False,
) -> LTS:
    """Breadth-first closure of `fire` over all enabled bindings.

    States are deduplicated by (instance, control marking). Exploration is
    level-synchronous: a level's states may be expanded by parallel workers,
    but results are merged in a fixed order, so the resulting LTS does not
    depend on the worker count.
    """
    intern = InstanceInterner()
    s0 = Snapshot(intern(s0.instance), s0.marking)
    lts = LTS(snapshots=[s0], edges=[], depths=[0], parents=[None])
    lts.monitors.observe(s0, 0)
    index: dict = {state_key(net, s0): 0}
    if goal is not None and goal(s0):
        lts.goal_state = 0
        if stop_at_goal:
            return lts

    def expand(sid: int) -> list[tuple[str, Substitution, bool, Snapshot]]:
        snap = lts.snapshots[sid]
        succs = []
        for t in net.sorted_transitions():
            for sigma in enumerate_bindings(net, snap, t, domains):
                snap2, committed = fire(net, snap, t, sigma, check=False, intern=intern)
                succs.append((t.name, sigma, committed, snap2))
        return succs

    frontier = [0]
    depth = 0
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while frontier:
            if max_depth is not None and depth >= max_depth:
                lts.truncated = True
                lts.truncation_reason = "depth budget reached"
                break
            if executor is not None:
                expansions = list(executor.map(expand, frontier))
            else:
                expansions = [expand(sid) for sid in frontier]
            next_frontier: list[int] = []
            budget_hit = False
            for sid, succs in zip(frontier, expansions):
                for tname, sigma, committed, snap2 in succs:
                    key = state_key(net, snap2)
                    nid = index.get(key)
                    if nid is None:
                        if max_states is not None and len(lts.snapshots) >= max_states:
                            budget_hit = True
                            break
                        nid = len(lts.snapshots)
                        index[key] = nid
                        lts.snapshots.append(snap2)
                        lts.depths.append(depth + 1)
                        lts.parents.append((sid, tname, sigma, committed))
                        lts.monitors.observe(snap2, depth + 1)
                        next_frontier.append(nid)
                        if goal is not None and lts.goal_state is None and goal(snap2):
                            lts.goal_state = nid
                    lts.edges.append(Edge(sid, tname, sigma, committed, nid))
                if budget_hit:
                    break
            if budget_hit:
                lts.truncated = True
                lts.truncation_reason = "state budget reached"
                break
            if goal is not None and stop_at_goal and lts.goal_state is not None:
                break
            frontier = next_frontier
            depth += 1
    finally:
        if executor is not None:
            executor.shutdown(wait=False)
    return lts


# --- trace records ------------------------------------------------------------


def value_json(value: Value) -> dict:
    from .persistence import value_to_json

    return {"type": value.type_name, "value": value_to_json(value)}


def value_from_json(data: dict) -> Value:
    from .datatypes import payload_from_json

    return payload_from_json(data["value"], data["type"])


def binding_to_json(sigma: Substitution) -> dict:
    return {v.name: value_json(val) for v, val in sorted(sigma.items(), key=lambda kv: kv[0].name)}


def binding_from_json(t: Transition, data: Mapping[str, dict]) -> Substitution:
    by_name = {v.name: v for v in t.variables()}
    sigma: Substitution = {}
    for name, cell in data.items():
        if name not in by_name:
            raise BindingError(f"transition {t.name!r} has no variable {name!r}")
        sigma[by_name[name]] = value_from_json(cell)
    return sigma


def fact_json(fact) -> dict:
    return {"relation": fact.relation, "args": [value_json(a) for a in fact.args]}


def marking_delta(net: DbNet, before: Marking, after: Marking) -> dict:
    """Per-place token differences, canonically ordered."""
    delta: dict[str, dict] = {}
    for name in sorted(before.place_names() | after.place_names()):
        b, a = before.tokens(name), after.tokens(name)
        added = [
            {"token": [value_json(v) for v in tok], "count": a.count(tok) - b.count(tok)}
            for tok, _ in a.sorted_items(token_key)
            if a.count(tok) > b.count(tok)
        ]
        removed = [
            {"token": [value_json(v) for v in tok], "count": b.count(tok) - a.count(tok)}
            for tok, _ in b.sorted_items(token_key)
            if b.count(tok) > a.count(tok)
        ]
        if added or removed:
            delta[name] = {"added": added, "removed": removed}
    return delta


def firing_record(
    net: DbNet,
    step: int,
    t: Transition,
    sigma: Substitution,
    committed: bool,
    before: Snapshot,
    after: Snapshot,
) -> dict:
    """One JSONL trace record per firing."""
    added = sorted(after.instance.facts - before.instance.facts, key=lambda f: f.sort_key())
    deleted = sorted(before.instance.facts - after.instance.facts, key=lambda f: f.sort_key())
    return {
        "step": step,
        "transition": t.name,
        "binding": binding_to_json(sigma),
        "committed": committed,
        "added": [fact_json(f) for f in added],
        "deleted": [fact_json(f) for f in deleted],
        "marking_delta": marking_delta(net, before.marking, after.marking),
        "state": snapshot_digest(net, after),
    }
