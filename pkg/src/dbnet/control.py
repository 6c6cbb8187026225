"""Static structure of the control layer and whole-net validation.

Places are either control places (ordinary token holders) or view places
(read-only windows onto a query's answers). Transitions consume tokens via
input inscriptions, filter bindings with a guard, optionally invoke one
action of the data logic, and produce tokens along normal output arcs or,
when the action is rolled back, along rollback arcs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional

from .datalogic import DataLogicLayer, validate_action
from .datatypes import Term, TypeDomain, Value, Variable
from .errors import DefinitionError
from .multiset import Multiset
from .persistence import PersistenceLayer
from .query import Guard, Truth, all_vars, validate_query

#: An arc inscription: a multiset of term tuples.
Inscription = Multiset  # Multiset[tuple[Term, ...]]


def inscription_vars(inscription: Inscription) -> set[Variable]:
    return {
        term
        for tup in inscription.distinct()
        for term in tup
        if isinstance(term, Variable)
    }


def term_key(term: Term):
    if isinstance(term, Variable):
        return (0, term.name, term.type_name, term.fresh)
    return (1, term.type_name, term.sort_key())


def tuple_key(tup: tuple[Term, ...]):
    return tuple(term_key(t) for t in tup)


def token_key(token: tuple[Value, ...]):
    return tuple((v.type_name, v.sort_key()) for v in token)


@dataclass(frozen=True)
class Place:
    name: str
    kind: Literal["control", "view"]
    color: tuple[str, ...]
    query_name: Optional[str] = None


@dataclass(frozen=True)
class ActionBinding:
    """An action name plus the actual-parameter inscription."""

    action_name: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Transition:
    name: str
    inputs: dict[str, Inscription] = field(default_factory=dict)
    outputs: dict[str, Inscription] = field(default_factory=dict)
    rollbacks: dict[str, Inscription] = field(default_factory=dict)
    guard: Guard = field(default_factory=Truth)
    action: Optional[ActionBinding] = None

    def in_vars(self) -> frozenset[Variable]:
        """Variables bound by matching tokens on input arcs."""
        out: set[Variable] = set()
        for inscription in self.inputs.values():
            out |= inscription_vars(inscription)
        return frozenset(out)

    def out_vars(self) -> frozenset[Variable]:
        """Variables of the action binding and of all output-side arcs."""
        out: set[Variable] = set()
        if self.action is not None:
            out |= {t for t in self.action.args if isinstance(t, Variable)}
        for arcs in (self.outputs, self.rollbacks):
            for inscription in arcs.values():
                out |= inscription_vars(inscription)
        return frozenset(out)

    def fresh_vars(self) -> frozenset[Variable]:
        return frozenset(v for v in self.out_vars() if v.fresh)

    def external_vars(self) -> frozenset[Variable]:
        """Output-side variables not bound by any input arc."""
        return self.out_vars() - self.in_vars()

    def variables(self) -> frozenset[Variable]:
        return self.in_vars() | self.out_vars()


class DbNet:
    """The assembled four-layer bundle."""

    def __init__(
        self,
        types: TypeDomain,
        persistence: PersistenceLayer,
        logic: DataLogicLayer,
        places: Iterable[Place],
        transitions: Iterable[Transition],
    ):
        self.types = types
        self.persistence = persistence
        self.logic = logic
        self.places: dict[str, Place] = {}
        self.transitions: dict[str, Transition] = {}
        for p in places:
            if p.name in self.places:
                raise DefinitionError(f"duplicate place name {p.name!r}")
            self.places[p.name] = p
        for t in transitions:
            if t.name in self.transitions:
                raise DefinitionError(f"duplicate transition name {t.name!r}")
            self.transitions[t.name] = t

    def control_places(self) -> list[Place]:
        return [p for p in self.places.values() if p.kind == "control"]

    def view_places(self) -> list[Place]:
        return [p for p in self.places.values() if p.kind == "view"]

    def sorted_transitions(self) -> list[Transition]:
        return [self.transitions[name] for name in sorted(self.transitions)]


@dataclass(frozen=True)
class NetDiagnostic:
    severity: Literal["error", "warning"]
    path: tuple[str, ...]
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {' / '.join(self.path)}: {self.message}"


def validate_net(net: DbNet) -> list[NetDiagnostic]:
    """Check every well-typedness clause; an empty list means a valid net.

    Warnings do not make the net invalid; they flag constructs that are
    well-formed but cannot ever fire (e.g. a view-place inscription that
    needs the same answer twice).
    """
    diags: list[NetDiagnostic] = []

    def error(path: tuple[str, ...], message: str) -> None:
        diags.append(NetDiagnostic("error", path, message))

    def warning(path: tuple[str, ...], message: str) -> None:
        diags.append(NetDiagnostic("warning", path, message))

    schema = net.persistence.schema

    # Cross-namespace sanity.
    for rel in schema.relations.values():
        try:
            net.types.type_of_predicate(rel.name)
        except DefinitionError:
            pass
        else:
            error(("schema", rel.name), "relation name collides with a predicate name")
        for col in rel.column_types:
            if col not in net.types:
                error(("schema", rel.name), f"unknown column type {col!r}")
    overlap = set(net.places) & set(net.transitions)
    for name in sorted(overlap):
        error(("net", name), "place and transition share a name")

    for c in net.persistence.constraints:
        for problem in validate_query(c.query, schema, net.types):
            error(("constraints", c.name), problem)

    for q in net.logic.queries.values():
        for problem in validate_query(q.body, schema, net.types):
            error(("queries", q.name), problem)
        for p in q.params:
            if p.type_name not in net.types:
                error(("queries", q.name), f"parameter {p.name!r} has unknown type")

    for a in net.logic.actions.values():
        for problem in validate_action(a, schema, net.types):
            error(("actions", a.name), problem)
        for p in a.params:
            if p.type_name not in net.types:
                error(("actions", a.name), f"parameter {p.name!r} has unknown type")

    for place in net.places.values():
        path = ("place", place.name)
        for col in place.color:
            if col not in net.types:
                error(path, f"unknown color type {col!r}")
        if place.kind == "view":
            if place.query_name is None:
                error(path, "view place has no assigned query")
            elif place.query_name not in net.logic.queries:
                error(path, f"unknown query {place.query_name!r}")
            else:
                q = net.logic.queries[place.query_name]
                expected = tuple(p.type_name for p in q.params)
                if place.color != expected:
                    error(
                        path,
                        f"color {place.color} does not component-wise match the "
                        f"types {expected} of the free variables of {q.name!r}",
                    )
        elif place.query_name is not None:
            error(path, "control place cannot have a query assignment")

    for t in net.transitions.values():
        _validate_transition(net, t, error, warning)

    return diags


def _check_inscription_tuple(
    net: DbNet,
    place: Place,
    tup: tuple[Term, ...],
    path: tuple[str, ...],
    error,
    *,
    allow_fresh: bool,
) -> None:
    if len(tup) != len(place.color):
        error(path, f"tuple has {len(tup)} components, color of {place.name!r} has {len(place.color)}")
        return
    for i, (term, col) in enumerate(zip(tup, place.color)):
        if isinstance(term, Variable):
            if term.fresh and not allow_fresh:
                error(path, f"fresh variable {term.name!r} not allowed on an input arc")
            if term.fresh and term.type_name in net.types and not net.types.type(term.type_name).is_infinite:
                error(path, f"fresh variable {term.name!r} has a finite type")
            if term.type_name != col:
                error(path, f"component {i + 1} is {term.type_name!r}, color says {col!r}")
        else:
            if term.type_name != col:
                error(path, f"component {i + 1} is {term.type_name!r}, color says {col!r}")
            else:
                try:
                    net.types.check_value(term)
                except DefinitionError as exc:
                    error(path, str(exc))


def _validate_transition(net: DbNet, t: Transition, error, warning) -> None:
    base = ("transition", t.name)

    for place_name, inscription in t.inputs.items():
        path = base + (f"input arc from {place_name!r}",)
        if place_name not in net.places:
            error(path, "unknown place")
            continue
        place = net.places[place_name]
        for tup, mult in inscription.items():
            _check_inscription_tuple(net, place, tup, path, error, allow_fresh=False)
            if place.kind == "view" and mult > 1:
                warning(
                    path,
                    f"inscription tuple has multiplicity {mult}, but a view place "
                    "holds every answer exactly once; this arc can never be matched",
                )

    for label, arcs in (("output arc", t.outputs), ("rollback arc", t.rollbacks)):
        for place_name, inscription in arcs.items():
            path = base + (f"{label} to {place_name!r}",)
            if place_name not in net.places:
                error(path, "unknown place")
                continue
            place = net.places[place_name]
            if place.kind != "control":
                error(path, "output and rollback arcs may target control places only")
                continue
            for tup, _ in inscription.items():
                _check_inscription_tuple(net, place, tup, path, error, allow_fresh=True)

    if t.rollbacks and t.action is None:
        error(
            base + ("rollback arcs",),
            "rollback arcs require an action binding: an action-less firing "
            "always succeeds, so the rollback flow could never be taken",
        )

    guard_path = base + ("guard",)
    for problem in validate_query(
        t.guard, net.persistence.schema, net.types, allow_relations=False, allow_quantifiers=False
    ):
        error(guard_path, problem)
    in_vars = t.in_vars()
    for v in all_vars(t.guard):
        if v not in in_vars:
            error(guard_path, f"guard variable {v.name!r} is not bound by any input arc")

    if t.action is not None:
        path = base + (f"action {t.action.action_name!r}",)
        if t.action.action_name not in net.logic.actions:
            error(path, "unknown action")
        else:
            action = net.logic.actions[t.action.action_name]
            if len(t.action.args) != len(action.params):
                error(
                    path,
                    f"binding has {len(t.action.args)} components, the action "
                    f"takes {len(action.params)} parameters",
                )
            else:
                for i, (term, param) in enumerate(zip(t.action.args, action.params)):
                    if isinstance(term, Variable):
                        if term.type_name != param.type_name:
                            error(
                                path,
                                f"component {i + 1} is {term.type_name!r}, parameter "
                                f"{param.name!r} is {param.type_name!r}",
                            )
                        if term.fresh and term.type_name in net.types and not net.types.type(term.type_name).is_infinite:
                            error(path, f"fresh variable {term.name!r} has a finite type")
                    elif term.type_name != param.type_name:
                        error(
                            path,
                            f"component {i + 1} is {term.type_name!r}, parameter "
                            f"{param.name!r} is {param.type_name!r}",
                        )
