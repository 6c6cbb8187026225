"""Typed relational schemas, immutable fact-set instances, and constraints.

A `DatabaseInstance` is a frozen set of facts with memoized active domains,
a canonical ordering for hashing/serialization, and per-layer compliance
caches (state-space exploration revisits the same instances constantly).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from .datatypes import TypeDomain, Value, format_decimal, fresh_cache_token, render_literal
from .errors import DefinitionError

if TYPE_CHECKING:
    from .query import Query


@dataclass(frozen=True)
class RelationSchema:
    """A relation name with an ordered tuple of column type names."""

    name: str
    column_types: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.column_types) < 1:
            raise DefinitionError(f"relation {self.name!r} must have arity >= 1")

    @property
    def arity(self) -> int:
        return len(self.column_types)


class DatabaseSchema:
    """A finite set of relation schemas with pairwise distinct names."""

    def __init__(self, relations: Iterable[RelationSchema]):
        self.relations: dict[str, RelationSchema] = {}
        for rel in relations:
            if rel.name in self.relations:
                raise DefinitionError(f"duplicate relation name {rel.name!r}")
            self.relations[rel.name] = rel

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    def relation(self, name: str) -> RelationSchema:
        try:
            return self.relations[name]
        except KeyError:
            raise DefinitionError(f"unknown relation {name!r}") from None


@dataclass(frozen=True)
class Fact:
    """A ground atom R(o1, ..., on)."""

    relation: str
    args: tuple[Value, ...]

    def __repr__(self) -> str:
        return f"{self.relation}({', '.join(repr(a.payload) for a in self.args)})"

    def sort_key(self):
        return (self.relation, tuple(a.sort_key() for a in self.args))


def check_fact(schema: DatabaseSchema, types: TypeDomain, fact: Fact) -> Fact:
    rel = schema.relation(fact.relation)
    if len(fact.args) != rel.arity:
        raise DefinitionError(
            f"fact {fact!r} has {len(fact.args)} components, {fact.relation!r} has arity {rel.arity}"
        )
    for value, col_type in zip(fact.args, rel.column_types):
        if value.type_name != col_type:
            raise DefinitionError(
                f"fact {fact!r}: component {value.payload!r} is {value.type_name!r}, column is {col_type!r}"
            )
        types.check_value(value)
    return fact


class DatabaseInstance:
    """An immutable finite set of facts (set semantics, no duplicates)."""

    __slots__ = ("facts", "_adom", "_canonical", "_hash", "_answers", "_compliance")

    def __init__(self, facts: Iterable[Fact] = ()):
        self.facts: frozenset[Fact] = frozenset(facts)
        self._adom: dict[str, frozenset[Value]] = {}
        self._canonical: tuple[Fact, ...] | None = None
        self._hash: int | None = None
        self._answers: dict[int, frozenset] = {}
        self._compliance: dict[int, "ComplianceReport"] = {}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DatabaseInstance):
            return NotImplemented
        return self.facts == other.facts

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.facts)
        return self._hash

    def __len__(self) -> int:
        return len(self.facts)

    def __contains__(self, fact: Fact) -> bool:
        return fact in self.facts

    def __repr__(self) -> str:
        return f"DatabaseInstance({sorted(map(repr, self.facts))})"

    def canonical(self) -> tuple[Fact, ...]:
        """Facts in the canonical (relation, tuple) lexicographic order."""
        if self._canonical is None:
            self._canonical = tuple(sorted(self.facts, key=Fact.sort_key))
        return self._canonical

    def active_domain(self, type_name: str) -> frozenset[Value]:
        """All values of the given type occurring in some fact."""
        cached = self._adom.get(type_name)
        if cached is None:
            cached = frozenset(
                v for f in self.facts for v in f.args if v.type_name == type_name
            )
            self._adom[type_name] = cached
        return cached

    def with_changes(self, add: Iterable[Fact] = (), remove: Iterable[Fact] = ()) -> "DatabaseInstance":
        """A new instance equal to (self - remove) + add; self is unchanged."""
        return DatabaseInstance((self.facts - frozenset(remove)) | frozenset(add))

    # --- caches keyed by per-object tokens (used by query/compliance code) ---

    def cached_answers(self, token: int) -> frozenset | None:
        return self._answers.get(token)

    def store_answers(self, token: int, result: frozenset) -> frozenset:
        self._answers[token] = result
        return result

    def cached_compliance(self, token: int) -> "ComplianceReport | None":
        return self._compliance.get(token)

    def store_compliance(self, token: int, report: "ComplianceReport") -> "ComplianceReport":
        self._compliance[token] = report
        return report


def active_domain(instance: DatabaseInstance, type_name: str) -> frozenset[Value]:
    return instance.active_domain(type_name)


def validate_instance(schema: DatabaseSchema, types: TypeDomain, instance: DatabaseInstance) -> None:
    """Raise DefinitionError unless every fact is well-typed for the schema."""
    for fact in instance.facts:
        check_fact(schema, types, fact)


@dataclass(frozen=True)
class Constraint:
    """A named boolean query that every compliant instance must satisfy."""

    name: str
    query: "Query"


@dataclass(frozen=True)
class ComplianceReport:
    ok: bool
    violated: tuple[str, ...] = ()


class PersistenceLayer:
    """A database schema together with boolean first-order constraints."""

    def __init__(self, schema: DatabaseSchema, constraints: Iterable[Constraint] = ()):
        from .query import free_vars

        self.schema = schema
        self.constraints: tuple[Constraint, ...] = tuple(constraints)
        self.cache_token = fresh_cache_token()
        seen: set[str] = set()
        for c in self.constraints:
            if c.name in seen:
                raise DefinitionError(f"duplicate constraint name {c.name!r}")
            seen.add(c.name)
            if free_vars(c.query):
                raise DefinitionError(f"constraint {c.name!r} is not a boolean query")


def check_compliance(layer: PersistenceLayer, instance: DatabaseInstance) -> ComplianceReport:
    """Evaluate every constraint; report the names of the violated ones."""
    cached = instance.cached_compliance(layer.cache_token)
    if cached is not None:
        return cached
    from .query import entails

    violated = tuple(
        c.name for c in layer.constraints if not entails(instance, {}, c.query)
    )
    report = ComplianceReport(ok=not violated, violated=violated)
    return instance.store_compliance(layer.cache_token, report)


# --- serialization -----------------------------------------------------------


def fact_to_text(fact: Fact) -> str:
    return f"{fact.relation}({', '.join(render_literal(a) for a in fact.args)})"


def instance_to_text(instance: DatabaseInstance) -> str:
    """One `Rel(v1, v2, ...)` line per fact, canonically ordered."""
    return "".join(fact_to_text(f) + "\n" for f in instance.canonical())


def instance_from_text(text: str, schema: DatabaseSchema, types: TypeDomain) -> DatabaseInstance:
    facts = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            facts.append(_parse_fact_line(line, schema))
        except DefinitionError as exc:
            raise DefinitionError(f"line {lineno}: {exc}") from None
    instance = DatabaseInstance(facts)
    validate_instance(schema, types, instance)
    return instance


def _parse_fact_line(line: str, schema: DatabaseSchema) -> Fact:
    open_paren = line.find("(")
    if open_paren <= 0 or not line.endswith(")"):
        raise DefinitionError(f"expected Rel(v1, ...), got {line!r}")
    name = line[:open_paren].strip()
    rel = schema.relation(name)
    body = line[open_paren + 1 : -1]
    literals = _split_literals(body)
    if len(literals) != rel.arity:
        raise DefinitionError(f"{name!r} has arity {rel.arity}, got {len(literals)} values")
    args = tuple(
        _parse_literal(lit, col) for lit, col in zip(literals, rel.column_types)
    )
    return Fact(name, args)


def _split_literals(body: str) -> list[str]:
    parts: list[str] = []
    depth_in_string = False
    escaped = False
    current: list[str] = []
    for ch in body:
        if depth_in_string:
            current.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                depth_in_string = False
        elif ch == '"':
            depth_in_string = True
            current.append(ch)
        elif ch == ",":
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    last = "".join(current).strip()
    if last or parts:
        parts.append(last)
    if depth_in_string:
        raise DefinitionError("unterminated string literal")
    return parts


def _parse_literal(text: str, type_name: str) -> Value:
    from .datatypes import parse_literal_payload

    value = parse_literal_payload(text)
    if value.type_name != type_name:
        raise DefinitionError(
            f"literal {text} is {value.type_name!r}, expected {type_name!r}"
        )
    return value


def value_to_json(value: Value) -> object:
    if value.type_name == "real" or not isinstance(value.payload, (str, int, bool)):
        return format_decimal(value.payload)  # exact decimals travel as strings
    return value.payload


def instance_to_json(instance: DatabaseInstance) -> dict[str, list[list[object]]]:
    """Relation name -> canonically ordered list of value tuples."""
    out: dict[str, list[list[object]]] = {}
    for fact in instance.canonical():
        out.setdefault(fact.relation, []).append([value_to_json(a) for a in fact.args])
    return out


def instance_from_json(data: dict, schema: DatabaseSchema, types: TypeDomain) -> DatabaseInstance:
    from .datatypes import payload_from_json

    facts = []
    for name, rows in data.items():
        rel = schema.relation(name)
        for row in rows:
            if len(row) != rel.arity:
                raise DefinitionError(f"{name!r}: row {row!r} has wrong arity")
            args = tuple(
                payload_from_json(cell, col) for cell, col in zip(row, rel.column_types)
            )
            facts.append(Fact(name, args))
    instance = DatabaseInstance(facts)
    validate_instance(schema, types, instance)
    return instance


def instance_to_json_text(instance: DatabaseInstance) -> str:
    return json.dumps(instance_to_json(instance), sort_keys=True, ensure_ascii=False)
