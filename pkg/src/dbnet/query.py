"""First-order queries over typed instances, evaluated under active-domain
semantics: quantifiers range over the values of the matching type that occur
in the instance, which keeps evaluation finite and domain-independent.

The AST is the minimal fragment (predicate atom, relation atom, negation,
conjunction, existential); disjunction, implication, and universal
quantification are provided as expansion helpers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .datatypes import (
    Substitution,
    Term,
    TypeDomain,
    Value,
    Variable,
    builtin_catalog,
    fresh_cache_token,
)
from .errors import BindingError, DefinitionError
from .persistence import DatabaseInstance, DatabaseSchema, Fact


@dataclass(frozen=True)
class Truth:
    """The trivially true formula (guard syntax only)."""


@dataclass(frozen=True)
class PredicateAtom:
    pred: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class RelationAtom:
    relation: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Not:
    body: "Query"


@dataclass(frozen=True)
class And:
    left: "Query"
    right: "Query"


@dataclass(frozen=True)
class Exists:
    var: Variable
    body: "Query"


Query = Union[Truth, PredicateAtom, RelationAtom, Not, And, Exists]

#: Guards are the quantifier- and relation-free fragment of Query.
Guard = Query


def or_(left: Query, right: Query) -> Query:
    return Not(And(Not(left), Not(right)))


def implies(left: Query, right: Query) -> Query:
    return Not(And(left, Not(right)))


def forall(var: Variable, body: Query) -> Query:
    return Not(Exists(var, Not(body)))


def and_all(conjuncts: list[Query]) -> Query:
    if not conjuncts:
        return Truth()
    out = conjuncts[0]
    for q in conjuncts[1:]:
        out = And(out, q)
    return out


def free_vars(query: Query) -> tuple[Variable, ...]:
    """Free variables in order of first free occurrence."""
    seen: dict[Variable, None] = {}

    def walk(q: Query, bound: frozenset[Variable]) -> None:
        if isinstance(q, (PredicateAtom, RelationAtom)):
            for arg in q.args:
                if isinstance(arg, Variable) and arg not in bound and arg not in seen:
                    seen[arg] = None
        elif isinstance(q, Not):
            walk(q.body, bound)
        elif isinstance(q, And):
            walk(q.left, bound)
            walk(q.right, bound)
        elif isinstance(q, Exists):
            walk(q.body, bound | {q.var})

    walk(query, frozenset())
    return tuple(seen)


def all_vars(query: Query) -> tuple[Variable, ...]:
    """Every variable occurring in the formula, free or bound."""
    seen: dict[Variable, None] = {}

    def walk(q: Query) -> None:
        if isinstance(q, (PredicateAtom, RelationAtom)):
            for arg in q.args:
                if isinstance(arg, Variable):
                    seen.setdefault(arg)
        elif isinstance(q, Not):
            walk(q.body)
        elif isinstance(q, And):
            walk(q.left)
            walk(q.right)
        elif isinstance(q, Exists):
            seen.setdefault(q.var)
            walk(q.body)

    walk(query)
    return tuple(seen)


def validate_query(
    query: Query,
    schema: DatabaseSchema,
    types: TypeDomain,
    *,
    allow_relations: bool = True,
    allow_quantifiers: bool = True,
) -> list[str]:
    """Well-typedness diagnostics; an empty list means the query is fine."""
    problems: list[str] = []

    def check_args(args: tuple[Term, ...], expected: tuple[str, ...], where: str) -> None:
        if len(args) != len(expected):
            problems.append(f"{where}: expected {len(expected)} arguments, got {len(args)}")
            return
        for i, (arg, type_name) in enumerate(zip(args, expected)):
            if isinstance(arg, Variable):
                if arg.fresh:
                    problems.append(f"{where}: fresh variable {arg.name!r} not allowed in a query")
                if arg.type_name != type_name:
                    problems.append(
                        f"{where}: argument {i + 1} is {arg.type_name!r}, expected {type_name!r}"
                    )
            else:
                if arg.type_name != type_name:
                    problems.append(
                        f"{where}: argument {i + 1} is {arg.type_name!r}, expected {type_name!r}"
                    )
                else:
                    try:
                        types.check_value(arg)
                    except DefinitionError as exc:
                        problems.append(f"{where}: {exc}")

    def walk(q: Query) -> None:
        if isinstance(q, Truth):
            return
        if isinstance(q, PredicateAtom):
            try:
                dt = types.type_of_predicate(q.pred)
            except DefinitionError as exc:
                problems.append(str(exc))
                return
            pred = dt.predicates[q.pred]
            check_args(q.args, (dt.name,) * pred.arity, f"predicate {q.pred!r}")
        elif isinstance(q, RelationAtom):
            if not allow_relations:
                problems.append(f"relation atom {q.relation!r} not allowed here")
                return
            try:
                rel = schema.relation(q.relation)
            except DefinitionError as exc:
                problems.append(str(exc))
                return
            check_args(q.args, rel.column_types, f"relation {q.relation!r}")
        elif isinstance(q, Not):
            walk(q.body)
        elif isinstance(q, And):
            walk(q.left)
            walk(q.right)
        elif isinstance(q, Exists):
            if not allow_quantifiers:
                problems.append("quantifier not allowed here")
            if q.var.fresh:
                problems.append(f"cannot quantify over fresh variable {q.var.name!r}")
            if q.var.type_name not in types:
                problems.append(f"quantified variable {q.var.name!r} has unknown type")
            walk(q.body)
        else:
            problems.append(f"unknown query node {q!r}")

    walk(query)
    return problems


def entails(instance: DatabaseInstance, theta: Substitution, query: Query, *, types: TypeDomain | None = None) -> bool:
    """The inductive entailment relation; `theta` must cover free(query)."""
    types = types or _CATALOG
    env = dict(theta)
    return _entails(instance, env, query, types)


def _ground(args: tuple[Term, ...], env: Substitution) -> tuple[Value, ...]:
    out = []
    for arg in args:
        if isinstance(arg, Variable):
            try:
                arg = env[arg]
            except KeyError:
                raise BindingError(f"unbound variable {arg!r} during evaluation") from None
        out.append(arg)
    return tuple(out)


def _entails(instance: DatabaseInstance, env: Substitution, query: Query, types: TypeDomain) -> bool:
    if isinstance(query, RelationAtom):
        return Fact(query.relation, _ground(query.args, env)) in instance.facts
    if isinstance(query, PredicateAtom):
        return types.eval_predicate(query.pred, _ground(query.args, env))
    if isinstance(query, Not):
        return not _entails(instance, env, query.body, types)
    if isinstance(query, And):
        return _entails(instance, env, query.left, types) and _entails(
            instance, env, query.right, types
        )
    if isinstance(query, Exists):
        var = query.var
        saved = env.get(var, _MISSING)
        try:
            for value in instance.active_domain(var.type_name):
                env[var] = value
                if _entails(instance, env, query.body, types):
                    return True
            return False
        finally:
            if saved is _MISSING:
                env.pop(var, None)
            else:
                env[var] = saved
    if isinstance(query, Truth):
        return True
    raise DefinitionError(f"unknown query node {query!r}")


_MISSING = object()


@dataclass(frozen=True)
class NamedQuery:
    """A query with an explicitly ordered tuple of free variables."""

    name: str
    params: tuple[Variable, ...]
    body: Query
    cache_token: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if set(self.params) != set(free_vars(self.body)):
            raise DefinitionError(
                f"query {self.name!r}: declared parameters {[v.name for v in self.params]} "
                f"do not match the free variables of the body"
            )
        if len(set(self.params)) != len(self.params):
            raise DefinitionError(f"query {self.name!r}: duplicate parameters")
        object.__setattr__(self, "cache_token", fresh_cache_token())


def answers(
    named: NamedQuery, instance: DatabaseInstance, *, types: TypeDomain | None = None
) -> frozenset[tuple[Value, ...]]:
    """All substitutions (as value tuples in declared parameter order) over
    the typed active-domain product under which the body holds.

    A boolean query answers {()} when it holds and the empty set otherwise.
    """
    cached = instance.cached_answers(named.cache_token)
    if cached is not None:
        return cached
    types = types or _CATALOG
    pools = [sorted(instance.active_domain(p.type_name), key=Value.sort_key) for p in named.params]
    env: Substitution = {}
    result = set()
    _collect(instance, env, named.params, pools, 0, named.body, types, result)
    return instance.store_answers(named.cache_token, frozenset(result))


def _collect(instance, env, params, pools, i, body, types, result) -> None:
    if i == len(params):
        if _entails(instance, env, body, types):
            result.add(tuple(env[p] for p in params))
        return
    var = params[i]
    for value in pools[i]:
        env[var] = value
        _collect(instance, env, params, pools, i + 1, body, types, result)
    env.pop(var, None)


def holds(named: NamedQuery, instance: DatabaseInstance, *, types: TypeDomain | None = None) -> bool:
    """ans(Q, I) = true, for boolean queries."""
    return () in answers(named, instance, types=types)


def eval_guard(guard: Guard, theta: Substitution, *, types: TypeDomain | None = None) -> bool:
    """Evaluate the quantifier- and relation-free fragment; no database."""
    types = types or _CATALOG
    if isinstance(guard, Truth):
        return True
    if isinstance(guard, PredicateAtom):
        return types.eval_predicate(guard.pred, _ground(guard.args, theta))
    if isinstance(guard, Not):
        return not eval_guard(guard.body, theta, types=types)
    if isinstance(guard, And):
        return eval_guard(guard.left, theta, types=types) and eval_guard(
            guard.right, theta, types=types
        )
    raise DefinitionError(f"node {type(guard).__name__} is not allowed in a guard")


_CATALOG = builtin_catalog()
