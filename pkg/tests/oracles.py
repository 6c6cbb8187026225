"""Independent reference implementations used to cross-check the engine.

Everything here is deliberately written from the textbook definitions with
its own predicate table and its own evaluation mechanics (ground-and-check
instead of environment passing), so a bug in the engine cannot hide in a
shared code path.
"""

from __future__ import annotations

import itertools

from dbnet.datatypes import Value, Variable
from dbnet.persistence import DatabaseInstance, Fact
from dbnet.query import And, Exists, Not, PredicateAtom, RelationAtom, Truth

# A predicate table of our own, independent of dbnet.datatypes.
PREDICATES = {
    "=_s": lambda a, b: a == b,
    "=_int": lambda a, b: a == b,
    "<_int": lambda a, b: a < b,
    "succ": lambda a, b: b == a + 1,
    "=_r": lambda a, b: a == b,
    "<_r": lambda a, b: a < b,
    "=_bool": lambda a, b: a == b,
}


def brute_active_domain(instance: DatabaseInstance, type_name: str) -> list[Value]:
    """Independent scan over the facts, sorted for reproducibility."""
    values = {v for f in instance.facts for v in f.args if v.type_name == type_name}
    return sorted(values, key=lambda v: str(v.payload))


def satisfies(instance: DatabaseInstance, env: dict, query) -> bool:
    """Textbook FO satisfaction, relativized to the active domain."""
    if isinstance(query, Truth):
        return True
    if isinstance(query, RelationAtom):
        args = tuple(env[a] if isinstance(a, Variable) else a for a in query.args)
        return Fact(query.relation, args) in instance.facts
    if isinstance(query, PredicateAtom):
        args = [env[a] if isinstance(a, Variable) else a for a in query.args]
        return PREDICATES[query.pred](*(a.payload for a in args))
    if isinstance(query, Not):
        return not satisfies(instance, env, query.body)
    if isinstance(query, And):
        return satisfies(instance, env, query.left) and satisfies(instance, env, query.right)
    if isinstance(query, Exists):
        for value in brute_active_domain(instance, query.var.type_name):
            extended = dict(env)
            extended[query.var] = value
            if satisfies(instance, extended, query.body):
                return True
        return False
    raise AssertionError(f"unexpected node {query!r}")


def brute_force_answers(
    params: tuple[Variable, ...], body, instance: DatabaseInstance
) -> frozenset[tuple[Value, ...]]:
    """Enumerate every substitution over the typed active-domain product and
    keep the ones under which the body is satisfied."""
    pools = [brute_active_domain(instance, p.type_name) for p in params]
    out = set()
    for combo in itertools.product(*pools):
        env = dict(zip(params, combo))
        if satisfies(instance, env, body):
            out.add(tuple(combo))
    return frozenset(out)


def brute_compliant(constraints, instance: DatabaseInstance) -> bool:
    return all(satisfies(instance, {}, c.query) for c in constraints)


def naive_apply(action, theta: dict, facts: frozenset[Fact]) -> frozenset[Fact]:
    """Ground both template sets and compute (I - dels) | adds by hand."""

    def ground(tpl) -> Fact:
        args = tuple(theta[a] if isinstance(a, Variable) else a for a in tpl.args)
        return Fact(tpl.relation, args)

    removed = {ground(t) for t in action.dels}
    added = {ground(t) for t in action.adds}
    return frozenset((set(facts) - removed) | added)
