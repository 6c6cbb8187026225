"""Exception hierarchy shared across the package."""

from __future__ import annotations


class DbNetError(Exception):
    """Base class for all errors raised by this package."""


class DefinitionError(DbNetError):
    """A net, schema, action, or query is ill-formed.

    Raised for mistakes in the model itself (unknown predicate, arity
    mismatch, ill-typed term, ...), never for runtime nondeterminism.
    """


class BindingError(DbNetError):
    """An internal binding invariant was broken (e.g. unbound variable).

    Seeing this exception means a bug in binding enumeration or in caller
    code, not a problem with the model.
    """


class ConfigError(DbNetError):
    """A run configuration is unusable (e.g. missing input domain)."""
