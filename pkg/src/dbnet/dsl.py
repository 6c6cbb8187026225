"""The `.dbnet` scenario format: lexer, parser, serializer, and elaborator.

A scenario file is one document with named sections (types, schema,
constraints, queries, actions, net, init, domains, config). `parse` builds
a purely syntactic `NetDocument` carrying source spans; `serialize` renders
a document back to canonical text such that parse(serialize(d)) is
structurally equal to d; `elaborate` resolves names and types into engine
objects, collecting span-carrying diagnostics instead of failing fast.

The grammar is documented in docs/dsl.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .control import ActionBinding, DbNet, Place, Transition, validate_net
from .datalogic import Action, DataLogicLayer, FactTemplate
from .datatypes import (
    EQUALITY_PREDICATES,
    ORDER_PREDICATES,
    TypeDomain,
    Value,
    Variable,
    builtin_catalog,
    canon_decimal,
    render_literal,
    unescape_string,
)
from .errors import DbNetError
from .multiset import Multiset
from .persistence import (
    Constraint,
    DatabaseInstance,
    DatabaseSchema,
    Fact,
    PersistenceLayer,
    RelationSchema,
    check_fact,
    value_to_json,
)
from .query import (
    And,
    Exists,
    NamedQuery,
    Not,
    PredicateAtom,
    Query,
    RelationAtom,
    Truth,
    all_vars,
    forall,
    free_vars,
    implies,
    or_,
    validate_query,
)
from .semantics import Snapshot, make_snapshot

CATALOG_TYPES = ("string", "int", "real", "bool")

RESERVED = {
    "types", "schema", "constraints", "queries", "actions", "net", "init",
    "domains", "config", "place", "view", "transition", "vars", "fresh",
    "in", "out", "rollback", "guard", "action", "add", "del", "facts",
    "marking", "exists", "forall", "not", "and", "or", "true", "false",
}


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NO_SPAN = Span(0, 0, 0, 0)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    span: Span
    message: str
    clause: str = ""

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span != NO_SPAN else ""
        tag = f" [{self.clause}]" if self.clause else ""
        return f"{where}{self.severity}: {self.message}{tag}"


class DslSyntaxError(DbNetError):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


class DslValidationError(DbNetError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


# --- document AST (purely syntactic; spans never take part in equality) ------


@dataclass(frozen=True)
class TypeRef:
    name: str
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class VarRef:
    name: str
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class LitTerm:
    value: Value
    span: Span = field(compare=False, default=NO_SPAN)


TermNode = "VarRef | LitTerm"


@dataclass(frozen=True)
class FTrue:
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class FAtom:
    name: str
    args: tuple
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class FCompare:
    op: str  # "=" | "<"
    left: object
    right: object
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class FNot:
    body: object
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class FAnd:
    left: object
    right: object
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class FOr:
    left: object
    right: object
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class FImplies:
    left: object
    right: object
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class ParamDecl:
    name: str
    type_name: str
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class FExists:
    var: ParamDecl
    body: object
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class FForall:
    var: ParamDecl
    body: object
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class RelDecl:
    name: str
    columns: tuple[TypeRef, ...]
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class ConstraintDecl:
    name: str
    body: object
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class QueryDecl:
    name: str
    params: tuple[ParamDecl, ...]
    body: object
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class TemplateAtom:
    relation: str
    args: tuple
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class ActionDecl:
    name: str
    params: tuple[ParamDecl, ...]
    dels: tuple[TemplateAtom, ...]
    adds: tuple[TemplateAtom, ...]
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class PlaceDecl:
    name: str
    kind: str  # "control" | "view"
    color: tuple[TypeRef, ...]
    query_name: Optional[str] = None
    span: Span = field(compare=False, default=NO_SPAN)
    query_span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class InscTuple:
    mult: int
    terms: tuple
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class ArcDecl:
    place: str
    tuples: tuple[InscTuple, ...]
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class ActionRef:
    name: str
    args: tuple
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class TransitionDecl:
    name: str
    var_decls: tuple[ParamDecl, ...]
    fresh_decls: tuple[ParamDecl, ...]
    inputs: tuple[ArcDecl, ...]
    outputs: tuple[ArcDecl, ...]
    rollbacks: tuple[ArcDecl, ...]
    guard: object
    action: Optional[ActionRef]
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class MarkingEntry:
    place: str
    tokens: tuple[InscTuple, ...]
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class DomainDecl:
    type_name: str
    values: tuple[LitTerm, ...]
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class ConfigEntry:
    key: str
    value: int
    span: Span = field(compare=False, default=NO_SPAN)


@dataclass(frozen=True)
class NetDocument:
    types: Optional[tuple[TypeRef, ...]] = None
    schema: tuple[RelDecl, ...] = ()
    constraints: tuple[ConstraintDecl, ...] = ()
    queries: tuple[QueryDecl, ...] = ()
    actions: tuple[ActionDecl, ...] = ()
    places: tuple[PlaceDecl, ...] = ()
    transitions: tuple[TransitionDecl, ...] = ()
    init_facts: tuple[TemplateAtom, ...] = ()
    init_marking: tuple[MarkingEntry, ...] = ()
    domains: tuple[DomainDecl, ...] = ()
    config: tuple[ConfigEntry, ...] = ()


# --- lexer --------------------------------------------------------------------


@dataclass(frozen=True)
class _Tok:
    kind: str  # IDENT INT REAL STRING PUNCT EOF
    text: str
    span: Span
    value: object = None


_PUNCT_TWO = {"->", "<-", ":=", "><"}
_PUNCT_ONE = set("{}()<>,;:.*=[]")


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col, i = 1, 1, 0
    n = len(text)

    def span(l0, c0, l1, c1):
        return Span(l0, c0, l1, c1)

    def fail(msg, l0, c0):
        raise DslSyntaxError(Diagnostic("error", span(l0, c0, l0, c0 + 1), msg))

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        l0, c0 = line, col
        if ch == '"':
            j = i + 1
            escaped = False
            while j < n:
                c = text[j]
                if c == "\n":
                    fail("unterminated string literal", l0, c0)
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    break
                j += 1
            if j >= n:
                fail("unterminated string literal", l0, c0)
            raw = text[i + 1 : j]
            try:
                value = unescape_string(raw)
            except DbNetError:
                fail("bad escape in string literal", l0, c0)
            width = j + 1 - i
            toks.append(_Tok("STRING", text[i : j + 1], span(l0, c0, l0, c0 + width), value))
            i = j + 1
            col += width
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            kind = "INT"
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                kind = "REAL"
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            lexeme = text[i:j]
            value = int(lexeme) if kind == "INT" else canon_decimal(lexeme)
            toks.append(_Tok(kind, lexeme, span(l0, c0, l0, c0 + (j - i)), value))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            lexeme = text[i:j]
            toks.append(_Tok("IDENT", lexeme, span(l0, c0, l0, c0 + (j - i))))
            col += j - i
            i = j
            continue
        two = text[i : i + 2]
        # '<' then a negative literal (as in <-44, x>) is not the '<-' arrow.
        if two == "<-" and i + 2 < n and text[i + 2].isdigit():
            two = ""
        if two in _PUNCT_TWO:
            toks.append(_Tok("PUNCT", two, span(l0, c0, l0, c0 + 2)))
            i += 2
            col += 2
            continue
        if ch in _PUNCT_ONE or ch == "-":
            if ch == "-":
                fail("stray '-'", l0, c0)
            toks.append(_Tok("PUNCT", ch, span(l0, c0, l0, c0 + 1)))
            i += 1
            col += 1
            continue
        fail(f"unexpected character {ch!r}", l0, c0)
    toks.append(_Tok("EOF", "", Span(line, col, line, col)))
    return toks


# --- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def fail(self, message: str, tok: _Tok | None = None) -> None:
        tok = tok or self.cur
        raise DslSyntaxError(Diagnostic("error", tok.span, message))

    def advance(self) -> _Tok:
        tok = self.cur
        self.pos += 1
        return tok

    def at_punct(self, text: str) -> bool:
        return self.cur.kind == "PUNCT" and self.cur.text == text

    def at_kw(self, word: str) -> bool:
        return self.cur.kind == "IDENT" and self.cur.text == word

    def eat_punct(self, text: str) -> _Tok:
        if not self.at_punct(text):
            self.fail(f"expected {text!r}, found {self.cur.text or self.cur.kind!r}")
        return self.advance()

    def eat_kw(self, word: str) -> _Tok:
        if not self.at_kw(word):
            self.fail(f"expected {word!r}, found {self.cur.text or self.cur.kind!r}")
        return self.advance()

    def eat_name(self, what: str) -> _Tok:
        if self.cur.kind != "IDENT":
            self.fail(f"expected {what}, found {self.cur.text or self.cur.kind!r}")
        if self.cur.text in RESERVED:
            self.fail(f"{self.cur.text!r} is a reserved word and cannot name a {what}")
        return self.advance()

    # -- document --------------------------------------------------------

    def document(self) -> NetDocument:
        sections: dict[str, object] = {}
        order = []
        while self.cur.kind != "EOF":
            tok = self.cur
            if tok.kind != "IDENT" or tok.text not in (
                "types", "schema", "constraints", "queries", "actions",
                "net", "init", "domains", "config",
            ):
                self.fail("expected a section header")
            if tok.text in sections:
                self.fail(f"duplicate section {tok.text!r}", tok)
            sections[tok.text] = getattr(self, f"_sec_{tok.text}")()
            order.append(tok.text)
        if "schema" not in sections:
            self.fail("missing schema section", self.cur)
        net = sections.get("net", ((), ()))
        init = sections.get("init", ((), ()))
        return NetDocument(
            types=sections.get("types"),
            schema=sections.get("schema", ()),
            constraints=sections.get("constraints", ()),
            queries=sections.get("queries", ()),
            actions=sections.get("actions", ()),
            places=net[0],
            transitions=net[1],
            init_facts=init[0],
            init_marking=init[1],
            domains=sections.get("domains", ()),
            config=sections.get("config", ()),
        )

    def _sec_types(self):
        self.eat_kw("types")
        self.eat_punct("{")
        refs = []
        while not self.at_punct("}"):
            tok = self.advance()
            if tok.kind != "IDENT":
                self.fail("expected a type name", tok)
            refs.append(TypeRef(tok.text, tok.span))
            if self.at_punct(","):
                self.advance()
        self.eat_punct("}")
        return tuple(refs)

    def _sec_schema(self):
        self.eat_kw("schema")
        self.eat_punct("{")
        rels = []
        while not self.at_punct("}"):
            name = self.eat_name("relation name")
            self.eat_punct("(")
            cols = []
            while not self.at_punct(")"):
                tok = self.advance()
                if tok.kind != "IDENT":
                    self.fail("expected a type name", tok)
                cols.append(TypeRef(tok.text, tok.span))
                if self.at_punct(","):
                    self.advance()
            self.eat_punct(")")
            rels.append(RelDecl(name.text, tuple(cols), name.span))
        self.eat_punct("}")
        return tuple(rels)

    def _sec_constraints(self):
        self.eat_kw("constraints")
        self.eat_punct("{")
        out = []
        while not self.at_punct("}"):
            name = self.eat_name("constraint name")
            self.eat_punct(":")
            body = self.formula()
            out.append(ConstraintDecl(name.text, body, name.span))
        self.eat_punct("}")
        return tuple(out)

    def _sec_queries(self):
        self.eat_kw("queries")
        self.eat_punct("{")
        out = []
        while not self.at_punct("}"):
            name = self.eat_name("query name")
            params = self.param_list()
            self.eat_punct(":=")
            body = self.formula()
            out.append(QueryDecl(name.text, params, body, name.span))
        self.eat_punct("}")
        return tuple(out)

    def param_list(self) -> tuple[ParamDecl, ...]:
        self.eat_punct("(")
        params = []
        while not self.at_punct(")"):
            name = self.eat_name("variable name")
            self.eat_punct(":")
            type_tok = self.advance()
            if type_tok.kind != "IDENT":
                self.fail("expected a type name", type_tok)
            params.append(ParamDecl(name.text, type_tok.text, name.span))
            if self.at_punct(","):
                self.advance()
        self.eat_punct(")")
        return tuple(params)

    def _sec_actions(self):
        self.eat_kw("actions")
        self.eat_punct("{")
        out = []
        while not self.at_punct("}"):
            self.eat_kw("action")
            name = self.eat_name("action name")
            params = self.param_list()
            self.eat_punct("{")
            dels: tuple = ()
            adds: tuple = ()
            seen = set()
            while not self.at_punct("}"):
                if self.at_kw("del") or self.at_kw("add"):
                    which = self.advance().text
                    if which in seen:
                        self.fail(f"duplicate {which!r} block")
                    seen.add(which)
                    atoms = self.template_block()
                    if which == "del":
                        dels = atoms
                    else:
                        adds = atoms
                else:
                    self.fail("expected 'add' or 'del'")
            self.eat_punct("}")
            out.append(ActionDecl(name.text, params, dels, adds, name.span))
        self.eat_punct("}")
        return tuple(out)

    def template_block(self) -> tuple[TemplateAtom, ...]:
        self.eat_punct("{")
        atoms = []
        while not self.at_punct("}"):
            atoms.append(self.template_atom())
            if self.at_punct(","):
                self.advance()
        self.eat_punct("}")
        return tuple(atoms)

    def template_atom(self) -> TemplateAtom:
        name = self.eat_name("relation name")
        self.eat_punct("(")
        args = []
        while not self.at_punct(")"):
            args.append(self.term())
            if self.at_punct(","):
                self.advance()
        self.eat_punct(")")
        return TemplateAtom(name.text, tuple(args), name.span)

    def term(self):
        tok = self.cur
        if tok.kind == "IDENT" and tok.text in ("true", "false"):
            self.advance()
            return LitTerm(Value("bool", tok.text == "true"), tok.span)
        if tok.kind == "IDENT":
            self.eat_name("variable name")
            return VarRef(tok.text, tok.span)
        if tok.kind == "INT":
            self.advance()
            return LitTerm(Value("int", tok.value), tok.span)
        if tok.kind == "REAL":
            self.advance()
            return LitTerm(Value("real", tok.value), tok.span)
        if tok.kind == "STRING":
            self.advance()
            return LitTerm(Value("string", tok.value), tok.span)
        self.fail("expected a variable or a literal")

    # -- formulas ----------------------------------------------------------

    def formula(self):
        left = self.or_expr()
        if self.at_punct("->"):
            tok = self.advance()
            right = self.formula()
            return FImplies(left, right, tok.span)
        return left

    def or_expr(self):
        node = self.and_expr()
        while self.at_kw("or"):
            tok = self.advance()
            node = FOr(node, self.and_expr(), tok.span)
        return node

    def and_expr(self):
        node = self.unary()
        while self.at_kw("and"):
            tok = self.advance()
            node = FAnd(node, self.unary(), tok.span)
        return node

    def unary(self):
        if self.at_kw("not"):
            tok = self.advance()
            return FNot(self.unary(), tok.span)
        if self.at_kw("exists") or self.at_kw("forall"):
            tok = self.advance()
            name = self.eat_name("variable name")
            self.eat_punct(":")
            type_tok = self.advance()
            if type_tok.kind != "IDENT":
                self.fail("expected a type name", type_tok)
            self.eat_punct(".")
            body = self.formula()
            decl = ParamDecl(name.text, type_tok.text, name.span)
            cls = FExists if tok.text == "exists" else FForall
            return cls(decl, body, tok.span)
        return self.primary()

    def primary(self):
        if self.at_punct("("):
            self.advance()
            node = self.formula()
            self.eat_punct(")")
            return node
        tok = self.cur
        if tok.kind == "IDENT" and tok.text == "true" and not (
            self.peek().kind == "PUNCT" and self.peek().text in ("=", "<")
        ):
            self.advance()
            return FTrue(tok.span)
        if tok.kind == "IDENT" and tok.text not in RESERVED and self.peek().kind == "PUNCT" and self.peek().text == "(":
            name = self.advance()
            self.eat_punct("(")
            args = []
            while not self.at_punct(")"):
                args.append(self.term())
                if self.at_punct(","):
                    self.advance()
            self.eat_punct(")")
            return FAtom(name.text, tuple(args), name.span)
        left = self.term()
        if self.at_punct("=") or self.at_punct("<"):
            op = self.advance()
            right = self.term()
            return FCompare(op.text, left, right, op.span)
        self.fail("expected '=' or '<' after a term")

    # -- net ---------------------------------------------------------------

    def _sec_net(self):
        self.eat_kw("net")
        self.eat_punct("{")
        places: list[PlaceDecl] = []
        transitions: list[TransitionDecl] = []
        while not self.at_punct("}"):
            if self.at_kw("place") or self.at_kw("view"):
                places.append(self.place_decl())
            elif self.at_kw("transition"):
                transitions.append(self.transition_decl())
            else:
                self.fail("expected 'place', 'view place', or 'transition'")
        self.eat_punct("}")
        return tuple(places), tuple(transitions)

    def place_decl(self) -> PlaceDecl:
        kind = "control"
        if self.at_kw("view"):
            self.advance()
            kind = "view"
        self.eat_kw("place")
        name = self.eat_name("place name")
        self.eat_punct(":")
        self.eat_punct("(")
        color = []
        while not self.at_punct(")"):
            tok = self.advance()
            if tok.kind != "IDENT":
                self.fail("expected a type name", tok)
            color.append(TypeRef(tok.text, tok.span))
            if self.at_punct("><"):
                self.advance()
        self.eat_punct(")")
        query_name = None
        query_span = NO_SPAN
        if self.at_punct("<-"):
            self.advance()
            q = self.eat_name("query name")
            query_name, query_span = q.text, q.span
        return PlaceDecl(name.text, kind, tuple(color), query_name, name.span, query_span)

    def transition_decl(self) -> TransitionDecl:
        self.eat_kw("transition")
        name = self.eat_name("transition name")
        self.eat_punct("{")
        var_decls: tuple = ()
        fresh_decls: tuple = ()
        inputs: tuple = ()
        outputs: tuple = ()
        rollbacks: tuple = ()
        guard: object = FTrue()
        action: Optional[ActionRef] = None
        seen: set[str] = set()
        while not self.at_punct("}"):
            tok = self.cur
            if tok.kind != "IDENT":
                self.fail("expected a transition clause")
            clause = tok.text
            if clause in seen:
                self.fail(f"duplicate {clause!r} clause", tok)
            if clause in ("vars", "fresh"):
                self.advance()
                self.eat_punct("{")
                params = []
                while not self.at_punct("}"):
                    pname = self.eat_name("variable name")
                    self.eat_punct(":")
                    type_tok = self.advance()
                    if type_tok.kind != "IDENT":
                        self.fail("expected a type name", type_tok)
                    params.append(ParamDecl(pname.text, type_tok.text, pname.span))
                    if self.at_punct(","):
                        self.advance()
                self.eat_punct("}")
                if clause == "vars":
                    var_decls = tuple(params)
                else:
                    fresh_decls = tuple(params)
            elif clause in ("in", "out", "rollback"):
                self.advance()
                arcs = self.arc_block()
                if clause == "in":
                    inputs = arcs
                elif clause == "out":
                    outputs = arcs
                else:
                    rollbacks = arcs
            elif clause == "guard":
                self.advance()
                guard = self.formula()
            elif clause == "action":
                self.advance()
                aname = self.eat_name("action name")
                self.eat_punct("(")
                args = []
                while not self.at_punct(")"):
                    args.append(self.term())
                    if self.at_punct(","):
                        self.advance()
                self.eat_punct(")")
                action = ActionRef(aname.text, tuple(args), aname.span)
            else:
                self.fail(f"unknown transition clause {clause!r}", tok)
            seen.add(clause)
        self.eat_punct("}")
        return TransitionDecl(
            name.text, var_decls, fresh_decls, inputs, outputs, rollbacks,
            guard, action, name.span,
        )

    def arc_block(self) -> tuple[ArcDecl, ...]:
        self.eat_punct("{")
        arcs = []
        while not self.at_punct("}"):
            pname = self.eat_name("place name")
            self.eat_punct("->")
            tuples = [self.insc_tuple()]
            while self.at_punct(","):
                self.advance()
                tuples.append(self.insc_tuple())
            arcs.append(ArcDecl(pname.text, tuple(tuples), pname.span))
            if self.at_punct(";"):
                self.advance()
        self.eat_punct("}")
        return tuple(arcs)

    def insc_tuple(self) -> InscTuple:
        mult = 1
        start = self.cur
        if self.cur.kind == "INT":
            mult = self.advance().value
            if mult < 1:
                self.fail("multiplicity must be positive", start)
            self.eat_punct("*")
        self.eat_punct("<")
        terms = []
        while not self.at_punct(">"):
            terms.append(self.term())
            if self.at_punct(","):
                self.advance()
        self.eat_punct(">")
        return InscTuple(mult, tuple(terms), start.span)

    # -- init / domains / config -------------------------------------------

    def _sec_init(self):
        self.eat_kw("init")
        self.eat_punct("{")
        facts: tuple = ()
        marking: tuple = ()
        seen = set()
        while not self.at_punct("}"):
            if self.at_kw("facts"):
                if "facts" in seen:
                    self.fail("duplicate 'facts' block")
                seen.add("facts")
                self.advance()
                facts = self.template_block()
            elif self.at_kw("marking"):
                if "marking" in seen:
                    self.fail("duplicate 'marking' block")
                seen.add("marking")
                self.advance()
                self.eat_punct("{")
                entries = []
                while not self.at_punct("}"):
                    pname = self.eat_name("place name")
                    self.eat_punct(":")
                    tokens = [self.insc_tuple()]
                    while self.at_punct(","):
                        self.advance()
                        tokens.append(self.insc_tuple())
                    entries.append(MarkingEntry(pname.text, tuple(tokens), pname.span))
                    if self.at_punct(";"):
                        self.advance()
                self.eat_punct("}")
                marking = tuple(entries)
            else:
                self.fail("expected 'facts' or 'marking'")
        self.eat_punct("}")
        return facts, marking

    def _sec_domains(self):
        self.eat_kw("domains")
        self.eat_punct("{")
        out = []
        while not self.at_punct("}"):
            tok = self.advance()
            if tok.kind != "IDENT":
                self.fail("expected a type name", tok)
            self.eat_punct(":")
            self.eat_punct("[")
            values = []
            while not self.at_punct("]"):
                term = self.term()
                if isinstance(term, VarRef):
                    self.fail("input domains hold literals only", tok)
                values.append(term)
                if self.at_punct(","):
                    self.advance()
            self.eat_punct("]")
            out.append(DomainDecl(tok.text, tuple(values), tok.span))
        self.eat_punct("}")
        return tuple(out)

    def _sec_config(self):
        self.eat_kw("config")
        self.eat_punct("{")
        out = []
        while not self.at_punct("}"):
            key = self.eat_name("config key")
            self.eat_punct(":")
            tok = self.cur
            if tok.kind != "INT":
                self.fail("expected an integer")
            self.advance()
            out.append(ConfigEntry(key.text, tok.value, key.span))
        self.eat_punct("}")
        return tuple(out)


def parse(text: str) -> NetDocument:
    """Parse a scenario document; raises DslSyntaxError on the first error."""
    return _Parser(_lex(text)).document()


def parse_formula(text: str) -> object:
    """Parse a standalone formula (used for goal queries)."""
    parser = _Parser(_lex(text))
    node = parser.formula()
    if parser.cur.kind != "EOF":
        parser.fail("trailing input after formula")
    return node


# --- serializer ---------------------------------------------------------------

_LEVEL_IMPLIES = 1
_LEVEL_OR = 2
_LEVEL_AND = 3
_LEVEL_UNARY = 4
_LEVEL_ATOM = 5


def _render_term(term) -> str:
    if isinstance(term, VarRef):
        return term.name
    return render_literal(term.value)


def _render_formula(node, min_level: int = 1) -> str:
    def wrap(text: str, level: int) -> str:
        return f"({text})" if level < min_level else text

    if isinstance(node, FTrue):
        return "true"
    if isinstance(node, FAtom):
        return f"{node.name}({', '.join(_render_term(a) for a in node.args)})"
    if isinstance(node, FCompare):
        return f"{_render_term(node.left)} {node.op} {_render_term(node.right)}"
    if isinstance(node, FNot):
        return wrap(f"not {_render_formula(node.body, _LEVEL_UNARY)}", _LEVEL_UNARY)
    if isinstance(node, FAnd):
        text = (
            f"{_render_formula(node.left, _LEVEL_AND)} and "
            f"{_render_formula(node.right, _LEVEL_AND + 1)}"
        )
        return wrap(text, _LEVEL_AND)
    if isinstance(node, FOr):
        text = (
            f"{_render_formula(node.left, _LEVEL_OR)} or "
            f"{_render_formula(node.right, _LEVEL_OR + 1)}"
        )
        return wrap(text, _LEVEL_OR)
    if isinstance(node, FImplies):
        text = (
            f"{_render_formula(node.left, _LEVEL_IMPLIES + 1)} -> "
            f"{_render_formula(node.right, _LEVEL_IMPLIES)}"
        )
        return wrap(text, _LEVEL_IMPLIES)
    if isinstance(node, (FExists, FForall)):
        # A quantifier's body extends maximally to the right, so it needs
        # parentheses anywhere except a full-formula (tail) position.
        word = "exists" if isinstance(node, FExists) else "forall"
        text = f"{word} {node.var.name}:{node.var.type_name} . {_render_formula(node.body, 1)}"
        return wrap(text, 1)
    raise DbNetError(f"cannot serialize formula node {node!r}")


def _render_params(params: tuple[ParamDecl, ...]) -> str:
    return ", ".join(f"{p.name}:{p.type_name}" for p in params)


def _render_template(atom: TemplateAtom) -> str:
    return f"{atom.relation}({', '.join(_render_term(a) for a in atom.args)})"


def _render_insc_tuple(tup: InscTuple) -> str:
    body = "<" + ", ".join(_render_term(t) for t in tup.terms) + ">"
    return f"{tup.mult} * {body}" if tup.mult > 1 else body


def _render_arcs(label: str, arcs: tuple[ArcDecl, ...], indent: str) -> list[str]:
    if not arcs:
        return []
    parts = [
        f"{arc.place} -> " + ", ".join(_render_insc_tuple(t) for t in arc.tuples)
        for arc in arcs
    ]
    return [f"{indent}{label} {{ " + " ; ".join(parts) + " }"]


def serialize(doc: NetDocument) -> str:
    """Render a document in canonical formatting."""
    out: list[str] = []

    if doc.types is not None:
        out.append("types { " + ", ".join(t.name for t in doc.types) + " }")
        out.append("")

    if doc.schema:
        out.append("schema {")
        for rel in doc.schema:
            out.append(f"  {rel.name}(" + ", ".join(c.name for c in rel.columns) + ")")
        out.append("}")
    else:
        out.append("schema { }")
    out.append("")

    out.append("constraints {")
    for c in doc.constraints:
        out.append(f"  {c.name}:")
        out.append(f"    {_render_formula(c.body)}")
    out.append("}")
    out.append("")

    if doc.queries:
        out.append("queries {")
        for q in doc.queries:
            out.append(f"  {q.name}({_render_params(q.params)}) := {_render_formula(q.body)}")
        out.append("}")
        out.append("")

    if doc.actions:
        out.append("actions {")
        for a in doc.actions:
            dels = ", ".join(_render_template(t) for t in a.dels)
            adds = ", ".join(_render_template(t) for t in a.adds)
            out.append(
                f"  action {a.name}({_render_params(a.params)}) "
                f"{{ del {{ {dels} }} add {{ {adds} }} }}"
            )
        out.append("}")
        out.append("")

    if doc.places or doc.transitions:
        out.append("net {")
        for p in doc.places:
            color = " >< ".join(c.name for c in p.color)
            head = "view place" if p.kind == "view" else "place"
            line = f"  {head} {p.name} : ({color})"
            if p.query_name is not None:
                line += f" <- {p.query_name}"
            out.append(line)
        for t in doc.transitions:
            out.append("")
            out.append(f"  transition {t.name} {{")
            if t.var_decls:
                out.append(f"    vars {{ {_render_params(t.var_decls)} }}")
            if t.fresh_decls:
                out.append(f"    fresh {{ {_render_params(t.fresh_decls)} }}")
            out.extend(_render_arcs("in", t.inputs, "    "))
            if not isinstance(t.guard, FTrue):
                out.append(f"    guard {_render_formula(t.guard)}")
            if t.action is not None:
                args = ", ".join(_render_term(a) for a in t.action.args)
                out.append(f"    action {t.action.name}({args})")
            out.extend(_render_arcs("out", t.outputs, "    "))
            out.extend(_render_arcs("rollback", t.rollbacks, "    "))
            out.append("  }")
        out.append("}")
        out.append("")

    if doc.init_facts or doc.init_marking:
        out.append("init {")
        if doc.init_facts:
            out.append("  facts {")
            for fact in doc.init_facts:
                out.append(f"    {_render_template(fact)}")
            out.append("  }")
        if doc.init_marking:
            out.append("  marking {")
            for entry in doc.init_marking:
                tokens = ", ".join(_render_insc_tuple(t) for t in entry.tokens)
                out.append(f"    {entry.place}: {tokens}")
            out.append("  }")
        out.append("}")
        out.append("")

    if doc.domains:
        out.append("domains {")
        for d in doc.domains:
            values = ", ".join(_render_term(v) for v in d.values)
            out.append(f"  {d.type_name}: [{values}]")
        out.append("}")
        out.append("")

    if doc.config:
        out.append("config {")
        for entry in doc.config:
            out.append(f"  {entry.key}: {entry.value}")
        out.append("}")
        out.append("")

    return "\n".join(out).rstrip("\n") + "\n"


# --- document JSON export -----------------------------------------------------


def _term_json(term) -> dict:
    if isinstance(term, VarRef):
        return {"var": term.name}
    return {"type": term.value.type_name, "value": value_to_json(term.value)}


def _formula_json(node) -> dict:
    if isinstance(node, FTrue):
        return {"kind": "true"}
    if isinstance(node, FAtom):
        return {"kind": "atom", "name": node.name, "args": [_term_json(a) for a in node.args]}
    if isinstance(node, FCompare):
        return {
            "kind": "compare",
            "op": node.op,
            "left": _term_json(node.left),
            "right": _term_json(node.right),
        }
    if isinstance(node, FNot):
        return {"kind": "not", "body": _formula_json(node.body)}
    if isinstance(node, (FAnd, FOr, FImplies)):
        kind = {"FAnd": "and", "FOr": "or", "FImplies": "implies"}[type(node).__name__]
        return {"kind": kind, "left": _formula_json(node.left), "right": _formula_json(node.right)}
    if isinstance(node, (FExists, FForall)):
        kind = "exists" if isinstance(node, FExists) else "forall"
        return {
            "kind": kind,
            "var": {"name": node.var.name, "type": node.var.type_name},
            "body": _formula_json(node.body),
        }
    raise DbNetError(f"cannot export formula node {node!r}")


def document_to_json(doc: NetDocument) -> dict:
    """A tooling-friendly JSON rendering of the parsed document."""
    def params_json(params):
        return [{"name": p.name, "type": p.type_name} for p in params]

    def arcs_json(arcs):
        return [
            {
                "place": arc.place,
                "tuples": [
                    {"mult": t.mult, "terms": [_term_json(x) for x in t.terms]}
                    for t in arc.tuples
                ],
            }
            for arc in arcs
        ]

    return {
        "types": None if doc.types is None else [t.name for t in doc.types],
        "schema": [
            {"name": r.name, "columns": [c.name for c in r.columns]} for r in doc.schema
        ],
        "constraints": [
            {"name": c.name, "body": _formula_json(c.body)} for c in doc.constraints
        ],
        "queries": [
            {"name": q.name, "params": params_json(q.params), "body": _formula_json(q.body)}
            for q in doc.queries
        ],
        "actions": [
            {
                "name": a.name,
                "params": params_json(a.params),
                "del": [
                    {"relation": t.relation, "args": [_term_json(x) for x in t.args]}
                    for t in a.dels
                ],
                "add": [
                    {"relation": t.relation, "args": [_term_json(x) for x in t.args]}
                    for t in a.adds
                ],
            }
            for a in doc.actions
        ],
        "places": [
            {
                "name": p.name,
                "kind": p.kind,
                "color": [c.name for c in p.color],
                "query": p.query_name,
            }
            for p in doc.places
        ],
        "transitions": [
            {
                "name": t.name,
                "vars": params_json(t.var_decls),
                "fresh": params_json(t.fresh_decls),
                "in": arcs_json(t.inputs),
                "guard": _formula_json(t.guard),
                "action": None
                if t.action is None
                else {"name": t.action.name, "args": [_term_json(x) for x in t.action.args]},
                "out": arcs_json(t.outputs),
                "rollback": arcs_json(t.rollbacks),
            }
            for t in doc.transitions
        ],
        "init": {
            "facts": [
                {"relation": f.relation, "args": [_term_json(x) for x in f.args]}
                for f in doc.init_facts
            ],
            "marking": [
                {
                    "place": e.place,
                    "tokens": [
                        {"mult": t.mult, "terms": [_term_json(x) for x in t.terms]}
                        for t in e.tokens
                    ],
                }
                for e in doc.init_marking
            ],
        },
        "domains": [
            {"type": d.type_name, "values": [_term_json(v) for v in d.values]}
            for d in doc.domains
        ],
        "config": {e.key: e.value for e in doc.config},
    }


# --- elaboration --------------------------------------------------------------


CONFIG_KEYS = {"seed", "steps", "max_states", "max_depth"}


@dataclass
class Scenario:
    """A fully resolved scenario: net, initial snapshot, and run defaults."""

    document: NetDocument
    net: DbNet
    initial: Snapshot
    domains: dict[str, tuple[Value, ...]]
    config: dict[str, int]
    warnings: list[Diagnostic]


class _Elaborator:
    def __init__(self, doc: NetDocument):
        self.doc = doc
        self.errors: list[Diagnostic] = []
        self.warnings: list[Diagnostic] = []
        self.catalog = builtin_catalog()
        self.types: TypeDomain = self.catalog
        self.relations: dict[str, RelDecl] = {}
        self.span_index: dict[tuple, Span] = {}

    def error(self, span: Span, message: str, clause: str = "") -> None:
        self.errors.append(Diagnostic("error", span, message, clause))

    def run(self) -> Scenario:
        doc = self.doc
        self._types()
        schema = self._schema()
        constraints = self._constraints(schema)
        queries = self._queries(schema)
        actions = self._actions(schema)
        places = self._places()
        transitions = self._transitions()
        domains = self._domains()
        config = self._config()

        if self.errors:
            raise DslValidationError(self.errors)

        try:
            persistence = PersistenceLayer(schema, constraints)
            logic = DataLogicLayer(queries, actions)
            net = DbNet(self.types, persistence, logic, places, transitions)
        except DbNetError as exc:
            raise DslValidationError(
                [Diagnostic("error", NO_SPAN, str(exc))]
            ) from None

        for diag in validate_net_with_spans(net, self.span_index):
            if diag.severity == "error":
                self.errors.append(diag)
            else:
                self.warnings.append(diag)
        if self.errors:
            raise DslValidationError(self.errors)

        initial = self._initial(net)
        return Scenario(doc, net, initial, domains, config, self.warnings)

    # -- sections ----------------------------------------------------------

    def _types(self) -> None:
        if self.doc.types is None:
            return
        selected: list[str] = []
        for ref in self.doc.types:
            if ref.name not in CATALOG_TYPES:
                self.error(ref.span, f"unknown type {ref.name!r} (catalog: {', '.join(CATALOG_TYPES)})")
            elif ref.name in selected:
                self.error(ref.span, f"type {ref.name!r} selected twice")
            else:
                selected.append(ref.name)
        if not self.errors:
            self.types = TypeDomain([self.catalog.type(n) for n in selected])

    def _check_type(self, ref: TypeRef) -> bool:
        if ref.name not in self.types:
            self.error(ref.span, f"unknown type {ref.name!r}")
            return False
        return True

    def _schema(self) -> DatabaseSchema:
        rels = []
        for rel in self.doc.schema:
            self.span_index[("schema", rel.name)] = rel.span
            if rel.name in self.relations:
                self.error(rel.span, f"duplicate relation {rel.name!r}")
                continue
            self.relations[rel.name] = rel
            if not rel.columns:
                self.error(rel.span, f"relation {rel.name!r} must have arity >= 1")
                continue
            ok = all(self._check_type(c) for c in rel.columns)
            if ok:
                rels.append(RelationSchema(rel.name, tuple(c.name for c in rel.columns)))
        return DatabaseSchema(rels)

    # -- formulas ----------------------------------------------------------

    def _term(self, term, scope: dict[str, Variable], span_hint: Span):
        if isinstance(term, VarRef):
            var = scope.get(term.name)
            if var is None:
                self.error(term.span, f"undeclared variable {term.name!r}")
                return None
            return var
        if term.value.type_name not in self.types:
            self.error(term.span, f"literal {_render_term(term)} has unselected type {term.value.type_name!r}")
            return None
        return term.value

    def _term_type(self, resolved) -> str | None:
        if resolved is None:
            return None
        return resolved.type_name

    def _ident_predicates(self) -> dict[str, str]:
        """Identifier-shaped predicate names (e.g. succ) -> owning type."""
        out = {}
        for dt in self.types.types.values():
            for name in dt.predicates:
                if name.isidentifier():
                    out[name] = dt.name
        return out

    def _formula(self, node, scope: dict[str, Variable]) -> Query:
        if isinstance(node, FTrue):
            return Truth()
        if isinstance(node, FAtom):
            args = tuple(self._term(a, scope, node.span) for a in node.args)
            if any(a is None for a in args):
                return Truth()
            if node.name in self.relations:
                return RelationAtom(node.name, args)
            if node.name in self._ident_predicates():
                return PredicateAtom(node.name, args)
            self.error(node.span, f"unknown relation {node.name!r}")
            return Truth()
        if isinstance(node, FCompare):
            left = self._term(node.left, scope, node.span)
            right = self._term(node.right, scope, node.span)
            if left is None or right is None:
                return Truth()
            lt, rt = left.type_name, right.type_name
            if lt != rt:
                self.error(node.span, f"comparison between {lt!r} and {rt!r} values")
                return Truth()
            if node.op == "=":
                pred = EQUALITY_PREDICATES.get(lt)
            else:
                pred = ORDER_PREDICATES.get(lt)
            if pred is None:
                self.error(node.span, f"type {lt!r} has no {node.op!r} predicate")
                return Truth()
            return PredicateAtom(pred, (left, right))
        if isinstance(node, FNot):
            return Not(self._formula(node.body, scope))
        if isinstance(node, FAnd):
            return And(self._formula(node.left, scope), self._formula(node.right, scope))
        if isinstance(node, FOr):
            return or_(self._formula(node.left, scope), self._formula(node.right, scope))
        if isinstance(node, FImplies):
            return implies(self._formula(node.left, scope), self._formula(node.right, scope))
        if isinstance(node, (FExists, FForall)):
            decl = node.var
            if decl.type_name not in self.types:
                self.error(decl.span, f"unknown type {decl.type_name!r}")
                return Truth()
            var = Variable(decl.name, decl.type_name)
            inner = dict(scope)
            inner[decl.name] = var
            body = self._formula(node.body, inner)
            return Exists(var, body) if isinstance(node, FExists) else forall(var, body)
        raise DbNetError(f"unknown formula node {node!r}")

    def _params(self, params: tuple[ParamDecl, ...], where: str, *, fresh: bool = False) -> dict[str, Variable]:
        scope: dict[str, Variable] = {}
        for p in params:
            if p.name in scope:
                self.error(p.span, f"duplicate variable {p.name!r} in {where}")
                continue
            if p.type_name not in self.types:
                self.error(p.span, f"unknown type {p.type_name!r}")
                continue
            scope[p.name] = Variable(p.name, p.type_name, fresh)
        return scope

    def _constraints(self, schema: DatabaseSchema) -> list[Constraint]:
        out = []
        names = set()
        for c in self.doc.constraints:
            self.span_index[("constraints", c.name)] = c.span
            if c.name in names:
                self.error(c.span, f"duplicate constraint {c.name!r}")
                continue
            names.add(c.name)
            body = self._formula(c.body, {})
            if free_vars(body):
                self.error(c.span, f"constraint {c.name!r} has free variables")
                continue
            out.append(Constraint(c.name, body))
        return out

    def _queries(self, schema: DatabaseSchema) -> list[NamedQuery]:
        out = []
        names = set()
        for q in self.doc.queries:
            self.span_index[("queries", q.name)] = q.span
            if q.name in names:
                self.error(q.span, f"duplicate query {q.name!r}")
                continue
            names.add(q.name)
            scope = self._params(q.params, f"query {q.name!r}")
            if len(scope) != len(q.params):
                continue
            body = self._formula(q.body, scope)
            params = tuple(scope[p.name] for p in q.params)
            if set(params) != set(free_vars(body)):
                self.error(
                    q.span,
                    f"query {q.name!r}: declared parameters do not match the free "
                    f"variables of the body",
                    clause="free-variable ordering",
                )
                continue
            out.append(NamedQuery(q.name, params, body))
        return out

    def _template(self, atom: TemplateAtom, scope: dict[str, Variable]):
        args = []
        for term in atom.args:
            resolved = self._term(term, scope, atom.span)
            if resolved is None:
                return None
            args.append(resolved)
        return FactTemplate(atom.relation, tuple(args))

    def _actions(self, schema: DatabaseSchema) -> list[Action]:
        out = []
        names = set()
        for a in self.doc.actions:
            self.span_index[("actions", a.name)] = a.span
            if a.name in names:
                self.error(a.span, f"duplicate action {a.name!r}")
                continue
            names.add(a.name)
            scope = self._params(a.params, f"action {a.name!r}")
            if len(scope) != len(a.params):
                continue
            dels = [self._template(t, scope) for t in a.dels]
            adds = [self._template(t, scope) for t in a.adds]
            if any(t is None for t in dels + adds):
                continue
            out.append(
                Action(
                    a.name,
                    tuple(scope[p.name] for p in a.params),
                    frozenset(adds),
                    frozenset(dels),
                )
            )
        return out

    def _places(self) -> list[Place]:
        out = []
        names = set()
        for p in self.doc.places:
            self.span_index[("place", p.name)] = p.span
            if p.query_name is not None:
                self.span_index[("place", p.name, "query")] = p.query_span
            if p.name in names:
                self.error(p.span, f"duplicate place {p.name!r}")
                continue
            names.add(p.name)
            for c in p.color:
                self._check_type(c)
            if p.kind == "view" and p.query_name is None:
                self.error(p.span, f"view place {p.name!r} needs '<- <query>'")
            out.append(
                Place(p.name, p.kind, tuple(c.name for c in p.color), p.query_name)
            )
        return out

    def _inscription(self, arcs: tuple[ArcDecl, ...], scope, where: str) -> dict[str, Multiset]:
        out: dict[str, Multiset] = {}
        for arc in arcs:
            counts: dict[tuple, int] = {}
            for tup in arc.tuples:
                terms = []
                bad = False
                for term in tup.terms:
                    resolved = self._term(term, scope, tup.span)
                    if resolved is None:
                        bad = True
                    terms.append(resolved)
                if bad:
                    continue
                key = tuple(terms)
                counts[key] = counts.get(key, 0) + tup.mult
            inscription = Multiset.from_counts(counts)
            if arc.place in out:
                out[arc.place] = out[arc.place] + inscription
            else:
                out[arc.place] = inscription
        return out

    def _transitions(self) -> list[Transition]:
        out = []
        names = set()
        for t in self.doc.transitions:
            base = ("transition", t.name)
            self.span_index[base] = t.span
            if t.name in names:
                self.error(t.span, f"duplicate transition {t.name!r}")
                continue
            names.add(t.name)
            normal = self._params(t.var_decls, f"transition {t.name!r} vars")
            fresh = self._params(t.fresh_decls, f"transition {t.name!r} fresh", fresh=True)
            clash = set(normal) & set(fresh)
            for name in sorted(clash):
                self.error(t.span, f"variable {name!r} declared both normal and fresh")
            scope = {**normal, **fresh}

            inputs = self._inscription(t.inputs, scope, "input")
            outputs = self._inscription(t.outputs, scope, "output")
            rollbacks = self._inscription(t.rollbacks, scope, "rollback")
            for arc in t.inputs:
                self.span_index[base + (f"input arc from {arc.place!r}",)] = arc.span
            for arc in t.outputs:
                self.span_index[base + (f"output arc to {arc.place!r}",)] = arc.span
            for arc in t.rollbacks:
                self.span_index[base + (f"rollback arc to {arc.place!r}",)] = arc.span
            if t.rollbacks:
                self.span_index[base + ("rollback arcs",)] = t.rollbacks[0].span

            guard = self._formula(t.guard, scope)
            guard_span = getattr(t.guard, "span", t.span)
            self.span_index[base + ("guard",)] = guard_span if guard_span != NO_SPAN else t.span

            action = None
            if t.action is not None:
                self.span_index[base + (f"action {t.action.name!r}",)] = t.action.span
                args = []
                bad = False
                for term in t.action.args:
                    resolved = self._term(term, scope, t.action.span)
                    if resolved is None:
                        bad = True
                    args.append(resolved)
                if not bad:
                    action = ActionBinding(t.action.name, tuple(args))

            unused = set(scope) - {
                v.name
                for insc in (*inputs.values(), *outputs.values(), *rollbacks.values())
                for tup in insc.distinct()
                for v in tup
                if isinstance(v, Variable)
            } - {v.name for v in (action.args if action else ()) if isinstance(v, Variable)}
            unused -= {v.name for v in all_vars(guard)}
            for name in sorted(unused):
                self.warnings.append(
                    Diagnostic("warning", t.span, f"variable {name!r} is declared but never used")
                )

            out.append(
                Transition(t.name, inputs, outputs, rollbacks, guard, action)
            )
        return out

    def _initial(self, net: DbNet) -> Snapshot:
        facts = []
        for atom in self.doc.init_facts:
            args = []
            bad = False
            for term in atom.args:
                if isinstance(term, VarRef):
                    self.error(term.span, "init facts must be ground (no variables)")
                    bad = True
                    continue
                if term.value.type_name not in self.types:
                    self.error(term.span, f"literal has unselected type {term.value.type_name!r}")
                    bad = True
                    continue
                args.append(term.value)
            if bad:
                continue
            fact = Fact(atom.relation, tuple(args))
            try:
                check_fact(net.persistence.schema, net.types, fact)
            except DbNetError as exc:
                self.error(atom.span, str(exc))
                continue
            facts.append(fact)

        control_tokens: dict[str, Multiset] = {}
        for entry in self.doc.init_marking:
            tokens: dict[tuple, int] = {}
            for tup in entry.tokens:
                token = []
                bad = False
                for term in tup.terms:
                    if isinstance(term, VarRef):
                        self.error(tup.span, "initial tokens must be ground (no variables)")
                        bad = True
                        continue
                    token.append(term.value)
                if bad:
                    continue
                key = tuple(token)
                tokens[key] = tokens.get(key, 0) + tup.mult
            ms = Multiset.from_counts(tokens)
            if entry.place in control_tokens:
                control_tokens[entry.place] = control_tokens[entry.place] + ms
            else:
                control_tokens[entry.place] = ms
            self.span_index[("init", entry.place)] = entry.span

        if self.errors:
            raise DslValidationError(self.errors)

        try:
            return make_snapshot(net, DatabaseInstance(facts), control_tokens)
        except DbNetError as exc:
            span = self.doc.init_marking[0].span if self.doc.init_marking else (
                self.doc.init_facts[0].span if self.doc.init_facts else NO_SPAN
            )
            self.error(span, str(exc), clause="initial snapshot")
            raise DslValidationError(self.errors) from None

    def _domains(self) -> dict[str, tuple[Value, ...]]:
        out: dict[str, tuple[Value, ...]] = {}
        for d in self.doc.domains:
            if d.type_name not in self.types:
                self.error(d.span, f"unknown type {d.type_name!r}")
                continue
            if d.type_name in out:
                self.error(d.span, f"duplicate domain for type {d.type_name!r}")
                continue
            values = []
            for lit in d.values:
                if lit.value.type_name != d.type_name:
                    self.error(
                        lit.span,
                        f"domain value {_render_term(lit)} is {lit.value.type_name!r}, "
                        f"domain is for {d.type_name!r}",
                    )
                    continue
                values.append(lit.value)
            out[d.type_name] = tuple(values)
        return out

    def _config(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for entry in self.doc.config:
            if entry.key not in CONFIG_KEYS:
                self.error(entry.span, f"unknown config key {entry.key!r} (known: {', '.join(sorted(CONFIG_KEYS))})")
                continue
            if entry.key in out:
                self.error(entry.span, f"duplicate config key {entry.key!r}")
                continue
            if entry.value < 0:
                self.error(entry.span, f"config {entry.key!r} must be non-negative")
                continue
            out[entry.key] = entry.value
        return out


def validate_net_with_spans(net: DbNet, span_index: dict[tuple, Span]) -> list[Diagnostic]:
    """Run structural net validation and attach the best-known source spans."""

    def span_for(path: tuple[str, ...]) -> Span:
        for cut in range(len(path), 0, -1):
            hit = span_index.get(tuple(path[:cut]))
            if hit is not None:
                return hit
        return NO_SPAN

    return [
        Diagnostic(d.severity, span_for(d.path), f"{' / '.join(d.path)}: {d.message}")
        for d in validate_net(net)
    ]


def elaborate(doc: NetDocument) -> Scenario:
    """Resolve a document into a DbNet plus initial snapshot and run config.

    Raises DslValidationError carrying every collected diagnostic; warnings
    are available on the returned Scenario.
    """
    return _Elaborator(doc).run()


def load_snapshot(doc: NetDocument) -> tuple[DbNet, Snapshot]:
    """The (net, initial snapshot) pair of a parsed document."""
    scenario = elaborate(doc)
    return scenario.net, scenario.initial


def load_scenario_text(text: str) -> Scenario:
    return elaborate(parse(text))


def load_scenario_file(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario_text(fh.read())


def elaborate_formula(scenario: Scenario, text: str) -> Query:
    """Parse and resolve a standalone formula against an elaborated scenario
    (used for reachability goals given on the command line)."""
    node = parse_formula(text)
    ela = _Elaborator(scenario.document)
    ela.types = scenario.net.types
    ela.relations = {r.name: r for r in scenario.document.schema}
    q = ela._formula(node, {})
    if ela.errors:
        raise DslValidationError(ela.errors)
    problems = validate_query(q, scenario.net.persistence.schema, scenario.net.types)
    if problems:
        raise DslValidationError([Diagnostic("error", NO_SPAN, p) for p in problems])
    return q
