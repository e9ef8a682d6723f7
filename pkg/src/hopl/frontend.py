"""Surface syntax, type checking and pretty printing.

Program files are `.`-terminated declarations and clauses with `%` line
comments:

    kind i type.
    type nil (list i).
    type :: i -> list i -> list i.
    type mapfun list i -> (i -> i) -> list i -> o.
    mapfun nil F nil.
    mapfun (X :: L1) F ((F X) :: L2) :- mapfun L1 F L2.

Application is juxtaposition (left associative); `::` is infix, right
associative; `,` and `;` build conjunctions and disjunctions (`,` binds
tighter); `x\\ t` is abstraction with maximal scope; `sigma X\\ G` is the
existential; names with an uppercase initial are implicitly quantified
logic variables.  Everything is monomorphic: every constant, including nil
and ::, must be declared.
"""

from __future__ import annotations

import re

from dataclasses import dataclass, field

from .runtime import EngineError
from .terms import (
    Arrow, Signature, Sort, TyApp, O,
    AND, OR, SIGMA, TRUE, LOGICAL,
    Term, T_APP, T_CONST, T_INDEX, T_LAM, T_VAR,
    decompose, deref, fresh_var, mk_app, mk_index, mk_lam, sigma_const,
)
from .interp import Clause, Program


class ParseError(EngineError):
    def __init__(self, msg: str, line: int, col: int) -> None:
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class TypeError_(EngineError):
    pass


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>%[^\n]*)
  | (?P<clausearrow>:-)
  | (?P<query>\?-)
  | (?P<cons>::)
  | (?P<tyarrow>->)
  | (?P<lp>\()
  | (?P<rp>\))
  | (?P<lambda>\\)
  | (?P<comma>,)
  | (?P<semi>;)
  | (?P<dot>\.(?=\s|$|%))
  | (?P<name>[a-z][A-Za-z0-9_']*)
  | (?P<uvar>[A-Z_][A-Za-z0-9_']*)
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    toks = []
    line = 1
    bol = 0
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - bol + 1)
        kind = m.lastgroup
        lex = m.group()
        if kind not in ("ws", "comment"):
            toks.append(Token(kind, lex, line, pos - bol + 1))
        nl = lex.count("\n")
        if nl:
            line += nl
            bol = pos + lex.rfind("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, n - bol + 1))
    return toks


# --------------------------------------------------------------------------
# Parse trees (surface terms)
# --------------------------------------------------------------------------


@dataclass
class SName:
    name: str
    line: int
    col: int


@dataclass
class SVar:
    name: str
    line: int
    col: int


@dataclass
class SApp:
    fn: object
    args: list


@dataclass
class SLam:
    binder: str
    body: object
    line: int
    col: int


@dataclass
class SOp:  # `,` `;` `::` applications in infix form
    op: str
    lhs: object
    rhs: object


@dataclass
class SurfaceClause:
    head: object
    body: object | None
    text: str
    line: int


@dataclass
class SourceProgram:
    kinds: list = field(default_factory=list)      # (name, arity, line)
    typedecls: list = field(default_factory=list)  # (name, type, line)
    clauses: list = field(default_factory=list)


class Parser:
    def __init__(self, toks: list) -> None:
        self.toks = toks
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {kind}, found {t.text or t.kind!r}", t.line, t.col)
        return self.next()

    def err(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    # ---- types ----

    def parse_type(self):
        left = self.parse_type_app()
        if self.peek().kind == "tyarrow":
            self.next()
            return ("arrow", left, self.parse_type())
        return left

    def parse_type_app(self):
        parts = [self.parse_type_atom()]
        while self.peek().kind in ("name", "lp"):
            parts.append(self.parse_type_atom())
        if len(parts) == 1:
            return parts[0]
        head = parts[0]
        if head[0] != "name":
            self.err("type constructor expected")
        return ("app", head[1], parts[1:])

    def parse_type_atom(self):
        t = self.peek()
        if t.kind == "name":
            self.next()
            return ("name", t.text)
        if t.kind == "lp":
            self.next()
            ty = self.parse_type()
            self.expect("rp")
            return ty
        self.err("type expected")

    # ---- terms ----

    def parse_term(self):
        return self.parse_semi()

    def parse_semi(self):
        left = self.parse_comma()
        if self.peek().kind == "semi":
            self.next()
            return SOp(OR, left, self.parse_semi())
        return left

    def parse_comma(self):
        left = self.parse_cons()
        if self.peek().kind == "comma":
            self.next()
            return SOp(AND, left, self.parse_comma())
        return left

    def parse_cons(self):
        left = self.parse_app()
        if self.peek().kind == "cons":
            self.next()
            return SOp("::", left, self.parse_cons())
        return left

    def parse_app(self):
        parts = [self.parse_primary()]
        while self.peek().kind in ("name", "uvar", "lp"):
            # a binder swallows the rest of the expression, so it can only
            # legally stand as the last argument
            if self.toks[self.i + 1].kind == "lambda":
                parts.append(self.parse_primary())
                break
            parts.append(self.parse_primary())
        if len(parts) == 1:
            return parts[0]
        return SApp(parts[0], parts[1:])

    def parse_primary(self):
        t = self.peek()
        if t.kind in ("name", "uvar"):
            if self.toks[self.i + 1].kind == "lambda":
                self.next()
                self.next()
                body = self.parse_term()
                return SLam(t.text, body, t.line, t.col)
            self.next()
            return SVar(t.text, t.line, t.col) if t.kind == "uvar" else SName(t.text, t.line, t.col)
        if t.kind == "lp":
            self.next()
            inner = self.parse_term()
            self.expect("rp")
            return inner
        self.err("term expected")

    # ---- top level ----

    def parse_program(self) -> SourceProgram:
        prog = SourceProgram()
        while self.peek().kind != "eof":
            self._parse_item(prog)
        return prog

    def _parse_item(self, prog: SourceProgram) -> None:
        t = self.peek()
        if t.kind == "name" and t.text == "kind":
            self.next()
            name = self.expect("name").text
            w = self.expect("name")
            if w.text != "type":
                raise ParseError("kind declarations read `kind name type [-> type ...]`", w.line, w.col)
            arity = 0
            while self.peek().kind == "tyarrow":
                self.next()
                w = self.expect("name")
                if w.text != "type":
                    raise ParseError("expected `type`", w.line, w.col)
                arity += 1
            self.expect("dot")
            prog.kinds.append((name, arity, t.line))
            return
        if t.kind == "name" and t.text == "type":
            self.next()
            nt = self.peek()
            if nt.kind in ("name", "cons", "comma", "semi"):
                self.next()
                cname = nt.text
            else:
                self.err("constant name expected")
            ty = self.parse_type()
            self.expect("dot")
            prog.typedecls.append((cname, ty, t.line))
            return
        # clause
        start = t
        head = self.parse_term()
        body = None
        if self.peek().kind == "clausearrow":
            self.next()
            body = self.parse_term()
        self.expect("dot")
        prog.clauses.append(SurfaceClause(head, body, "", start.line))

    def parse_query(self):
        if self.peek().kind == "query":
            self.next()
        g = self.parse_term()
        if self.peek().kind == "dot":
            self.next()
        self.expect("eof")
        return g


def parse_program_text(text: str) -> SourceProgram:
    return Parser(tokenize(text)).parse_program()


def parse_query_text(text: str):
    return Parser(tokenize(text)).parse_query()


# --------------------------------------------------------------------------
# Types: declaration elaboration and inference
# --------------------------------------------------------------------------


class TMeta:
    _n = 0

    __slots__ = ("ref", "id")

    def __init__(self) -> None:
        self.ref = None
        TMeta._n += 1
        self.id = TMeta._n


def tzonk(ty):
    while isinstance(ty, TMeta) and ty.ref is not None:
        ty = ty.ref
    if isinstance(ty, Arrow):
        return Arrow(tzonk(ty.arg), tzonk(ty.res))
    if isinstance(ty, TyApp):
        return TyApp(ty.ctor, tuple(tzonk(a) for a in ty.args))
    return ty


def _toccurs(m: TMeta, ty) -> bool:
    ty = tzonk(ty)
    if ty is m:
        return True
    if isinstance(ty, Arrow):
        return _toccurs(m, ty.arg) or _toccurs(m, ty.res)
    if isinstance(ty, TyApp):
        return any(_toccurs(m, a) for a in ty.args)
    return False


def tunify(a, b) -> bool:
    a = tzonk(a)
    b = tzonk(b)
    if a is b or a == b:
        return True
    if isinstance(a, TMeta):
        if _toccurs(a, b):
            return False
        a.ref = b
        return True
    if isinstance(b, TMeta):
        return tunify(b, a)
    if isinstance(a, Arrow) and isinstance(b, Arrow):
        return tunify(a.arg, b.arg) and tunify(a.res, b.res)
    if isinstance(a, TyApp) and isinstance(b, TyApp):
        return a.ctor == b.ctor and all(tunify(x, y) for x, y in zip(a.args, b.args))
    return False


def elaborate_type(sig: Signature, ty, line: int):
    """Surface type tree -> SimpleType, validating against the signature."""
    kind = ty[0]
    if kind == "name":
        name = ty[1]
        if name in sig.sorts:
            return Sort(name)
        if name in sig.ctors:
            if sig.ctors[name] != 0:
                raise TypeError_(f"line {line}: type constructor {name} needs arguments")
            return TyApp(name, ())
        raise TypeError_(f"line {line}: undeclared sort {name!r}")
    if kind == "app":
        name = ty[1]
        if name not in sig.ctors:
            raise TypeError_(f"line {line}: undeclared type constructor {name!r}")
        if sig.ctors[name] != len(ty[2]):
            raise TypeError_(f"line {line}: {name} expects {sig.ctors[name]} argument(s)")
        return TyApp(name, tuple(elaborate_type(sig, a, line) for a in ty[2]))
    return Arrow(elaborate_type(sig, ty[1], line), elaborate_type(sig, ty[2], line))


# --------------------------------------------------------------------------
# Surface -> core conversion with inference
# --------------------------------------------------------------------------


class _Converter:
    def __init__(self, sig: Signature) -> None:
        self.sig = sig
        self.qvars: dict[str, Term] = {}   # logic variables of this clause/query
        self.patch: list = []              # nodes whose .ty needs zonking

    def convert(self, s, binders: list):
        """Returns (core term, type).  binders: innermost-first names/types."""
        if isinstance(s, SVar):
            if s.name != "_":
                for depth, (bname, bty) in enumerate(binders, start=1):
                    if bname == s.name:
                        return mk_index(depth), bty
            if s.name == "_":
                m = TMeta()
                cell = fresh_var(m, "_")
                self.patch.append(cell)
                return cell, m
            cell = self.qvars.get(s.name)
            if cell is None:
                m = TMeta()
                cell = fresh_var(m, s.name)
                self.qvars[s.name] = cell
                self.patch.append(cell)
            return cell, cell.ty
        if isinstance(s, SName):
            for depth, (bname, bty) in enumerate(binders, start=1):
                if bname == s.name:
                    return mk_index(depth), bty
            if s.name == SIGMA:
                m = TMeta()
                node = sigma_const(m)
                self.patch.append(node)
                return node, node.ty
            if not self.sig.has_const(s.name):
                raise TypeError_(f"{s.line}:{s.col}: undeclared constant {s.name!r}")
            node = self.sig.const(s.name)
            return node, node.ty
        if isinstance(s, SLam):
            m = TMeta()
            body, bty = self.convert(s.body, [(s.binder, m)] + binders)
            return mk_lam(body), Arrow(m, bty)
        if isinstance(s, SOp):
            if s.op == "::":
                if not self.sig.has_const("::"):
                    raise TypeError_("`::` used but not declared")
                return self._app(self.sig.const("::"), self.sig.const("::").ty,
                                 [s.lhs, s.rhs], binders, "::")
            node = self.sig.const(s.op)
            return self._app(node, node.ty, [s.lhs, s.rhs], binders, s.op)
        # SApp
        fn, fty = self.convert(s.fn, binders)
        return self._app(fn, fty, s.args, binders, None)

    def _app(self, fn, fty, args, binders, opname):
        cargs = []
        ty = fty
        for a in args:
            ca, aty = self.convert(a, binders)
            ty_z = tzonk(ty)
            if isinstance(ty_z, TMeta):
                res = TMeta()
                if not tunify(ty_z, Arrow(aty, res)):
                    raise TypeError_("type error in application")
                ty = res
            elif isinstance(ty_z, Arrow):
                if not tunify(ty_z.arg, aty):
                    raise TypeError_(
                        f"type error: argument of {opname or 'application'} has type "
                        f"{tzonk(aty)}, expected {tzonk(ty_z.arg)}"
                    )
                ty = ty_z.res
            else:
                raise TypeError_("type error: too many arguments in application")
            cargs.append(ca)
        return mk_app(fn, cargs), ty

    def finish(self) -> None:
        """Zonk inferred types onto cells; reject ambiguity."""
        for node in self.patch:
            z = tzonk(node.ty)
            if _has_meta(z):
                who = node.name if node.tag == T_VAR else SIGMA
                raise TypeError_(
                    f"cannot infer a unique type for {who!r} (unconstrained)"
                )
            node.ty = z


def _has_meta(ty) -> bool:
    if isinstance(ty, TMeta):
        return True
    if isinstance(ty, Arrow):
        return _has_meta(ty.arg) or _has_meta(ty.res)
    if isinstance(ty, TyApp):
        return any(_has_meta(a) for a in ty.args)
    return False


# --------------------------------------------------------------------------
# Load-time checks: goals, atoms, positivity, rigid heads
# --------------------------------------------------------------------------


def _check_positive(t: Term, where: str) -> None:
    """Atom arguments are positive terms: no logical constants beyond
    conjunction, disjunction and the existential."""
    t = deref(t)
    if t.tag == T_CONST:
        if t.name in LOGICAL and t.name not in (AND, OR, SIGMA):
            raise TypeError_(f"{where}: non-positive term (uses {t.name!r})")
        return
    if t.tag == T_APP:
        _check_positive(t.fn, where)
        for a in t.args:
            _check_positive(a, where)
        return
    if t.tag == T_LAM:
        _check_positive(t.body, where)


def _check_goal(t: Term, where: str) -> None:
    t = deref(t)
    if t.tag == T_LAM:
        raise TypeError_(f"{where}: goal is an abstraction")
    if t.tag == T_APP:
        head = deref(t.fn)
        if head.tag == T_CONST:
            if head.name in (AND, OR):
                _check_goal(t.args[0], where)
                _check_goal(t.args[1], where)
                return
            if head.name == SIGMA:
                body = deref(t.args[0])
                inner = body.body if body.tag == T_LAM else body
                _check_goal_body_of_sigma(inner, where)
                return
            if head.name == TRUE:
                raise TypeError_(f"{where}: `true` cannot take arguments")
        for a in t.args:
            _check_positive(a, where)
        return
    if t.tag == T_CONST:
        if t.name == TRUE:
            return
        if t.name in LOGICAL:
            raise TypeError_(f"{where}: bare logical constant {t.name!r} as a goal")
        return  # nullary atom
    if t.tag == T_VAR:
        return  # flexible atom (bare)
    if t.tag == T_INDEX:
        return  # under sigma's binder: a bound predicate variable position


def _check_goal_body_of_sigma(t: Term, where: str) -> None:
    # same shape checks as goals; indices may appear as heads here
    _check_goal(t, where)


def check_clause_shape(head: Term, where: str) -> str:
    head = deref(head)
    if head.tag == T_CONST:
        pred = head
    elif head.tag == T_APP:
        pred = deref(head.fn)
    else:
        raise TypeError_(f"{where}: clause head must be a rigid atom")
    if pred.tag != T_CONST:
        raise TypeError_(f"{where}: clause head must have a constant at its head")
    if pred.name in LOGICAL:
        raise TypeError_(f"{where}: clause head may not be a logical constant")
    if head.tag == T_APP:
        for a in head.args:
            _check_positive(a, where)
    return pred.name


# --------------------------------------------------------------------------
# Whole-program loading
# --------------------------------------------------------------------------


@dataclass
class LoadedProgram:
    sig: Signature
    program: Program
    clauses: list = field(default_factory=list)   # in presentation order


def load_program(text: str, loaded: LoadedProgram | None = None) -> LoadedProgram:
    """Parse, declare, type check and index a program text; extends an
    existing LoadedProgram when given (multi-file loading)."""
    src = parse_program_text(text)
    if loaded is None:
        loaded = LoadedProgram(Signature(), Program())
    sig = loaded.sig
    for name, arity, _line in src.kinds:
        if arity == 0:
            sig.declare_sort(name)
        else:
            sig.declare_ctor(name, arity)
    for name, ty, line in src.typedecls:
        sig.declare_const(name, elaborate_type(sig, ty, line))
    for sc in src.clauses:
        conv = _Converter(sig)
        head, hty = conv.convert(sc.head, [])
        if not tunify(hty, O):
            raise TypeError_(f"line {sc.line}: clause head is not of type o")
        body = None
        if sc.body is not None:
            body, bty = conv.convert(sc.body, [])
            if not tunify(bty, O):
                raise TypeError_(f"line {sc.line}: clause body is not of type o")
        conv.finish()
        where = f"line {sc.line}"
        pred = check_clause_shape(head, where)
        if body is not None:
            _check_goal(body, where)
        hd = deref(head)
        arity = len(hd.args) if hd.tag == T_APP else 0
        clause = Clause(pred, head, body, list(conv.qvars.values()), arity)
        loaded.program.add(clause)
        loaded.clauses.append(clause)
    return loaded


def load_query(text: str, loaded: LoadedProgram):
    """Parse and check a query; returns (goal term, {name: cell})."""
    s = parse_query_text(text)
    conv = _Converter(loaded.sig)
    goal, gty = conv.convert(s, [])
    if not tunify(gty, O):
        raise TypeError_("query is not of type o")
    conv.finish()
    _check_goal(goal, "query")
    return goal, dict(conv.qvars)


# --------------------------------------------------------------------------
# Pretty printing
# --------------------------------------------------------------------------

_PREC_ATOM = 5
_PREC_APP = 4
_PREC_CONS = 3
_PREC_AND = 2
_PREC_OR = 1
_PREC_LAM = 0


def _binder_names(sig: Signature):
    i = 0
    while True:
        i += 1
        name = f"x{i}"
        if not sig.has_const(name):
            yield name


def pretty(sig: Signature, t: Term, names: list | None = None) -> str:
    """Render a normal-form term; de Bruijn indices get generated names."""
    gen = _binder_names(sig)
    return _pp(sig, t, names or [], gen, _PREC_LAM)


def _pp(sig, t, names, gen, prec) -> str:
    t = deref(t)
    if t.tag == T_CONST:
        return t.name
    if t.tag == T_VAR:
        return t.name
    if t.tag == T_INDEX:
        if t.i <= len(names):
            return names[t.i - 1]
        return f"#{t.i}"  # escaping index: only in non-closed display contexts
    if t.tag == T_LAM:
        name = next(gen)
        body = _pp(sig, t.body, [name] + names, gen, _PREC_LAM)
        s = f"{name}\\ {body}"
        return f"({s})" if prec > _PREC_LAM else s
    if t.tag == T_APP:
        head = deref(t.fn)
        if head.tag == T_CONST and len(t.args) == 2 and head.name in ("::", AND, OR):
            op = head.name
            if op == "::":
                # compound list elements are displayed parenthesized
                p, lp, sep = _PREC_CONS, _PREC_ATOM, " :: "
            elif op == AND:
                p, lp, sep = _PREC_AND, _PREC_AND + 1, ", "
            else:
                p, lp, sep = _PREC_OR, _PREC_OR + 1, "; "
            lhs = _pp(sig, t.args[0], names, gen, lp)
            rhs = _pp(sig, t.args[1], names, gen, p)
            s = f"{lhs}{sep}{rhs}"
            return f"({s})" if prec > p else s
        if head.tag == T_CONST and head.name == SIGMA and len(t.args) == 1:
            arg = deref(t.args[0])
            if arg.tag == T_LAM:
                name = next(gen)
                body = _pp(sig, arg.body, [name] + names, gen, _PREC_LAM)
                s = f"sigma {name}\\ {body}"
            else:
                s = f"sigma {_pp(sig, arg, names, gen, _PREC_ATOM)}"
            return f"({s})" if prec > _PREC_LAM else s
        parts = [_pp(sig, t.fn, names, gen, _PREC_ATOM)]
        parts += [_pp(sig, a, names, gen, _PREC_ATOM) for a in t.args]
        s = " ".join(parts)
        return f"({s})" if prec >= _PREC_ATOM else s
    raise EngineError("pretty: term not in normal form")


def format_answer(sig: Signature, answer, qvars: dict) -> str:
    """`Var = term` lines plus `lhs ?= rhs` residual constraints; `yes` for
    an answer binding nothing."""
    lines = []
    for name in qvars:
        if name in answer.bindings:
            lines.append(f"{name} = {pretty(sig, answer.bindings[name])}")
    for lhs, rhs in answer.residual:
        lines.append(f"{pretty(sig, lhs)} ?= {pretty(sig, rhs)}")
    if not lines:
        return "yes"
    return "\n".join(lines)
