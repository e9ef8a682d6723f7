"""Lambda-term representation: simple types, signatures, de Bruijn terms,
suspensions with environments, and closedness annotations.

Terms are nodes of a mutable graph.  A node's ``tag`` names its syntactic
category; destructive reduction morphs application and suspension nodes into
reference nodes (T_REF) pointing at their contractum, and logic-variable
nodes acquire a binding in their ``ref`` field.  ``deref`` follows both.

Closedness annotations are realized as an exact free-index bitmask: bit i of
``mask`` is set iff de Bruijn index #i occurs free at the node's top.  A node
is Closed iff mask == 0.  The bitmask refines the single open/closed bit: it
makes the abstraction rule ("open iff a free index greater than 1 occurs")
an O(1) shift, and it stays exact through suspension construction, where the
maximum alone would not.  After in-place reduction of subterms an ancestor's
cached mask may over-approximate (reduction only shrinks free-index sets),
so Closed claims remain sound.

``ground`` tracks absence of logic variables the same way (conservative:
False never lies dangerous, True is exact at construction).
"""

from __future__ import annotations

from dataclasses import dataclass

from .runtime import UsageError

# --------------------------------------------------------------------------
# Simple types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Sort:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TyApp:
    ctor: str
    args: tuple
    """Applied type constructor, e.g. (list i)."""

    def __str__(self) -> str:
        return "(" + " ".join([self.ctor] + [str(a) for a in self.args]) + ")"


@dataclass(frozen=True)
class Arrow:
    arg: "SimpleType"
    res: "SimpleType"

    def __str__(self) -> str:
        return f"({self.arg} -> {self.res})"


SimpleType = object  # Sort | TyApp | Arrow

O = Sort("o")


def arrow(args, target):
    """Build alpha1 -> ... -> alphan -> target."""
    ty = target
    for a in reversed(list(args)):
        ty = Arrow(a, ty)
    return ty


def decompose(ty):
    """Unique decomposition alpha1 -> ... -> alphan -> beta with beta atomic."""
    args = []
    while isinstance(ty, Arrow):
        args.append(ty.arg)
        ty = ty.res
    return args, ty


def target_type(ty):
    while isinstance(ty, Arrow):
        ty = ty.res
    return ty


def type_order(ty) -> int:
    if not isinstance(ty, Arrow):
        return 0
    args, _ = decompose(ty)
    return max(type_order(a) for a in args) + 1


# --------------------------------------------------------------------------
# Signature
# --------------------------------------------------------------------------

# Names of the predeclared logical constants.  'sigma' nodes are created per
# occurrence because each instance carries its own (alpha -> o) -> o type.
TRUE, AND, OR, SIGMA = "true", ",", ";", "sigma"
LOGICAL = frozenset({TRUE, AND, OR, SIGMA})


class Signature:
    """Declared sorts, type constructors and constants.

    Constant nodes are interned here so that rigid head comparison is an
    identity test for user constants.
    """

    def __init__(self) -> None:
        self.sorts: set[str] = {"o"}
        self.ctors: dict[str, int] = {"list": 1}
        self.consts: dict[str, SimpleType] = {}
        self._nodes: dict[str, Term] = {}
        self.declare_const(TRUE, O, logical=True)
        self.declare_const(AND, arrow([O, O], O), logical=True)
        self.declare_const(OR, arrow([O, O], O), logical=True)
        # sigma is a family; its table entry is only a placeholder.
        self.consts[SIGMA] = None
        self.logical = set(LOGICAL)

    def declare_sort(self, name: str) -> None:
        self.sorts.add(name)

    def declare_ctor(self, name: str, arity: int) -> None:
        self.ctors[name] = arity

    def _check_type(self, name: str, ty) -> None:
        if isinstance(ty, Sort):
            if ty.name not in self.sorts:
                raise UsageError(f"undeclared sort {ty.name!r} in type of {name!r}")
        elif isinstance(ty, TyApp):
            if self.ctors.get(ty.ctor) != len(ty.args):
                raise UsageError(
                    f"type constructor {ty.ctor!r} arity mismatch in type of {name!r}"
                )
            for a in ty.args:
                self._check_type(name, a)
        else:
            self._check_type(name, ty.arg)
            self._check_type(name, ty.res)

    def declare_const(self, name: str, ty, logical: bool = False) -> None:
        self._check_type(name, ty)
        if not logical:
            # o may be a target anywhere, but a bare o argument slot on a
            # non-logical constant would smuggle propositions into data
            # positions; reject it (checked, not assumed).
            args, _ = decompose(ty)
            for a in args:
                if a == O:
                    raise UsageError(
                        f"constant {name!r}: argument type o is not allowed"
                    )
        self.consts[name] = ty
        node = Term.__new__(Term)
        node.tag = T_CONST
        node.name = name
        node.ty = ty
        node.mask = 0
        node.ground = True
        node.serial = -1
        self._nodes[name] = node

    def const(self, name: str) -> "Term":
        return self._nodes[name]

    def has_const(self, name: str) -> bool:
        return name in self._nodes


# --------------------------------------------------------------------------
# Term nodes
# --------------------------------------------------------------------------

T_CONST = 0   # declared constant (name, ty)
T_VAR = 1     # logic variable cell (ref = binding or None, ty, name)
T_INDEX = 2   # de Bruijn index (i >= 1)
T_APP = 3     # n-ary application (fn, args tuple)
T_LAM = 4     # abstraction (body)
T_SUSP = 5    # suspension (skel, ol, nl, env)
T_REF = 6     # forwarding node left by destructive reduction (ref)

_TAGNAMES = ("const", "var", "#", "app", "lam", "susp", "ref")


class Term:
    __slots__ = (
        "tag", "mask", "ground", "serial",
        "name", "ty", "ref", "i", "fn", "args", "body",
        "skel", "ol", "nl", "env",
    )

    def __repr__(self) -> str:  # debugging aid only
        t = deref(self)
        if t.tag == T_CONST:
            return t.name
        if t.tag == T_VAR:
            return f"?{t.name}" if t.ref is None else f"?{t.name}={t.ref!r}"
        if t.tag == T_INDEX:
            return f"#{t.i}"
        if t.tag == T_APP:
            return "(" + " ".join(repr(x) for x in (t.fn,) + t.args) + ")"
        if t.tag == T_LAM:
            return f"(lam {t.body!r})"
        if t.tag == T_SUSP:
            return f"[[{t.skel!r},{t.ol},{t.nl},{env_repr(t.env)}]]"
        return f"ref->{t.ref!r}"


# Environments are immutable cons cells (item, rest) with None as nil, so
# rule r7 extension is O(1) and spines are shared.  Items:


class Dum:
    __slots__ = ("l",)

    def __init__(self, l: int) -> None:
        self.l = l

    def __repr__(self) -> str:
        return f"@{self.l}"


class Bnd:
    __slots__ = ("term", "l")

    def __init__(self, term: Term, l: int) -> None:
        self.term = term
        self.l = l

    def __repr__(self) -> str:
        return f"({self.term!r},{self.l})"


def env_cons(item, rest):
    return (item, rest)


def env_len(env) -> int:
    n = 0
    while env is not None:
        n += 1
        env = env[1]
    return n


def env_nth(env, i: int):
    """1-based indexing, e[i] of the paper."""
    while i > 1:
        env = env[1]
        i -= 1
    return env[0]


def env_items(env):
    while env is not None:
        yield env[0]
        env = env[1]


def env_repr(env) -> str:
    return "[" + ",".join(repr(x) for x in env_items(env)) + "]"


# --------------------------------------------------------------------------
# Node constructors.  All compute the exact free-index mask.
# --------------------------------------------------------------------------

_index_cache: list = []


def _new(arena=None) -> Term:
    t = Term.__new__(Term)
    t.serial = arena.alloc() if arena is not None else -1
    return t


def mk_index(i: int, arena=None) -> Term:
    """De Bruijn index node.  Interned (index nodes are never mutated)."""
    if i < 1:
        raise UsageError("de Bruijn indices start at 1")
    while len(_index_cache) <= i:
        t = Term.__new__(Term)
        t.tag = T_INDEX
        t.i = len(_index_cache)
        t.mask = 1 << t.i
        t.ground = True
        t.serial = -1
        _index_cache.append(t)
    return _index_cache[i]


def fresh_var(ty, name: str = "_", arena=None) -> Term:
    t = _new(arena)
    t.tag = T_VAR
    t.ref = None
    t.ty = ty
    t.name = name
    t.mask = 0       # logic variables are global, hence closed
    t.ground = False
    return t


def sigma_const(alpha, arena=None) -> Term:
    """A sigma occurrence; carries its instance type (alpha -> o) -> o."""
    t = _new(arena)
    t.tag = T_CONST
    t.name = SIGMA
    t.ty = Arrow(Arrow(alpha, O), O)
    t.mask = 0
    t.ground = True
    return t


def mk_app(fn: Term, args, arena=None) -> Term:
    """Application node with a contiguous argument vector.

    A curried source application is flattened here (function part that is
    directly an application merges its argument vector).
    """
    args = tuple(args)
    if not args:
        raise UsageError("mk_app: empty argument vector")
    if fn.tag == T_APP:
        args = tuple(fn.args) + args
        fn = fn.fn
    t = _new(arena)
    t.tag = T_APP
    t.fn = fn
    t.args = args
    mask = fn.mask
    ground = fn.ground
    for a in args:
        mask |= a.mask
        ground = ground and a.ground
    t.mask = mask
    t.ground = ground
    return t


def mk_lam(body: Term, arena=None) -> Term:
    """Abstraction node; open iff the body has a free index greater than 1."""
    t = _new(arena)
    t.tag = T_LAM
    t.body = body
    t.mask = (body.mask >> 1) & -2
    t.ground = body.ground
    return t


def susp_mask(skel_mask: int, ol: int, nl: int, env) -> int:
    """Exact free-index set of [[skel, ol, nl, env]] from component masks."""
    mask = ((skel_mask >> ol) & -2) << nl
    if skel_mask & ((2 << ol) - 2):  # any index <= ol occurs
        i = 1
        e = env
        while e is not None and i <= ol:
            if (skel_mask >> i) & 1:
                item = e[0]
                if type(item) is Dum:
                    mask |= 1 << (nl - item.l)
                else:
                    mask |= item.term.mask << (nl - item.l)
            e = e[1]
            i += 1
    return mask


def mk_susp(skel: Term, ol: int, nl: int, env, arena=None) -> Term:
    t = _new(arena)
    t.tag = T_SUSP
    t.skel = skel
    t.ol = ol
    t.nl = nl
    t.env = env
    t.mask = susp_mask(skel.mask, ol, nl, env)
    g = skel.ground
    if g:
        for item in env_items(env):
            if type(item) is Bnd and not item.term.ground:
                g = False
                break
    t.ground = g
    return t


def mk_ref(target: Term, arena=None) -> Term:
    t = _new(arena)
    t.tag = T_REF
    t.ref = target
    t.mask = target.mask
    t.ground = target.ground
    return t


# --------------------------------------------------------------------------
# Structural utilities
# --------------------------------------------------------------------------


def deref(t: Term) -> Term:
    """Follow reference nodes and logic-variable bindings; never allocates."""
    while True:
        tag = t.tag
        if tag == T_REF:
            t = t.ref
        elif tag == T_VAR and t.ref is not None:
            t = t.ref
        else:
            return t


def susp_wf(t: Term) -> bool:
    """Suspension well-formedness: env length and embedding-level bounds,
    recursively through nested suspensions."""
    if t.tag != T_SUSP:
        raise UsageError("susp_wf: not a suspension")
    return _wf(t)


def _wf(t: Term) -> bool:
    t = deref(t)
    if t.tag == T_SUSP:
        if env_len(t.env) != t.ol:
            return False
        for item in env_items(t.env):
            if type(item) is Dum:
                if not item.l < t.nl:
                    return False
            else:
                if not item.l <= t.nl:
                    return False
                if not _wf(item.term):
                    return False
        return _wf(t.skel)
    if t.tag == T_APP:
        return _wf(t.fn) and all(_wf(a) for a in t.args)
    if t.tag == T_LAM:
        return _wf(t.body)
    return True


def subst_as_redexes(t: Term, args, arena=None) -> Term:
    """Encode a simultaneous substitution as the redex (lam...lam t) t1...tn.

    ``t`` refers to the n substitution slots as de Bruijn indices #n..#1
    (slot i, in pair order, is #(n-i+1)).  No copying of t happens here; the
    substitution is performed by later reduction.
    """
    args = list(args)
    if not args:
        return t
    body = t
    for _ in args:
        body = mk_lam(body, arena)
    return mk_app(body, args, arena)


def struct_eq_nf(t1: Term, t2: Term) -> bool:
    """Structural equality of beta-normal eta-short terms; under de Bruijn
    this is alpha-equivalence.  A simple identity test on heads."""
    t1 = deref(t1)
    t2 = deref(t2)
    if t1 is t2:
        return True
    if t1.tag != t2.tag:
        return False
    if t1.tag == T_CONST:
        return t1.name == t2.name
    if t1.tag == T_VAR:
        return False  # distinct unbound cells
    if t1.tag == T_INDEX:
        return t1.i == t2.i
    if t1.tag == T_APP:
        return (
            len(t1.args) == len(t2.args)
            and struct_eq_nf(t1.fn, t2.fn)
            and all(struct_eq_nf(a, b) for a, b in zip(t1.args, t2.args))
        )
    if t1.tag == T_LAM:
        return struct_eq_nf(t1.body, t2.body)
    raise UsageError("struct_eq_nf: input not in normal form")


def free_index_mask_scan(t: Term) -> int:
    """Reference scanner for annotation tests: recomputes the free-index set
    from scratch, interpreting suspensions semantically (independent of the
    cached masks)."""
    t = deref(t)
    if t.tag in (T_CONST, T_VAR):
        return 0
    if t.tag == T_INDEX:
        return 1 << t.i
    if t.tag == T_APP:
        m = free_index_mask_scan(t.fn)
        for a in t.args:
            m |= free_index_mask_scan(a)
        return m
    if t.tag == T_LAM:
        return (free_index_mask_scan(t.body) >> 1) & -2
    # suspension: indices > ol shift; indices <= ol read the environment
    sm = free_index_mask_scan(t.skel)
    m = ((sm >> t.ol) & -2) << t.nl
    i = 1
    e = t.env
    while e is not None and i <= t.ol:
        if (sm >> i) & 1:
            item = e[0]
            if type(item) is Dum:
                m |= 1 << (t.nl - item.l)
            else:
                m |= free_index_mask_scan(item.term) << (t.nl - item.l)
        e = e[1]
        i += 1
    return m


def max_free_index(t: Term) -> int:
    return t.mask.bit_length() - 1 if t.mask else 0


def is_closed(t: Term) -> bool:
    return t.mask == 0


def term_size(t: Term) -> int:
    t = deref(t)
    if t.tag in (T_CONST, T_VAR, T_INDEX):
        return 1
    if t.tag == T_APP:
        return 1 + term_size(t.fn) + sum(term_size(a) for a in t.args)
    if t.tag == T_LAM:
        return 1 + term_size(t.body)
    n = 1 + term_size(t.skel)
    for item in env_items(t.env):
        if type(item) is Bnd:
            n += term_size(item.term)
    return n
