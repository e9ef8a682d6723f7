"""Higher-order unification.

Disagreement sets live on a doubly linked "live list" of term pairs.  SIMPL
decomposes rigid-rigid pairs on a first pushdown list, makes the immediate
bindings licensed by the rigid path check, parks surviving flexible pairs on
a second pushdown list, and repeats with the whole set whenever a binding
was made; survivors are then moved to the heap and the live list.  Branching
(MATCH imitation/projection substitutions for a flexible-rigid pair) is
explored depth first through branch point records chained with the other
backtracking records; the trail plus per-record watermarks restore state
exactly on retry.
"""

from __future__ import annotations

from .runtime import Arena, Config, Counters, Tracer, Trail, UsageError
from .reduce import eta_adjust, hnf, naive_normalize, nf, restore_payload
from .terms import (
    Term,
    T_APP, T_CONST, T_INDEX, T_LAM, T_SUSP, T_VAR,
    arrow, decompose, deref, fresh_var, mk_app, mk_index, mk_lam,
    target_type,
)

FAIL = "fail"
OK = "ok"

RETRIED = "retried"
EXHAUSTED_TO_PARENT = "exhausted_to_parent"
TOTAL_FAILURE = "total_failure"


# --------------------------------------------------------------------------
# Engine state: the data areas shared by the interpreter and the VM
# --------------------------------------------------------------------------


class Pair:
    """Disagreement pair, heap-resident member of the live list."""

    __slots__ = ("lhs", "rhs", "prev", "next", "serial")

    def __init__(self, lhs: Term, rhs: Term, serial: int) -> None:
        self.lhs = lhs
        self.rhs = rhs
        self.prev = None
        self.next = None
        self.serial = serial

    def __repr__(self) -> str:
        return f"<{self.lhs!r} ?= {self.rhs!r}>"


class LiveList:
    """Doubly linked list of pairs; additions always prepend, so restoring a
    saved head pointer drops everything added past it."""

    __slots__ = ("first",)

    def __init__(self) -> None:
        self.first = None

    def add(self, pair: Pair) -> None:
        pair.prev = None
        pair.next = self.first
        if self.first is not None:
            self.first.prev = pair
        self.first = pair

    def remove(self, st, pair: Pair) -> None:
        st.trail.push(("d", pair, pair.prev, pair.next))
        st.counters.trail_entries += 1
        if pair.prev is None:
            self.first = pair.next
        else:
            pair.prev.next = pair.next
        if pair.next is not None:
            pair.next.prev = pair.prev

    def pairs(self):
        p = self.first
        while p is not None:
            yield p
            p = p.next

    def is_empty(self) -> bool:
        return self.first is None

    def snapshot(self):
        return tuple((p.lhs, p.rhs) for p in self.pairs())


class Mark:
    """Watermark for undoing everything back to a prior state."""

    __slots__ = ("tr", "h", "ll_first", "hb_prev", "brs", "b", "bdepth")

    def __init__(self, st) -> None:
        self.tr = st.trail.mark()
        self.h = st.arena.top
        self.ll_first = st.ll.first
        self.hb_prev = st.hb
        self.brs = st.brs
        self.b = st.b
        self.bdepth = st.cur_bdepth


class EngineState:
    """Heap, trail, live list and backtrack chain for one query."""

    def __init__(self, sig, config: Config | None = None, tracer: Tracer | None = None):
        self.sig = sig
        self.config = config or Config()
        self.tracer = tracer or Tracer()
        self.arena = Arena()
        self.trail = Trail()
        self.counters = Counters()
        self.ll = LiveList()
        self.brs = None          # shared branch point part in effect
        self.b = None            # youngest backtrack record
        self.hb = 0              # heap watermark for conditional trailing
        self.cur_bdepth = 0      # branch points on the current path
        self.depth_exceeded = False
        self.ll_dirty = False
        self.fuel = self.config.fuel
        self.sl_stack: list = []
        self.app_stack: list = []
        self._fresh = 0
        self.pretty = repr       # replaced by the frontend printer when loaded

    def fresh(self, ty, hint: str = "H") -> Term:
        self._fresh += 1
        return fresh_var(ty, f"{hint}{self._fresh}", self.arena)

    def mark(self) -> Mark:
        m = Mark(self)
        self.hb = self.arena.top
        return m

    def undo_to(self, m: Mark) -> None:
        unwind_trail(self, m.tr)
        self.arena.top = m.h
        self.ll.first = m.ll_first
        if m.ll_first is not None:
            m.ll_first.prev = None
        self.hb = m.hb_prev
        self.brs = m.brs
        self.b = m.b
        self.cur_bdepth = m.bdepth


def unwind_trail(st, to_len: int) -> None:
    entries = st.trail.entries
    ll = st.ll
    while len(entries) > to_len:
        e = entries.pop()
        k = e[0]
        if k == "b":
            e[1].ref = None
        elif k == "o":
            restore_payload(e[1], e[2], e[3], e[4], e[5])
        else:  # "d": re-splice a deleted pair between its saved neighbours
            pair, prv, nxt = e[1], e[2], e[3]
            pair.prev = prv
            pair.next = nxt
            if prv is None:
                ll.first = pair
            else:
                prv.next = pair
            if nxt is not None:
                nxt.prev = pair


def bind_var(st, var: Term, term: Term) -> None:
    """The only sanctioned way to instantiate a logic variable."""
    if var.ref is not None:
        raise UsageError("bind_var: variable already bound")
    assert term.mask == 0, "bindings must be closed terms"
    if var.serial < st.hb:
        st.trail.push(("b", var))
        st.counters.trail_entries += 1
    var.ref = term
    if st.ll.first is not None:
        st.ll_dirty = True  # resident pairs may change status
    st.counters.bindings += 1
    if st.config.trace_unify:
        st.tracer.emit(f"unify bind {var.name} := {st.pretty(term)}")


# --------------------------------------------------------------------------
# SIMPL
# --------------------------------------------------------------------------

_CLASH = 0
_BOUND = 1
_KEPT = 2
_DONE = 3


def _app_result_type(ty, nargs: int):
    for _ in range(nargs):
        ty = ty.res
    return ty


def _strip_lams(t: Term, n: int) -> Term:
    t = deref(t)
    for _ in range(n):
        t = deref(t.body)
    return t


def _scan_direct_bindable(u: Term, x: Term):
    """True: u is suspension-free and does not contain x (bind directly).
    False: x found (needs the full check).  None: suspension met (needs
    normalization first)."""
    u = deref(u)
    tag = u.tag
    if tag == T_VAR:
        return u is not x
    if tag == T_SUSP:
        return None
    if tag == T_APP:
        r = _scan_direct_bindable(u.fn, x)
        if r is not True:
            return r
        for a in u.args:
            r = _scan_direct_bindable(a, x)
            if r is not True:
                return r
        return True
    if tag == T_LAM:
        return _scan_direct_bindable(u.body, x)
    return True


class _RPFail(Exception):
    pass


class _RPFallback(Exception):
    pass


def _occurs_pure(x: Term, u: Term) -> bool:
    tag = u.tag
    if tag == T_VAR:
        return u is x
    if tag == T_APP:
        return _occurs_pure(x, u.fn) or any(_occurs_pure(x, a) for a in u.args)
    if tag == T_LAM:
        return _occurs_pure(x, u.body)
    return False


def _section(st, x: Term, u: Term, d: int, cuts: list) -> Term:
    """Rigid initial section of u with fresh variables at the flexible
    positions shielding occurrences of x or of indices escaping depth d."""
    offending = _occurs_pure(x, u) or (u.mask >> (d + 1)) != 0
    if not offending:
        return u
    tag = u.tag
    if tag == T_LAM:
        return mk_lam(_section(st, x, u.body, d + 1, cuts), st.arena)
    if tag == T_VAR or tag == T_INDEX:
        # x itself, or a protruding bound variable, at a rigid position
        raise _RPFail
    # application
    head = u.fn
    if head.tag == T_VAR:
        if head is x:
            raise _RPFail  # x heads a spine on an otherwise rigid path
        if d != 0:
            raise _RPFallback  # binder types unknown for the fresh hole
        ty = _app_result_type(head.ty, len(u.args))
        y = st.fresh(ty)
        cuts.append((y, u))
        return y
    if head.tag == T_INDEX and head.i > d:
        raise _RPFail
    return mk_app(head, [_section(st, x, a, d, cuts) for a in u.args], st.arena)


def rigid_path_check(st, x: Term, t_nf: Term):
    """Occurs-check generalization for a pair <lam^n x, lam^n t> with x
    applied to nothing; t_nf is the fully normalized right side with the
    common binder stripped.

    Returns ("bind", term), ("fail",), ("residual", term, [(y, subterm)])
    or ("fallback",) when the conservative construction does not apply.
    """
    if t_nf.tag == T_VAR or (t_nf.tag == T_APP and deref(t_nf.fn).tag == T_VAR):
        # flexible at the root: there is no rigid section to bind to
        if _occurs_pure(x, t_nf) or t_nf.mask != 0:
            return ("fallback",)
    cuts: list = []
    try:
        section = _section(st, x, t_nf, 0, cuts)
    except _RPFail:
        return ("fail",)
    except _RPFallback:
        return ("fallback",)
    assert section.mask == 0
    if cuts:
        return ("residual", section, cuts)
    return ("bind", section)


def _try_bindable(st, vx, vt, t_term: Term, pdl1: list):
    """Attempt the immediate-binding path for a pair whose one side is a
    bare flexible head under vx.binder_len abstractions.  Returns _BOUND,
    _CLASH or None (no immediate binding; use the general machinery)."""
    x = vx.head
    n = vx.binder_len
    if vt.binder_len < n:
        return None
    u = _strip_lams(t_term, n)
    if u.mask == 0:
        if u.ground:
            bind_var(st, x, u)
            return _BOUND
        quick = _scan_direct_bindable(u, x)
        if quick is True:
            bind_var(st, x, u)
            return _BOUND
    else:
        # free indices under suspensions may still read away; normalize
        pass
    u_nf = nf(st, u)
    if u_nf is x:
        return _DONE  # trivial <X, X>
    res = rigid_path_check(st, x, u_nf)
    kind = res[0]
    if kind == "fail":
        return _CLASH
    if kind == "fallback":
        return None
    bind_var(st, x, res[1])
    if kind == "residual":
        for y, sub in res[2]:
            pdl1.append((sub, y))
        if st.config.trace_unify:
            st.tracer.emit(
                f"unify rigid-path residual: {x.name} bound, "
                f"{len(res[2])} constraint pair(s)"
            )
    return _BOUND


def _process_pair(st, lhs: Term, rhs: Term, pdl1: list, pdl2: list) -> int:
    if deref(lhs) is deref(rhs):
        return _DONE
    v1 = hnf(st, lhs)
    v2 = hnf(st, rhs)
    # immediate bindings (first-order unification and its generalization)
    if v1.head.tag == T_VAR and not v1.args:
        r = _try_bindable(st, v1, v2, rhs, pdl1)
        if r is not None:
            return r
    if v2.head.tag == T_VAR and not v2.args:
        r = _try_bindable(st, v2, v1, lhs, pdl1)
        if r is not None:
            return r
    w1, w2 = eta_adjust(st, v1, v2)
    if w1.rigid and w2.rigid:
        h1, h2 = w1.head, w2.head
        if h1.tag != h2.tag:
            return _CLASH
        if h1.tag == T_CONST:
            if h1.name != h2.name:
                return _CLASH
        elif h1.i != h2.i:
            return _CLASH
        if len(w1.args) != len(w2.args):
            return _CLASH
        for a, b in zip(reversed(w1.args), reversed(w2.args)):
            pdl1.append((a, b))
        return _DONE
    pdl2.append((lhs, rhs))
    return _KEPT


def _detach_all(st) -> list:
    out = []
    p = st.ll.first
    while p is not None:
        nxt = p.next
        out.append((p.lhs, p.rhs))
        st.ll.remove(st, p)
        p = nxt
    return out


def _attach(st, pairs) -> None:
    for lhs, rhs in pairs:
        pr = Pair(lhs, rhs, st.arena.alloc())
        st.ll.add(pr)
        st.counters.pairs_created += 1


def simpl(st, new_pairs, rebound: bool = False) -> str:
    """Simplify the disagreement set given by the live list plus the
    statically pushed new pairs.  Returns FAIL on a head clash, else OK with
    the surviving flexible pairs resident in the live list."""
    inputs = list(new_pairs)
    force = rebound or st.ll_dirty
    st.ll_dirty = False
    while True:
        pdl1 = list(reversed(inputs))
        pdl2: list = []
        bound = False
        while pdl1:
            lhs, rhs = pdl1.pop()
            status = _process_pair(st, lhs, rhs, pdl1, pdl2)
            if status == _CLASH:
                return FAIL
            if status == _BOUND:
                bound = True
        if (bound or force) and (st.ll.first is not None or (bound and pdl2)):
            force = False
            inputs = pdl2 + _detach_all(st)
            continue
        _attach(st, pdl2)
        st.ll_dirty = False
        return OK


# --------------------------------------------------------------------------
# MATCH
# --------------------------------------------------------------------------


class MatchCache:
    """Components shared by all substitutions for one flexible-rigid pair:
    common binder length, argument vector, target type, and the ordered menu
    of imitation/projection choices."""

    __slots__ = ("flex", "k", "wargs", "arg_tys", "beta", "imit_head",
                 "imit_arg_tys", "menu")

    def __init__(self, st, flex_head: Term, rigid_head: Term) -> None:
        self.flex = flex_head
        arg_tys, beta = decompose(flex_head.ty)
        self.k = len(arg_tys)
        self.arg_tys = arg_tys
        self.beta = beta
        self.wargs = tuple(mk_index(self.k - i) for i in range(self.k))
        projections = [
            i for i in range(1, self.k + 1)
            if target_type(arg_tys[i - 1]) == beta
        ]
        if rigid_head.tag == T_CONST:
            self.imit_head = rigid_head
            self.imit_arg_tys, _ = decompose(rigid_head.ty)
            imit = [("i", 0)]
        else:
            self.imit_head = None
            self.imit_arg_tys = None
            imit = []
        projs = [("p", i) for i in projections]
        if st.config.order == "projection-first":
            self.menu = projs + imit
        else:
            self.menu = imit + projs

    def build(self, st, idx: int):
        """The idx-th substitution term for the flexible head, or None."""
        if idx >= len(self.menu):
            return None
        kind, pos = self.menu[idx]
        if kind == "i":
            head = self.imit_head
            gammas = self.imit_arg_tys
        else:
            head = mk_index(self.k - pos + 1)
            gammas, _ = decompose(self.arg_tys[pos - 1])
        parts = []
        for g in gammas:
            h = st.fresh(arrow(self.arg_tys, g))
            parts.append(mk_app(h, list(self.wargs), st.arena) if self.k else h)
        body = mk_app(head, parts, st.arena) if parts else head
        for _ in range(self.k):
            body = mk_lam(body, st.arena)
        return body


def match(st, flex_head: Term, rigid_head: Term) -> list:
    """The ordered list of imitation and projection substitution terms for
    the given heads (the arcs out of one matching-tree node)."""
    mc = MatchCache(st, flex_head, rigid_head)
    out = []
    i = 0
    while True:
        t = mc.build(st, i)
        if t is None:
            return out
        out.append(t)
        i += 1


# --------------------------------------------------------------------------
# Branch points and depth-first search
# --------------------------------------------------------------------------


class BranchShared:
    """Clause-usage context shared by consecutive unification branch points
    (referenced through the BRS register)."""

    __slots__ = ("cont", "e", "cp", "regs", "regime")

    def __init__(self, cont=None, e=None, cp=None, regs=(), regime="imitation-first"):
        self.cont = cont
        self.e = e
        self.cp = cp
        self.regs = regs
        self.regime = regime


class BranchVar:
    """Per-branch-point record: which substitutions were tried, and the
    watermarks needed to restore state before trying the next one."""

    kind = "bp"
    __slots__ = ("mc", "tried", "ll_saved", "h_saved", "tr_saved", "hb_prev",
                 "brs_saved", "prev", "depth", "serial", "resume")

    def __init__(self, st, mc: MatchCache, resume=None) -> None:
        self.mc = mc
        self.tried = 0
        self.ll_saved = st.ll.first
        self.h_saved = st.arena.top
        self.tr_saved = st.trail.mark()
        self.hb_prev = st.hb
        self.brs_saved = st.brs
        self.prev = st.b
        self.depth = st.cur_bdepth + 1
        self.serial = st.arena.alloc()
        self.resume = resume


def push_branch_point(st, mc: MatchCache, resume=None) -> BranchVar:
    bp = BranchVar(st, mc, resume)
    st.b = bp
    st.cur_bdepth = bp.depth
    st.hb = bp.h_saved
    st.counters.branch_points += 1
    if st.config.trace_unify:
        st.tracer.emit(
            f"unify branch-point create for {mc.flex.name} "
            f"({len(mc.menu)} substitutions, depth {bp.depth})"
        )
    return bp


def restore_into(st, rec) -> None:
    """Reset state to the record's creation point, keeping the record."""
    unwind_trail(st, rec.tr_saved)
    st.arena.top = rec.h_saved
    st.ll.first = rec.ll_saved
    if rec.ll_saved is not None:
        rec.ll_saved.prev = None
    st.brs = rec.brs_saved
    st.hb = rec.h_saved
    if rec.kind == "bp":
        st.cur_bdepth = rec.depth


def pop_record(st, rec) -> None:
    st.b = rec.prev
    st.hb = rec.hb_prev
    if rec.kind == "bp":
        st.cur_bdepth = rec.depth - 1
        if st.config.trace_unify:
            st.tracer.emit(f"unify branch-point exhausted for {rec.mc.flex.name}")


def try_next_substitution(st, bp: BranchVar) -> bool:
    sub = bp.mc.build(st, bp.tried)
    if sub is None:
        return False
    bp.tried += 1
    if st.config.trace_unify:
        st.tracer.emit(
            f"unify try {bp.mc.flex.name} := {st.pretty(sub)} "
            f"(#{bp.tried}/{len(bp.mc.menu)})"
        )
    bind_var(st, bp.mc.flex, sub)
    return True


def select_flex_rigid(st):
    """First flexible-rigid pair in live-list insertion order (the list
    prepends, so the earliest-inserted candidate is nearest the tail)."""
    found = None
    p = st.ll.first
    while p is not None:
        v1 = hnf(st, p.lhs)
        v2 = hnf(st, p.rhs)
        if v1.rigid != v2.rigid:
            found = (p, v1, v2)
        p = p.next
    return found


def _search(st, base, retrying: bool) -> bool:
    """Depth-first search over MATCH alternatives until the live list holds
    only flexible-flexible pairs (True) or alternatives above ``base`` are
    exhausted (False, with state restored to base's view)."""
    while True:
        if retrying:
            while True:
                if st.b is base:
                    return False
                rec = st.b
                assert rec.kind == "bp", "foreign record inside a unify search"
                restore_into(st, rec)
                if try_next_substitution(st, rec):
                    if simpl(st, []) != FAIL:
                        break
                    continue
                pop_record(st, rec)
            retrying = False
            continue
        sel = select_flex_rigid(st)
        if sel is None:
            return True
        pair, v1, v2 = sel
        if st.cur_bdepth >= st.config.depth:
            st.depth_exceeded = True
            retrying = True
            continue
        w1, w2 = eta_adjust(st, v1, v2)
        flexv, rigv = (w1, w2) if not w1.rigid else (w2, w1)
        if st.config.trace_unify:
            st.tracer.emit(
                f"unify select pair {st.pretty(pair.lhs)} ?= {st.pretty(pair.rhs)}"
            )
        mc = MatchCache(st, flexv.head, rigv.head)
        if not mc.menu:
            retrying = True  # MATCH(chi) empty: this branch fails
            continue
        bp = push_branch_point(st, mc, resume=None)
        try_next_substitution(st, bp)
        if simpl(st, []) == FAIL:
            retrying = True


class UnifyOutcome:
    __slots__ = ("kind", "residual")

    def __init__(self, kind: str, residual=()) -> None:
        self.kind = kind  # "solved" | "fail" | "depth_exceeded"
        self.residual = list(residual)


def solve_unify(st, base=None) -> UnifyOutcome:
    """Run the matching-tree search from the current state.  On success the
    branch point records stay parked (backtrack into them for more
    unifiers); on failure state is restored to ``base``'s view."""
    if base is None:
        base = st.b
    if _search(st, base, False):
        return UnifyOutcome("solved", st.ll.snapshot())
    if st.depth_exceeded:
        return UnifyOutcome("depth_exceeded")
    return UnifyOutcome("fail")


def next_unify_solution(st, base=None) -> bool:
    """Backtrack into the parked records and search for the next unifier."""
    if base is None:
        base = st.b
    if st.b is base:
        return False
    return _search(st, base, True)


def iter_unify_solutions(st):
    """Generator over the solved forms reachable from the current state;
    state is restored between and after alternatives."""
    base = st.b
    ok = _search(st, base, False)
    while ok:
        yield
        if st.b is base:
            return
        ok = _search(st, base, True)


def backtrack(st, base=None) -> str:
    """One backtracking step over the youngest unification branch point:
    Retried when another substitution was applied (and simplification
    succeeded), ExhaustedToParent when the record was popped, TotalFailure
    when no records remain above base."""
    if st.b is base or st.b is None:
        return TOTAL_FAILURE
    rec = st.b
    if rec.kind != "bp":
        return TOTAL_FAILURE
    restore_into(st, rec)
    while try_next_substitution(st, rec):
        if simpl(st, []) != FAIL:
            return RETRIED
        restore_into(st, rec)
    pop_record(st, rec)
    return EXHAUSTED_TO_PARENT


# --------------------------------------------------------------------------
# Brute-force oracle: exhaustive matching-tree expansion on pure terms
# --------------------------------------------------------------------------


def _o_shift(t: Term, d: int, cutoff: int) -> Term:
    if (t.mask >> (cutoff + 1)) == 0:
        return t
    if t.tag == T_INDEX:
        return mk_index(t.i + d)
    if t.tag == T_APP:
        return mk_app(_o_shift(t.fn, d, cutoff), [_o_shift(a, d, cutoff) for a in t.args])
    return mk_lam(_o_shift(t.body, d, cutoff + 1))


def _o_apply(t: Term, sub: dict) -> Term:
    """Graft closed substitution terms at variable nodes (capture-free)."""
    t = deref(t)
    tag = t.tag
    if tag == T_VAR:
        return sub.get(id(t), (None, t))[1]
    if tag == T_APP:
        return mk_app(_o_apply(t.fn, sub), [_o_apply(a, sub) for a in t.args])
    if tag == T_LAM:
        return mk_lam(_o_apply(t.body, sub))
    return t


def _o_view(t: Term):
    n = 0
    t = deref(t)
    while t.tag == T_LAM:
        n += 1
        t = deref(t.body)
    if t.tag == T_APP:
        return n, deref(t.fn), [deref(a) for a in t.args]
    return n, t, []


def _o_adjust(n_target: int, n: int, head: Term, args: list):
    j = n_target - n
    if j == 0:
        return head, args
    if head.tag == T_INDEX:
        head = mk_index(head.i + j)
    args = [_o_shift(a, j, 0) for a in args]
    args = args + [mk_index(i) for i in range(j, 0, -1)]
    return head, args


def _o_rebuild(n: int, head: Term, args: list) -> Term:
    t = mk_app(head, args) if args else head
    for _ in range(n):
        t = mk_lam(t)
    return t


def _o_wrap(n: int, t: Term) -> Term:
    for _ in range(n):
        t = mk_lam(t)
    return t


def _o_simpl(pairs):
    """None on clash, else (flex_rigid, flex_flex) lists of adjusted pairs.
    Argument pairs of matched rigid heads keep the common binder as explicit
    abstractions (the textbook formulation)."""
    work = list(reversed(pairs))
    fr: list = []
    ff: list = []
    while work:
        l, r = work.pop()
        l = naive_normalize(l)
        r = naive_normalize(r)
        n1, h1, a1 = _o_view(l)
        n2, h2, a2 = _o_view(r)
        n = max(n1, n2)
        h1, a1 = _o_adjust(n, n1, h1, a1)
        h2, a2 = _o_adjust(n, n2, h2, a2)
        r1 = h1.tag != T_VAR
        r2 = h2.tag != T_VAR
        if r1 and r2:
            if h1.tag != h2.tag:
                return None
            if h1.tag == T_CONST and h1.name != h2.name:
                return None
            if h1.tag == T_INDEX and h1.i != h2.i:
                return None
            if len(a1) != len(a2):
                return None
            for a, b in zip(reversed(a1), reversed(a2)):
                work.append((_o_wrap(n, a), _o_wrap(n, b)))
            continue
        entry = (_o_rebuild(n, h1, a1), _o_rebuild(n, h2, a2))
        if r1 or r2:
            fr.append(entry)
        else:
            ff.append(entry)
    return fr, ff


def _o_match(flex_head: Term, rigid_head: Term, fresh) -> list:
    arg_tys, beta = decompose(flex_head.ty)
    k = len(arg_tys)
    wargs = [mk_index(k - i) for i in range(k)]
    out = []

    def build(head, gammas):
        parts = []
        for g in gammas:
            h = fresh(arrow(arg_tys, g))
            parts.append(mk_app(h, list(wargs)) if k else h)
        body = mk_app(head, parts) if parts else head
        for _ in range(k):
            body = mk_lam(body)
        return body

    if rigid_head.tag == T_CONST:
        gammas, _ = decompose(rigid_head.ty)
        out.append(build(rigid_head, gammas))
    for i in range(1, k + 1):
        if target_type(arg_tys[i - 1]) == beta:
            gammas, _ = decompose(arg_tys[i - 1])
            out.append(build(mk_index(k - i + 1), gammas))
    return out


def _o_resolve(t: Term, sub: dict, rounds: int) -> Term:
    for _ in range(rounds + 1):
        t2 = _o_apply(t, sub)
        if t2 is t:
            break
        t = t2
    return t


def brute_force_unifiers(pairs, input_vars, depth: int) -> list:
    """Breadth-first expansion of the matching tree to the given depth;
    returns the substitutions of all success leaves restricted to
    input_vars, each binding beta-eta-normalized.  Shares nothing with the
    incremental engine (pure terms, functional substitutions, textbook
    normalization)."""
    counter = [0]

    def fresh(ty):
        counter[0] += 1
        return fresh_var(ty, f"bf{counter[0]}")

    results: list = []
    queue = [(dict(), list(pairs), 0)]
    while queue:
        sub, ps, d = queue.pop(0)
        simped = _o_simpl([(_o_apply(l, sub), _o_apply(r, sub)) for l, r in ps])
        if simped is None:
            continue
        fr, ff = simped
        if not fr:
            results.append(
                {
                    v: naive_normalize(_o_resolve(v, sub, len(sub)))
                    for v in input_vars
                    if id(v) in sub
                }
            )
            continue
        if d >= depth:
            continue  # truncated branch
        l, r = fr[-1]  # earliest discovered pair (both at the common binder)
        _, hl, _ = _o_view(l)
        _, hr, _ = _o_view(r)
        flex_head, rigid_head = (hl, hr) if hl.tag == T_VAR else (hr, hl)
        for cand in _o_match(flex_head, rigid_head, fresh):
            sub2 = dict(sub)
            sub2[id(flex_head)] = (flex_head, cand)
            queue.append((sub2, fr + ff, d + 1))
    return results
