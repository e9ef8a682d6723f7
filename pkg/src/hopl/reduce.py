"""Head and full normalization of suspension-notation terms.

Head normalization rewrites the leftmost, outermost redex using an iterative
two-stack discipline: the SL stack holds term references with the current
operator on top and pending operands beneath it (their count in NUMARGS),
and the applications stack remembers the application nodes whose operands
are spread out so that each beta contraction can be committed destructively
into the redex node.  Overwritten cells are value-trailed (old contents, not
just the location); trailing is elided for cells younger than the heap
backtrack watermark HB.

Suspension reading applies the rule schemata directly, with r8/r9 folded
into r5 and the beta' schema preferred over r7-then-beta whenever its
pattern matches, so nested suspensions rarely survive.  A closed skeleton
short-circuits any suspension to the skeleton itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .runtime import FuelExhausted, UsageError
from .terms import (
    Bnd, Dum, Term,
    T_APP, T_CONST, T_INDEX, T_LAM, T_REF, T_SUSP, T_VAR,
    deref, env_cons, env_nth, mk_app, mk_index, mk_lam, mk_susp,
    term_size,
)


@dataclass
class HeadNormView:
    """lam x1..xn (head a1..am) with the head atomic; arguments may still be
    suspensions.  rigid iff the head is a constant or a de Bruijn index."""

    binder_len: int
    head: Term
    args: list = field(default_factory=list)
    rigid: bool = True


def _use_fuel(st) -> None:
    st.fuel -= 1
    if st.fuel < 0:
        raise FuelExhausted("rewrite-step budget exhausted")


def _snapshot_payload(node: Term):
    tag = node.tag
    if tag == T_APP:
        return (node.fn, tuple(node.args))
    if tag == T_SUSP:
        return (node.skel, node.ol, node.nl, node.env)
    if tag in (T_REF, T_VAR):
        return (node.ref,)
    if tag == T_LAM:
        return (node.body,)
    raise UsageError("overwrite of an immutable node")


def restore_payload(node: Term, tag: int, payload, mask: int, ground: bool) -> None:
    node.tag = tag
    node.mask = mask
    node.ground = ground
    if tag == T_APP:
        node.fn, node.args = payload
    elif tag == T_SUSP:
        node.skel, node.ol, node.nl, node.env = payload
    elif tag in (T_REF, T_VAR):
        (node.ref,) = payload
    elif tag == T_LAM:
        (node.body,) = payload


def trail_overwrite(st, node: Term) -> None:
    """Value-trail a cell about to be destructively changed.  Cells allocated
    after the latest backtrack point (serial >= HB) need no entry."""
    if node.serial < st.hb:
        st.trail.push(
            ("o", node, node.tag, _snapshot_payload(node), node.mask, node.ground)
        )
        st.counters.trail_entries += 1


def _commit(st, node: Term, result: Term, rule: str) -> None:
    """Replace node in place by a reference to result."""
    if st.config.trace_reduce:
        st.tracer.emit(
            f"reduce {rule} node={node.serial} "
            f"size {term_size(node)}->{term_size(result)}"
        )
    trail_overwrite(st, node)
    node.tag = T_REF
    node.ref = result
    node.mask = result.mask
    node.ground = result.ground
    st.counters.rewrites += 1


def _susp_component(st, t: Term, ol: int, nl: int, env) -> Term:
    td = deref(t)
    if td.mask == 0:
        return td
    return mk_susp(td, ol, nl, env, st.arena)


def _read_susp(st, s: Term, sk: Term) -> Term:
    """One reading-rule application to suspension s whose (dereferenced)
    skeleton sk is not itself a suspension."""
    if sk.mask == 0:
        return sk  # covers r1/r2 and any closed skeleton
    ol, nl, env = s.ol, s.nl, s.env
    if sk.tag == T_INDEX:
        i = sk.i
        if i > ol:
            return mk_index(i - ol + nl)  # r3
        item = env_nth(env, i)
        if type(item) is Dum:
            return mk_index(nl - item.l)  # r4
        t0 = deref(item.term)
        j = nl - item.l
        if t0.mask == 0 or j == 0:
            return t0  # closed shortcut / r9 folded
        if t0.tag == T_SUSP:
            return mk_susp(t0.skel, t0.ol, t0.nl + j, t0.env, st.arena)  # r5+r8
        return mk_susp(t0, 0, j, None, st.arena)  # r5
    if sk.tag == T_APP:  # r6
        fn = _susp_component(st, sk.fn, ol, nl, env)
        args = [_susp_component(st, a, ol, nl, env) for a in sk.args]
        return mk_app(fn, args, st.arena)
    if sk.tag == T_LAM:  # r7
        inner = mk_susp(sk.body, ol + 1, nl + 1, env_cons(Dum(nl), env), st.arena)
        return mk_lam(inner, st.arena)
    return sk  # r1/r2 (unreachable past the mask test, kept for clarity)


def _rule_name_for(sk: Term) -> str:
    if sk.tag == T_INDEX:
        return "r3/r4/r5"
    if sk.tag == T_APP:
        return "r6"
    if sk.tag == T_LAM:
        return "r7"
    return "r1/r2"


def _expose_nonsusp(st, node: Term) -> Term:
    """Commit reading steps until node no longer dereferences to a
    suspension.  Nested skeletons are exposed first, iteratively."""
    pending = [node]
    while pending:
        n = deref(pending[-1])
        if n.tag != T_SUSP:
            pending.pop()
            continue
        sk = deref(n.skel)
        if sk.tag == T_SUSP:
            pending.append(sk)
            continue
        _use_fuel(st)
        _commit(st, n, _read_susp(st, n, sk), _rule_name_for(sk))
    return deref(node)


def _beta(st, lam: Term, arg: Term) -> Term:
    """Contract (lam body) arg into a suspension (beta' when the body is a
    suspension of the r7 shape, else beta); closed bodies short-circuit."""
    st.counters.beta += 1
    body = deref(lam.body)
    if (
        body.tag == T_SUSP
        and body.ol >= 1
        and body.nl >= 1
        and body.env is not None
        and type(body.env[0]) is Dum
        and body.env[0].l == body.nl - 1
    ):
        nl = body.nl - 1
        return mk_susp(
            body.skel, body.ol, nl, env_cons(Bnd(arg, nl), body.env[1]), st.arena
        )
    if body.mask == 0:
        return body
    return mk_susp(body, 1, 0, env_cons(Bnd(arg, 0), None), st.arena)


def rewrite_step(st, t: Term):
    """Apply the one rule schema whose left side t matches; returns the right
    side, or None when t is already atomic/normal at the top (a signal, not
    an error).  Construction only; nothing is committed to the graph."""
    t = deref(t)
    if t.tag == T_APP:
        f = deref(t.fn)
        if f.tag == T_LAM:
            c = _beta(st, f, t.args[0])
            rest = t.args[1:]
            return mk_app(c, list(rest), st.arena) if rest else c
        return None
    if t.tag == T_SUSP:
        sk = deref(t.skel)
        if t.ol == 0 and t.env is None:
            if t.nl == 0:
                return sk  # r9
            if sk.tag == T_SUSP:
                return mk_susp(sk.skel, sk.ol, sk.nl + t.nl, sk.env, st.arena)  # r8
        if sk.tag == T_SUSP:
            return None  # inner skeleton must be exposed first
        return _read_susp(st, t, sk)
    return None


def hnf(st, t: Term) -> HeadNormView:
    """Head-normalize t, committing every contraction destructively.

    Fast path: terms whose top is already an atom or a rigid first-order
    application are viewed without touching the stacks."""
    t0 = deref(t)
    tag = t0.tag
    if tag in (T_CONST, T_INDEX):
        return HeadNormView(0, t0, [], True)
    if tag == T_VAR:
        return HeadNormView(0, t0, [], False)
    if tag == T_APP:
        f = deref(t0.fn)
        if f.tag == T_CONST or f.tag == T_INDEX:
            return HeadNormView(0, f, list(t0.args), True)
        if f.tag == T_VAR:
            return HeadNormView(0, f, list(t0.args), False)

    st.counters.hnf_slow += 1
    sl = st.sl_stack
    apps = st.app_stack
    sl_base = len(sl)
    apps_base = len(apps)
    sl.append(t0)
    numargs = 0
    binder = 0
    try:
        while True:
            top = deref(sl[-1])
            tag = top.tag
            if tag == T_SUSP:
                sl[-1] = _expose_nonsusp(st, top)
                continue
            if tag == T_APP:
                sl.pop()
                for a in reversed(top.args):
                    sl.append(a)
                sl.append(top.fn)
                apps.append([top, len(top.args)])
                numargs += len(top.args)
                continue
            if tag == T_LAM:
                if numargs == 0:
                    binder += 1
                    sl[-1] = top.body
                    continue
                _use_fuel(st)
                sl.pop()
                arg = sl.pop()
                contractum = _beta(st, top, arg)
                entry = apps[-1]
                node = entry[0]
                remaining = entry[1] - 1
                if st.config.trace_reduce:
                    st.tracer.emit(
                        f"reduce beta node={node.serial} "
                        f"size {term_size(node)}->{term_size(contractum)}"
                    )
                trail_overwrite(st, node)
                if remaining == 0:
                    apps.pop()
                    node.tag = T_REF
                    node.ref = contractum
                    node.mask = contractum.mask
                    node.ground = contractum.ground
                else:
                    entry[1] = remaining
                    rest = node.args[-remaining:]
                    node.fn = contractum
                    node.args = rest
                    mask = contractum.mask
                    ground = contractum.ground
                    for a in rest:
                        mask |= a.mask
                        ground = ground and a.ground
                    node.mask = mask
                    node.ground = ground
                numargs -= 1
                sl.append(contractum)
                continue
            # atomic head: arguments sit beneath it in order
            if numargs:
                args = sl[-2 : -2 - numargs : -1]
            else:
                args = []
            return HeadNormView(binder, top, args, tag != T_VAR)
    finally:
        del sl[sl_base:]
        del apps[apps_base:]


def eta_adjust(st, v1: HeadNormView, v2: HeadNormView):
    """Bring two head-normal views (taken in the same binder context) to a
    common binder length N = max(n, m): a bound-variable head of the shorter
    view is renumbered by N-m, its arguments are wrapped in renumbering
    suspensions (elided when closed) and the trailing arguments #(N-m)..#1
    are appended.  Views only; nothing is committed to the heap."""
    n, m = v1.binder_len, v2.binder_len
    if n == m:
        return v1, v2
    if n < m:
        w2, w1 = eta_adjust(st, v2, v1)
        return w1, w2
    j = n - m
    head = v2.head
    if head.tag == T_INDEX:
        head = mk_index(head.i + j)
    args = [_susp_component(st, a, 0, j, None) for a in v2.args]
    args.extend(mk_index(k) for k in range(j, 0, -1))
    return v1, HeadNormView(n, head, args, head.tag != T_VAR)


# --------------------------------------------------------------------------
# Full normalization (display, oracles, rigid path checks)
# --------------------------------------------------------------------------


def _shift(t: Term, d: int, cutoff: int, arena) -> Term:
    """Renumber free indices above cutoff by d in a pure (suspension-free)
    term; masks make untouched subtrees O(1)."""
    if (t.mask >> (cutoff + 1)) == 0:
        return t
    tag = t.tag
    if tag == T_INDEX:
        return mk_index(t.i + d)
    if tag == T_APP:
        return mk_app(
            _shift(t.fn, d, cutoff, arena),
            [_shift(a, d, cutoff, arena) for a in t.args],
            arena,
        )
    if tag == T_LAM:
        return mk_lam(_shift(t.body, d, cutoff + 1, arena), arena)
    return t


def _eta_lam(st, body: Term) -> Term:
    """mk_lam with eta-short contraction: lam (f .. #1) with #1 not free in
    the rest collapses to the shifted-down rest."""
    if body.tag == T_APP:
        last = body.args[-1]
        if last.tag == T_INDEX and last.i == 1:
            rest_mask = body.fn.mask
            for a in body.args[:-1]:
                rest_mask |= a.mask
            if not rest_mask & 2:
                if len(body.args) == 1:
                    rem = body.fn
                else:
                    rem = mk_app(body.fn, list(body.args[:-1]), st.arena)
                return _shift(rem, -1, 0, st.arena)
    return mk_lam(body, st.arena)


def nf(st, t: Term) -> Term:
    """Full beta-normal, eta-short form as a fresh pure term (no suspensions
    or reference nodes; unbound logic variables remain shared cells).  Masks
    of the result are exact."""
    v = hnf(st, t)
    args = [nf(st, a) for a in v.args]
    body = mk_app(v.head, args, st.arena) if args else v.head
    for _ in range(v.binder_len):
        body = _eta_lam(st, body)
    return body


# --------------------------------------------------------------------------
# Independent oracle: textbook normalization of pure de Bruijn terms
# --------------------------------------------------------------------------


def _n_shift(t: Term, d: int, cutoff: int) -> Term:
    t = deref(t)
    tag = t.tag
    if tag == T_INDEX:
        return mk_index(t.i + d) if t.i > cutoff else t
    if tag == T_APP:
        return mk_app(_n_shift(t.fn, d, cutoff), [_n_shift(a, d, cutoff) for a in t.args])
    if tag == T_LAM:
        return mk_lam(_n_shift(t.body, d, cutoff + 1))
    if tag == T_SUSP:
        raise UsageError("naive_normalize: suspension in input")
    return t


def _n_subst(t: Term, s: Term, j: int) -> Term:
    """Capture-avoiding substitution of s for #j with the indices above j
    decremented (the alpha-conversion sequence folded into one traversal)."""
    t = deref(t)
    tag = t.tag
    if tag == T_INDEX:
        if t.i == j:
            return s
        if t.i > j:
            return mk_index(t.i - 1)
        return t
    if tag == T_APP:
        return mk_app(_n_subst(t.fn, s, j), [_n_subst(a, s, j) for a in t.args])
    if tag == T_LAM:
        return mk_lam(_n_subst(t.body, _n_shift(s, 1, 0), j + 1))
    if tag == T_SUSP:
        raise UsageError("naive_normalize: suspension in input")
    return t


def _n_step(t: Term):
    """Contract the leftmost, outermost redex; None if beta-normal."""
    t = deref(t)
    if t.tag == T_APP:
        f = deref(t.fn)
        if f.tag == T_LAM:
            b = _n_subst(f.body, t.args[0], 1)
            rest = list(t.args[1:])
            return mk_app(b, rest) if rest else b
        r = _n_step(f)
        if r is not None:
            return mk_app(r, list(t.args))
        for i, a in enumerate(t.args):
            r = _n_step(a)
            if r is not None:
                args = list(t.args)
                args[i] = r
                return mk_app(t.fn, args)
        return None
    if t.tag == T_LAM:
        r = _n_step(t.body)
        return mk_lam(r) if r is not None else None
    return None


def _n_eta(t: Term) -> Term:
    t = deref(t)
    if t.tag == T_APP:
        return mk_app(_n_eta(t.fn), [_n_eta(a) for a in t.args])
    if t.tag == T_LAM:
        body = _n_eta(t.body)
        while True:
            if body.tag == T_APP:
                last = body.args[-1]
                if last.tag == T_INDEX and last.i == 1:
                    rest_mask = body.fn.mask
                    for a in body.args[:-1]:
                        rest_mask |= a.mask
                    if not rest_mask & 2:
                        if len(body.args) == 1:
                            rem = body.fn
                        else:
                            rem = mk_app(body.fn, list(body.args[:-1]))
                        return _n_shift(rem, -1, 0)
            return mk_lam(body)
    return t


def naive_normalize(t: Term, fuel: int = 200_000) -> Term:
    """Beta-normal eta-short form by leftmost-outermost textbook
    substitution.  Test oracle: shares nothing with the suspension
    machinery."""
    while True:
        r = _n_step(t)
        if r is None:
            return _n_eta(t)
        t = r
        fuel -= 1
        if fuel < 0:
            raise FuelExhausted("naive_normalize: fuel exhausted")
