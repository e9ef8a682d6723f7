"""Shared test fixtures: a small signature, term builders, canonical
rendering for cross-engine comparison, and a random well-typed term
generator."""

from __future__ import annotations

import random

from hopl import (
    Arrow, EngineState, Signature, Sort, TyApp,
    arrow, decompose, deref, fresh_var, mk_app, mk_index, mk_lam,
)
from hopl.terms import T_APP, T_CONST, T_INDEX, T_LAM, T_VAR

I = Sort("i")
LIST_I = TyApp("list", (I,))


def make_signature() -> Signature:
    sig = Signature()
    sig.declare_sort("i")
    sig.declare_const("a", I)
    sig.declare_const("b", I)
    sig.declare_const("c0", I)
    sig.declare_const("f", arrow([I], I))
    sig.declare_const("g", arrow([I, I], I))
    sig.declare_const("h3", arrow([I, I, I], I))
    sig.declare_const("w", arrow([arrow([I], I)], I))          # order 2
    sig.declare_const("m", arrow([arrow([arrow([I], I)], I)], I))  # order 3
    sig.declare_const("nil", LIST_I)
    sig.declare_const("::", arrow([I, LIST_I], LIST_I))
    return sig


def state(sig=None, **config_kw) -> EngineState:
    from hopl import Config

    sig = sig or make_signature()
    return EngineState(sig, Config(**config_kw))


def canon(t, names=None) -> str:
    """Canonical string of a normal-form term: logic variables numbered by
    first appearance, so results from different engines compare equal."""
    names = {} if names is None else names

    def go(t):
        t = deref(t)
        if t.tag == T_CONST:
            return t.name
        if t.tag == T_VAR:
            if id(t) not in names:
                names[id(t)] = f"V{len(names)}"
            return names[id(t)]
        if t.tag == T_INDEX:
            return f"#{t.i}"
        if t.tag == T_APP:
            return "(" + " ".join([go(t.fn)] + [go(a) for a in t.args]) + ")"
        if t.tag == T_LAM:
            return "\\" + go(t.body)
        raise AssertionError("canon: not a normal form")

    return go(t)


def canon_anon(t) -> str:
    """Like canon but with all logic variables anonymized, for ordering."""

    def go(t):
        t = deref(t)
        if t.tag == T_CONST:
            return t.name
        if t.tag == T_VAR:
            return "_"
        if t.tag == T_INDEX:
            return f"#{t.i}"
        if t.tag == T_APP:
            return "(" + " ".join([go(t.fn)] + [go(a) for a in t.args]) + ")"
        return "\\" + go(t.body)

    return go(t)


def canon_answer(ans) -> tuple:
    """Canonical, engine-independent form of an answer.  Residual pairs are
    unordered and orientation-free: sides and pairs are sorted by their
    variable-anonymized rendering before the shared numbering pass."""
    names: dict = {}
    bindings = tuple(
        (k, canon(ans.bindings[k], names)) for k in sorted(ans.bindings)
    )
    oriented = []
    for l, r in ans.residual:
        kl, kr = canon_anon(l), canon_anon(r)
        oriented.append(((kl, kr), (l, r)) if kl <= kr else ((kr, kl), (r, l)))
    oriented.sort(key=lambda x: x[0])
    residual = tuple(
        (canon(l, names), canon(r, names)) for _k, (l, r) in oriented
    )
    return (bindings, residual, ans.incomplete)


def answers_key(stream) -> list:
    return [canon_answer(a) for a in stream]


# --------------------------------------------------------------------------
# Random well-typed pure terms (closed), size-bounded, order <= 3
# --------------------------------------------------------------------------

_TYPES = [I, arrow([I], I), arrow([I, I], I), arrow([arrow([I], I)], I)]


def _heads_for(sig, ty):
    """Constants of the test signature usable as spine heads for target ty."""
    out = []
    for name in ("a", "b", "c0", "f", "g", "h3", "w", "m"):
        cty = sig.consts[name]
        args, tgt = decompose(cty)
        if tgt == ty:
            out.append((sig.const(name), args))
    return out


def random_term(rng: random.Random, sig, ty, ctx, size: int):
    """A closed well-typed term of the given type; ctx lists binder types,
    innermost first.  Redexes are injected to exercise reduction."""
    args_ty, tgt = decompose(ty)
    if args_ty and (size > 2 and rng.random() < 0.75 or size <= 2):
        # descend under the binder
        body = random_term(rng, sig, arrow(args_ty[1:], tgt), [args_ty[0]] + ctx,
                           size - 1)
        return mk_lam(body)
    # choose a spine: bound variable, constant, or a redex head
    choices = []
    for i, bty in enumerate(ctx, start=1):
        bargs, btgt = decompose(bty)
        if btgt == tgt and len(bargs) <= 2:
            choices.append(("var", i, bargs, bty))
    for cnode, cargs in _heads_for(sig, tgt):
        choices.append(("const", cnode, cargs, None))
    if size > 4 and rng.random() < 0.35:
        # (lam body) arg redex of the requested type
        sigma = _TYPES[rng.randrange(2)]
        fn = random_term(rng, sig, Arrow(sigma, ty), ctx, size // 2)
        arg = random_term(rng, sig, sigma, ctx, size // 2)
        return mk_app(fn, [arg]) if fn.tag == T_LAM else _spine_fallback(
            rng, sig, ty, ctx, size, choices)
    return _spine_fallback(rng, sig, ty, ctx, size, choices)


def _spine_fallback(rng, sig, ty, ctx, size, choices):
    args_ty, tgt = decompose(ty)
    if not choices:
        # eta-expand into a binder and try again with a richer context
        if args_ty:
            body = random_term(rng, sig, arrow(args_ty[1:], tgt),
                               [args_ty[0]] + ctx, size - 1)
            return mk_lam(body)
        raise AssertionError("no head available for type")
    kind, head, hargs, _ = choices[rng.randrange(len(choices))]
    node = mk_index(head) if kind == "var" else head
    if not hargs:
        return node
    budget = max(1, (size - 1) // len(hargs))
    actual = [random_term(rng, sig, a, ctx, budget) for a in hargs]
    return mk_app(node, actual)


def random_closed_term(rng: random.Random, sig, max_size: int = 40):
    ty = _TYPES[rng.randrange(len(_TYPES))]
    t = random_term(rng, sig, ty, [], rng.randrange(4, max_size))
    assert t.mask == 0
    return t
