"""Abstract interpreter: depth-first construction of derivations over
(goal list, disagreement set, substitution) states.

Goals in flight are plain terms of type o; every selection step head
normalizes the first goal and dispatches on its head, so statically loaded
goals and dynamically formed ones (from instantiated flexible atoms) take
the same path.  Unification steps are taken eagerly whenever the live list
holds a flexible-rigid pair.  Clause and disjunction choices backtrack by
undoing the trail to a per-alternative mark; unification branch points are
explicit records managed by the unify module.
"""

from __future__ import annotations

import sys

from dataclasses import dataclass, field

from .runtime import EngineError
from .terms import (
    Term, AND, OR, SIGMA, TRUE,
    T_APP, T_CONST, T_LAM, T_SUSP, T_VAR,
    Bnd, decompose, deref, env_cons, env_items, fresh_var,
    mk_app, mk_lam, mk_susp,
)
from .reduce import hnf, nf
from .unify import (
    EngineState, FAIL, bind_var, iter_unify_solutions, select_flex_rigid, simpl,
)

# deep enough for long conjunctions/backchains, shallow enough that a
# divergent program raises RecursionError instead of exhausting the C stack
sys.setrecursionlimit(20_000)


# --------------------------------------------------------------------------
# Programs and clauses
# --------------------------------------------------------------------------


@dataclass
class Clause:
    pred: str
    head: Term
    body: Term | None
    vars: list            # prototype cells, never bound; renamed per use
    arity: int
    text: str = ""

    def rename(self, st) -> tuple:
        mapping = {}
        for v in self.vars:
            mapping[id(v)] = st.fresh(v.ty, v.name)
        head = _copy(self.head, mapping, st)
        body = _copy(self.body, mapping, st) if self.body is not None else None
        return head, body


def _copy(t: Term, mapping: dict, st) -> Term:
    if t.ground:
        return t
    t = deref(t)
    tag = t.tag
    if tag == T_VAR:
        return mapping.get(id(t), t)
    if tag == T_APP:
        return mk_app(
            _copy(t.fn, mapping, st), [_copy(a, mapping, st) for a in t.args], st.arena
        )
    if tag == T_LAM:
        return mk_lam(_copy(t.body, mapping, st), st.arena)
    if tag == T_SUSP:  # clauses are stored suspension-free; defensive
        items = list(env_items(t.env))
        env = None
        for item in reversed(items):
            if type(item) is Bnd:
                item = Bnd(_copy(item.term, mapping, st), item.l)
            env = env_cons(item, env)
        return mk_susp(_copy(t.skel, mapping, st), t.ol, t.nl, env, st.arena)
    return t


@dataclass
class Program:
    """Clauses indexed by predicate-head constant, in presentation order."""

    clauses: dict = field(default_factory=dict)

    def add(self, clause: Clause) -> None:
        self.clauses.setdefault(clause.pred, []).append(clause)

    def lookup(self, pred: str) -> list:
        return self.clauses.get(pred, [])


# --------------------------------------------------------------------------
# Goal views
# --------------------------------------------------------------------------

G_TOP = "top"
G_AND = "and"
G_OR = "or"
G_EXISTS = "exists"
G_RIGID = "rigid"
G_FLEX = "flex"


def goal_view(st, g: Term):
    """Head normalize a goal term and classify it for dispatch."""
    v = hnf(st, g)
    head = v.head
    if head.tag == T_VAR:
        return (G_FLEX, head, v.args)
    if head.tag != T_CONST:
        raise EngineError("goal with a bound-variable head cannot occur")
    name = head.name
    if name == TRUE:
        return (G_TOP,)
    if name == AND:
        return (G_AND, v.args[0], v.args[1])
    if name == OR:
        return (G_OR, v.args[0], v.args[1])
    if name == SIGMA:
        alpha = head.ty.arg.arg
        return (G_EXISTS, alpha, v.args[0])
    return (G_RIGID, head, v.args, g)


@dataclass
class Answer:
    bindings: dict                 # query variable name -> nf term
    residual: list                 # [(nf lhs, nf rhs)] flexible-flexible
    incomplete: bool = False       # a branch hit the depth limit


def extract_answer(st, qvars: dict) -> Answer:
    """Restrict the accumulated (destructively realized) substitution to the
    query variables; residual flexible-flexible pairs ride along.

    A query variable whose value is a bare fresh variable occurring nowhere
    else in the answer is unconstrained and reported as unbound (renaming t
    identity)."""
    values = {}
    for name, cell in qvars.items():
        if deref(cell) is not cell:
            values[name] = nf(st, cell)
    residual = [(nf(st, p.lhs), nf(st, p.rhs)) for p in st.ll.pairs()]
    counts: dict = {}

    def count(t: Term) -> None:
        t = deref(t)
        if t.tag == T_VAR:
            counts[id(t)] = counts.get(id(t), 0) + 1
        elif t.tag == T_APP:
            count(t.fn)
            for a in t.args:
                count(a)
        elif t.tag == T_LAM:
            count(t.body)

    for v in values.values():
        count(v)
    for lhs, rhs in residual:
        count(lhs)
        count(rhs)
    qcells = {id(c) for c in qvars.values()}
    bindings = {}
    for name, v in values.items():
        vd = deref(v)
        if vd.tag == T_VAR and id(vd) not in qcells and counts[id(vd)] == 1:
            continue
        bindings[name] = v
    return Answer(bindings, residual, st.depth_exceeded)


# --------------------------------------------------------------------------
# The solve loop
# --------------------------------------------------------------------------


def _solve(st, program: Program, goals: tuple):
    """Yield once per success state reachable from (goals, live list)."""
    if st.ll.first is not None and select_flex_rigid(st) is not None:
        for _ in iter_unify_solutions(st):
            yield from _solve(st, program, goals)
        return
    if not goals:
        yield None
        return
    g = goals[0]
    rest = goals[1:]
    view = goal_view(st, g)
    kind = view[0]
    if kind == G_TOP:
        yield from _solve(st, program, rest)
    elif kind == G_AND:
        yield from _solve(st, program, (view[1], view[2]) + rest)
    elif kind == G_OR:
        st.counters.choice_points += 1
        m = st.mark()
        yield from _solve(st, program, (view[1],) + rest)
        st.undo_to(m)
        yield from _solve(st, program, (view[2],) + rest)
        st.undo_to(m)
    elif kind == G_EXISTS:
        y = st.fresh(view[1], "Y")
        yield from _solve(st, program, (mk_app(view[2], [y], st.arena),) + rest)
    elif kind == G_FLEX:
        # weakest solution: instantiate the head to lam ... lam true
        head = view[1]
        arg_tys, _ = decompose(head.ty)
        body = st.sig.const(TRUE)
        for _ in arg_tys:
            body = mk_lam(body, st.arena)
        m = st.mark()
        bind_var(st, head, body)
        st.counters.flex_goals += 1
        if simpl(st, []) != FAIL:
            yield from _solve(st, program, (g,) + rest)
        st.undo_to(m)
    else:  # rigid atom: backchain
        yield from _backchain(st, program, view[1], view[3], rest)


def _backchain(st, program: Program, head: Term, atom: Term, rest: tuple):
    clauses = program.lookup(head.name)
    if not clauses:
        return
    if len(clauses) > 1:
        st.counters.choice_points += 1
    for clause in clauses:
        m = st.mark()
        chead, cbody = clause.rename(st)
        if simpl(st, [(atom, chead)]) != FAIL:
            new_goals = (cbody,) + rest if cbody is not None else rest
            yield from _solve(st, program, new_goals)
        st.undo_to(m)


def solve_query(program: Program, st: EngineState, goal: Term, qvars: dict):
    """Lazy stream of answers for a loaded, checked query term.

    The state is fully restored once the stream is exhausted or closed."""
    st.depth_exceeded = False
    st.fuel = st.config.fuel
    base = st.mark()
    try:
        for _ in _solve(st, program, (goal,)):
            yield extract_answer(st, qvars)
    finally:
        st.undo_to(base)


def dispatch_solve(st, program: Program, term: Term):
    """Solve a dynamically formed goal term: the interpretive counterpart of
    the machine's solve builtin.  Yields once per success."""
    yield from _solve(st, program, (term,))
