"""Extended-WAM bytecode machine and clause compiler.

Instructions are tuples (opcode, operands...).  Registers A1.. and X1..
share one file encoded as positive integers; permanent variables Yk are
negative integers into the current environment record.  First-order-like
head structure compiles to get/unify sequences (read/write mode through the
S cursor); head arguments with an abstraction or an applied flexible
variable at the top compile to construction code followed by get_value,
which runs interpretive simplification with the rigid path check.  The
finish_unify family bridges into the interpretive higher-order phase:
it sets up the shared part of a branch point record (BRS) and drives the
matching-tree search, whose variable parts chain with the clause choice
points through a single backtrack register.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .runtime import EngineError
from .terms import (
    Term, Signature,
    AND, OR, SIGMA, TRUE, LOGICAL,
    T_APP, T_CONST, T_INDEX, T_LAM, T_VAR,
    decompose, deref, fresh_var, mk_app, mk_index, mk_lam,
)
from .reduce import hnf, nf
from .unify import (
    EngineState, FAIL, BranchShared, MatchCache, Pair, bind_var,
    push_branch_point, pop_record, restore_into, select_flex_rigid, simpl,
    try_next_substitution, unwind_trail,
)
from .interp import Answer, extract_answer

FAIL_ADDR = 0


# --------------------------------------------------------------------------
# Code area
# --------------------------------------------------------------------------


@dataclass
class Code:
    sig: Signature
    instrs: list = field(default_factory=list)
    entries: dict = field(default_factory=dict)     # predicate -> address
    labels: dict = field(default_factory=dict)      # address -> label name
    types: list = field(default_factory=list)       # interned type operands
    type_ids: dict = field(default_factory=dict)
    spans: dict = field(default_factory=dict)       # predicate -> (lo, hi)
    gate: int = 0
    solve_addr: int = 0
    and2: int = 0

    def intern_type(self, ty) -> int:
        key = repr(ty)
        idx = self.type_ids.get(key)
        if idx is None:
            idx = len(self.types)
            self.types.append(ty)
            self.type_ids[key] = idx
        return idx


class _Label:
    __slots__ = ("name", "addr")

    def __init__(self, name: str) -> None:
        self.name = name
        self.addr = None


# --------------------------------------------------------------------------
# Compiler
# --------------------------------------------------------------------------


def _goal_list(t: Term):
    """Flatten top-level conjunctions of a clause body; drop true."""
    t = deref(t)
    if t.tag == T_APP:
        h = deref(t.fn)
        if h.tag == T_CONST and h.name == AND:
            return _goal_list(t.args[0]) + _goal_list(t.args[1])
    if t.tag == T_CONST and t.name == TRUE:
        return []
    return [t]


def _is_rigid_goal(t: Term) -> bool:
    t = deref(t)
    if t.tag == T_CONST:
        return t.name not in LOGICAL
    if t.tag == T_APP:
        h = deref(t.fn)
        return h.tag == T_CONST and h.name not in LOGICAL
    return False


def _goal_parts(t: Term):
    t = deref(t)
    if t.tag == T_CONST:
        return t, []
    return deref(t.fn), list(t.args)


def _app_result_type(ty, n):
    for _ in range(n):
        ty = ty.res
    return ty


class _Regs:
    """Argument/temporary register bookkeeping during one clause."""

    def __init__(self, arity: int, reserved: set) -> None:
        self.live = {i: ("arg", i) for i in range(1, arity + 1)}
        self.reserved = reserved
        self.hi = arity

    def free(self, i: int) -> None:
        self.live.pop(i, None)

    def hold(self, i: int, what) -> None:
        self.live[i] = what
        if i > self.hi:
            self.hi = i

    def alloc(self, allow=None) -> int:
        i = 1
        while True:
            if i not in self.live and (i == allow or i not in self.reserved):
                self.hold(i, ("tmp",))
                return i
            i += 1


class ClauseCompiler:
    def __init__(self, comp: "Compiler", pred: str, head_args: list,
                 body: Term | None, arity: int) -> None:
        self.comp = comp
        self.code = comp.code
        self.pred = pred
        self.head_args = head_args
        self.arity = arity
        self.goals = _goal_list(body) if body is not None else []
        self.out: list = []
        self.var_home: dict = {}        # id(cell) -> register (int) / Y (neg)
        self.initialized: set = set()   # vars whose cell exists at runtime
        self.fixups: list = []          # (term, capture_reg, expected_ty)
        self._classify_vars()
        g1_targets, reserved = self._first_goal_targets()
        self.targets = g1_targets
        self.regs = _Regs(arity, reserved)
        self.needs_env = len(self.goals) >= 2 or (
            len(self.goals) == 1 and not _is_rigid_goal(self.goals[0])
        )

    # ---- variable analysis ----

    def _walk_vars(self, t: Term, acc: list) -> None:
        t = deref(t)
        if t.tag == T_VAR:
            acc.append(t)
        elif t.tag == T_APP:
            self._walk_vars(t.fn, acc)
            for a in t.args:
                self._walk_vars(a, acc)
        elif t.tag == T_LAM:
            self._walk_vars(t.body, acc)

    def _classify_vars(self) -> None:
        chunks = []
        head_chunk: list = []
        for a in self.head_args:
            self._walk_vars(a, head_chunk)
        if self.goals:
            self._walk_vars(self.goals[0], head_chunk)
        chunks.append(head_chunk)
        for g in self.goals[1:]:
            c: list = []
            self._walk_vars(g, c)
            chunks.append(c)
        seen_in = {}
        for i, c in enumerate(chunks):
            for v in c:
                seen_in.setdefault(id(v), set()).add(i)
        perm_ids = {vid for vid, s in seen_in.items() if len(s) > 1}
        # permanent variable numbering: first occurrence in the body
        order: list = []
        for g in self.goals:
            self._walk_vars(g, order)
        ynum = 0
        self.nperm = 0
        for v in order:
            if id(v) in perm_ids and id(v) not in self.var_home:
                ynum += 1
                self.var_home[id(v)] = -ynum
        self.nperm = ynum
        self.occurrences: dict = {}
        allv: list = []
        for a in self.head_args:
            self._walk_vars(a, allv)
        for g in self.goals:
            self._walk_vars(g, allv)
        for v in allv:
            self.occurrences[id(v)] = self.occurrences.get(id(v), 0) + 1

    def _first_goal_targets(self):
        """Temporaries that are direct arguments of the first body goal are
        targeted at that argument register; those registers are reserved."""
        targets: dict = {}
        reserved: set = set()
        if not self.goals:
            return targets, reserved
        g = self.goals[0]
        if _is_rigid_goal(g):
            _, args = _goal_parts(g)
            for j, a in enumerate(args, start=1):
                reserved.add(j)
                a = deref(a)
                if a.tag == T_VAR and id(a) not in self.var_home:
                    targets.setdefault(id(a), j)
        else:
            reserved.add(1)  # construction target for call_solve
        return targets, reserved

    # ---- emission helpers ----

    def emit(self, *instr) -> None:
        self.out.append(instr)

    def _ty(self, ty) -> int:
        return self.code.intern_type(ty)

    def _term_type(self, t: Term):
        t = deref(t)
        if t.tag in (T_CONST, T_VAR):
            return t.ty
        if t.tag == T_APP:
            return _app_result_type(self._term_type(t.fn), len(t.args))
        raise EngineError("untyped subterm position")

    def _home_for_temp(self, v: Term, prefer_target: bool = True):
        """Pick (and hold) a register for a temporary's first occurrence."""
        tgt = self.targets.get(id(v))
        if prefer_target and tgt is not None and tgt not in self.regs.live:
            self.regs.hold(tgt, ("var", v))
            self.var_home[id(v)] = tgt
            return tgt
        r = self.regs.alloc()
        self.regs.live[r] = ("var", v)
        self.var_home[id(v)] = r
        return r

    # ---- head compilation ----

    def compile(self) -> list:
        if self.needs_env:
            self.emit("allocate")
        for j, arg in enumerate(self.head_args, start=1):
            self._head_arg(deref(arg), j)
        for term, capture, ty in self.fixups:
            target = self.regs.alloc()
            self._build(term, target)
            self.emit("get_value", target, capture)
            self.regs.free(target)
            self.regs.free(capture)
        self._finish_and_body()
        return self.out

    def _head_arg(self, t: Term, j: int) -> None:
        tag = t.tag
        if tag == T_VAR:
            if id(t) in self.initialized:
                # repeated occurrence: interpretive simplification
                self.emit("get_value", self.var_home[id(t)], j)
                self.regs.free(j)
                return
            self.initialized.add(id(t))
            home = self.var_home.get(id(t))
            if home is not None:  # permanent
                self.emit("get_variable", home, j)
                self.regs.free(j)
                return
            if self.targets.get(id(t)) == j:
                self.var_home[id(t)] = j
                self.regs.live[j] = ("var", t)
                return
            if self.occurrences.get(id(t), 0) <= 1:
                self.regs.free(j)  # void variable
                return
            self.regs.free(j)
            home = self._home_for_temp(t)
            if home != j:
                self.emit("get_variable", home, j)
            return
        if tag == T_CONST:
            if t.name == "nil":
                self.emit("get_nil", j)
            else:
                self.emit("get_constant", t, j)
            self.regs.free(j)
            return
        if tag == T_APP:
            h = deref(t.fn)
            if h.tag == T_CONST:
                tys, _ = decompose(h.ty)
                self.regs.free(j)
                if h.name == "::" and len(t.args) == 2:
                    self.emit("get_list", j)
                else:
                    self.emit("get_structure", j, h, len(t.args))
                self._unify_seq(list(t.args), tys)
                return
        # abstraction or flexible-headed application: build + get_value
        self.regs.live[j] = ("capture", t)
        self.fixups.append((t, j, None))

    def _unify_seq(self, children: list, tys: list) -> None:
        nested: list = []
        for s, ty in zip(children, tys):
            s = deref(s)
            if s.tag == T_VAR:
                if id(s) in self.initialized:
                    self.emit("unify_value", self.var_home[id(s)], self._ty(s.ty))
                else:
                    self.initialized.add(id(s))
                    home = self.var_home.get(id(s))
                    if home is None:
                        home = self._home_for_temp(s)
                    self.emit("unify_variable", home, self._ty(s.ty))
            elif s.tag == T_CONST:
                self.emit("unify_constant", s)
            elif s.tag == T_INDEX:
                self.emit("unify_index", s.i)
            else:
                cap = self.regs.alloc()
                self.regs.live[cap] = ("capture", s)
                self.emit("unify_variable", cap, self._ty(ty))
                nested.append((s, cap, ty))
        for s, cap, ty in nested:
            h = deref(s.fn) if s.tag == T_APP else None
            if s.tag == T_APP and h.tag == T_CONST:
                htys, _ = decompose(h.ty)
                self.regs.free(cap)
                if h.name == "::" and len(s.args) == 2:
                    self.emit("get_list", cap)
                else:
                    self.emit("get_structure", cap, h, len(s.args))
                self._unify_seq(list(s.args), htys)
            else:
                self.fixups.append((s, cap, ty))

    # ---- construction (put side) ----

    def _ensure_var_reg(self, v: Term) -> int:
        """Register or Y slot holding v, creating the cell at its first
        occurrence."""
        home = self.var_home.get(id(v))
        if id(v) not in self.initialized:
            self.initialized.add(id(v))
            if home is None:
                home = self._home_for_temp(v, prefer_target=False)
                self.emit("put_variable", home, home, self._ty(v.ty))
            else:  # permanent: materialize through a scratch register
                r = self.regs.alloc()
                self.emit("put_variable", home, r, self._ty(v.ty))
                self.regs.free(r)
        return home

    def _build(self, t: Term, target: int) -> None:
        t = deref(t)
        tag = t.tag
        if tag == T_CONST:
            self.emit("put_constant", t, target)
            return
        if tag == T_INDEX:
            self.emit("put_index", target, t.i)
            return
        if tag == T_VAR:
            home = self.var_home.get(id(t))
            if id(t) not in self.initialized:
                self.initialized.add(id(t))
                if home is None:
                    self.var_home[id(t)] = target
                    self.regs.hold(target, ("var", t))
                    self.emit("put_variable", target, target, self._ty(t.ty))
                else:
                    self.emit("put_variable", home, target, self._ty(t.ty))
            elif home != target:
                self.emit("put_value", home, target)
            return
        if tag == T_LAM:
            scratch = self.regs.alloc()
            self._build(t.body, scratch)
            op = "put_clambda" if t.mask == 0 else "put_flambda"
            self.emit(op, target, scratch)
            self.regs.free(scratch)
            return
        # application
        h = deref(t.fn)
        prebuilt = {}
        fn_reg = None
        if h.tag == T_CONST and h.name == "::" and len(t.args) == 2:
            use_put_list = True
        else:
            use_put_list = False
            if h.tag == T_CONST:
                fn_reg = self.regs.alloc()
                self.emit("put_constant", h, fn_reg)
            elif h.tag == T_INDEX:
                fn_reg = self.regs.alloc()
                self.emit("put_index", fn_reg, h.i)
            else:  # variable functor
                home = self.var_home.get(id(h))
                if id(h) not in self.initialized:
                    fn_reg = self._ensure_var_reg(h)
                    if fn_reg < 0:
                        r = self.regs.alloc()
                        self.emit("globalize_y", fn_reg, r)
                        fn_reg = r
                elif home < 0:
                    fn_reg = self.regs.alloc()
                    self.emit("globalize_y", home, fn_reg)
                else:
                    fn_reg = home
                    self.emit("globalize_x", fn_reg)
        for i, a in enumerate(t.args):
            a = deref(a)
            if a.tag in (T_APP, T_LAM):
                r = self.regs.alloc()
                self._build(a, r)
                prebuilt[i] = r
            elif a.tag == T_VAR and id(a) not in self.initialized:
                self._ensure_var_reg(a)
        if use_put_list:
            self.emit("put_list", target)
        else:
            op = "put_capp" if t.mask == 0 else "put_fapp"
            self.emit(op, target, fn_reg, len(t.args))
            if fn_reg is not None and self.regs.live.get(fn_reg) == ("tmp",):
                self.regs.free(fn_reg)
        for i, a in enumerate(t.args):
            a = deref(a)
            if i in prebuilt:
                self.emit("set_value", prebuilt[i])
                self.regs.free(prebuilt[i])
            elif a.tag == T_CONST:
                self.emit("unify_constant", a)
            elif a.tag == T_INDEX:
                self.emit("unify_index", a.i)
            else:
                self.emit("set_value", self.var_home[id(a)])
        self.regs.hold(target, ("built", t))

    # ---- finish_unify and body ----

    def _elide_finish(self) -> bool:
        seen = set()
        for a in self.head_args:
            a = deref(a)
            if a.tag != T_VAR or id(a) in seen:
                return False
            seen.add(id(a))
        return True

    def _finish_and_body(self) -> None:
        elide = self._elide_finish()
        goals = self.goals
        if not goals:
            self.emit("proceed" if elide else "proceed_finish_unify")
            return
        if not elide:
            if self.needs_env:
                self.emit("call_finish_unify", self.arity, self.nperm)
            else:
                self.emit("execute_finish_unify", self.arity)
        k = len(goals)
        for idx, g in enumerate(goals):
            last = idx == k - 1
            if idx > 0:
                # temporaries do not survive calls
                self.regs = _Regs(0, set())
            if _is_rigid_goal(g):
                h, args = _goal_parts(g)
                self._goal_args(args, first=(idx == 0))
                if last:
                    if self.needs_env:
                        self.emit("deallocate")
                    self.emit("execute", h.name)
                else:
                    self.emit("call", h.name, self.nperm)
            else:
                if self.regs.live.get(1) is not None:
                    self.regs.free(1)
                self._build(g, 1)
                self.emit("call_solve", 1, self.nperm)
                if last:
                    if self.needs_env:
                        self.emit("deallocate")
                    self.emit("proceed")

    def _goal_args(self, args: list, first: bool) -> None:
        moves = []
        for j, a in enumerate(args, start=1):
            a = deref(a)
            if a.tag in (T_APP, T_LAM):
                if self.regs.live.get(j) is None:
                    self._build(a, j)
                    self.regs.hold(j, ("built", a))
                else:
                    r = self.regs.alloc()
                    self._build(a, r)
                    moves.append(("put_value", r, j))
            elif a.tag == T_VAR:
                home = self.var_home.get(id(a))
                if id(a) not in self.initialized:
                    self.initialized.add(id(a))
                    if home is None:
                        self.var_home[id(a)] = j
                        self.regs.hold(j, ("var", a))
                        home = j
                    self.emit("put_variable", home, j, self._ty(a.ty))
                elif home != j:
                    moves.append(("put_value", home, j))
            elif a.tag == T_CONST:
                moves.append(("put_constant", a, j))
            else:
                moves.append(("put_index", j, a.i))
        for m in moves:
            self.emit(*m)


class Compiler:
    def __init__(self, loaded) -> None:
        self.loaded = loaded
        code = Code(loaded.sig)
        self.code = code
        code.instrs.append(("fail",))
        code.labels[FAIL_ADDR] = "fail"
        # runtime blocks: answer gate, hard-wired solve builtin, and its
        # internal continuation for conjunctions
        code.gate = len(code.instrs)
        code.instrs.append(("finish_gate",))
        code.instrs.append(("stop",))
        code.solve_addr = len(code.instrs)
        code.instrs.append(("solve_dispatch",))
        code.entries["solve"] = code.solve_addr
        code.labels[code.solve_addr] = "solve"
        code.and2 = len(code.instrs)
        code.instrs.append(("put_value", -1, 1))
        code.instrs.append(("deallocate",))
        code.instrs.append(("execute", "solve"))
        self._qn = 0
        self._scratch = EngineState(loaded.sig)  # for pre-compile normalization

    def compile_program(self) -> Code:
        preds: dict = {}
        for clause in self.loaded.clauses:
            preds.setdefault(clause.pred, []).append(clause)
        for pred, clauses in preds.items():
            self.compile_predicate(pred, clauses)
        return self.code

    def _clause_parts(self, clause):
        # terms are normalized prior to compilation
        hd = deref(clause.head)
        args = [nf(self._scratch, a) for a in hd.args] if hd.tag == T_APP else []
        body = nf(self._scratch, clause.body) if clause.body is not None else None
        return args, body

    def compile_predicate(self, pred: str, clauses: list) -> None:
        code = self.code
        lo = len(code.instrs)
        blocks = []
        for clause in clauses:
            args, body = self._clause_parts(clause)
            cc = ClauseCompiler(self, pred, args, body, clause.arity)
            blocks.append(cc.compile())
        arity = clauses[0].arity if clauses else 0
        out: list = []  # (label or None, instruction)
        if not clauses:
            out.append((None, ("fail",)))  # indexing stub only
        elif len(clauses) == 1:
            first = True
            for ins in blocks[0]:
                out.append((None, ins))
                first = False
        else:
            nlab = [1]

            def fresh_label() -> _Label:
                nlab[0] += 1
                return _Label(f"L{nlab[0]}")

            chain = fresh_label()
            body_labels = []
            pending: list = []
            cursor = chain
            for i, block in enumerate(blocks):
                body_lbl = fresh_label()
                body_labels.append(body_lbl)
                if i < len(blocks) - 1:
                    nxt = fresh_label()
                    pending.append((cursor, ("try_me_else", nxt, arity)))
                    cursor = nxt
                else:
                    pending.append((cursor, ("trust_me", arity)))
                rest = block if block else [("proceed",)]
                pending.append((body_lbl, rest[0]))
                for ins in rest[1:]:
                    pending.append((None, ins))
            if arity >= 1:
                c_t = self._bucket_target(clauses, body_labels, chain, "c")
                l_t = self._bucket_target(clauses, body_labels, chain, "l")
                bv_t = self._bucket_target(clauses, body_labels, chain, "bv")
                out.append((None, ("switch_on_term", chain, c_t, l_t, bv_t)))
            out.extend(pending)
        # resolve labels to addresses
        here: dict = {}
        addr = len(code.instrs)
        for lbl, _ins in out:
            if isinstance(lbl, _Label):
                here[id(lbl)] = addr
                code.labels[addr] = lbl.name
            addr += 1
        for _lbl, ins in out:
            code.instrs.append(
                tuple(here[id(op)] if isinstance(op, _Label) else op for op in ins)
            )
        code.labels[lo] = pred
        code.entries[pred] = lo
        code.spans[pred] = (lo, len(code.instrs))

    def _bucket_target(self, clauses, body_labels, chain, klass):
        members = []
        for i, clause in enumerate(clauses):
            hd = deref(clause.head)
            if hd.tag != T_APP:
                members.append(i)
                continue
            a1 = deref(hd.args[0])
            if a1.tag == T_VAR or a1.tag == T_LAM:
                members.append(i)
            elif a1.tag == T_CONST:
                if klass == "c":
                    members.append(i)
            elif a1.tag == T_APP:
                h = deref(a1.fn)
                if h.tag == T_VAR:
                    members.append(i)
                elif h.tag == T_CONST and h.name == "::" and len(a1.args) == 2:
                    if klass == "l":
                        members.append(i)
                else:
                    if klass == "c":
                        members.append(i)
        if not members:
            return FAIL_ADDR
        if len(members) == 1:
            return body_labels[members[0]]
        return chain

    # ---- queries ----

    def compile_query(self, goal: Term, qvars: dict) -> tuple:
        """Compile a query as a predicate over its free variables; returns
        (pred name, [cells])."""
        self._qn += 1
        pred = f"?query{self._qn}"
        cells = list(qvars.values())
        goal = nf(self._scratch, goal)
        cc = ClauseCompiler(self, pred, cells, goal, len(cells))
        block = cc.compile()
        lo = len(self.code.instrs)
        self.code.instrs.extend(block)
        self.code.labels[lo] = pred
        self.code.entries[pred] = lo
        self.code.spans[pred] = (lo, len(self.code.instrs))
        return pred, cells


# --------------------------------------------------------------------------
# Disassembler
# --------------------------------------------------------------------------


def _fmt_reg(r) -> str:
    return f"A{r}" if r > 0 else f"Y{-r}"


def disassemble(code: Code, pred: str) -> str:
    lo, hi = code.spans[pred]
    lines = []
    for addr in range(lo, hi):
        ins = code.instrs[addr]
        label = code.labels.get(addr, "")
        lines.append(_fmt_instr(code, ins, label))
    return "\n".join(lines)


def _fmt_instr(code: Code, ins: tuple, label: str) -> str:
    op = ins[0]
    args = ins[1:]

    def lab(a):
        return code.labels.get(a, f"@{a}")

    def ty(i):
        return f"ty{i + 1}"

    if op == "switch_on_term":
        body = f"switch_on_term {lab(args[0])}, {lab(args[1])}, {lab(args[2])}, {lab(args[3])}"
    elif op == "try_me_else":
        body = f"try_me_else {lab(args[0])}, {args[1]}"
    elif op == "trust_me":
        body = f"trust_me {args[0]}"
    elif op in ("get_nil", "get_list", "put_list"):
        body = f"{op} {_fmt_reg(args[0])}"
    elif op == "get_constant":
        body = f"get_constant {args[0].name}, {_fmt_reg(args[1])}"
    elif op == "put_constant":
        body = f"put_constant {args[0].name}, {_fmt_reg(args[1])}"
    elif op == "get_structure":
        body = f"get_structure {_fmt_reg(args[0])}, {args[1].name}, {args[2]}"
    elif op in ("get_variable", "get_value", "put_value"):
        body = f"{op} {_fmt_reg(args[0])}, {_fmt_reg(args[1])}"
    elif op == "put_variable":
        body = f"put_variable {_fmt_reg(args[0])}, {_fmt_reg(args[1])}, {ty(args[2])}"
    elif op in ("unify_variable", "unify_value"):
        body = f"{op} {_fmt_reg(args[0])}, {ty(args[1])}"
    elif op == "set_value":
        body = f"set_value {_fmt_reg(args[0])}"
    elif op == "unify_constant":
        body = f"unify_constant {args[0].name}"
    elif op == "unify_index":
        body = f"unify_index {args[0]}"
    elif op in ("unify_clambda", "unify_flambda"):
        body = f"{op} {_fmt_reg(args[0])}"
    elif op == "put_index":
        body = f"put_index {_fmt_reg(args[0])}, {args[1]}"
    elif op in ("put_capp", "put_fapp"):
        body = f"{op} {_fmt_reg(args[0])}, {_fmt_reg(args[1])}, {args[2]}"
    elif op in ("put_clambda", "put_flambda"):
        body = f"{op} {_fmt_reg(args[0])}, {_fmt_reg(args[1])}"
    elif op == "globalize_x":
        body = f"globalize {_fmt_reg(args[0])}"
    elif op == "globalize_y":
        body = f"globalize {_fmt_reg(args[0])}, {_fmt_reg(args[1])}"
    elif op == "call":
        body = f"call {args[0]}, {args[1]}"
    elif op == "call_solve":
        body = f"call solve, {args[1]}"
    elif op == "execute":
        body = f"execute {args[0]}"
    elif op == "execute_finish_unify":
        body = f"execute_finish_unify {args[0]}"
    elif op == "call_finish_unify":
        body = f"call_finish_unify {args[0]}, {args[1]}"
    else:
        body = op if not args else f"{op} " + ", ".join(str(a) for a in args)
    prefix = f"{label}:" if label else ""
    return f"{prefix:<10}{body}"


# --------------------------------------------------------------------------
# Machine state and execution
# --------------------------------------------------------------------------


class EnvRec:
    __slots__ = ("prev", "cp", "slots")

    def __init__(self, prev, cp) -> None:
        self.prev = prev
        self.cp = cp
        self.slots: dict = {}


class ChoicePoint:
    kind = "cp"
    __slots__ = ("regs", "n", "e", "cp", "h", "tr", "ll_saved", "brs_saved",
                 "hb_prev", "alt", "prev", "serial", "bdepth_at", "h_saved",
                 "tr_saved")

    def __init__(self, vm, alt: int, n: int) -> None:
        st = vm.st
        self.regs = tuple(vm.regs[1:n + 1])
        self.n = n
        self.e = vm.E
        self.cp = vm.CP
        self.h_saved = st.arena.top
        self.tr_saved = st.trail.mark()
        self.ll_saved = st.ll.first
        self.brs_saved = st.brs
        self.hb_prev = st.hb
        self.alt = alt
        self.prev = st.b
        self.serial = st.arena.alloc()
        self.bdepth_at = st.cur_bdepth


class SCursor:
    """Read view of the S register (kept for introspection/tests); the
    machine itself holds the cursor inlined in registers."""

    __slots__ = ("node", "vec", "idx", "kind")

    def __init__(self, node, vec, kind: str) -> None:
        self.node = node
        self.vec = vec
        self.idx = 0
        self.kind = kind  # "heap" argument vector or "sl" layout


def _raw_app(st, fn: Term, n: int) -> Term:
    node = Term.__new__(Term)
    node.tag = T_APP
    node.serial = st.arena.alloc()
    node.fn = fn
    node.args = [None] * n
    node.mask = fn.mask
    node.ground = fn.ground
    return node


class Vm:
    def __init__(self, code: Code, st: EngineState) -> None:
        self.code = code
        self.st = st
        self.regs: list = [None] * 64
        self.P = 0
        self.CP = 0
        self.E = None
        # the S register: a cursor into a heap argument vector or the SL
        # layout of a head normal view (tagged by S_kind)
        self.S_node = None
        self.S_vec = None
        self.S_idx = 0
        self.S_kind = "heap"
        self.mode = "r"
        self.GATE = code.gate
        self.SOLVE = code.solve_addr
        self.AND2 = code.and2

    @property
    def S(self) -> SCursor:
        cur = SCursor(self.S_node, self.S_vec, self.S_kind)
        cur.idx = self.S_idx
        return cur

    def _set_s(self, node, vec, kind: str, mode: str) -> None:
        self.S_node = node
        self.S_vec = vec
        self.S_idx = 0
        self.S_kind = kind
        self.mode = mode

    def _s_write(self, val) -> None:
        self.S_vec[self.S_idx] = val
        self.S_idx += 1
        n = self.S_node
        n.mask |= val.mask
        n.ground = n.ground and val.ground

    def _s_read(self):
        v = self.S_vec[self.S_idx]
        self.S_idx += 1
        return v

    # ---- register access ----

    def _ensure(self, i: int) -> None:
        if i >= len(self.regs):
            self.regs.extend([None] * (i + 8 - len(self.regs)))

    def load(self, r: int):
        return self.regs[r] if r > 0 else self.E.slots[-r]

    def store(self, r: int, v) -> None:
        if r > 0:
            self._ensure(r)
            self.regs[r] = v
        else:
            self.E.slots[-r] = v

    # ---- backtracking ----

    def backtrack(self) -> bool:
        st = self.st
        while True:
            rec = st.b
            if rec is None:
                return False
            if rec.kind == "cp":
                unwind_trail(st, rec.tr_saved)
                st.arena.top = rec.h_saved
                st.ll.first = rec.ll_saved
                if rec.ll_saved is not None:
                    rec.ll_saved.prev = None
                st.brs = rec.brs_saved
                st.hb = rec.hb_prev
                st.cur_bdepth = rec.bdepth_at
                st.b = rec.prev
                self._ensure(rec.n)
                self.regs[1:rec.n + 1] = rec.regs
                self.E = rec.e
                self.CP = rec.cp
                self.P = rec.alt
                if st.config.trace_vm:
                    st.tracer.emit(f"vm backtrack -> cp alt @{rec.alt}")
                return True
            # unification branch point
            restore_into(st, rec)
            if try_next_substitution(st, rec):
                if simpl(st, []) != FAIL and self._unify_forward():
                    sh = st.brs
                    n = len(sh.regs)
                    self._ensure(n)
                    self.regs[1:n + 1] = sh.regs
                    self.E = sh.e
                    self.CP = sh.cp
                    self.st.config.order = sh.regime
                    self.P = sh.cont
                    if st.config.trace_vm:
                        st.tracer.emit(f"vm backtrack -> resume unify @{sh.cont}")
                    return True
                continue
            pop_record(st, rec)

    def _unify_forward(self) -> bool:
        """Forward phase of the interpretive unification loop; on False the
        caller's fail loop retries the youngest record."""
        st = self.st
        from .reduce import eta_adjust

        while True:
            sel = select_flex_rigid(st)
            if sel is None:
                return True
            pair, v1, v2 = sel
            if st.cur_bdepth >= st.config.depth:
                st.depth_exceeded = True
                return False
            w1, w2 = eta_adjust(st, v1, v2)
            flexv, rigv = (w1, w2) if not w1.rigid else (w2, w1)
            mc = MatchCache(st, flexv.head, rigv.head)
            if not mc.menu:
                return False
            bp = push_branch_point(st, mc, resume="vm")
            try_next_substitution(st, bp)
            if simpl(st, []) == FAIL:
                return False

    def _finish_unify(self, cont: int, save_hi: int) -> str | None:
        st = self.st
        if st.ll.first is None and not st.ll_dirty:
            self.P = cont
            return None
        if simpl(st, []) == FAIL:
            return "fail"
        if st.ll.first is None or select_flex_rigid(st) is None:
            self.P = cont
            return None
        shared = BranchShared(
            cont=cont,
            e=self.E,
            cp=self.CP,
            regs=tuple(self.regs[1:max(save_hi, len(self.regs) - 1) + 1]),
            regime=st.config.order,
        )
        st.brs = shared
        if not self._unify_forward():
            return "fail"
        self.P = cont
        return None

    # ---- instruction semantics ----

    def _unify_incoming_const(self, t: Term, c: Term) -> str | None:
        st = self.st
        t = deref(t)
        tag = t.tag
        if tag == T_VAR:
            bind_var(st, t, c)
            return None
        if tag == T_CONST:  # first-order fast path
            return None if t.name == c.name else "fail"
        v = hnf(st, t)
        if not v.rigid:
            if v.binder_len == 0 and not v.args:
                bind_var(st, v.head, c)
                return None
            self._add_pair(t, c)
            return None
        if (
            v.binder_len == 0
            and not v.args
            and v.head.tag == T_CONST
            and v.head.name == c.name
        ):
            return None
        return "fail"

    def _add_pair(self, lhs: Term, rhs: Term) -> None:
        st = self.st
        pr = Pair(lhs, rhs, st.arena.alloc())
        st.ll.add(pr)
        st.counters.pairs_created += 1
        st.ll_dirty = True

    def _get_structure(self, areg: int, fnode: Term, n: int) -> str | None:
        st = self.st
        t = deref(self.regs[areg])
        tag = t.tag
        if tag == T_VAR:
            node = _raw_app(st, fnode, n)
            bind_var(st, t, node)
            self._set_s(node, node.args, "heap", "w")
            return None
        if tag == T_APP:
            f = deref(t.fn)
            if f.tag == T_CONST:  # first-order fast path: S into the heap vector
                if f.name == fnode.name and len(t.args) == n:
                    self._set_s(None, t.args, "heap", "r")
                    return None
                return "fail"
        v = hnf(st, t)
        if not v.rigid:
            node = _raw_app(st, fnode, n)
            self._add_pair(t, node)
            self._set_s(node, node.args, "heap", "w")
            return None
        if (
            v.binder_len == 0
            and v.head.tag == T_CONST
            and v.head.name == fnode.name
            and len(v.args) == n
        ):
            self._set_s(None, v.args, "sl", "r")
            return None
        return "fail"

    def _switch(self, ins) -> None:
        t = deref(self.regs[1])
        tag = t.tag
        if tag == T_VAR:
            self.P = ins[1]
            return
        if tag == T_CONST:
            self.P = ins[2]
            return
        if tag == T_APP:
            f = deref(t.fn)
            if f.tag == T_CONST:  # first-order fast path
                if f.name == "::" and len(t.args) == 2:
                    self.P = ins[3]
                else:
                    self.P = ins[2]
                return
        v = hnf(self.st, t)
        h = v.head
        if h.tag == T_VAR:
            self.P = ins[1]
        elif h.tag == T_INDEX:
            self.P = ins[4]
        elif h.name == "::" and len(v.args) == 2:
            self.P = ins[3]
        else:
            self.P = ins[2]

    def _solve_dispatch(self) -> str | None:
        st = self.st
        t = deref(self.regs[1])
        v = hnf(st, t)
        head = v.head
        if head.tag == T_VAR:
            arg_tys, _ = decompose(head.ty)
            body = st.sig.const(TRUE)
            for _ in arg_tys:
                body = mk_lam(body, st.arena)
            bind_var(st, head, body)
            st.counters.flex_goals += 1
            if simpl(st, []) == FAIL:
                return "fail"
            self.P = self.CP
            return None
        if head.tag != T_CONST:
            raise EngineError("solve: goal with a bound-variable head")
        name = head.name
        if name == TRUE:
            self.P = self.CP
            return None
        if name == AND:
            env = EnvRec(self.E, self.CP)
            env.slots[1] = v.args[1]
            self.E = env
            self.CP = self.AND2
            self.regs[1] = v.args[0]
            self.P = self.SOLVE
            return None
        if name == OR:
            self.regs[1] = v.args[1]
            cp = ChoicePoint(self, self.SOLVE, 1)
            st.b = cp
            st.hb = st.arena.top
            st.counters.choice_points += 1
            self.regs[1] = v.args[0]
            self.P = self.SOLVE
            return None
        if name == SIGMA:
            alpha = head.ty.arg.arg
            y = st.fresh(alpha, "Y")
            self.regs[1] = mk_app(v.args[0], [y], st.arena)
            self.P = self.SOLVE
            return None
        # rigid atom: load arguments and jump to its code
        entry = self.code.entries.get(name)
        if entry is None:
            return "fail"
        self._ensure(len(v.args) + 1)
        for i, a in enumerate(v.args):
            self.regs[i + 1] = a
        self.P = entry
        return None

    # ---- main loop ----

    def step(self) -> str | None:
        st = self.st
        ins = self.code.instrs[self.P]
        if st.config.trace_vm:
            b = st.b.serial if st.b is not None else "-"
            st.tracer.emit(f"vm P={self.P} {ins[0]} mode={self.mode} B={b}")
        self.P += 1
        op = ins[0]

        if op == "unify_variable":
            if self.mode == "r":
                self.store(ins[1], self._s_read())
            else:
                cell = fresh_var(self.code.types[ins[2]], "V", st.arena)
                self._s_write(cell)
                self.store(ins[1], cell)
        elif op == "get_list":
            return self._get_structure(ins[1], self.code.sig.const("::"), 2)
        elif op == "get_variable":
            self.store(ins[1], self.regs[ins[2]])
        elif op == "get_nil":
            return self._unify_incoming_const(
                self.regs[ins[1]], self.code.sig.const("nil")
            )
        elif op == "get_constant":
            return self._unify_incoming_const(self.regs[ins[2]], ins[1])
        elif op == "unify_value":
            if self.mode == "r":
                if simpl(st, [(self._s_read(), self.load(ins[1]))]) == FAIL:
                    return "fail"
            else:
                self._s_write(self.load(ins[1]))
        elif op == "set_value":
            self._s_write(self.load(ins[1]))
        elif op == "unify_constant":
            if self.mode == "r":
                return self._unify_incoming_const(self._s_read(), ins[1])
            self._s_write(ins[1])
        elif op == "execute":
            entry = self.code.entries.get(ins[1])
            if entry is None:
                return "fail"
            self.P = entry
        elif op == "execute_finish_unify" or op == "call_finish_unify":
            return self._finish_unify(self.P, ins[1])
        elif op == "switch_on_term":
            self._switch(ins)
        elif op == "try_me_else":
            cp = ChoicePoint(self, ins[1], ins[2])
            st.b = cp
            st.hb = st.arena.top
            st.counters.choice_points += 1
        elif op == "trust_me":
            pass  # record already discarded by the backtrack step
        elif op == "get_value":
            if simpl(st, [(self.load(ins[1]), self.regs[ins[2]])]) == FAIL:
                return "fail"
        elif op == "get_structure":
            return self._get_structure(ins[1], ins[2], ins[3])
        elif op == "unify_index":
            self._s_write(mk_index(ins[1]))
        elif op == "unify_clambda" or op == "unify_flambda":
            self._s_write(mk_lam(self.load(ins[1]), st.arena))
        elif op == "put_variable":
            cell = fresh_var(self.code.types[ins[3]], "V", st.arena)
            self.store(ins[1], cell)
            if ins[2] != ins[1]:
                self.store(ins[2], cell)
        elif op == "put_value":
            self.store(ins[2], self.load(ins[1]))
        elif op == "put_constant":
            self.store(ins[2], ins[1])
        elif op == "put_index":
            self.store(ins[1], mk_index(ins[2]))
        elif op == "put_list":
            node = _raw_app(st, self.code.sig.const("::"), 2)
            self.store(ins[1], node)
            self._set_s(node, node.args, "heap", "w")
        elif op == "put_capp" or op == "put_fapp":
            node = _raw_app(st, self.load(ins[2]), ins[3])
            self.store(ins[1], node)
            self._set_s(node, node.args, "heap", "w")
        elif op == "put_clambda" or op == "put_flambda":
            self.store(ins[1], mk_lam(self.load(ins[2]), st.arena))
        elif op == "globalize_x":
            self.store(ins[1], deref(self.load(ins[1])))
        elif op == "globalize_y":
            self.store(ins[2], self.E.slots[-ins[1]])
        elif op == "allocate":
            self.E = EnvRec(self.E, self.CP)
        elif op == "deallocate":
            self.CP = self.E.cp
            self.E = self.E.prev
        elif op == "call":
            entry = self.code.entries.get(ins[1])
            if entry is None:
                return "fail"
            self.CP = self.P
            self.P = entry
        elif op == "proceed":
            self.P = self.CP
        elif op == "proceed_finish_unify":
            return self._finish_unify(self.CP, 0)
        elif op == "call_solve":
            self.CP = self.P
            self.P = self.SOLVE
        elif op == "solve_dispatch":
            return self._solve_dispatch()
        elif op == "finish_gate":
            return self._finish_unify(self.P, 0)
        elif op == "stop":
            return "stop"
        elif op == "fail":
            return "fail"
        else:
            raise EngineError(f"unknown opcode {op}")
        return None

    def run_loop(self) -> str:
        while True:
            sig = self.step()
            if sig is None:
                continue
            if sig == "stop":
                return "answer"
            if not self.backtrack():
                return "done"


def run(vm: Vm, pred: str, cells: list, qvars: dict):
    """Execute a compiled query predicate; lazy stream of answers with the
    same contract as the interpreter's solve_query."""
    return _run(vm, pred, cells, qvars)


def _run(vm: Vm, pred: str, cells: list, qvars: dict):
    st = vm.st
    st.depth_exceeded = False
    st.fuel = st.config.fuel
    base = st.mark()
    try:
        vm._ensure(len(cells) + 1)
        for i, c in enumerate(cells):
            vm.regs[i + 1] = c
        vm.E = None
        vm.CP = vm.GATE
        vm.P = vm.code.entries[pred]
        status = vm.run_loop()
        while status == "answer":
            yield extract_answer(st, qvars)
            if not vm.backtrack():
                break
            status = vm.run_loop()
    finally:
        st.undo_to(base)
