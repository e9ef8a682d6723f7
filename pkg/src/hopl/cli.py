"""Command line driver and REPL.

    hoplc [files] [-e QUERY] [--engine interp|vm] [--depth N] [--fuel N]
          [--order imitation-first|projection-first] [--solutions N]
          [--trace reduce|unify|vm] [--counters] [--dump-code PRED]

Exit codes: 0 = the last query had at least one answer, 1 = no answers,
2 = error.
"""

from __future__ import annotations

import argparse
import sys

from .runtime import Config, EngineError, Tracer
from .frontend import LoadedProgram, format_answer, load_program, load_query, pretty
from .interp import solve_query
from .reduce import nf
from .unify import EngineState
from . import vm as vm_mod


class Session:
    def __init__(self, config: Config, engine: str = "interp") -> None:
        self.config = config
        self.engine = engine
        self.loaded: LoadedProgram | None = None
        self.tracer = Tracer(echo=True)
        self._st = None
        self._vm = None
        self._compiler = None

    def load_text(self, text: str) -> None:
        self.loaded = load_program(text, self.loaded)
        self._st = None
        self._vm = None

    def load_files(self, paths: list) -> None:
        for p in paths:
            with open(p, "r", encoding="utf-8") as fh:
                self.load_text(fh.read())
        if self.loaded is None:
            self.loaded = load_program("")

    def _state(self) -> EngineState:
        if self._st is None:
            if self.loaded is None:
                self.loaded = load_program("")
            st = EngineState(self.loaded.sig, self.config, self.tracer)
            sig = self.loaded.sig

            def safe_pretty(t):
                try:
                    return pretty(sig, nf(st, t))
                except Exception:
                    return repr(t)

            st.pretty = safe_pretty
            self._st = st
        return self._st

    def _machine(self):
        if self._vm is None:
            self._compiler = vm_mod.Compiler(self.loaded)
            code = self._compiler.compile_program()
            self._vm = vm_mod.Vm(code, self._state())
        return self._vm

    def answers(self, query_text: str):
        """Lazy stream of answers for one query under the selected engine."""
        goal, qvars = load_query(query_text, self.loaded)
        st = self._state()
        if self.config.counters:
            st.counters.reset()
        if self.engine == "vm":
            machine = self._machine()
            pred, cells = self._compiler.compile_query(goal, qvars)
            return qvars, vm_mod.run(machine, pred, cells, qvars)
        return qvars, solve_query(self.loaded.program, st, goal, qvars)

    def dump_code(self, pred: str) -> str:
        self._machine()
        return vm_mod.disassemble(self._compiler.code, pred)


def _run_query(session: Session, text: str, solutions: int, out) -> int:
    """Print answers; returns their count."""
    sig = session.loaded.sig
    st = session._state()
    count = 0
    qvars, stream = session.answers(text)
    incomplete = False
    for ans in stream:
        count += 1
        incomplete = incomplete or ans.incomplete
        print(format_answer(sig, ans, qvars), file=out)
        if solutions and count >= solutions:
            break
    if count == 0:
        if st.depth_exceeded:
            print("no (search depth exceeded)", file=out)
        else:
            print("no", file=out)
    if session.config.counters:
        print(f"% counters: {st.counters.summary()}", file=out)
    return count


def repl(session: Session, infile=None, out=None) -> int:
    infile = infile or sys.stdin
    out = out or sys.stdout
    sig = session.loaded.sig
    st = session._state()
    last_had_answer = 0
    while True:
        print("?- ", end="", file=out, flush=True)
        line = infile.readline()
        if not line:
            break
        text = line.strip()
        if not text:
            continue
        while not text.rstrip().endswith("."):
            more = infile.readline()
            if not more:
                break
            text += "\n" + more.strip()
        if text in ("halt.", "halt"):
            break
        try:
            qvars, stream = session.answers(text)
        except EngineError as exc:
            print(f"error: {exc}", file=out)
            continue
        count = 0
        stopped = False
        try:
            for ans in stream:
                count += 1
                print(format_answer(sig, ans, qvars), file=out)
                print("; for more, anything else to stop: ", end="", file=out, flush=True)
                nxt = infile.readline()
                if nxt.strip() != ";":
                    stopped = True
                    break
        except EngineError as exc:
            print(f"error: {exc}", file=out)
            continue
        if not stopped:
            if st.depth_exceeded:
                print("no (search depth exceeded)", file=out)
            else:
                print("no", file=out)
        if session.config.counters:
            print(f"% counters: {st.counters.summary()}", file=out)
        last_had_answer = 1 if count else 0
    return 0 if last_had_answer else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="hoplc",
        description="Higher-order Horn clause engine (interpreter and bytecode VM).",
    )
    ap.add_argument("files", nargs="*", help="program files to load")
    ap.add_argument("-e", "--query", action="append", default=[], help="run a query")
    ap.add_argument("--engine", choices=["interp", "vm"], default="interp")
    ap.add_argument("--depth", type=int, default=32,
                    help="unification branch points per path")
    ap.add_argument("--fuel", type=int, default=1_000_000,
                    help="rewrite-step budget per query")
    ap.add_argument("--order", choices=["imitation-first", "projection-first"],
                    default="imitation-first")
    ap.add_argument("--solutions", type=int, default=0,
                    help="stop after N answers per query (0 = all)")
    ap.add_argument("--trace", action="append", default=[],
                    choices=["reduce", "unify", "vm"])
    ap.add_argument("--counters", action="store_true")
    ap.add_argument("--dump-code", metavar="PRED", default=None)
    args = ap.parse_args(argv)

    config = Config(
        fuel=args.fuel,
        depth=args.depth,
        order=args.order,
        trace_reduce="reduce" in args.trace,
        trace_unify="unify" in args.trace,
        trace_vm="vm" in args.trace,
        counters=args.counters,
    )
    session = Session(config, args.engine)
    try:
        session.load_files(args.files)
    except (EngineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.dump_code:
        try:
            print(session.dump_code(args.dump_code))
        except KeyError:
            print(f"error: no predicate {args.dump_code!r}", file=sys.stderr)
            return 2
        return 0

    if args.query:
        last = 0
        for q in args.query:
            try:
                last = _run_query(session, q, args.solutions, sys.stdout)
            except EngineError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 2
        return 0 if last else 1

    return repl(session)


if __name__ == "__main__":
    sys.exit(main())
