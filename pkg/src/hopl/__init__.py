"""Higher-order Horn clause logic programming engine.

Lambda terms in de Bruijn form with explicit substitution suspensions and
closedness annotations, Huet-style higher-order unification over an
explicit disagreement set with depth-first backtracking, a derivation
interpreter, and a compiled extended-WAM bytecode machine.
"""

from .runtime import Config, Counters, EngineError, FuelExhausted, UsageError
from .terms import (
    Arrow, Signature, Sort, TyApp, O,
    Term, arrow, decompose, deref, fresh_var, max_free_index, is_closed,
    mk_app, mk_index, mk_lam, mk_susp, struct_eq_nf, subst_as_redexes, susp_wf,
)
from .reduce import HeadNormView, eta_adjust, hnf, naive_normalize, nf, rewrite_step
from .unify import (
    EngineState, UnifyOutcome, backtrack, bind_var, brute_force_unifiers,
    iter_unify_solutions, match, rigid_path_check, simpl, solve_unify,
)
from .interp import Answer, Clause, Program, dispatch_solve, extract_answer, solve_query
from .frontend import (
    LoadedProgram, ParseError, format_answer, load_program, load_query,
    parse_program_text, parse_query_text, pretty,
)
from .vm import Code, Compiler, Vm, disassemble, run

__all__ = [name for name in dir() if not name.startswith("_")]
