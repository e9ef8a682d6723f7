"""Shared runtime plumbing: allocation arena, value trail, counters, config.

The engine is destructive: logic-variable bindings, redex overwrites and
disagreement-pair deletions all mutate a shared term/pair graph.  Everything
needed to take that back lives here.  The trail stores enough of the old
state to restore it exactly; the arena hands out allocation serials that
stand in for heap addresses (used for the heap-top watermark and for
redundant-trail elision against HB).
"""

from __future__ import annotations

from dataclasses import dataclass, field


class EngineError(Exception):
    """Base for runtime failures surfaced to the user."""


class FuelExhausted(EngineError):
    """The rewrite-step budget ran out (defense in depth; see Config.fuel)."""


class UsageError(EngineError):
    """An operation was called outside its contract."""


@dataclass
class Config:
    fuel: int = 1_000_000          # rewrite-step budget per query
    depth: int = 32                # unification branch points per path
    order: str = "imitation-first"  # or "projection-first"
    trace_reduce: bool = False
    trace_unify: bool = False
    trace_vm: bool = False
    counters: bool = False


@dataclass
class Counters:
    beta: int = 0                # beta contractions committed
    rewrites: int = 0            # suspension reading steps committed
    hnf_slow: int = 0            # head normalizations that needed the SL stack
    branch_points: int = 0       # unification branch point records created
    choice_points: int = 0       # clause/disjunction choice points created
    flex_goals: int = 0          # flexible goal solution steps
    trail_entries: int = 0
    pairs_created: int = 0       # disagreement pairs allocated on the heap
    bindings: int = 0            # logic variable bindings

    def reset(self) -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, 0)

    def summary(self) -> str:
        return (
            f"beta={self.beta} rewrites={self.rewrites} hnf_slow={self.hnf_slow} "
            f"branch_points={self.branch_points} choice_points={self.choice_points} "
            f"flex_goals={self.flex_goals} bindings={self.bindings} "
            f"pairs={self.pairs_created} trail={self.trail_entries}"
        )


class Arena:
    """Allocation counter standing in for the WAM heap.

    Terms and disagreement pairs receive increasing serials.  Backtracking
    resets ``top`` to a saved watermark; objects past the watermark are
    semantically dead (Python reclaims them once unreferenced).
    """

    __slots__ = ("top",)

    def __init__(self) -> None:
        self.top = 0

    def alloc(self) -> int:
        s = self.top
        self.top = s + 1
        return s


# Trail entry kinds.  Entries are plain tuples for speed:
#   ("b", var)                      variable was bound; undo resets to unbound
#   ("o", node, tag, payload, mask, ground)
#                                   destructive overwrite; undo restores cell
#   ("d", pair, prev, next)         pair unlinked from the live list; undo
#                                   splices it back between the saved links
class Trail:
    __slots__ = ("entries",)

    def __init__(self) -> None:
        self.entries: list[tuple] = []

    def mark(self) -> int:
        return len(self.entries)

    def push(self, entry: tuple) -> None:
        self.entries.append(entry)


@dataclass
class Tracer:
    """Sink for --trace output; tests can swap in a collector."""

    lines: list[str] = field(default_factory=list)
    echo: bool = False

    def emit(self, line: str) -> None:
        if self.echo:
            import sys

            print(line, file=sys.stderr)
        else:
            self.lines.append(line)
