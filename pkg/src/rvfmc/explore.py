"""Recursive exploration of the reads-value-from trace partitioning.

Each recursion node carries a good-writes function over the reads fixed so
far, a trace witnessing it, and a *causal map* recording, per read and per
thread, a prefix length of already-considered reads-from sources.  A node

1. extends its trace with every enabled non-read event (writes and mutex
   releases flush out; round-robin over thread ids keeps it deterministic),
2. reports any write so discovered to registered ancestor reads as a
   *backtrack signal* (a new conflicting write means the ancestor must keep
   mutating its read),
3. if nothing is enabled, records the maximal trace and returns,
4. otherwise mutates enabled reads in order (reads without a causal-map
   entry first): for every value group of a read's viable sources it fixes
   the group as the read's good writes, obtains a witness (directly when the
   current trace already satisfies it, otherwise through the consistency
   solver), and recurses; after a read is done its causal-map entry is bumped
   so later siblings must find it a source outside the current trace.

A plain read processed without ever receiving a backtrack signal ends the
loop: no compatible schedule assigns it a source beyond the current trace,
so the remaining mutations cannot reach new behavior.  Mutex acquires are
exempt from that cut: a blocked acquire can vanish from maximal extensions
entirely (deadlock), voiding the argument behind the signal, so acquires
are always processed.  Acquire reads also take each source as its own
singleton group and never share a source already consumed by another
acquire of the same mutex, which is what makes solver witnesses respect
mutual exclusion.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .program import Event, EventId, Execution, Program, Trace, empty_trace, extend, replay
from .semantics import rvf_key
from .vsc import SolverOptions, VscInstance, verify_sc

CausalMap = dict[EventId, dict[int, int]]


@dataclass(frozen=True)
class ExploreOptions:
    backtrack_signals: bool = True
    closure: bool = True
    greedy: bool = True
    aux_trace: bool = True

    def solver(self) -> SolverOptions:
        return SolverOptions(greedy=self.greedy, closure=self.closure, guided=self.aux_trace)


@dataclass
class _Signal:
    var: str
    thread: int
    fired: bool = False


@dataclass
class ExplorationReport:
    traces: list[Execution] = field(default_factory=list)
    rvf_keys: list = field(default_factory=list)
    vsc_calls: int = 0
    witness_states: int = 0
    deadlocks: int = 0
    wall_time_ms: float = 0.0
    options: ExploreOptions = ExploreOptions()

    @property
    def leaf_count(self) -> int:
        return len(self.traces)

    @property
    def assertion_violations(self) -> list[str]:
        out: set[str] = set()
        for t in self.traces:
            out |= t.violations
        return sorted(out)

    def distinct_rvf_classes(self) -> int:
        return len(set(self.rvf_keys))


def extend_nonreads(trace: Trace) -> Trace:
    """Append enabled non-read events round-robin by thread id until only
    reads (or nothing) remain enabled."""
    k = len(trace.program.threads)
    changed = True
    while changed:
        changed = False
        for tid in range(1, k + 1):
            e = next((x for x in trace.enabled if x.thread == tid and x.kind == "W"), None)
            if e is not None:
                trace = extend(trace, e)
                changed = True
    return trace


def update_backtrack_signals(extension: Iterable[Event], signals: dict[EventId, _Signal]) -> None:
    """Flag every registered read that conflicts with a newly discovered write
    of another thread."""
    for w in extension:
        if w.kind != "W":
            continue
        for sig in signals.values():
            if sig.var == w.var and sig.thread != w.thread:
                sig.fired = True


def viable_sources(trace: Trace, read: Event, cmap: CausalMap) -> set[Event]:
    """Writes of the trace (plus the initial write) that conflict with the
    read and are not forbidden by its causal-map entry."""
    sources = {e for e in trace.events if e.kind == "W" and e.var == read.var}
    sources.add(trace.program.init_event(read.var))
    bounds = cmap.get(read.eid)
    if bounds:
        sources = {w for w in sources if w.index > bounds.get(w.thread, 0)}
    return sources


def group_by_value(sources: set[Event], trace: Trace) -> list[tuple[int, frozenset[Event]]]:
    """Partition sources by written value, ordered by first writer position
    in the trace (the initial write sorts first)."""
    pos = {e.eid: i for i, e in enumerate(trace.events)}
    groups: dict[int, list[Event]] = {}
    for w in sources:
        groups.setdefault(w.value, []).append(w)

    def first_pos(ws: list[Event]) -> int:
        return min(-1 if w.thread == 0 else pos[w.eid] for w in ws)

    return [
        (value, frozenset(ws))
        for value, ws in sorted(groups.items(), key=lambda kv: first_pos(kv[1]))
    ]


class _Explorer:
    def __init__(self, program: Program, options: ExploreOptions):
        self.program = program
        self.options = options
        self.mutexes = set(program.mutexes)
        self.signals: dict[EventId, _Signal] = {}
        self.report = ExplorationReport(options=options)
        self.solver_options = options.solver()

    def run(self) -> ExplorationReport:
        start = time.perf_counter()
        depth = 4 * self.program.access_count() + 200
        if sys.getrecursionlimit() < depth:
            sys.setrecursionlimit(depth)
        self._node({}, empty_trace(self.program), {})
        self.report.wall_time_ms = (time.perf_counter() - start) * 1000.0
        return self.report

    # -- per-read source grouping -------------------------------------------

    def _groups(
        self, read: Event, sources: set[Event], trace: Trace, goodw: dict[EventId, frozenset[EventId]]
    ) -> list[frozenset[Event]]:
        if read.var in self.mutexes:
            # Each release feeds at most one acquire; sources already claimed
            # by another acquire of this mutex are gone, and every remaining
            # one forms its own singleton group.
            consumed: set[EventId] = set()
            for e in trace.events:
                if e.kind == "R" and e.var == read.var and e.eid in goodw:
                    consumed |= goodw[e.eid]
            pos = {e.eid: i for i, e in enumerate(trace.events)}
            usable = [w for w in sources if w.eid not in consumed]
            usable.sort(key=lambda w: -1 if w.thread == 0 else pos[w.eid])
            return [frozenset({w}) for w in usable]
        return [group for _, group in group_by_value(sources, trace)]

    # -- the recursion -------------------------------------------------------

    def _node(self, goodw: dict[EventId, frozenset[EventId]], trace: Trace, cmap: CausalMap) -> None:
        before = len(trace.events)
        st = extend_nonreads(trace)
        update_backtrack_signals(st.events[before:], self.signals)

        if st.maximal:
            ex = st.freeze()
            self.report.traces.append(ex)
            self.report.rvf_keys.append(rvf_key(ex))
            if ex.deadlocked:
                self.report.deadlocks += 1
            return

        mutate = sorted(st.enabled, key=lambda e: (e.eid in cmap, e.eid))
        k = len(self.program.threads)
        for read in mutate:
            fresh = read.eid not in cmap
            plain = read.var not in self.mutexes
            if fresh and plain:
                self.signals[read.eid] = _Signal(read.var, read.thread)

            sources = viable_sources(st, read, cmap)
            for group in self._groups(read, sources, st, goodw):
                goodw2 = dict(goodw)
                goodw2[read.eid] = frozenset(w.eid for w in group)
                witness_trace = self._witness(st, read, goodw2)
                if witness_trace is None:
                    continue
                child_cmap = {rid: dict(tc) for rid, tc in cmap.items()}
                self._node(goodw2, witness_trace, child_cmap)

            if fresh and plain:
                fired = self.signals.pop(read.eid).fired
                if self.options.backtrack_signals and not fired:
                    break
            counts = {tid: 0 for tid in range(1, k + 1)}
            for e in st.events:
                counts[e.thread] += 1
            counts[0] = len(self.program.globals)
            cmap[read.eid] = counts

    def _witness(
        self, st: Trace, read: Event, goodw: dict[EventId, frozenset[EventId]]
    ) -> Optional[Trace]:
        """A trace over Events(st)+read satisfying ``goodw``, or None."""
        active = next(
            (e for e in reversed(st.events) if e.kind == "W" and e.var == read.var),
            self.program.init_event(read.var),
        )
        if active.eid in goodw[read.eid]:
            return extend(st, read)  # the current trace already satisfies it

        inst = VscInstance(st.events + (read,), goodw, universe=self.program.globals)
        aux = st.events + (read,) if self.options.aux_trace else None
        result = verify_sc(inst, self.solver_options, aux=aux)
        self.report.vsc_calls += 1
        self.report.witness_states += result.states_processed
        if result.witness is None:
            return None
        return replay(self.program, result.witness)


def explore(program: Program, options: Optional[ExploreOptions] = None) -> ExplorationReport:
    """Run the exploration from the empty trace and report every maximal
    trace reached, one per realizable value assignment."""
    return _Explorer(program, options or ExploreOptions()).run()
