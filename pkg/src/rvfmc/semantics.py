"""Derived semantic objects over traces: reads-from, causal order, equivalence keys.

All functions here are pure and accept either a live ``Trace`` or a frozen
``Execution`` (anything with ``program``, ``events`` and ``values``).

Three trace equivalences get canonical hashable keys:

* ``maz_key``  -- equal iff the traces order every conflicting event pair
  identically (the classic commutation-based equivalence).
* ``rf_key``   -- equal iff same events and same reads-from function.
* ``rvf_key``  -- equal iff same events, same value function, and the same
  causal ordering restricted to read events.

Event identity across traces is the (thread, index) pair alone; diverging
control flow always shows up as a differing earlier read value, which the
value component of ``rvf_key`` already separates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

from .program import Event, EventId, Execution, Trace

Run = Union[Trace, Execution]


# ---------------------------------------------------------------------------
# Partial orders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartialOrder:
    """A strict partial order over event ids, stored transitively closed."""

    elements: frozenset[EventId]
    pairs: frozenset[tuple[EventId, EventId]]

    def less(self, a: EventId, b: EventId) -> bool:
        return (a, b) in self.pairs

    def ordered(self, a: EventId, b: EventId) -> bool:
        return (a, b) in self.pairs or (b, a) in self.pairs


def partial_order(elements: Iterable[EventId], edges: Iterable[tuple[EventId, EventId]]) -> PartialOrder:
    """Build the transitive closure of ``edges``; raises ValueError on a cycle."""
    elems = frozenset(elements)
    succ: dict[EventId, set[EventId]] = {e: set() for e in elems}
    for a, b in edges:
        succ[a].add(b)
    # iterative closure; element counts here are small
    changed = True
    while changed:
        changed = False
        for a in elems:
            extra = set()
            for b in succ[a]:
                extra |= succ[b] - succ[a]
            if extra:
                succ[a] |= extra
                changed = True
    pairs = set()
    for a in elems:
        if a in succ[a]:
            raise ValueError("relation contains a cycle")
        for b in succ[a]:
            pairs.add((a, b))
    return PartialOrder(elems, frozenset(pairs))


def refines(q: PartialOrder, p: PartialOrder) -> bool:
    """True when q orders everything p orders (q is the stronger order)."""
    return q.pairs >= p.pairs


def project(p: PartialOrder, subset: Iterable[EventId]) -> PartialOrder:
    sub = frozenset(subset)
    return PartialOrder(sub, frozenset((a, b) for a, b in p.pairs if a in sub and b in sub))


def is_lower_set(subset: Iterable[EventId], po: PartialOrder) -> bool:
    sub = set(subset)
    return all(a in sub for a, b in po.pairs if b in sub)


def sequence_order(events: Iterable[Event]) -> PartialOrder:
    """The total order induced by a sequence of events."""
    ids = [e.eid for e in events]
    pairs = {(ids[i], ids[j]) for i in range(len(ids)) for j in range(i + 1, len(ids))}
    return PartialOrder(frozenset(ids), frozenset(pairs))


def program_order(run: Run) -> PartialOrder:
    """Per-thread chains over the events of a run."""
    by_thread: dict[int, list[EventId]] = {}
    for e in run.events:
        by_thread.setdefault(e.thread, []).append(e.eid)
    pairs = set()
    for chain in by_thread.values():
        chain.sort()
        for i in range(len(chain)):
            for j in range(i + 1, len(chain)):
                pairs.add((chain[i], chain[j]))
    return PartialOrder(frozenset(e.eid for e in run.events), frozenset(pairs))


# ---------------------------------------------------------------------------
# Reads-from and the causal order
# ---------------------------------------------------------------------------


def reads_from(run: Run) -> dict[Event, Event]:
    """Map each read to the latest earlier conflicting write (initial write if none)."""
    active: dict[str, Event] = {}
    rf: dict[Event, Event] = {}
    for e in run.events:
        if e.kind == "W":
            active[e.var] = e
        else:
            rf[e] = active.get(e.var) or run.program.init_event(e.var)
    return rf


def causal_order(run: Run) -> PartialOrder:
    """Weakest partial order refining program order that puts each read after
    its reads-from source.

    Computed in one left-to-right pass maintaining per-event predecessor sets.
    Initial writes precede everything implicitly and are not materialized.
    """
    rf = reads_from(run)
    preds: dict[EventId, frozenset[EventId]] = {}
    last_of_thread: dict[int, EventId] = {}
    pairs = set()
    for e in run.events:
        p: set[EventId] = set()
        prev = last_of_thread.get(e.thread)
        if prev is not None:
            p.add(prev)
            p |= preds[prev]
        if e.kind == "R":
            w = rf[e]
            if w.thread != 0:
                p.add(w.eid)
                p |= preds[w.eid]
        preds[e.eid] = frozenset(p)
        last_of_thread[e.thread] = e.eid
        for a in p:
            pairs.add((a, e.eid))
    return PartialOrder(frozenset(preds), frozenset(pairs))


def visible_writes(p: PartialOrder, events: Iterable[Event], r: Event) -> set[Event]:
    """Writes of ``events`` that conflict with read ``r`` and are not hidden by ``p``.

    A write w is hidden when some conflicting write sits strictly between w
    and r in p, or when r itself is ordered before w.
    """
    pool = [e for e in events if e.kind == "W" and e.conflicts(r)]
    out = set()
    for w in pool:
        if p.less(r.eid, w.eid):
            continue
        if any(p.less(w.eid, x.eid) and p.less(x.eid, r.eid) for x in pool if x.eid != w.eid):
            continue
        out.add(w)
    return out


# ---------------------------------------------------------------------------
# Equivalence keys
# ---------------------------------------------------------------------------


def _events_key(run: Run) -> tuple[EventId, ...]:
    return tuple(sorted(e.eid for e in run.events))


def rvf_key(run: Run):
    """Canonical key of the reads-value-from class of a trace."""
    ev = _events_key(run)
    vals = tuple(run.values[eid] for eid in ev)
    co = causal_order(run)
    read_ids = {e.eid for e in run.events if e.kind == "R"}
    ro = tuple(sorted((a, b) for a, b in co.pairs if a in read_ids and b in read_ids))
    return ("rvf", ev, vals, ro)


def rf_key(run: Run):
    """Canonical key of the reads-from class of a trace."""
    rf = reads_from(run)
    pairs = tuple(sorted((r.eid, w.eid) for r, w in rf.items()))
    return ("rf", _events_key(run), pairs)


def maz_key(run: Run):
    """Canonical key of the commutation class: orientation of every conflicting pair."""
    events = run.events
    oriented = []
    for i, a in enumerate(events):
        for b in events[i + 1 :]:
            if a.conflicts(b):
                oriented.append((a.eid, b.eid))
    return ("maz", _events_key(run), tuple(sorted(oriented)))


def format_key(key) -> str:
    """Stable one-line text form of any equivalence key, for golden files."""

    def fmt(x) -> str:
        if isinstance(x, tuple):
            if len(x) == 2 and all(isinstance(v, int) for v in x):
                return f"{x[0]}.{x[1]}"
            return "(" + ",".join(fmt(v) for v in x) + ")"
        return str(x)

    tag, *parts = key
    return tag + "|" + "|".join(fmt(p) for p in parts)
