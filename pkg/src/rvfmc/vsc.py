"""Realizability of an event set under a good-writes constraint.

An instance pairs a proper event set X (union of per-thread prefixes) with a
good-writes function mapping every read in X to a non-empty set of
conflicting writes (program writes of X, or the initial write of the read's
variable).  A *witness* is a linearization of X that respects program order
in which every read reads-from one of its good writes.

``verify_sc`` decides witness existence by a worklist search over witness
prefixes, memoized on the *witness state*: the per-thread event counts plus,
per variable, the thread of its active (latest) write.  Two prefixes with
equal witness state are extendable by exactly the same suffixes, so one of
them can be dropped.  The number of distinct states is at most
prod_t(n_t + 1) * (k + 1)^d, which bounds the search.

Three independently switchable accelerations:

* greedy extension -- an executable read is always taken immediately; an
  executable write that is useless to every remaining read may replace an
  equally useless active write without enumerating alternatives;
* closure -- a fixpoint pre-pass computing the weakest partial order every
  witness must refine; failure proves the instance unrealizable, success
  restricts the search to order-respecting extensions;
* guided search -- with an auxiliary trace over the same events, the
  depth-first stack is fed candidates in reverse trace order so that they
  pop in trace order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

from .program import Event, EventId
from .semantics import PartialOrder, partial_order

GoodWrites = Mapping[EventId, frozenset[EventId]]


class VscError(ValueError):
    """Malformed instance: improper event set or unusable good-writes entry."""


@dataclass(frozen=True)
class SolverOptions:
    greedy: bool = True
    closure: bool = True
    guided: bool = True

    @classmethod
    def none(cls) -> "SolverOptions":
        return cls(greedy=False, closure=False, guided=False)


@dataclass(frozen=True)
class VscInstance:
    """Events X, good-writes function, and the induced per-thread program order.

    ``universe`` fixes the variable-ordinal scheme used for initial-write ids
    (thread 0, index = 1-based position among sorted variable names); it
    defaults to the variables occurring in the events.
    """

    events: tuple[Event, ...]
    good_writes: dict[EventId, frozenset[EventId]]
    universe: tuple[str, ...] = ()

    def __post_init__(self):
        by_thread: dict[int, dict[int, Event]] = {}
        for e in self.events:
            if e.thread <= 0:
                raise VscError(f"event {e!r}: thread ids must be positive")
            slot = by_thread.setdefault(e.thread, {})
            if e.index in slot:
                raise VscError(f"duplicate event id {e.eid}")
            slot[e.index] = e
        for tid, slot in by_thread.items():
            if sorted(slot) != list(range(1, len(slot) + 1)):
                raise VscError(f"thread {tid}: events do not form a prefix 1..n")
        if self.universe:
            missing = {e.var for e in self.events} - set(self.universe)
            if missing:
                raise VscError(f"variables {sorted(missing)} outside the declared universe")
        writes = {e.eid: e for e in self.events if e.kind == "W"}
        for e in self.events:
            if e.kind != "R":
                continue
            gw = self.good_writes.get(e.eid)
            if not gw:
                raise VscError(f"read {e.eid} has no good-writes entry")
            for weid in gw:
                if weid[0] == 0:
                    if weid != self.init_eid(e.var):
                        raise VscError(f"{weid} is not the initial write of {e.var!r}")
                elif weid not in writes or writes[weid].var != e.var:
                    raise VscError(f"good write {weid} of read {e.eid} does not conflict")
        read_ids = {e.eid for e in self.events if e.kind == "R"}
        for reid in self.good_writes:
            if reid not in read_ids:
                raise VscError(f"good-writes entry for non-read {reid}")

    @cached_property
    def by_thread(self) -> dict[int, tuple[Event, ...]]:
        out: dict[int, list[Event]] = {}
        for e in sorted(self.events, key=lambda e: e.eid):
            out.setdefault(e.thread, []).append(e)
        return {t: tuple(v) for t, v in out.items()}

    @cached_property
    def threads(self) -> tuple[int, ...]:
        return tuple(sorted(self.by_thread))

    @cached_property
    def variables(self) -> tuple[str, ...]:
        if self.universe:
            return tuple(sorted(self.universe))
        return tuple(sorted({e.var for e in self.events}))

    def init_eid(self, var: str) -> EventId:
        return (0, self.variables.index(var) + 1)

    def init_event(self, var: str) -> Event:
        return Event(0, self.variables.index(var) + 1, "W", var, 0)

    @cached_property
    def event_of(self) -> dict[EventId, Event]:
        return {e.eid: e for e in self.events}

    @cached_property
    def po(self) -> PartialOrder:
        edges = []
        for chain in self.by_thread.values():
            edges += [(chain[i].eid, chain[i + 1].eid) for i in range(len(chain) - 1)]
        return partial_order((e.eid for e in self.events), edges)

    def state_bound(self) -> int:
        """prod_t(n_t + 1) * (k + 1)^d: the limit on distinct witness states."""
        bound = 1
        for chain in self.by_thread.values():
            bound *= len(chain) + 1
        return bound * (len(self.threads) + 1) ** len(self.variables)


# ---------------------------------------------------------------------------
# Witness prefixes (public face of the search state, used directly in tests)
# ---------------------------------------------------------------------------


class WitnessState(tuple):
    """Hashable (per-thread counts, per-variable active-write thread) pair."""

    __slots__ = ()

    def __new__(cls, counts: tuple[int, ...], memory_map: tuple[int, ...]):
        return super().__new__(cls, (counts, memory_map))

    @property
    def counts(self) -> tuple[int, ...]:
        return self[0]

    @property
    def memory_map(self) -> tuple[int, ...]:
        return self[1]


@dataclass(frozen=True)
class WitnessPrefix:
    """A partial linearization plus its derived counts and active-write map."""

    instance: VscInstance
    sequence: tuple[Event, ...]
    counts: tuple[int, ...] = field(init=False)
    active: tuple[EventId, ...] = field(init=False)

    def __post_init__(self):
        inst = self.instance
        counts = {t: 0 for t in inst.threads}
        amap = {v: inst.init_eid(v) for v in inst.variables}
        for e in self.sequence:
            if e.index != counts[e.thread] + 1:
                raise VscError(f"sequence violates program order at {e!r}")
            counts[e.thread] += 1
            if e.kind == "W":
                amap[e.var] = e.eid
        object.__setattr__(self, "counts", tuple(counts[t] for t in inst.threads))
        object.__setattr__(self, "active", tuple(amap[v] for v in inst.variables))

    @property
    def state(self) -> WitnessState:
        return WitnessState(self.counts, tuple(eid[0] for eid in self.active))

    def executed(self, eid: EventId) -> bool:
        if eid[0] == 0:
            return True  # initial writes precede everything
        try:
            t = self.instance.threads.index(eid[0])
        except ValueError:
            return False
        return eid[1] <= self.counts[t]


def active_write(prefix: WitnessPrefix, var: str) -> Event:
    """The latest write of ``var`` in the prefix; the initial write if none."""
    eid = prefix.active[prefix.instance.variables.index(var)]
    if eid[0] == 0:
        return prefix.instance.init_event(var)
    return prefix.instance.event_of[eid]


def is_held(prefix: WitnessPrefix, var: str) -> bool:
    """True when some unexecuted read of ``var`` has all its good writes executed."""
    inst = prefix.instance
    for e in inst.events:
        if e.kind != "R" or e.var != var or prefix.executed(e.eid):
            continue
        if all(prefix.executed(w) for w in inst.good_writes[e.eid]):
            return True
    return False


def executable(prefix: WitnessPrefix, event: Event, order: Optional[PartialOrder] = None) -> bool:
    """Lower-set extension check plus the kind-specific condition.

    Reads need one of their good writes active; writes need their variable
    not held.  With ``order`` given, all order-predecessors must be executed.
    """
    inst = prefix.instance
    if prefix.executed(event.eid):
        return False
    if event.index != 1 and not prefix.executed((event.thread, event.index - 1)):
        return False
    if order is not None:
        for a, b in order.pairs:
            if b == event.eid and not prefix.executed(a):
                return False
    if event.kind == "R":
        return prefix.active[inst.variables.index(event.var)] in inst.good_writes[event.eid]
    return not is_held(prefix, event.var)


def _frontier(prefix: WitnessPrefix) -> list[Event]:
    inst = prefix.instance
    out = []
    for i, t in enumerate(inst.threads):
        chain = inst.by_thread[t]
        if prefix.counts[i] < len(chain):
            out.append(chain[prefix.counts[i]])
    return out


def _useless(prefix: WitnessPrefix, weid: EventId) -> bool:
    """True when no unexecuted read counts ``weid`` among its good writes."""
    inst = prefix.instance
    for e in inst.events:
        if e.kind == "R" and not prefix.executed(e.eid) and weid in inst.good_writes[e.eid]:
            return False
    return True


def greedy_extension(prefix: WitnessPrefix, order: Optional[PartialOrder] = None) -> Optional[Event]:
    """The forced greedy step, if one applies.

    Rule 1: any executable read is taken (lowest event id on ties).
    Rule 2: when the active write of some variable is useless to every
    remaining read, an equally useless executable write to that variable
    replaces it.  Returns None when neither rule fires.
    """
    inst = prefix.instance
    cands = [e for e in _frontier(prefix) if executable(prefix, e, order)]
    reads = [e for e in cands if e.kind == "R"]
    if reads:
        return min(reads, key=lambda e: e.eid)
    best = None
    for e in cands:
        aw = prefix.active[inst.variables.index(e.var)]
        if aw[0] == 0:
            continue  # rule 2 needs an active write in the sequence
        if _useless(prefix, aw) and _useless(prefix, e.eid):
            if best is None or e.eid < best.eid:
                best = e
    return best


def guided_order(candidates: Sequence[Event], aux: Sequence[Event]) -> list[Event]:
    """Candidates sorted by reverse position in ``aux`` so LIFO pops follow it."""
    pos = {e.eid: i for i, e in enumerate(aux)}
    return sorted(candidates, key=lambda e: pos[e.eid], reverse=True)


# ---------------------------------------------------------------------------
# Closure
# ---------------------------------------------------------------------------


class _Cycle(Exception):
    pass


class _Order:
    """Mutable transitively-closed strict order over program event ids."""

    def __init__(self, eids: Iterable[EventId]):
        self.succ: dict[EventId, set[EventId]] = {e: set() for e in eids}
        self.pred: dict[EventId, set[EventId]] = {e: set() for e in eids}

    def less(self, a: EventId, b: EventId) -> bool:
        return b in self.succ[a]

    def add(self, a: EventId, b: EventId) -> bool:
        if a == b or b in self.succ[a]:
            return False
        if a in self.succ[b]:
            raise _Cycle
        before = self.pred[a] | {a}
        after = self.succ[b] | {b}
        for x in before:
            for y in after:
                if y not in self.succ[x]:
                    if x == y or x in self.succ[y]:
                        raise _Cycle
                    self.succ[x].add(y)
                    self.pred[y].add(x)
        return True


def closure(inst: VscInstance) -> Optional[PartialOrder]:
    """Weakest order every witness refines, or None when none can exist.

    Fixpoint over four per-read conditions on Cl(r), the good writes of r
    still visible under the current order (the initial write participates
    implicitly, ordered before every program event):

    1. Cl(r) must be non-empty;
    2. a least element of Cl(r) is ordered before r;
    3. with a greatest element w of Cl(r), every conflicting non-good write
       already before r moves before w;
    4. a conflicting non-good write that every member of Cl(r) precedes
       moves after r.
    """
    order = _Order([e.eid for e in inst.events])
    for chain in inst.by_thread.values():
        for i in range(len(chain) - 1):
            order.add(chain[i].eid, chain[i + 1].eid)

    reads = [e for e in inst.events if e.kind == "R"]
    writes_of: dict[str, list[EventId]] = {}
    for e in inst.events:
        if e.kind == "W":
            writes_of.setdefault(e.var, []).append(e.eid)

    def visible(r: Event) -> set[EventId]:
        conf = writes_of.get(r.var, [])
        out = set()
        for w in conf:
            if order.less(r.eid, w):
                continue
            if any(order.less(w, x) and order.less(x, r.eid) for x in conf if x != w):
                continue
            out.add(w)
        init = inst.init_eid(r.var)
        if not any(order.less(x, r.eid) for x in conf):
            out.add(init)
        return out

    def pass_once() -> bool:
        changed = False
        for r in reads:
            gw = inst.good_writes[r.eid]
            cl = gw & visible(r)
            if not cl:
                raise _Cycle
            init = inst.init_eid(r.var)

            def lt(a: EventId, b: EventId) -> bool:
                if a == b:
                    return False
                if a[0] == 0:
                    return True
                if b[0] == 0:
                    return False
                return order.less(a, b)

            least = [w for w in cl if all(lt(w, x) or w == x for x in cl)]
            if least and least[0][0] != 0:
                changed |= order.add(least[0], r.eid)
            greatest = [w for w in cl if all(lt(x, w) or w == x for x in cl)]
            bad = [w for w in writes_of.get(r.var, []) if w not in gw]
            if greatest:
                g = greatest[0]
                for w in bad:
                    if order.less(w, r.eid) and not lt(w, g):
                        if g[0] == 0:
                            raise _Cycle  # a program write cannot precede the initial write
                        changed |= order.add(w, g)
            for w in bad:
                if all(lt(x, w) for x in cl):
                    changed |= order.add(r.eid, w)
        return changed

    try:
        while pass_once():
            pass
    except _Cycle:
        return None
    pairs = frozenset((a, b) for a, succ in order.succ.items() for b in succ)
    return PartialOrder(frozenset(order.succ), pairs)


# ---------------------------------------------------------------------------
# The search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VscResult:
    witness: Optional[tuple[Event, ...]]
    states_processed: int
    closure_order: Optional[PartialOrder] = None

    @property
    def realizable(self) -> bool:
        return self.witness is not None


def _validate_witness(inst: VscInstance, seq: tuple[Event, ...]) -> None:
    if sorted(e.eid for e in seq) != sorted(e.eid for e in inst.events):
        raise RuntimeError("witness is not a linearization of the instance events")
    counts = {t: 0 for t in inst.threads}
    active: dict[str, EventId] = {}
    for e in seq:
        if e.index != counts[e.thread] + 1:
            raise RuntimeError("witness violates program order")
        counts[e.thread] += 1
        if e.kind == "W":
            active[e.var] = e.eid
        else:
            src = active.get(e.var, inst.init_eid(e.var))
            if src not in inst.good_writes[e.eid]:
                raise RuntimeError(f"witness read {e.eid} reads a non-good write {src}")


def verify_sc(
    inst: VscInstance,
    options: SolverOptions = SolverOptions(),
    aux: Optional[Sequence[Event]] = None,
) -> VscResult:
    """Decide realizability; return a validated witness when one exists.

    The worklist is a LIFO stack of witness prefixes; a successor is pushed
    only when its witness state is new.  ``states_processed`` counts popped
    prefixes and never exceeds ``inst.state_bound()``.
    """
    closure_po = None
    if options.closure:
        closure_po = closure(inst)
        if closure_po is None:
            return VscResult(None, 0, None)

    threads = inst.threads
    tindex = {t: i for i, t in enumerate(threads)}
    variables = inst.variables
    vindex = {v: i for i, v in enumerate(variables)}
    chains = [inst.by_thread[t] for t in threads]
    n = len(inst.events)
    gw = inst.good_writes
    reads_of_var: dict[str, list[Event]] = {}
    for e in inst.events:
        if e.kind == "R":
            reads_of_var.setdefault(e.var, []).append(e)
    # cross-thread closure predecessors, the only ones not implied by counts
    cpred: dict[EventId, tuple[EventId, ...]] = {}
    if closure_po is not None:
        tmp: dict[EventId, list[EventId]] = {e.eid: [] for e in inst.events}
        for a, b in closure_po.pairs:
            if a[0] != b[0]:
                tmp[b].append(a)
        cpred = {k: tuple(v) for k, v in tmp.items()}

    aux_pos: Optional[dict[EventId, int]] = None
    if options.guided and aux is not None:
        aux_pos = {e.eid: i for i, e in enumerate(aux)}

    def executed(eid: EventId, counts: tuple[int, ...]) -> bool:
        return eid[0] == 0 or eid[1] <= counts[tindex[eid[0]]]

    def can_run(e: Event, counts: tuple[int, ...], active: tuple[EventId, ...]) -> bool:
        if cpred:
            for p in cpred[e.eid]:
                if not executed(p, counts):
                    return False
        if e.kind == "R":
            return active[vindex[e.var]] in gw[e.eid]
        for r in reads_of_var.get(e.var, ()):
            if r.index > counts[tindex[r.thread]] and all(
                executed(w, counts) for w in gw[r.eid]
            ):
                return False  # variable held by r
        return True

    init_active = tuple(inst.init_eid(v) for v in variables)
    start = ((), (0,) * len(threads), init_active)
    done = {(start[1], tuple(a[0] for a in start[2]))}
    stack = [start]
    processed = 0

    while stack:
        seq, counts, active = stack.pop()
        processed += 1
        if len(seq) == n:
            _validate_witness(inst, seq)
            return VscResult(seq, processed, closure_po)

        cands = []
        for i, chain in enumerate(chains):
            if counts[i] < len(chain):
                e = chain[counts[i]]
                if can_run(e, counts, active):
                    cands.append(e)

        if options.greedy and cands:
            reads = [e for e in cands if e.kind == "R"]
            if reads:
                cands = [min(reads, key=lambda e: e.eid)]
            else:
                best = None
                for e in cands:
                    aw = active[vindex[e.var]]
                    if aw[0] != 0 and _useless_fast(inst, aw, counts, tindex, reads_of_var) and _useless_fast(
                        inst, e.eid, counts, tindex, reads_of_var
                    ):
                        if best is None or e.eid < best.eid:
                            best = e
                if best is not None:
                    cands = [best]

        if aux_pos is not None:
            push_order = sorted(cands, key=lambda e: aux_pos[e.eid], reverse=True)
        else:
            push_order = sorted(cands, key=lambda e: e.eid, reverse=True)

        for e in push_order:
            i = tindex[e.thread]
            ncounts = counts[:i] + (counts[i] + 1,) + counts[i + 1 :]
            if e.kind == "W":
                j = vindex[e.var]
                nactive = active[:j] + (e.eid,) + active[j + 1 :]
            else:
                nactive = active
            key = (ncounts, tuple(a[0] for a in nactive))
            if key not in done:
                done.add(key)
                stack.append((seq + (e,), ncounts, nactive))

    return VscResult(None, processed, closure_po)


def _useless_fast(inst, weid, counts, tindex, reads_of_var) -> bool:
    var = inst.event_of[weid].var if weid[0] != 0 else None
    pool = reads_of_var.get(var, ()) if var is not None else ()
    for r in pool:
        if r.index > counts[tindex[r.thread]] and weid in inst.good_writes[r.eid]:
            return False
    return True


# ---------------------------------------------------------------------------
# Instance text format
# ---------------------------------------------------------------------------
#
#   E <thread> <index> R|W <var> [<value>]
#   G <read-thread> <read-index> : <write-id>...
#
# Event ids are written <thread>.<index>; the initial write of a variable is
# thread 0 with the variable's ordinal (1-based, variables sorted by name).


def parse_instance(text: str) -> VscInstance:
    events: list[Event] = []
    gw_lines: list[tuple[int, EventId, list[EventId]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "E":
                thread, index, kind, var = int(parts[1]), int(parts[2]), parts[3], parts[4]
                if kind not in ("R", "W"):
                    raise ValueError(f"bad kind {kind!r}")
                value = None
                if kind == "W":
                    value = int(parts[5]) if len(parts) > 5 else 0
                events.append(Event(thread, index, kind, var, value))
            elif parts[0] == "G":
                reid = (int(parts[1]), int(parts[2]))
                if parts[3] != ":":
                    raise ValueError("expected ':'")
                writes = []
                for tok in parts[4:]:
                    t, i = tok.split(".")
                    writes.append((int(t), int(i)))
                gw_lines.append((lineno, reid, writes))
            else:
                raise ValueError(f"unknown record {parts[0]!r}")
        except (IndexError, ValueError) as exc:
            raise VscError(f"line {lineno}: {exc}") from None
    good_writes = {reid: frozenset(ws) for _, reid, ws in gw_lines}
    return VscInstance(tuple(events), good_writes)


def format_instance(inst: VscInstance) -> str:
    lines = []
    for e in sorted(inst.events, key=lambda e: e.eid):
        v = f" {e.value}" if e.kind == "W" else ""
        lines.append(f"E {e.thread} {e.index} {e.kind} {e.var}{v}")
    for reid in sorted(inst.good_writes):
        ws = " ".join(f"{t}.{i}" for t, i in sorted(inst.good_writes[reid]))
        lines.append(f"G {reid[0]} {reid[1]} : {ws}")
    return "\n".join(lines) + "\n"


def format_witness(seq: Iterable[Event]) -> str:
    return " ".join(f"{e.thread}.{e.index}" for e in seq)
