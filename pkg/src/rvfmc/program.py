"""Concurrent-program DSL: parser and deterministic interpreter.

A program is a static set of deterministic threads communicating through
shared integer variables and mutexes.  Shared-memory accesses (writes,
reads, lock acquire/release) are the only observable *events*; everything
else (local assignments, arithmetic, conditionals, bounded loops, asserts)
runs silently between two accesses of the same thread.

Mutexes are encoded on the event level as a global variable of their own:
acquiring reads it, releasing writes it.  Every global variable starts at 0
through an implicit initial write attributed to pseudo-thread 0.

Values are 64-bit signed integers with wrap-around arithmetic.

Grammar::

    program   := thread+
    thread    := "thread" IDENT "{" stmt* "}"
    stmt      := "write" VAR expr ";" | LOCAL "=" "read" VAR ";"
               | LOCAL "=" expr ";" | "if" cond "{" stmt* "}" ("else" "{" stmt* "}")?
               | "repeat" INT "{" stmt* "}" | "lock" MUTEX ";" | "unlock" MUTEX ";"
               | "assert" cond ";"
    cond      := expr ("==" | "!=" | "<" | "<=") expr
    expr      := integers, locals, "+", "-", "*", parentheses, unary minus

Identifiers assigned somewhere in a thread are locals of that thread
(initially 0); all other identifiers in access position are globals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional

EventId = tuple[int, int]

_INT64_MASK = (1 << 64) - 1
_INT64_SIGN = 1 << 63


def _wrap(v: int) -> int:
    """Reduce to two's-complement 64-bit signed range."""
    v &= _INT64_MASK
    return v - (1 << 64) if v & _INT64_SIGN else v


class ParseError(ValueError):
    """Syntax or static-semantics error, carrying source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class InterpreterError(RuntimeError):
    """Raised for dynamic misuse such as releasing a mutex the thread does not hold."""


# ---------------------------------------------------------------------------
# Events and traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    """One shared-memory access, identified by (thread, per-thread index).

    ``value`` is the written value for writes and None for reads; the value
    a read obtains depends on the schedule and lives in ``Trace.values``.
    """

    thread: int
    index: int
    kind: str  # "R" or "W"
    var: str
    value: Optional[int] = None

    @property
    def eid(self) -> EventId:
        return (self.thread, self.index)

    def conflicts(self, other: "Event") -> bool:
        return self.var == other.var and (self.kind == "W" or other.kind == "W")

    def __repr__(self) -> str:  # compact, for test diagnostics
        v = "" if self.value is None else f"={self.value}"
        return f"<{self.thread}.{self.index} {self.kind} {self.var}{v}>"


@dataclass(frozen=True)
class Execution:
    """Immutable snapshot of one complete or partial run: events plus values."""

    program: "Program"
    events: tuple[Event, ...]
    values: dict[EventId, int]
    violations: frozenset[str]
    deadlocked: bool


@dataclass(frozen=True)
class _ThreadRt:
    """Runtime position of one thread: program counter, locals, access count."""

    pc: int
    env: dict[str, int]
    acc: int
    pending: Optional[Event]


@dataclass(frozen=True)
class Trace:
    """A sequence of events with its value function and the enabled frontier.

    Traces are immutable; ``extend`` returns a new trace.  Thread-local
    interpreter state is carried along so extension is O(thread work).
    """

    program: "Program"
    events: tuple[Event, ...]
    values: dict[EventId, int]
    enabled: tuple[Event, ...]
    violations: tuple[str, ...]
    _rt: tuple[_ThreadRt, ...]
    _memory: dict[str, int]
    _holders: dict[str, Optional[int]]

    @property
    def maximal(self) -> bool:
        return not self.enabled

    @property
    def deadlocked(self) -> bool:
        return not self.enabled and any(rt.pending is not None for rt in self._rt)

    def extend(self, event: Event) -> "Trace":
        return extend(self, event)

    def freeze(self) -> Execution:
        return Execution(
            self.program,
            self.events,
            dict(self.values),
            frozenset(self.violations),
            self.deadlocked,
        )


# ---------------------------------------------------------------------------
# Compiled program
# ---------------------------------------------------------------------------

# Instruction tags that produce an event; everything else is thread-local.
_ACCESS_TAGS = frozenset({"write", "read", "lock", "unlock"})


@dataclass(frozen=True)
class Thread:
    name: str
    tid: int
    ops: tuple


@dataclass(frozen=True)
class Program:
    """Parsed and compiled program with a fixed thread set."""

    threads: tuple[Thread, ...]
    variables: tuple[str, ...]  # plain shared variables, sorted
    mutexes: tuple[str, ...]  # mutex identifiers, sorted

    @property
    def globals(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.variables) | set(self.mutexes)))

    def ordinal(self, var: str) -> int:
        return self.globals.index(var) + 1

    def init_event(self, var: str) -> Event:
        """The salient initial write of ``var``: pseudo-thread 0, value 0."""
        return Event(0, self.ordinal(var), "W", var, 0)

    @property
    def init_events(self) -> tuple[Event, ...]:
        return tuple(self.init_event(v) for v in self.globals)

    def access_count(self) -> int:
        return sum(1 for t in self.threads for op in t.ops if op[0] in _ACCESS_TAGS)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_KEYWORDS = frozenset(
    {"thread", "write", "read", "if", "else", "repeat", "lock", "unlock", "assert"}
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*)
    | (?P<int>\d+)
    | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
    | (?P<op>==|!=|<=|[{}();=<+\-*])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        text = m.group(0)
        if not m.lastgroup == "ws":
            tokens.append((m.lastgroup, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self) -> tuple[str, str, int, int]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, str, int, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg: str) -> ParseError:
        _, _, line, col = self.peek()
        return ParseError(msg, line, col)

    def expect(self, text: str) -> tuple[str, str, int, int]:
        tok = self.next()
        if tok[1] != text:
            raise ParseError(f"expected {text!r}, found {tok[1] or 'end of input'!r}", tok[2], tok[3])
        return tok

    def ident(self, what: str = "identifier") -> str:
        kind, text, line, col = self.next()
        if kind != "ident" or text in _KEYWORDS:
            raise ParseError(f"expected {what}, found {text or 'end of input'!r}", line, col)
        return text

    # -- expressions -------------------------------------------------------

    def expr(self) -> tuple:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            node = (op, node, self.term())
        return node

    def term(self) -> tuple:
        node = self.factor()
        while self.peek()[1] == "*":
            self.next()
            node = ("*", node, self.factor())
        return node

    def factor(self) -> tuple:
        kind, text, line, col = self.peek()
        if text == "-":
            self.next()
            return ("neg", self.factor())
        if text == "(":
            self.next()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "int":
            self.next()
            return ("int", int(text))
        if kind == "ident" and text not in _KEYWORDS:
            self.next()
            return ("loc", text, line, col)
        raise ParseError(f"expected expression, found {text or 'end of input'!r}", line, col)

    def cond(self) -> tuple:
        left = self.expr()
        kind, text, line, col = self.next()
        if text not in ("==", "!=", "<", "<="):
            raise ParseError(f"expected comparison operator, found {text!r}", line, col)
        return (text, left, self.expr())

    # -- statements --------------------------------------------------------

    def block(self) -> list:
        self.expect("{")
        stmts = []
        while self.peek()[1] != "}":
            stmts.append(self.stmt())
        self.expect("}")
        return stmts

    def stmt(self) -> tuple:
        kind, text, line, col = self.peek()
        if text == "write":
            self.next()
            var = self.ident("variable")
            e = self.expr()
            self.expect(";")
            return ("write", var, e, line)
        if text == "lock" or text == "unlock":
            self.next()
            var = self.ident("mutex")
            self.expect(";")
            return (text, var, line)
        if text == "assert":
            self.next()
            c = self.cond()
            self.expect(";")
            return ("assert", c, line)
        if text == "if":
            self.next()
            c = self.cond()
            then = self.block()
            other = []
            if self.peek()[1] == "else":
                self.next()
                other = self.block()
            return ("if", c, then, other)
        if text == "repeat":
            self.next()
            nk, ntext, nline, ncol = self.next()
            if nk != "int":
                raise ParseError("loop bound must be an integer literal", nline, ncol)
            return ("repeat", int(ntext), self.block())
        if kind == "ident" and text not in _KEYWORDS:
            self.next()
            self.expect("=")
            if self.peek()[1] == "read":
                self.next()
                var = self.ident("variable")
                self.expect(";")
                return ("readinto", text, var, line)
            e = self.expr()
            self.expect(";")
            return ("assign", text, e)
        raise ParseError(f"expected statement, found {text or 'end of input'!r}", line, col)


# ---------------------------------------------------------------------------
# Compilation: AST -> flat instruction list (repeat unrolled, if via jumps)
# ---------------------------------------------------------------------------


def _assigned_locals(stmts: Iterable) -> set[str]:
    names: set[str] = set()
    for s in stmts:
        if s[0] in ("assign", "readinto"):
            names.add(s[1])
        elif s[0] == "if":
            names |= _assigned_locals(s[2])
            names |= _assigned_locals(s[3])
        elif s[0] == "repeat":
            names |= _assigned_locals(s[2])
    return names


def _check_expr(e: tuple, locals_: set[str]) -> None:
    if e[0] == "int":
        return
    if e[0] == "loc":
        if e[1] not in locals_:
            raise ParseError(f"identifier {e[1]!r} is not a local of this thread", e[2], e[3])
        return
    if e[0] == "neg":
        _check_expr(e[1], locals_)
        return
    _check_expr(e[1], locals_)
    _check_expr(e[2], locals_)


class _ThreadCompiler:
    def __init__(self, thread_name: str, locals_: set[str]):
        self.name = thread_name
        self.locals = locals_
        self.ops: list = []
        self.assert_seq = 0
        self.writes: set[str] = set()
        self.reads: set[str] = set()
        self.mutexes: set[str] = set()
        self.assert_lines: dict[str, int] = {}

    def emit(self, stmts: list) -> None:
        for s in stmts:
            tag = s[0]
            if tag == "write":
                _check_expr(s[2], self.locals)
                self.writes.add(s[1])
                self.ops.append(("write", s[1], s[2]))
            elif tag == "readinto":
                self.reads.add(s[2])
                self.ops.append(("read", s[2], s[1]))
            elif tag == "assign":
                _check_expr(s[2], self.locals)
                self.ops.append(("set", s[1], s[2]))
            elif tag in ("lock", "unlock"):
                self.mutexes.add(s[1])
                self.ops.append((tag, s[1]))
            elif tag == "assert":
                _check_expr(s[1][1], self.locals)
                _check_expr(s[1][2], self.locals)
                self.assert_seq += 1
                aid = f"{self.name}#{self.assert_seq}"
                self.assert_lines[aid] = s[2]
                self.ops.append(("assert", s[1], aid))
            elif tag == "if":
                _check_expr(s[1][1], self.locals)
                _check_expr(s[1][2], self.locals)
                jz_at = len(self.ops)
                self.ops.append(None)  # patched below
                self.emit(s[2])
                if s[3]:
                    jmp_at = len(self.ops)
                    self.ops.append(None)
                    self.ops[jz_at] = ("jz", s[1], len(self.ops))
                    self.emit(s[3])
                    self.ops[jmp_at] = ("jmp", len(self.ops))
                else:
                    self.ops[jz_at] = ("jz", s[1], len(self.ops))
            elif tag == "repeat":
                # Bound is a literal, so the body unrolls statically; each
                # copy keeps the original assert identifiers.
                saved = self.assert_seq
                for _ in range(s[1]):
                    self.assert_seq = saved
                    self.emit(s[2])
            else:  # pragma: no cover
                raise AssertionError(tag)


def parse_program(source: str) -> Program:
    """Parse DSL text into a compiled Program; empty source is a 0-thread program."""
    parser = _Parser(source)
    compilers: list[_ThreadCompiler] = []
    names: set[str] = set()
    while parser.peek()[0] != "eof":
        kind, text, line, col = parser.next()
        if text != "thread":
            raise ParseError(f"expected 'thread', found {text!r}", line, col)
        name = parser.ident("thread name")
        if name in names:
            raise ParseError(f"duplicate thread name {name!r}", line, col)
        names.add(name)
        stmts = parser.block()
        tc = _ThreadCompiler(name, _assigned_locals(stmts))
        tc.emit(stmts)
        compilers.append(tc)

    variables: set[str] = set()
    mutexes: set[str] = set()
    for tc in compilers:
        variables |= tc.writes | tc.reads
        mutexes |= tc.mutexes
    clash = variables & mutexes
    if clash:
        raise ParseError(f"{sorted(clash)[0]!r} used both as variable and mutex", 1, 1)

    threads = tuple(
        Thread(tc.name, i + 1, tuple(tc.ops)) for i, tc in enumerate(compilers)
    )
    return Program(threads, tuple(sorted(variables)), tuple(sorted(mutexes)))


# ---------------------------------------------------------------------------
# Interpretation
# ---------------------------------------------------------------------------


def _eval(e: tuple, env: dict[str, int]) -> int:
    tag = e[0]
    if tag == "int":
        return e[1]
    if tag == "loc":
        return env.get(e[1], 0)
    if tag == "neg":
        return _wrap(-_eval(e[1], env))
    a = _eval(e[1], env)
    b = _eval(e[2], env)
    if tag == "+":
        return _wrap(a + b)
    if tag == "-":
        return _wrap(a - b)
    return _wrap(a * b)


def _holds(c: tuple, env: dict[str, int]) -> bool:
    a = _eval(c[1], env)
    b = _eval(c[2], env)
    return {"==": a == b, "!=": a != b, "<": a < b, "<=": a <= b}[c[0]]


def _advance(thread: Thread, pc: int, env: dict[str, int], violations: list[str]) -> int:
    """Run thread-local instructions until the next access op or thread end."""
    ops = thread.ops
    while pc < len(ops):
        op = ops[pc]
        tag = op[0]
        if tag in _ACCESS_TAGS:
            return pc
        if tag == "set":
            env[op[1]] = _eval(op[2], env)
        elif tag == "assert":
            if not _holds(op[1], env):
                violations.append(op[2])
        elif tag == "jz":
            if not _holds(op[1], env):
                pc = op[2]
                continue
        elif tag == "jmp":
            pc = op[1]
            continue
        pc += 1
    return pc


def _pending(thread: Thread, pc: int, env: dict[str, int], acc: int) -> Optional[Event]:
    if pc >= len(thread.ops):
        return None
    op = thread.ops[pc]
    tag = op[0]
    if tag == "write":
        return Event(thread.tid, acc + 1, "W", op[1], _eval(op[2], env))
    if tag == "read":
        return Event(thread.tid, acc + 1, "R", op[1])
    if tag == "lock":
        return Event(thread.tid, acc + 1, "R", op[1])
    return Event(thread.tid, acc + 1, "W", op[1], 0)  # unlock


def _enabled(program: Program, rts: tuple[_ThreadRt, ...], holders: dict[str, Optional[int]]) -> tuple[Event, ...]:
    out = []
    for thread, rt in zip(program.threads, rts):
        e = rt.pending
        if e is None:
            continue
        if thread.ops[rt.pc][0] == "lock" and holders[e.var] is not None:
            continue  # blocked on a held mutex
        out.append(e)
    return tuple(out)


def empty_trace(program: Program) -> Trace:
    """The initial trace: no events, every global at 0, frontier at each thread's first access."""
    violations: list[str] = []
    rts = []
    for thread in program.threads:
        env: dict[str, int] = {}
        pc = _advance(thread, 0, env, violations)
        rts.append(_ThreadRt(pc, env, 0, _pending(thread, pc, env, 0)))
    memory = {v: 0 for v in program.globals}
    holders: dict[str, Optional[int]] = {m: None for m in program.mutexes}
    rts_t = tuple(rts)
    return Trace(
        program=program,
        events=(),
        values={},
        enabled=_enabled(program, rts_t, holders),
        violations=tuple(dict.fromkeys(violations)),
        _rt=rts_t,
        _memory=memory,
        _holders=holders,
    )


def extend(trace: Trace, event: Event) -> Trace:
    """Execute one enabled event and advance its thread to the next access."""
    program = trace.program
    if not (1 <= event.thread <= len(program.threads)):
        raise ValueError(f"event {event!r} is not enabled: no such thread")
    thread = program.threads[event.thread - 1]
    rt = trace._rt[event.thread - 1]
    if rt.pending != event:
        raise ValueError(f"event {event!r} is not enabled")
    op = thread.ops[rt.pc]

    memory = dict(trace._memory)
    holders = dict(trace._holders)
    values = dict(trace.values)
    env = dict(rt.env)
    violations = list(trace.violations)
    seen = set(violations)

    if op[0] == "write":
        memory[event.var] = event.value
        values[event.eid] = event.value
    elif op[0] == "read":
        v = memory[event.var]
        env[op[2]] = v
        values[event.eid] = v
    elif op[0] == "lock":
        if holders[event.var] is not None:
            raise ValueError(f"event {event!r} is not enabled: mutex held")
        holders[event.var] = event.thread
        values[event.eid] = memory[event.var]
    else:  # unlock
        if holders[event.var] != event.thread:
            raise InterpreterError(
                f"thread {thread.name} releases mutex {event.var!r} it does not hold"
            )
        holders[event.var] = None
        memory[event.var] = 0
        values[event.eid] = 0

    local_viol: list[str] = []
    pc = _advance(thread, rt.pc + 1, env, local_viol)
    for aid in local_viol:
        if aid not in seen:
            seen.add(aid)
            violations.append(aid)
    new_rt = _ThreadRt(pc, env, rt.acc + 1, _pending(thread, pc, env, rt.acc + 1))
    rts = trace._rt[: event.thread - 1] + (new_rt,) + trace._rt[event.thread :]

    return Trace(
        program=program,
        events=trace.events + (event,),
        values=values,
        enabled=_enabled(program, rts, holders),
        violations=tuple(violations),
        _rt=rts,
        _memory=memory,
        _holders=holders,
    )


def assertion_status(trace: Trace) -> frozenset[str]:
    """Identifiers of assert statements that failed along the trace."""
    return frozenset(trace.violations)


def replay(program: Program, events: Iterable[Event]) -> Trace:
    """Re-execute a sequence of events from the empty trace, validating each step."""
    t = empty_trace(program)
    for e in events:
        t = extend(t, e)
    return t
