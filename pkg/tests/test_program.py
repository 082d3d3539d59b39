"""Parser and interpreter behavior."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rvfmc import (
    ParseError,
    assertion_status,
    empty_trace,
    enumerate_maximal_traces,
    extend,
    parse_program,
    replay,
)
from corpus import UNANIMOUS, PROGRAMS


def test_unanimous_program_shape():
    p = parse_program(UNANIMOUS)
    assert len(p.threads) == 3
    assert p.access_count() == 8
    assert p.variables == ("x", "y")
    assert p.mutexes == ()


def test_empty_source_parses():
    p = parse_program("")
    assert p.threads == ()
    t = empty_trace(p)
    assert t.enabled == ()
    assert t.maximal and not t.deadlocked


def test_duplicate_thread_name_rejected():
    with pytest.raises(ParseError):
        parse_program("thread t1 { write x 1; } thread t1 { write x 2; }")


def test_syntax_error_carries_position():
    with pytest.raises(ParseError) as exc:
        parse_program("thread t1 {\n  write x ; }")
    assert exc.value.line == 2


def test_nonliteral_loop_bound_rejected():
    with pytest.raises(ParseError):
        parse_program("thread t1 { repeat n { write x 1; } }")


def test_unknown_local_in_expression_rejected():
    with pytest.raises(ParseError):
        parse_program("thread t1 { write x undefined_name; }")


def test_var_also_mutex_rejected():
    with pytest.raises(ParseError):
        parse_program("thread t1 { lock x; write x 1; unlock x; }")


def test_unanimous_initial_enabled():
    p = parse_program(UNANIMOUS)
    t = empty_trace(p)
    assert {(e.thread, e.index) for e in t.enabled} == {(1, 1), (2, 1), (3, 1)}
    assert all(e.kind == "W" and e.var == "x" and e.value == 1 for e in t.enabled)


def test_single_read_enabled():
    p = parse_program("thread t1 { r0 = read x; }")
    t = empty_trace(p)
    (e,) = t.enabled
    assert e.eid == (1, 1) and e.kind == "R" and e.var == "x"


def test_extend_write_records_value():
    p = parse_program(UNANIMOUS)
    t = empty_trace(p)
    e = next(x for x in t.enabled if x.thread == 2)
    t2 = extend(t, e)
    assert t2.values[(2, 1)] == 1
    assert t2.events == (e,)


def test_read_before_any_write_sees_zero():
    p = parse_program("thread t1 { r0 = read x; }\nthread t2 { write x 9; }")
    t = empty_trace(p)
    r = next(e for e in t.enabled if e.kind == "R")
    t2 = extend(t, r)
    assert t2.values[r.eid] == 0


def test_extend_not_enabled_rejected():
    p = parse_program(UNANIMOUS)
    t = empty_trace(p)
    bad = next(iter(t.enabled))
    t2 = extend(t, bad)
    with pytest.raises(ValueError):
        extend(t2, bad)


def test_mutex_blocks_second_acquirer():
    p = parse_program(
        "thread t1 { lock m; unlock m; }\nthread t2 { lock m; unlock m; }"
    )
    t = empty_trace(p)
    assert len(t.enabled) == 2
    t2 = extend(t, next(e for e in t.enabled if e.thread == 1))
    assert {e.thread for e in t2.enabled} == {1}  # t2 blocked on held m


def test_deadlock_is_maximal_with_flag():
    p = parse_program(PROGRAMS["deadlock_no_unlock"])
    t = empty_trace(p)
    t = extend(t, next(e for e in t.enabled if e.thread == 1))  # t1 takes a
    t = extend(t, next(e for e in t.enabled if e.thread == 2))  # t2 takes b
    assert t.maximal and t.deadlocked


def test_release_is_write_acquire_is_read():
    p = parse_program("thread t1 { lock m; unlock m; }")
    t = empty_trace(p)
    (acq,) = t.enabled
    assert acq.kind == "R" and acq.var == "m"
    t = extend(t, acq)
    (rel,) = t.enabled
    assert rel.kind == "W" and rel.var == "m" and rel.value == 0


def test_assertion_status_per_trace():
    p = parse_program(PROGRAMS["assert_never_fails"])
    for ex in enumerate_maximal_traces(p):
        assert not ex.violations
    p = parse_program(PROGRAMS["assert_always_fails"])
    for ex in enumerate_maximal_traces(p):
        assert ex.violations == {"t2#1"}


def test_racy_assertion_fails_on_some_traces_only():
    p = parse_program(PROGRAMS["assert_race"])
    outcomes = {bool(ex.violations) for ex in enumerate_maximal_traces(p)}
    assert outcomes == {True, False}


def test_assertion_status_of_live_trace():
    p = parse_program("thread t1 { write x 1; }\nthread t2 { r = read x; assert r == 1; }")
    t = empty_trace(p)
    t = extend(t, next(e for e in t.enabled if e.thread == 2))  # reads 0
    assert assertion_status(t) == frozenset({"t2#1"})


def test_int64_wraparound():
    big = 2**62
    p = parse_program(f"thread t1 {{ a = {big}; write x a * 4; }}")
    t = empty_trace(p)
    (e,) = t.enabled
    assert e.value == 0  # 2**64 wraps to 0


def test_unary_minus_and_precedence():
    p = parse_program("thread t1 { a = -3 + 2 * 4; write x a; }")
    (e,) = empty_trace(p).enabled
    assert e.value == 5


def test_repeat_unrolls():
    p = parse_program("thread t1 { repeat 3 { write x 1; } }")
    assert p.access_count() == 3


def test_locals_default_to_zero_in_untaken_branch():
    p = parse_program(
        "thread t1 { f = read x; if f == 1 { a = 7; } write y a; }"
    )
    t = empty_trace(p)
    (r,) = t.enabled
    t = extend(t, r)  # reads 0, branch untaken
    (w,) = t.enabled
    assert w.value == 0


def test_trace_length_bounded_by_static_accesses():
    for name, src in PROGRAMS.items():
        p = parse_program(src)
        bound = p.access_count()
        for ex in enumerate_maximal_traces(p):
            assert len(ex.events) <= bound


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_replay_determinism(data):
    """Replaying the events of any produced trace reproduces values and frontier."""
    name = data.draw(st.sampled_from(sorted(PROGRAMS)))
    p = parse_program(PROGRAMS[name])
    t = empty_trace(p)
    while t.enabled:
        e = data.draw(st.sampled_from(sorted(t.enabled, key=lambda e: e.eid)))
        t = extend(t, e)
    again = replay(p, t.events)
    assert again.events == t.events
    assert again.values == t.values
    assert again.enabled == t.enabled
    assert again.violations == t.violations


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_per_thread_subsequence_is_deterministic_prefix(data):
    """A thread's event subsequence is determined by the values its reads saw."""
    name = data.draw(st.sampled_from(sorted(PROGRAMS)))
    p = parse_program(PROGRAMS[name])
    t = empty_trace(p)
    while t.enabled:
        e = data.draw(st.sampled_from(sorted(t.enabled, key=lambda e: e.eid)))
        t = extend(t, e)
    for thread in p.threads:
        seq = [e for e in t.events if e.thread == thread.tid]
        assert [e.index for e in seq] == list(range(1, len(seq) + 1))
