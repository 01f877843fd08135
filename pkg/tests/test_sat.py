import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bipsynth.aig import Aig, lit_not
from bipsynth.sat import (
    ExternalSolver,
    ResourceLimit,
    Solver,
    SolverError,
    make_solver,
    parse_dimacs,
    parse_solver_output,
    to_dimacs,
    tseitin,
)

from conftest import compiled


def brute_force(nvars, clauses, assumptions=()):
    for bits in itertools.product((False, True), repeat=nvars):
        val = lambda x: bits[abs(x) - 1] if x > 0 else not bits[abs(x) - 1]
        if all(val(a) for a in assumptions) and all(any(val(x) for x in c) for c in clauses):
            return True
    return False


def satisfied(s, clauses):
    return all(any(s.value(x) for x in c) for c in clauses)


def test_unit_sat():
    s = Solver()
    s.add_clause([1])
    assert s.solve()
    assert s.value(1)


def test_contradiction_unsat():
    s = Solver()
    s.add_clause([1])
    assert not s.add_clause([-1])
    assert not s.solve()


def test_empty_clause_unsat():
    s = Solver()
    assert not s.add_clause([])
    assert not s.solve()


def test_literal_zero_rejected():
    with pytest.raises(SolverError):
        Solver().add_clause([1, 0])


def test_random_3sat_below_threshold():
    rng = random.Random(7)
    n, m = 50, 150
    clauses = [[rng.choice((1, -1)) * v for v in rng.sample(range(1, n + 1), 3)] for _ in range(m)]
    s = Solver(seed=3)
    s.add_clauses(clauses)
    assert s.solve()
    assert satisfied(s, clauses)


def test_pigeonhole_unsat():
    # 4 pigeons into 3 holes; p(i, h) = 3*i + h + 1
    p = lambda i, h: 3 * i + h + 1
    s = Solver()
    for i in range(4):
        s.add_clause([p(i, h) for h in range(3)])
    for h in range(3):
        for i, j in itertools.combinations(range(4), 2):
            s.add_clause([-p(i, h), -p(j, h)])
    assert not s.solve()


@settings(max_examples=150, deadline=None)
@given(
    st.integers(1, 7).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(st.lists(st.integers(1, n).flatmap(lambda v: st.sampled_from((v, -v))), max_size=4), max_size=25),
            st.lists(st.integers(1, n).flatmap(lambda v: st.sampled_from((v, -v))), max_size=3),
        )
    )
)
def test_matches_brute_force(case):
    n, clauses, assumptions = case
    s = Solver(seed=1)
    s.ensure_vars(n)
    s.add_clauses(clauses)
    got = s.solve(assumptions)
    assert got == brute_force(n, clauses, assumptions)
    if got:
        assert satisfied(s, clauses)
        assert all(s.value(a) for a in assumptions)


def test_incremental_assumptions_do_not_stick():
    s = Solver()
    s.add_clause([1, 2])
    assert not s.solve([-1, -2])
    assert s.solve([-1])
    assert s.value(2)
    assert s.solve()


def test_seed_determinism():
    rng = random.Random(11)
    clauses = [[rng.choice((1, -1)) * v for v in rng.sample(range(1, 41), 3)] for _ in range(160)]

    def model(seed):
        s = Solver(seed=seed)
        s.add_clauses(clauses)
        assert s.solve()
        return [s.value(v) for v in range(1, 41)]

    assert model(5) == model(5)


def test_conflict_limit_raises():
    p = lambda i, h: 6 * i + h + 1
    s = Solver(conflict_limit=5)
    for i in range(7):
        s.add_clause([p(i, h) for h in range(6)])
    for h in range(6):
        for i, j in itertools.combinations(range(7), 2):
            s.add_clause([-p(i, h), -p(j, h)])
    with pytest.raises(ResourceLimit):
        s.solve()


def test_dimacs_round_trip():
    clauses = [[1, -2], [2, 3, -4], [-1]]
    text = to_dimacs(4, clauses, comments=["x"])
    assert text.splitlines()[:2] == ["c x", "p cnf 4 3"]
    assert parse_dimacs(text) == (4, clauses)


@pytest.mark.parametrize(
    "text",
    ["1 2 0\n", "p cnf 2 2\n1 0\n", "p dnf 1 1\n1 0\n"],
)
def test_dimacs_rejects(text):
    with pytest.raises(SolverError):
        parse_dimacs(text)


def test_solver_output():
    assert parse_solver_output("s SATISFIABLE\nv 1 -2\nv 3 0\n", 10) == {1: True, 2: False, 3: True}
    assert parse_solver_output("s UNSATISFIABLE\n", 20) is None
    assert parse_solver_output("", 20) is None
    with pytest.raises(SolverError):
        parse_solver_output("", 0)


def test_make_solver():
    assert isinstance(make_solver("internal"), Solver)
    assert isinstance(make_solver("external:minisat -verb=0"), ExternalSolver)
    with pytest.raises(SolverError):
        make_solver("glucose")


def test_external_solver_missing_binary():
    s = make_solver("external:/nonexistent/solver")
    s.add_clause([1])
    with pytest.raises(SolverError):
        s.solve()


def _toggler():
    a = Aig()
    i = a.add_input("i")
    r = a.add_latch("r", 0)
    g = a.AND(r, i)
    a.set_next(r, lit_not(r))
    a.add_bad(g, "g")
    return a


@pytest.mark.parametrize("frames", [1, 2, 5])
@pytest.mark.parametrize("assert_bad", [None, 0])
def test_tseitin_counts(frames, assert_bad):
    a = _toggler()
    I, L, A = len(a.inputs), len(a.latches), len(a.ands)
    cnf = tseitin(a, frames, assert_bad)
    assert cnf.num_vars == 1 + frames * (I + L + A)
    extra = 1 if assert_bad is not None else 0
    assert len(cnf.clauses) == 1 + L + frames * 3 * A + (frames - 1) * 2 * L + extra


def test_tseitin_counts_traffic_light():
    a = compiled("traffic_light").aig
    I, L, A = len(a.inputs), len(a.latches), len(a.ands)
    cnf = tseitin(a, 3, 0)
    assert cnf.num_vars == 1 + 3 * (I + L + A)
    assert len(cnf.clauses) == 1 + L + 3 * 3 * A + 2 * 2 * L + 1


def test_tseitin_toggler_semantics():
    a = _toggler()
    # r is 0 at frame 0, 1 at frame 1: the bad (r & i) is reachable only from frame 1
    for frames, want in [(1, False), (2, True), (3, False)]:
        s = Solver()
        s.add_clauses(tseitin(a, frames, 0).clauses)
        assert s.solve() is want


def test_tseitin_rejects_zero_frames():
    with pytest.raises(ValueError):
        tseitin(_toggler(), 0)
