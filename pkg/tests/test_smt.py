import itertools

import numpy as np
import pytest
from instances import random_smt

from polyar.engine import solve
from polyar.geometry import Box
from polyar.polynomial import Polynomial
from polyar.problem import Config, ProblemF, Status
from polyar.smt import (Link, PBRow, SmtProblem, TheoryCache, _lit_value, sat_next, solve_problem,
                        solve_smt, theory_check)


def cfg(**kw):
    kw.setdefault("max_workers", 1)
    kw.setdefault("timeout_s", 60.0)
    return Config(**kw)


def xs(n):
    return Polynomial.variables(n)


# -- Boolean core ------------------------------------------------------------------


def test_sat_next_unit():
    assert sat_next(1, [(1,)]) == {1: True}


def test_sat_next_contradiction():
    assert sat_next(1, [(1,), (-1,)]) is None
    assert sat_next(2, [()]) is None


def test_exactly_one_row_by_enumeration():
    row = PBRow.exactly_one([1, 2, 3])
    legal = [a for a in itertools.product([False, True], repeat=3) if sum(a) == 1]
    assert len(legal) == 3
    a = sat_next(3, [], [row])
    assert tuple(a[v] for v in (1, 2, 3)) in legal
    # blocking each legal assignment in turn walks through all of them, then stops
    seen, blocked = set(), []
    while (a := sat_next(3, blocked, [row])) is not None:
        key = tuple(a[v] for v in (1, 2, 3))
        assert key in legal and key not in seen
        seen.add(key)
        blocked.append(tuple(-v if a[v] else v for v in (1, 2, 3)))
    assert seen == set(legal)


def test_pb_row_senses():
    assign = {1: True, 2: False, 3: True}
    assert PBRow(((1, 1.0), (2, 1.0), (3, 1.0)), "<=", 2).holds(assign)
    assert not PBRow(((1, 1.0), (3, 2.0)), "<=", 2).holds(assign)
    assert PBRow(((1, -1.0), (2, 1.0)), ">=", -1).holds(assign)
    with pytest.raises(ValueError):
        PBRow(((1, 1.0),), "<", 1)


@pytest.mark.parametrize("seed", range(40))
def test_sat_next_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    nb = int(rng.integers(1, 6))
    clauses = [tuple(int(v) * (1 if rng.random() < 0.5 else -1) for v in
                     rng.choice(np.arange(1, nb + 1), size=int(rng.integers(1, nb + 1)), replace=False))
               for _ in range(int(rng.integers(0, 6)))]
    rows = [PBRow(tuple((int(v), float(rng.integers(-2, 3))) for v in range(1, nb + 1)),
                  str(rng.choice(["=", "<=", ">="])), float(rng.integers(-1, 3)))]

    def ok(a):
        return all(any(_lit_value(l, a) for l in c) for c in clauses) and all(r.holds(a) for r in rows)

    exists = any(ok(dict(zip(range(1, nb + 1), bits))) for bits in itertools.product([False, True], repeat=nb))
    for rng_arg in (None, np.random.default_rng(seed)):
        a = sat_next(nb, clauses, rows, rng=rng_arg)
        assert (a is not None) == exists
        if a is not None:
            assert ok(a)


# -- theory checks ------------------------------------------------------------------


def threshold_problem():
    (x,) = xs(1)
    return SmtProblem(1, [], [], Box([0.0], [1.0]), [], [Link(1, x - 0.5)])


def test_theory_threshold_both_polarities():
    P = threshold_problem()
    for value in (True, False):
        r = theory_check({1: value}, P, None, cfg())
        assert r.status == Status.SAT
        assert (r.model[0] <= 0.5) if value else (r.model[0] >= 0.5 + 1e-6 - 1e-9)


def two_sided():
    (x,) = xs(1)
    return SmtProblem(2, [], [], Box([-2.0], [2.0]), [], [Link(1, x + 1), Link(2, 1 - x, "implies")])


def test_theory_core_and_lemma():
    P = two_sided()
    r = theory_check({1: True, 2: True}, P, TheoryCache(P, cfg()), cfg())
    assert r.status == Status.UNSAT
    assert sorted(r.core) == [1, 2]
    lemma = tuple(-l for l in r.core)
    a = sat_next(2, [lemma])
    assert not (a[1] and a[2])


def test_solve_smt_forced_conflict():
    P = two_sided()
    v = solve_smt(P, cfg())
    assert v.status == Status.SAT
    P.clauses = [(1,), (2,)]
    v = solve_smt(P, cfg())
    assert v.status == Status.UNSAT
    assert v.stats["lemmas"] >= 1


def test_minimized_core():
    x, y = xs(2)
    P = SmtProblem(3, [(1,), (2,), (3,)], [], Box([-2.0, -2.0], [2.0, 2.0]), [],
                   [Link(1, x + 1), Link(2, 1 - x), Link(3, y - 1)])
    r = theory_check({1: True, 2: True, 3: True}, P, None, cfg(minimize_core=True))
    assert r.status == Status.UNSAT and sorted(r.core) == [1, 2]


def test_empty_boolean_part_reduces_to_engine():
    x, y = xs(2)
    cons = [x ** 2 + y ** 2 - 1, x - y]
    P = SmtProblem(0, [], [], Box([-2.0, -2.0], [2.0, 2.0]), cons, [])
    a = solve_smt(P, cfg())
    b = solve(ProblemF(P.domain, cons), cfg())
    assert a.status == b.status == Status.SAT
    assert np.array_equal(a.model, b.model)
    assert solve_problem(ProblemF(P.domain, cons), cfg()).status == Status.SAT


def test_mode_exclusivity_in_model():
    (x,) = xs(1)
    links = [Link(1, x - 0.2, "implies"), Link(2, 0.3 - x, "implies"), Link(3, x ** 2 - 0.01, "implies")]
    P = SmtProblem(3, [], [PBRow.exactly_one([1, 2, 3])], Box([-1.0], [1.0]), [x - 0.05], links)
    v = solve_smt(P, cfg())
    assert v.status == Status.SAT
    assert sum(v.bool_model.values()) == 1


def test_structural_example_witness():
    # k21 k22 k23 < 0 and k21 + k22 + k23 < -1 through b1, b2 forced true
    k = xs(3)
    eps = 1e-6
    prod = k[0] * k[1] * k[2]
    total = k[0] + k[1] + k[2] + 1
    P = SmtProblem(2, [(1,), (2,)], [], Box.from_bounds([(-4, 7)] * 3), [],
                   [Link(1, prod + eps, "implies"), Link(2, total + eps, "implies")])
    w = np.array([1.0, -3.5, 1.0])
    assert prod.eval(w) == -3.5 and total.eval(w) - 1 == -1.5
    assert P.check({1: True, 2: True}, w, eps)
    v = solve_smt(P, cfg())
    assert v.status == Status.SAT
    assert prod.eval(v.model) < 0 and total.eval(v.model) - 1 < -1


def test_problem_validation():
    (x,) = xs(1)
    with pytest.raises(ValueError):
        SmtProblem(1, [(2,)], [], Box([0.0], [1.0]))
    with pytest.raises(ValueError):
        SmtProblem(1, [], [], Box([0.0], [1.0]), [], [Link(1, x), Link(1, x)])
    with pytest.raises(ValueError):
        Link(1, (x, x), "iff")


# -- suite properties -------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(20))
def test_cache_does_not_change_status(seed):
    P = random_smt(seed)
    on = solve_smt(P, cfg(use_cache=True))
    off = solve_smt(P, cfg(use_cache=False))
    assert on.status == off.status
    for v in (on, off):
        assert v.stats["smt_iterations"] <= 2 ** P.nbool
        if v.status == Status.SAT:
            assign = {i + 1: v.bool_model[n] for i, n in enumerate(P.bool_names)}
            assert P.check(assign, v.model, 1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_local_phase_does_not_change_status(seed):
    P = random_smt(100 + seed)
    a = solve_smt(P, cfg())
    b = solve_smt(P, cfg(smt_local_assignments=0))
    assert a.status == b.status
