import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize
from strategies import boxes

from polyar.geometry import (Box, DegenerateSimplex, EmptyInterior, Polytope, TemplateSet,
                             axis_templates, box_difference, convex_hull_simplex,
                             default_templates, half_div, inscribed_box, inscribed_objective,
                             longest_dim)

# -- boxes -----------------------------------------------------------------------


def test_box_validation():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
    with pytest.raises(ValueError):
        Box([0.0, 0.0], [1.0])
    with pytest.raises(ValueError):
        Box([0.0], [np.inf])


def test_box_is_immutable_and_hashable():
    b = Box([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(AttributeError):
        b.lo = np.zeros(2)
    assert hash(b) == hash(Box([0.0, 1.0], [1.0, 2.0]))
    assert b == Box([0.0, 1.0], [1.0, 2.0])


def test_half_div_example():
    a, b = half_div(Box([0.0, 0.0], [2.0, 1.0]))
    assert a == Box([0.0, 0.0], [1.0, 1.0])
    assert b == Box([1.0, 0.0], [2.0, 1.0])


def test_longest_dim_ties_and_restriction():
    b = Box([0.0, 0.0, 0.0], [1.0, 1.0, 0.5])
    assert longest_dim(b) == 0
    assert longest_dim(b, [1, 2]) == 1


def test_half_div_zero_volume():
    with pytest.raises(ValueError):
        half_div(Box([0.0, 1.0], [1.0, 1.0]))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4).flatmap(boxes))
def test_half_div_partitions(b):
    if b.volume() == 0:
        return
    a, c = half_div(b)
    assert a.volume() + c.volume() == pytest.approx(b.volume(), rel=1e-12)
    assert b.contains_box(a) and b.contains_box(c)
    k = longest_dim(b)
    assert a.hi[k] == c.lo[k]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3).flatmap(boxes), st.data())
def test_box_difference_volume(b, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 1000)))
    cuts = []
    for _ in range(data.draw(st.integers(1, 3))):
        p, q = b.sample(rng, 2)
        cuts.append(Box(np.minimum(p, q), np.maximum(p, q)))
    pieces = box_difference(b, cuts)
    # Monte Carlo agreement plus disjointness by pairwise intersection volume
    for i, j in itertools.combinations(range(len(pieces)), 2):
        inter = pieces[i].intersect(pieces[j])
        assert inter is None or inter.volume() <= 1e-12 * max(b.volume(), 1e-300)
    pts = b.sample(rng, 400)
    for x in pts:
        in_cut = any(c.contains(x) for c in cuts)
        in_piece = any(p.contains(x) for p in pieces)
        if not in_cut:
            assert in_piece
    for p in pieces:
        for c in cuts:
            inter = p.intersect(c)
            assert inter is None or inter.volume() <= 1e-12 * max(b.volume(), 1e-300)


# -- templates -------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_default_templates_regular(n):
    d = default_templates(n).directions
    assert d.shape == (n + 1, n)
    assert np.allclose(d.sum(axis=0), 0.0, atol=1e-12)
    G = d @ d.T
    off = G[~np.eye(n + 1, dtype=bool)]
    assert np.allclose(off, -1.0 / n, atol=1e-12)


def test_axis_templates_shape():
    d = axis_templates(3).directions
    assert d.shape == (4, 3)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)


def test_template_set_rejects_bad_input():
    with pytest.raises(ValueError):
        TemplateSet(np.eye(2))
    with pytest.raises(ValueError):
        TemplateSet(np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        TemplateSet(np.array([[2.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))


# -- simplices -------------------------------------------------------------------


def test_convex_hull_simplex_contains_vertices():
    P = convex_hull_simplex([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for v in P.vertices:
        assert P.contains(v, 1e-12)
    assert P.contains([0.2, 0.2])
    assert not P.contains([0.6, 0.6])


def test_degenerate_simplex():
    with pytest.raises(DegenerateSimplex):
        convex_hull_simplex([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(DegenerateSimplex):
        convex_hull_simplex([[1.0], [1.0]])


# -- inscribed box ---------------------------------------------------------------


def _corners_inside(P: Polytope, b: Box, tol=1e-9):
    return all(P.contains(x, tol) for x in b.corners())


def test_unit_simplex_box():
    P = convex_hull_simplex([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for method in ("auto", "barrier"):
        b = inscribed_box(P, method=method)
        assert b.volume() == pytest.approx(0.25, abs=1e-6)
        assert b.hi == pytest.approx([0.5, 0.5], abs=1e-6)
        assert b.lo == pytest.approx([0.0, 0.0], abs=1e-6)
        assert _corners_inside(P, b)


def test_box_polytope_is_exact():
    b0 = Box([-1.0, 2.0, 0.5], [3.0, 2.5, 4.0])
    assert inscribed_box(Polytope.from_box(b0)) == b0


def test_empty_interior():
    P = Polytope(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
                 np.array([0.0, 0.0, 1.0, 0.0]))
    with pytest.raises(EmptyInterior):
        inscribed_box(P)


def _oracle_log_volume(P: Polytope) -> float:
    """Independent route: SLSQP on the log-volume program from the vertex centroid."""
    A, c = P.normals, P.offsets
    n = A.shape[1]
    Ap, An = np.maximum(A, 0.0), np.maximum(-A, 0.0)
    x0 = P.vertices.mean(axis=0)
    d = 0.1 * np.min((c - A @ x0) / np.abs(A).sum(axis=1))
    z0 = np.r_[x0 - d, x0 + d]
    cons = {"type": "ineq", "fun": lambda z: c - (Ap @ z[n:] - An @ z[:n])}
    res = minimize(lambda z: -np.sum(np.log(np.maximum(z[n:] - z[:n], 1e-300))), z0,
                   constraints=[cons], method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    return -res.fun


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000))
def test_closed_form_matches_barrier_and_oracle(n, seed):
    rng = np.random.default_rng(seed)
    V = rng.uniform(-3, 3, (n + 1, n))
    try:
        P = convex_hull_simplex(V)
    except DegenerateSimplex:
        return
    if abs(np.linalg.det(V[1:] - V[0])) < 1e-2:
        return
    closed = inscribed_box(P)
    barrier = inscribed_box(P, method="barrier")
    assert _corners_inside(P, closed) and _corners_inside(P, barrier)
    assert inscribed_objective(closed) == pytest.approx(inscribed_objective(barrier), abs=1e-6)
    assert inscribed_objective(closed) >= _oracle_log_volume(P) - 1e-6
