import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from strategies import poly_and_box

from polyar.geometry import Box
from polyar.polynomial import Polynomial
from polyar.refine import Classification, abst_refin


def xs(n):
    return Polynomial.variables(n)


def _check_sound(cls: Classification, p: Polynomial, samples=200, seed=0):
    rng = np.random.default_rng(seed)
    for b in cls.neg:
        assert np.all(p.eval_many(b.sample(rng, samples)) <= 1e-12)
        assert np.all(p.eval_many(b.corners()) <= 1e-12)
    for b in cls.pos:
        assert np.all(p.eval_many(b.sample(rng, samples)) >= -1e-12)


def test_disk_classification():
    x, y = xs(2)
    p = x ** 2 + y ** 2 - 1
    dom = Box([-2.0, -2.0], [2.0, 2.0])
    cls = abst_refin([dom], p, vol_threshold=1e-3)
    _check_sound(cls, p)
    vol = cls.volumes()
    assert vol["neg"] + vol["pos"] + vol["ambig"] == pytest.approx(16.0, rel=1e-9)
    # the certified negative part is a large fraction of the disk's area pi
    assert 0.8 * np.pi <= vol["neg"] <= np.pi
    assert vol["pos"] <= 16 - np.pi


def test_sign_shortcut():
    (x,) = xs(1)
    cls = abst_refin([Box([1.0], [2.0])], x ** 2 + 1)
    assert cls.pos == [Box([1.0], [2.0])] and not cls.neg and not cls.ambig
    assert cls.stats.shortcuts == 1


def test_budget_marks_leftovers_ambiguous():
    x, y = xs(2)
    p = x ** 3 * y - x * y ** 2 + 0.1
    cls = abst_refin([Box([-2.0, -2.0], [2.0, 2.0])], p, vol_threshold=1e-8, budget=3)
    assert cls.stats.budget_exhausted
    assert cls.stats.boxes_processed == 3
    vol = cls.volumes()
    assert vol["neg"] + vol["pos"] + vol["ambig"] == pytest.approx(16.0, rel=1e-9)


def test_unused_variables_are_projected_out():
    # p depends on x only; the y extent is carried along untouched
    x, y = xs(2)
    p = x - 0.5
    cls = abst_refin([Box([0.0, -3.0], [1.0, 3.0])], p, vol_threshold=1e-4)
    _check_sound(cls, p)
    for b in cls.neg + cls.pos + cls.ambig:
        assert b.lo[1] == -3.0 and b.hi[1] == 3.0
    assert cls.volumes()["neg"] == pytest.approx(3.0, abs=0.01)


def test_flipped():
    c = Classification([Box([0.0], [1.0])], [Box([1.0], [2.0])], [])
    f = c.flipped()
    assert f.neg == c.pos and f.pos == c.neg


def test_bad_threshold():
    (x,) = xs(1)
    with pytest.raises(ValueError):
        abst_refin([Box([0.0], [1.0])], x, vol_threshold=0.0)


@settings(max_examples=100, deadline=None)
@given(poly_and_box(), st.sampled_from(["simplex", "axis"]))
def test_soundness_and_coverage(pb, template):
    p, b = pb
    cls = abst_refin([b], p, template, budget=40)
    _check_sound(cls, p, samples=50)
    vol = cls.volumes()
    total = b.volume()
    assert vol["neg"] + vol["pos"] + vol["ambig"] == pytest.approx(total, rel=1e-7, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(poly_and_box())
def test_pieces_are_disjoint(pb):
    p, b = pb
    cls = abst_refin([b], p, budget=20)
    pieces = cls.neg + cls.pos + cls.ambig
    rng = np.random.default_rng(1)
    for x in b.sample(rng, 200):
        hits = sum(q.contains(x) for q in pieces)
        assert hits >= 1
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            inter = pieces[i].intersect(pieces[j])
            if inter is not None:
                assert inter.volume() <= 1e-9 * max(total_volume(pieces), 1e-300)


def total_volume(bs):
    return sum(b.volume() for b in bs)
