from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexrhomb.errors import DegenerateDifference, NonTraceFree
from hexrhomb.strain import (
    WELLS,
    Boundary,
    Exterior,
    Interior,
    Mat2,
    Skew2,
    Sym2,
    barycentric,
    compose,
    dist_to_boundary,
    hull_query,
    in_star,
    nearest_well,
    rank_one_with_skew,
    split_parts,
    sym_product,
    symmetrized_rank_one,
    well,
)

coord = st.floats(-2, 2, allow_nan=False)
sym2 = st.builds(Sym2, coord, coord)


def _hull_point(w1, w2):
    """Convex combination of the wells from two numbers in [0, 1]."""
    a, b = sorted((w1, w2))
    lam = (a, b - a, 1 - b)
    return Sym2(sum(l * w.matrix.alpha for l, w in zip(lam, WELLS)),
                sum(l * w.matrix.beta for l, w in zip(lam, WELLS)))


unit = st.floats(0, 1)


def test_wells_are_unit_and_equilateral():
    for w in WELLS:
        assert math.isclose(w.matrix.norm(), 1.0)
    for a in WELLS:
        for b in WELLS:
            if a is not b:
                assert math.isclose((a.matrix - b.matrix).norm(), math.sqrt(3))
    assert well(2) is WELLS[1]


def test_origin_hull_data():
    hq = hull_query(Sym2(0.0, 0.0))
    assert isinstance(hq, Interior)
    assert math.isclose(hq.d0, 0.5) and math.isclose(hq.dK, 1.0)


def test_hull_classification():
    assert isinstance(hull_query(WELLS[0].matrix), Boundary)
    assert isinstance(hull_query(Sym2(2.0, 0.0)), Exterior)
    assert isinstance(hull_query(Sym2(0.1, 0.1)), Interior)


def test_split_parts_rejects_trace():
    with pytest.raises(NonTraceFree):
        split_parts(Mat2(1.0, 0.0, 0.0, 0.0))


@given(coord, coord, coord)
def test_split_compose_roundtrip(a, b, w):
    M = compose(Sym2(a, b), Skew2(w))
    e, s = split_parts(M)
    assert math.isclose(e.alpha, a, abs_tol=1e-12)
    assert math.isclose(e.beta, b, abs_tol=1e-12)
    assert math.isclose(s.omega_tilde, w, abs_tol=1e-12)


@given(unit, unit)
def test_barycentric_reconstructs(w1, w2):
    e = _hull_point(w1, w2)
    lam = barycentric(e)
    assert math.isclose(lam.sum(), 1.0, abs_tol=1e-12)
    assert np.all(lam >= -1e-12)
    back = sum(l * np.array([w.matrix.alpha, w.matrix.beta]) for l, w in zip(lam, WELLS))
    assert np.allclose(back, [e.alpha, e.beta], atol=1e-12)


@given(unit, unit)
def test_hull_points_never_exterior(w1, w2):
    e = _hull_point(w1, w2)
    assert not isinstance(hull_query(e), Exterior)
    assert dist_to_boundary(e) <= 0.5 + 1e-12


@given(sym2)
def test_nearest_well_is_nearest(e):
    w = nearest_well(e)
    d = (e - w.matrix).norm()
    assert all(d <= (e - v.matrix).norm() + 1e-12 for v in WELLS)


@given(sym2, sym2)
def test_rank_one_decomposition(e1, e2):
    if (e1 - e2).norm() < 1e-6:
        with pytest.raises(DegenerateDifference):
            symmetrized_rank_one(e1, e1)
        return
    dec = symmetrized_rank_one(e1, e2)
    n = dec.n
    assert math.isclose(math.hypot(*n), 1.0)
    assert abs(dec.a[0] * n[0] + dec.a[1] * n[1]) <= 1e-9 * dec.amplitude
    diff = e1 - e2
    s = dec.sym()
    assert math.isclose(s.alpha, diff.alpha, abs_tol=1e-9)
    assert math.isclose(s.beta, diff.beta, abs_tol=1e-9)
    for a, m in dec.equivalent_pairs():
        t = sym_product(a, m)
        assert math.isclose(t.alpha, diff.alpha, abs_tol=1e-9)
        assert math.isclose(t.beta, diff.beta, abs_tol=1e-9)


@given(unit, unit, st.integers(1, 3), st.sampled_from([1, -1]))
def test_rank_one_with_skew_is_compatible(w1, w2, i, sign):
    e = _hull_point(w1, w2)
    if (e - well(i).matrix).norm() < 1e-6:
        return
    G = rank_one_with_skew(e, i, sign)
    # G minus the skew-free well is a (x) n or its transpose
    D = G - well(i).matrix.as_matrix()
    assert abs(float(D.det())) <= 1e-9 * max(1.0, D.norm() ** 2)
    e_back, _ = split_parts(G)
    assert math.isclose(e_back.alpha, e.alpha, abs_tol=1e-12)


@settings(max_examples=50)
@given(st.floats(0.01, 0.4))
def test_star_contains_origin_not_far_points(d):
    assert in_star(Sym2(0.0, 0.0), d)
    assert not in_star(Sym2(3.0, 0.0), d)
