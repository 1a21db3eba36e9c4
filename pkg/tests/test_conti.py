from __future__ import annotations

import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexrhomb.conti import (
    DEFORMED_LAMBDA,
    boundary_residual,
    deformed_conti,
    expected_gradients,
    level_set_areas,
    max_deviation,
    mean_gradient,
    rank_one_factors,
    strains,
    three_well_conti,
    three_well_data,
    undeformed_conti,
    vertex_residual,
)
from hexrhomb.errors import BadConvexSplit, EpsilonTooLarge, ExteriorStrain, LambdaOutOfRange
from hexrhomb.strain import Exterior, Interior, Mat2, Skew2, Sym2, compose, hull_query, split_parts


def test_level_set_areas_half():
    a = level_set_areas(undeformed_conti(F(1, 2)))
    assert a == {"M0": 1, "M1": F(1, 2), "M2": F(3, 4), "M3": F(3, 4), "M4": 1}
    assert sum(a.values()) == 4


def test_level_set_areas_quarter():
    a = level_set_areas(undeformed_conti(F(1, 4)))
    assert a == {"M0": F(3, 2), "M1": F(1, 8), "M2": F(7, 16), "M3": F(7, 16), "M4": F(3, 2)}


@settings(max_examples=25, deadline=None)
@given(st.fractions(F(1, 20), F(19, 20)))
def test_template_tiles_square(lam):
    p = undeformed_conti(lam)
    assert sum(level_set_areas(p).values()) == 4
    assert len(p.triangles) == 16
    assert vertex_residual(p) <= 1e-12


@pytest.mark.parametrize("lam", [0, 1, F(3, 2), -F(1, 2)])
def test_lambda_range(lam):
    with pytest.raises(LambdaOutOfRange):
        undeformed_conti(lam)


def test_expected_gradients_match_template():
    p = undeformed_conti(F(1, 2))
    g = expected_gradients(F(1, 2))
    for tri in p.triangles:
        want = g[tri.label]
        assert (tri.gradient - want).norm() <= 1e-12


def test_rank_one_factors():
    J = Mat2(0.0, 3.0, 0.0, 0.0)
    amp, p, q = rank_one_factors(J)
    assert math.isclose(amp, 3.0)
    outer = Mat2(amp * p[0] * q[0], amp * p[0] * q[1], amp * p[1] * q[0], amp * p[1] * q[1])
    assert (outer - J).norm() <= 1e-12


def test_deformed_conti_needs_convex_split():
    M0 = Mat2(0.0, 0.0, 0.0, 0.0)
    M1 = Mat2(0.0, 1.0, 0.0, 0.0)
    with pytest.raises(BadConvexSplit):
        deformed_conti(M1, M0, M1, 1e-3)
    p = deformed_conti(M0 * 0.25 + M1 * 0.75, M0, M1, 1e-3)
    assert boundary_residual(p) <= 1e-12
    assert (mean_gradient(p) - p.M).norm() <= 1e-12


def _interior(rng):
    while True:
        e = Sym2(rng.uniform(-0.5, 1.0), rng.uniform(-0.87, 0.87))
        hq = hull_query(e)
        if isinstance(hq, Interior) and hq.d0 > 0.02:
            return e, hq


@pytest.mark.parametrize("sign", [1, -1])
def test_three_well_patch_invariants(sign):
    rng = random.Random(7 + sign)
    for _ in range(20):
        e, hq = _interior(rng)
        M = compose(e, Skew2(rng.uniform(-1, 1)))
        eps = min(hq.d0 / 100, 1 / 1600)
        p = three_well_conti(M, hq.nearest_well.index, eps, sign=sign)
        assert boundary_residual(p) <= 1e-10
        assert vertex_residual(p) <= 1e-10
        assert max_deviation(p, "M4", M) <= eps
        e0, _ = split_parts(p.extra["M0"])
        assert (e0 - hq.nearest_well.matrix).norm() <= 1e-12
        assert not any(isinstance(hull_query(s, 1e-9), Exterior) for s in strains(p))
        assert (mean_gradient(p) - M).norm() <= 1e-9


def test_three_well_area_fractions():
    M = Mat2(0.05, 0.02, -0.01, -0.05)
    p = three_well_conti(M, 1, 1e-3)
    f = p.fractions()
    assert f["M0"] == F(1, 8)
    assert sum(f.values()) == 1
    assert p.lam == DEFORMED_LAMBDA


def test_three_well_rejects_large_epsilon():
    with pytest.raises(EpsilonTooLarge):
        three_well_data(Mat2(0.0, 0.0, 0.0, 0.0), 1, 0.1)


def test_three_well_rejects_exterior_strain():
    with pytest.raises(ExteriorStrain):
        three_well_data(Mat2(2.0, 0.0, 0.0, -2.0), 1, 1e-4)


def test_three_well_rejects_far_well():
    # next to well 1, so well 2 is not near-nearest
    M = Mat2(0.8, 0.0, 0.0, -0.8)
    with pytest.raises(EpsilonTooLarge):
        three_well_data(M, 2, 1e-4)
