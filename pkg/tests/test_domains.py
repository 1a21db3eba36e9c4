from __future__ import annotations

from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexrhomb.domains import (
    INSIDE,
    OUTSIDE,
    PARTIAL,
    LipschitzDomain,
    aggregate_rows,
    aggregate_weights,
    classify_cube,
    dyadic_cover,
    read_cover,
    read_polygon,
    scale_state,
    write_cover,
    write_polygon,
)
from hexrhomb.engine import initialize
from hexrhomb.errors import DegenerateDomain
from hexrhomb.metrics import metrics_row

TRIANGLE = LipschitzDomain.polygon([(0, 0), (1, 0), (0, 1)])


def test_polygon_is_normalized():
    d = LipschitzDomain.polygon([(0, 0), (0, 1), (1, 1), (1, 0), (0, 0)])
    assert d.area == 1 and len(d.vertices) == 4
    # clockwise input comes back counter-clockwise
    assert set(d.vertices) == set(LipschitzDomain.unit_square().vertices)
    v = d.vertices
    assert sum(v[i - 1][0] * v[i][1] - v[i][0] * v[i - 1][1] for i in range(4)) == 2
    assert TRIANGLE.max_slope == 1 and TRIANGLE.lipschitz_constant == 4


@pytest.mark.parametrize("pts", [
    [(0, 0), (1, 0)],
    [(0, 0), (1, 1), (2, 2)],
    [(0, 0), (1, 1), (1, 0), (0, 1)],  # bow tie
    [(0, 0), (2, 0), (1, 0), (1, 1)],  # folds back
])
def test_degenerate_polygons(pts):
    with pytest.raises(DegenerateDomain):
        LipschitzDomain.polygon(pts)


@pytest.mark.parametrize("pts", [
    [(F(1, 2), 1), (1, 1)],
    [(0, 1), (F(1, 2), 0), (1, 1)],
    [(0, 1), (F(1, 2), 1), (F(1, 3), 1), (1, 1)],
])
def test_bad_subgraphs(pts):
    with pytest.raises(DegenerateDomain):
        LipschitzDomain.subgraph(pts)


def test_subgraph_area_and_slope():
    d = LipschitzDomain.subgraph([(0, F(1, 2)), (F(1, 2), 1), (1, F(1, 4))])
    assert d.area == F(1, 2) * (F(1, 2) + 1) / 2 + F(1, 2) * (1 + F(1, 4)) / 2
    assert d.max_slope == F(3, 2) and d.lipschitz_constant == 6


def test_contains_excludes_boundary():
    assert TRIANGLE.contains((F(1, 4), F(1, 4)))
    assert not TRIANGLE.contains((F(1, 2), F(1, 2)))
    assert not TRIANGLE.contains((1, 1))


def test_classify_cube_touching_corner():
    assert classify_cube(TRIANGLE, F(0), F(0), F(1, 2)) == INSIDE
    assert classify_cube(TRIANGLE, F(1, 2), F(1, 2), F(1, 2)) == OUTSIDE
    assert classify_cube(TRIANGLE, F(1, 2), F(0), F(1, 2)) == PARTIAL


def test_triangle_cover_counts():
    cov = dyadic_cover(TRIANGLE, 7)
    assert cov.counts() == [0] + [2 ** (l - 1) for l in range(1, 8)]
    assert cov.uncovered() == [F(1, 2)] + [F(1, 2 ** (k + 1)) for k in range(1, 8)]


def test_unit_square_is_one_cube():
    cov = dyadic_cover(LipschitzDomain.unit_square(), 4)
    assert cov.counts() == [1, 0, 0, 0, 0]
    assert cov.uncovered()[-1] == 0
    with pytest.raises(DegenerateDomain):
        dyadic_cover(TRIANGLE, -1)


def _ancestors(l, x, y):
    for m in range(l):
        s = F(1, 2 ** m)
        yield m, (x // s) * s, (y // s) * s


@settings(max_examples=25, deadline=None)
@given(st.lists(st.fractions(F(1, 8), F(2), max_denominator=12), min_size=2, max_size=5))
def test_subgraph_cover_properties(ys):
    xs = [F(i, len(ys) - 1) for i in range(len(ys))]
    d = LipschitzDomain.subgraph(list(zip(xs, ys)))
    cov = dyadic_cover(d, 5)
    seen = set()
    for l, x, y in cov.cubes():
        s = cov.side(l)
        assert d.contains((x + s / 2, y + s / 2))
        # corners stay in the closed domain
        for cx, cy in ((x, y), (x + s, y), (x, y + s), (x + s, y + s)):
            assert 0 <= cx <= 1 and 0 <= cy <= max(ys)
        # maximal: no coarser cube of the cover contains it
        assert not any(a in seen for a in _ancestors(l, x, y))
        seen.add((l, x, y))
    assert all(n <= cov.bound(l) for l, n in enumerate(cov.counts()))
    assert 0 <= cov.uncovered()[-1] <= d.area


def test_polygon_and_cover_files(tmp_path):
    d = LipschitzDomain.polygon([(0, 0), (2, 0), (2, 1), (1, 2), (0, 1)])
    write_polygon(d, tmp_path / "p.txt")
    assert read_polygon(tmp_path / "p.txt") == d
    (tmp_path / "bad.txt").write_text("# header\n0 0\n1\n")
    with pytest.raises(DegenerateDomain):
        read_polygon(tmp_path / "bad.txt")
    cov = dyadic_cover(d, 3)
    write_cover(cov, tmp_path / "c.txt")
    assert read_cover(tmp_path / "c.txt") == list(cov.cubes())


def test_scale_state_scales_norms():
    from hexrhomb.engine import EngineConfig

    s = initialize(EngineConfig(delta0_override=1 / 16))
    t = scale_state(s, 0.25, (3.0, -1.0))
    assert t.areas().sum() == pytest.approx(s.areas().sum() / 16)
    a, b = metrics_row(s), metrics_row(t)
    assert b.bv == pytest.approx(tuple(x / 4 for x in a.bv))
    assert b.l1_total == pytest.approx(a.l1_total / 16)
    # the original is untouched
    assert s.areas().sum() == pytest.approx(1.0)


def test_aggregate_weights_and_rows(toy_run):
    cov = dyadic_cover(TRIANGLE, 3)  # counts 0, 1, 2, 4
    assert aggregate_weights(cov, 0.5) == pytest.approx(sum(n * 2.0 ** (-1.5 * l)
                                                            for l, n in enumerate(cov.counts())))
    agg = aggregate_rows(cov, toy_run.metrics, [0.5])
    r, u = agg.rows[2], toy_run.metrics[2]
    assert r.l1_total == pytest.approx(7 / 16 * u.l1_total)
    assert r.bvd_total == pytest.approx(1.5 * u.bvd_total)
    assert r.products[0.5] == pytest.approx(agg.weights[0.5] * u.interp_product(0.5))
    assert len(agg.ratios(0.5)) == len(toy_run.metrics) - 2
