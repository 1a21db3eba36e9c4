from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexrhomb.errors import AngleSumMismatch, ConfigError
from hexrhomb.symmetry import (
    INNER_RATIO,
    CornerConfig,
    admissible_rays,
    bv_triangle,
    canonical,
    check_corner,
    enumerate_corners,
    images,
    laminate,
    outer_triangle,
    perturb,
)

CORNERS = enumerate_corners((1, 2, 3))
DEG = math.pi / 180


@pytest.mark.parametrize("p,q,first", [(1, 2, 30), (2, 3, 0), (0, 1, 45), (0, 2, 15)])
def test_admissible_rays_are_two_perpendicular_lines(p, q, first):
    rays = admissible_rays(p, q)
    assert [round(r / DEG, 9) for r in rays] == [first + 90 * k for k in range(4)]
    assert admissible_rays(q, p) == pytest.approx(rays)


def test_laminates_are_compatible():
    for p, q in [(1, 2), (1, 3), (2, 3), (0, 1)]:
        for which in range(4):
            assert check_corner(laminate(p, q, which)).ok


def test_off_axis_laminate_fails_along_the_ray():
    c = CornerConfig(((2, math.pi), (1, math.pi)), 10 * DEG)
    r = check_corner(c)
    assert not r.ok and r.condition == 1 and r.index == 0


def test_unbalanced_interfaces_fail_the_sum():
    # every ray admissible, but the interface vectors do not cancel
    r1, r2 = admissible_rays(1, 2), admissible_rays(2, 3)
    r3 = admissible_rays(1, 3)
    start = r1[0]
    t2 = next(t for t in r2 if t > start)
    t3 = next(t for t in r3 if t > t2)
    c = CornerConfig(((2, t2 - start), (3, t3 - t2), (1, 2 * math.pi - (t3 - start))), start)
    r = check_corner(c)
    assert not r.ok and r.condition == 2


@pytest.mark.parametrize("sectors,exc", [
    (((1, 2 * math.pi),), ConfigError),
    (((1, math.pi), (2, math.pi / 2)), AngleSumMismatch),
    (((1, 3 * math.pi), (2, -math.pi)), AngleSumMismatch),
    (((1, math.pi), (2, math.pi / 2), (2, math.pi / 2)), ConfigError),
])
def test_corner_validation(sectors, exc):
    with pytest.raises(exc):
        check_corner(CornerConfig(sectors))


def test_corner_text_roundtrip():
    for c in CORNERS:
        assert CornerConfig.from_text(c.to_text()) == c
    with pytest.raises(ConfigError):
        CornerConfig.from_text("start 0\n7 3.14\n2 3.14\n")
    with pytest.raises(ConfigError):
        CornerConfig.from_text("1 x\n")


def test_enumeration_counts():
    counts: dict = {}
    for c in CORNERS:
        counts[c.m] = counts.get(c.m, 0) + 1
    assert counts == {4: 1, 6: 2, 12: 1}
    assert len({canonical(c) for c in CORNERS}) == len(CORNERS)


def test_enumeration_arguments():
    with pytest.raises(ConfigError):
        enumerate_corners((1,))
    with pytest.raises(ConfigError):
        enumerate_corners((1, 2), max_sectors=13)
    assert all(check_corner(c).ok for c in enumerate_corners((0, 1, 2, 3), 6))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(CORNERS), st.integers(0, 11))
def test_symmetry_images_stay_compatible(c, k):
    img = list(images(c))[k]
    assert check_corner(img).ok
    assert canonical(img) == canonical(c)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(CORNERS), st.integers(0, 11), st.floats(1e-4, 0.05))
def test_perturbed_corners_fail(c, k, amount):
    p = perturb(c, k % c.m, amount)
    assert sum(a for _, a in p.sectors) == pytest.approx(2 * math.pi)
    assert not check_corner(p).ok


def test_outer_triangle_is_centred_and_equilateral():
    t = outer_triangle(2.0)
    assert sum(x for x, _ in t) == pytest.approx(0, abs=1e-12)
    sides = [math.dist(t[k], t[(k + 1) % 3]) for k in range(3)]
    assert sides == pytest.approx([2.0] * 3)


def test_bv_triangle_ratio_and_residuals():
    s = bv_triangle(5)
    assert len(s.cells) == 6 * 5 + 1
    assert s.ratios()[1:] == pytest.approx([INNER_RATIO] * 3, rel=1e-10)
    assert s.continuity_residual() <= 1e-12
    assert s.boundary_residual() <= 1e-12
    assert {c.label for c in s.cells} == {0, 1, 2, 3}
    # the skew part grows from level to level
    sk = s.skew_by_level()
    assert all(b > a for a, b in zip(sk, sk[1:]))


def test_bv_triangle_scales_with_side():
    a, b = bv_triangle(3), bv_triangle(3, side=3.0)
    assert b.bv_by_level == pytest.approx([3 * x for x in a.bv_by_level])
    with pytest.raises(ConfigError):
        bv_triangle(0)
