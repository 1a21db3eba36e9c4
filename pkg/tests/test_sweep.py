from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexrhomb.engine import Lines
from hexrhomb.sweep import edge_events, jump_length, tangential_jumps, topology_report, weighted_jump

R2 = math.sqrt(2)


def _mesh(tris):
    """Cells plus the supporting-line table, one line per distinct edge line."""
    lines = Lines()
    keys: dict = {}

    def line_of(p, q):
        dx, dy = q[0] - p[0], q[1] - p[1]
        n = math.hypot(dx, dy)
        dx, dy = dx / n, dy / n
        if dx < 0 or (dx == 0 and dy < 0):
            dx, dy = -dx, -dy
        key = (round(dx, 9), round(dy, 9), round(dx * p[1] - dy * p[0], 9))
        if key not in keys:
            keys[key] = lines.add(p, (p[0] + dx, p[1] + dy))
        return keys[key]

    X = np.array(tris, float)
    EL = np.array([[line_of(t[k], t[(k + 1) % 3]) for k in range(3)] for t in tris])
    LO, LD = lines.arrays()
    return X, EL, LO, LD


# a 2x2 square: one big lower triangle, the hypotenuse split by two upper ones
T_JUNCTION = [
    ((0, 0), (2, 0), (0, 2)),
    ((2, 0), (2, 2), (1, 1)),
    ((1, 1), (2, 2), (0, 2)),
]
SQUARE = [((0, 0), (1, 0), (1, 1)), ((0, 0), (1, 1), (0, 1))]


def test_square_jump_lengths():
    X, EL, LO, LD = _mesh(SQUARE)
    ev = edge_events(X, EL, LO, LD)
    assert jump_length(ev, [1, 1]) == pytest.approx(4.0)
    assert jump_length(ev, [1, 2]) == pytest.approx(6 + R2)
    assert jump_length(ev, [0, 0]) == 0.0
    assert weighted_jump(ev, [0.5, 0.25]) == pytest.approx(2 * 0.5 + 2 * 0.25 + 0.25 * R2)


def test_non_conforming_jump_lengths():
    X, EL, LO, LD = _mesh(T_JUNCTION)
    ev = edge_events(X, EL, LO, LD)
    assert jump_length(ev, [1, 2, 3]) == pytest.approx(14 + 4 * R2)
    assert jump_length(ev, [1, 1, 1]) == pytest.approx(8.0)
    assert jump_length(ev, [0, 1, 0]) == pytest.approx(2 + 2 * R2)


def test_topology_report():
    X, EL, LO, LD = _mesh(T_JUNCTION)
    top = topology_report(X, EL, LO, LD)
    assert top.boundary_length == pytest.approx(8.0)
    assert top.overlap_length == 0.0
    assert top.max_offline <= 1e-12
    # a duplicated cell shows up as overlap
    X2 = np.concatenate([X, X[:1]])
    EL2 = np.concatenate([EL, EL[:1]])
    assert topology_report(X2, EL2, LO, LD).overlap_length == pytest.approx(4 + 2 * R2)


def test_compatible_gradients_have_no_tangential_jump():
    X, EL, LO, LD = _mesh(T_JUNCTION)
    ev = edge_events(X, EL, LO, LD)
    base = np.array([0.3, -0.2, 0.1, -0.3])
    # a (x) n with n normal to the hypotenuse
    a, n = (0.7, -0.4), (1 / R2, 1 / R2)
    kink = np.array([a[0] * n[0], a[0] * n[1], a[1] * n[0], a[1] * n[1]])
    G = np.stack([base, base + kink, base + kink])
    assert tangential_jumps(ev, G).max() <= 1e-15
    G[1, 0] += 0.1
    assert tangential_jumps(ev, G).max() == pytest.approx(0.1 / R2)
    # entries above 1 set the relative scale
    G[1, 0] += 1.0
    assert tangential_jumps(ev, G).max() == pytest.approx(1.1 / R2 / G[1, 0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=3, max_size=3))
def test_jump_length_matches_pairwise_sum(vals):
    X, EL, LO, LD = _mesh(T_JUNCTION)
    ev = edge_events(X, EL, LO, LD)
    a, b, c = vals
    want = 4 * abs(a) + 2 * abs(b) + 2 * abs(c) + R2 * (abs(a - b) + abs(a - c) + abs(b - c))
    assert jump_length(ev, vals) == pytest.approx(want)


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 4), st.floats(0, 2 * math.pi))
def test_jump_length_is_rigid_invariant(tx, ty, s, phi):
    c, si = math.cos(phi), math.sin(phi)
    moved = [tuple((s * (c * x - si * y) + tx, s * (si * x + c * y) + ty) for x, y in t)
             for t in T_JUNCTION]
    X, EL, LO, LD = _mesh(moved)
    ev = edge_events(X, EL, LO, LD)
    assert jump_length(ev, [1, 2, 3]) == pytest.approx(s * (14 + 4 * R2), rel=1e-9)
