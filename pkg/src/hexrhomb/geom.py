"""Small planar helpers that work for both floats and Fractions."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

Point = tuple


def signed_area(p, q, r):
    return ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])) / 2


def area(tri) -> float:
    return abs(signed_area(*tri))


def ccw(tri):
    """Return the vertex triple in counterclockwise order."""
    p, q, r = tri
    return (p, q, r) if signed_area(p, q, r) >= 0 else (p, r, q)


def dist(p, q) -> float:
    return math.hypot(float(q[0] - p[0]), float(q[1] - p[1]))


def perimeter(poly: Sequence) -> float:
    n = len(poly)
    return sum(dist(poly[k], poly[(k + 1) % n]) for k in range(n))


def polygon_area(poly: Sequence):
    s = 0
    n = len(poly)
    for k in range(n):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % n]
        s += x1 * y2 - x2 * y1
    return s / 2


def angles(tri) -> tuple[float, float, float]:
    """Interior angles at the three vertices."""
    out = []
    for k in range(3):
        a, b, c = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
        u = (float(b[0] - a[0]), float(b[1] - a[1]))
        v = (float(c[0] - a[0]), float(c[1] - a[1]))
        cr = u[0] * v[1] - u[1] * v[0]
        dt = u[0] * v[0] + u[1] * v[1]
        out.append(abs(math.atan2(cr, dt)))
    return tuple(out)


def lerp(p, q, t):
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def foot(p, a, b):
    """Orthogonal projection of ``p`` onto the line through ``a`` and ``b``."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)
    return (a[0] + t * dx, a[1] + t * dy)


def to_fraction(p) -> tuple[Fraction, Fraction]:
    return (Fraction(p[0]), Fraction(p[1]))


def affine_gradient(tri, values):
    """Gradient ``G`` (row-major 2x2) of the affine map taking ``tri[k]`` to ``values[k]``.

    Works in exact arithmetic when the inputs are Fractions.
    """
    (x0, y0), (x1, y1), (x2, y2) = tri
    e1 = (x1 - x0, y1 - y0)
    e2 = (x2 - x0, y2 - y0)
    det = e1[0] * e2[1] - e1[1] * e2[0]
    if det == 0:
        raise ZeroDivisionError("degenerate triangle")
    g = []
    for c in range(2):
        d1 = values[1][c] - values[0][c]
        d2 = values[2][c] - values[0][c]
        # solve [e1; e2] @ row = [d1, d2]
        r0 = (d1 * e2[1] - d2 * e1[1]) / det
        r1 = (e1[0] * d2 - e2[0] * d1) / det
        g.append((r0, r1))
    return (g[0][0], g[0][1], g[1][0], g[1][1])


def edges_overlap(p1, p2, q1, q2, tol: float = 1e-12) -> bool:
    """True if segments p1p2 and q1q2 are collinear and share a positive-length piece."""
    d = (float(p2[0] - p1[0]), float(p2[1] - p1[1]))
    L = math.hypot(*d)
    if L == 0:
        return False
    for q in (q1, q2):
        cr = d[0] * float(q[1] - p1[1]) - d[1] * float(q[0] - p1[0])
        if abs(cr) > tol * max(L, 1.0) * max(L, 1.0):
            return False
    t = sorted(((float(q[0] - p1[0]) * d[0] + float(q[1] - p1[1]) * d[1]) / L for q in (q1, q2)))
    return min(L, t[1]) - max(0.0, t[0]) > tol * L


def tangential_jump_residual(cells) -> float:
    """Max relative tangential jump ``|(A - B) t|`` over all overlapping edge pairs.

    ``cells`` is a sequence of ``(vertices, (a11, a12, a21, a22))``.  Quadratic in
    the number of cells, intended for patch-sized inputs and test oracles.
    """
    worst = 0.0
    edges = []
    for idx, (tri, g) in enumerate(cells):
        for k in range(3):
            edges.append((idx, tri[k], tri[(k + 1) % 3], g))
    for i in range(len(edges)):
        ci, p1, p2, ga = edges[i]
        for j in range(i + 1, len(edges)):
            cj, q1, q2, gb = edges[j]
            if ci == cj or not edges_overlap(p1, p2, q1, q2):
                continue
            t = (float(p2[0] - p1[0]), float(p2[1] - p1[1]))
            L = math.hypot(*t)
            t = (t[0] / L, t[1] / L)
            ja = (float(ga[0]) - float(gb[0])) * t[0] + (float(ga[1]) - float(gb[1])) * t[1]
            jb = (float(ga[2]) - float(gb[2])) * t[0] + (float(ga[3]) - float(gb[3])) * t[1]
            scale = max(1.0, max(abs(float(x)) for x in ga), max(abs(float(x)) for x in gb))
            worst = max(worst, math.hypot(ja, jb) / scale)
    return worst
