"""Polygonal Lipschitz domains, dyadic cube covers and aggregated runs.

Cube membership is decided in exact rational arithmetic: a closed grid cube
lies in the closed polygon iff no polygon edge meets its open interior and its
centre is inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateDomain
from .geom import to_fraction

SLOPE_CONSTANT = 4

INSIDE, OUTSIDE, PARTIAL = 1, -1, 0


def _orient(a, b, c) -> Fraction:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Closed segments intersect (exact)."""
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True

    def on(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    return ((d1 == 0 and on(q1, q2, p1)) or (d2 == 0 and on(q1, q2, p2))
            or (d3 == 0 and on(p1, p2, q1)) or (d4 == 0 and on(p1, p2, q2)))


@dataclass(frozen=True)
class LipschitzDomain:
    """Simple polygon with exact vertices, counter-clockwise."""

    vertices: tuple
    lipschitz_constant: Fraction
    max_slope: Fraction

    @classmethod
    def polygon(cls, points: Iterable) -> "LipschitzDomain":
        v = [to_fraction(p) for p in points]
        # drop a repeated closing vertex
        if len(v) > 1 and v[0] == v[-1]:
            v.pop()
        if len(v) < 3:
            raise DegenerateDomain("a polygon needs at least three vertices")
        a = _signed_area(v)
        if a == 0:
            raise DegenerateDomain("polygon has zero area")
        if a < 0:
            v.reverse()
        _check_simple(v)
        s = _max_slope(v)
        return cls(tuple(v), SLOPE_CONSTANT * max(Fraction(1), s), s)

    @classmethod
    def subgraph(cls, breakpoints: Iterable) -> "LipschitzDomain":
        """``{0 < x < 1, 0 < y < f(x)}`` for piecewise-linear ``f`` given at breakpoints."""
        pts = [to_fraction(p) for p in breakpoints]
        if not pts or pts[0][0] != 0 or pts[-1][0] != 1:
            raise DegenerateDomain("breakpoints must start at x = 0 and end at x = 1")
        if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
            raise DegenerateDomain("breakpoints must have increasing x")
        if any(p[1] <= 0 for p in pts):
            raise DegenerateDomain("f must be positive")
        verts = [(Fraction(0), Fraction(0)), (Fraction(1), Fraction(0))] + pts[::-1]
        return cls.polygon(verts)

    @classmethod
    def unit_square(cls) -> "LipschitzDomain":
        return cls.polygon([(0, 0), (1, 0), (1, 1), (0, 1)])

    @property
    def area(self) -> Fraction:
        return _signed_area(list(self.vertices))

    @property
    def bbox(self) -> tuple:
        xs = [p[0] for p in self.vertices]
        ys = [p[1] for p in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def edges(self):
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def contains(self, p) -> bool:
        """Point strictly inside (crossing number; boundary points count as outside)."""
        x, y = p
        inside = False
        for a, b in self.edges():
            if _orient(a, b, p) == 0 and min(a[0], b[0]) <= x <= max(a[0], b[0]) \
                    and min(a[1], b[1]) <= y <= max(a[1], b[1]):
                return False
            if (a[1] > y) != (b[1] > y):
                xi = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
                if xi > x:
                    inside = not inside
        return inside


def _signed_area(v) -> Fraction:
    s = Fraction(0)
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        s += a[0] * b[1] - a[1] * b[0]
    return s / 2


def _check_simple(v) -> None:
    n = len(v)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                raise DegenerateDomain(f"polygon edges {i} and {j} intersect")
    for i in range(n):
        a, b, c = v[i - 1], v[i], v[(i + 1) % n]
        if _orient(a, b, c) == 0 and (b[0] - a[0]) * (c[0] - b[0]) + (b[1] - a[1]) * (c[1] - b[1]) < 0:
            raise DegenerateDomain(f"polygon folds back at vertex {i}")


def _max_slope(v) -> Fraction:
    """Largest ``|dy/dx|`` over edges that are graphs over the first axis."""
    s = Fraction(0)
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        if a[0] != b[0]:
            s = max(s, abs((b[1] - a[1]) / (b[0] - a[0])))
    return s


def _edge_meets_open_square(p, q, x0, y0, lam) -> bool:
    """Liang-Barsky clip of the closed segment ``pq`` against the open square."""
    lo, hi = Fraction(0), Fraction(1)
    lo_open = hi_open = False
    dx, dy = q[0] - p[0], q[1] - p[1]
    for d, s, a, b in ((dx, p[0], x0, x0 + lam), (dy, p[1], y0, y0 + lam)):
        if d == 0:
            if not a < s < b:
                return False
            continue
        t1, t2 = (a - s) / d, (b - s) / d
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > lo or (t1 == lo and not lo_open):
            lo, lo_open = t1, True
        if t2 < hi or (t2 == hi and not hi_open):
            hi, hi_open = t2, True
    if lo < hi:
        return True
    return lo == hi and not (lo_open or hi_open)


def classify_cube(domain: LipschitzDomain, x0, y0, lam) -> int:
    if any(_edge_meets_open_square(p, q, x0, y0, lam) for p, q in domain.edges()):
        return PARTIAL
    half = lam / 2
    return INSIDE if domain.contains((x0 + half, y0 + half)) else OUTSIDE


@dataclass
class DyadicCover:
    domain: LipschitzDomain
    levels: list  # levels[l] = sorted list of cube origins (x, y) of side 2^-l

    def side(self, level: int) -> Fraction:
        return Fraction(1, 2 ** level)

    def counts(self) -> list[int]:
        return [len(c) for c in self.levels]

    def bound(self, level: int) -> Fraction:
        """New-cube budget at ``level``: ``C_f / side``."""
        return self.domain.lipschitz_constant * 2 ** level

    def covered_area(self, k: Optional[int] = None) -> Fraction:
        top = len(self.levels) if k is None else k + 1
        return sum((len(self.levels[l]) * self.side(l) ** 2 for l in range(top)), Fraction(0))

    def uncovered(self) -> list[Fraction]:
        """``|domain minus cover up to level k|`` for each ``k``."""
        return [self.domain.area - self.covered_area(k) for k in range(len(self.levels))]

    def cubes(self):
        for l, cubes in enumerate(self.levels):
            for x, y in cubes:
                yield l, x, y

    def to_text(self) -> str:
        return "".join(f"{l} {x} {y}\n" for l, x, y in self.cubes())


def dyadic_cover(domain: LipschitzDomain, k_max: int) -> DyadicCover:
    """Maximal dyadic cubes inside ``domain`` for levels ``0..k_max``."""
    if k_max < 0:
        raise DegenerateDomain("k_max must be >= 0")
    xmin, ymin, xmax, ymax = domain.bbox
    cand = [(Fraction(i), Fraction(j))
            for i in range(math.floor(xmin), math.ceil(xmax))
            for j in range(math.floor(ymin), math.ceil(ymax))]
    levels = []
    for l in range(k_max + 1):
        lam = Fraction(1, 2 ** l)
        inside, partial = [], []
        for x, y in cand:
            c = classify_cube(domain, x, y, lam)
            if c == INSIDE:
                inside.append((x, y))
            elif c == PARTIAL:
                partial.append((x, y))
        levels.append(sorted(inside))
        half = lam / 2
        cand = [(x + dx, y + dy) for x, y in partial for dx in (0, half) for dy in (0, half)]
    return DyadicCover(domain, levels)


def read_polygon(path) -> LipschitzDomain:
    pts = []
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DegenerateDomain(f"line {n}: expected 'x y'")
        try:
            pts.append((Fraction(parts[0]), Fraction(parts[1])))
        except ValueError:
            raise DegenerateDomain(f"line {n}: not a number") from None
    return LipschitzDomain.polygon(pts)


def write_polygon(domain: LipschitzDomain, path) -> None:
    Path(path).write_text("".join(f"{x} {y}\n" for x, y in domain.vertices), encoding="utf-8")


def write_cover(cover: DyadicCover, path) -> None:
    Path(path).write_text(cover.to_text(), encoding="utf-8")


def read_cover(path) -> list[tuple[int, Fraction, Fraction]]:
    out = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if raw.strip():
            l, x, y = raw.split()
            out.append((int(l), Fraction(x), Fraction(y)))
    return out


# ----------------------------------------------------------------------------
# scaled runs


def scale_state(state, lam: float, origin=(0.0, 0.0)):
    """The run state mapped by ``x -> origin + lam * x``; gradients are unchanged."""
    o = np.asarray(origin, float)
    lines = state.lines.copy()
    lines.o = [tuple(o + lam * np.asarray(p)) for p in lines.o]
    return replace(state, X=o + lam * state.X, lines=lines, domain=o + lam * state.domain,
                   stats=dict(state.stats))


@dataclass
class AggregateRow:
    j: int
    l1_total: float
    bvd_total: float
    unresolved_area: float
    products: dict = field(default_factory=dict)  # theta -> summed interpolation product


@dataclass
class AggregateResult:
    cover: DyadicCover
    unit_rows: list
    rows: list[AggregateRow]
    thetas: tuple
    weights: dict  # theta -> sum over cubes of side^(2 - theta)

    def ratios(self, theta: float) -> list[float]:
        p = [r.products[theta] for r in self.rows[1:]]
        return [b / a for a, b in zip(p, p[1:]) if a > 0]


def aggregate_weights(cover: DyadicCover, theta: float) -> float:
    return sum(n * 2.0 ** (-l * (2 - theta)) for l, n in enumerate(cover.counts()))


def aggregate_rows(cover: DyadicCover, unit_rows: Sequence, thetas: Sequence[float]
                   ) -> AggregateResult:
    """Sum the scaled unit-cube metrics over all cubes of the cover."""
    area_w = sum(n * 4.0 ** (-l) for l, n in enumerate(cover.counts()))
    len_w = sum(n * 2.0 ** (-l) for l, n in enumerate(cover.counts()))
    weights = {t: aggregate_weights(cover, t) for t in thetas}
    rows = []
    for r in unit_rows:
        rows.append(AggregateRow(
            j=r.j, l1_total=area_w * r.l1_total, bvd_total=len_w * r.bvd_total,
            unresolved_area=area_w * r.unresolved_area,
            products={t: weights[t] * r.interp_product(t) for t in thetas}))
    return AggregateResult(cover, list(unit_rows), rows, tuple(thetas), weights)


def aggregate_run(domain: LipschitzDomain, config, k_max: int,
                  thetas: Sequence[float] = (0.1,)) -> AggregateResult:
    """Run the engine once on the unit square and place scaled copies in every cube.

    All cubes share one config and the iteration is deterministic, so each
    cube-local run is the unit run under ``x -> x_cube + side * x``.
    """
    from .engine import run

    cover = dyadic_cover(domain, k_max)
    result = run(config)
    return aggregate_rows(cover, result.metrics, thetas)


__all__ = [
    "LipschitzDomain", "DyadicCover", "dyadic_cover", "classify_cube", "read_polygon",
    "write_polygon", "write_cover", "read_cover", "scale_state", "aggregate_rows",
    "aggregate_run", "aggregate_weights", "AggregateResult", "AggregateRow",
    "INSIDE", "OUTSIDE", "PARTIAL",
]
