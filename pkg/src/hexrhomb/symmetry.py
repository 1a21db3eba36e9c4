"""Zero-homogeneous corners and the self-similar BV triangle.

A corner is a cyclic list of constant-strain sectors around a point.  Strain
labels are ``0`` for the zero strain and ``1..3`` for the wells.  Ray ``i``
opens sector ``i`` and separates it from sector ``i - 1``; its interface normal
is the ray direction turned by +90 degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import AngleSumMismatch, ConfigError, ContinuityUnsolvable
from .strain import Mat2, Sym2, symmetrized_rank_one, well

TWO_PI = 2 * math.pi
ANGLE_TOL = 1e-9
LABELS = (0, 1, 2, 3)


def strain_of(label: int) -> Sym2:
    if label == 0:
        return Sym2(0.0, 0.0)
    return well(label).matrix


def _unit(theta: float) -> tuple[float, float]:
    return (math.cos(theta), math.sin(theta))


def _wrap(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0:
        t += TWO_PI
    return 0.0 if abs(t - TWO_PI) < ANGLE_TOL else t


# ----------------------------------------------------------------------------
# corners


@dataclass(frozen=True)
class CornerConfig:
    """Sectors as ``(strain label, opening angle)`` in counter-clockwise order."""

    sectors: tuple[tuple[int, float], ...]
    start: float = 0.0  # direction of the ray opening the first sector

    @property
    def m(self) -> int:
        return len(self.sectors)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.sectors)

    def rays(self) -> list[float]:
        out, t = [], self.start
        for _, a in self.sectors:
            out.append(_wrap(t))
            t += a
        return out

    def to_text(self) -> str:
        lines = [f"start {self.start!r}"]
        lines += [f"{s} {a!r}" for s, a in self.sectors]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CornerConfig":
        start, sectors = 0.0, []
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "start" and len(parts) == 2:
                    start = float(parts[1])
                    continue
                if len(parts) != 2:
                    raise ValueError
                label, angle = int(parts[0]), float(parts[1])
            except ValueError:
                raise ConfigError(f"line {n}: expected 'label angle', got {raw!r}") from None
            if label not in LABELS:
                raise ConfigError(f"line {n}: strain label must be 0, 1, 2 or 3")
            sectors.append((label, angle))
        c = cls(tuple(sectors), start)
        validate(c)
        return c


def validate(c: CornerConfig) -> None:
    if c.m < 2:
        raise ConfigError("a corner needs at least two sectors")
    if any(a <= 0 for _, a in c.sectors):
        raise AngleSumMismatch("opening angles must be positive")
    total = sum(a for _, a in c.sectors)
    if abs(total - TWO_PI) > ANGLE_TOL:
        raise AngleSumMismatch(f"opening angles sum to {total!r}, not 2*pi")
    labels = c.labels
    for i in range(c.m):
        if labels[i] == labels[i - 1]:
            raise ConfigError(f"sectors {(i - 1) % c.m} and {i} carry the same strain")


@dataclass(frozen=True)
class Compatible:
    interfaces: tuple  # (a_i, n_i) per ray
    residual: float  # norm of the summed a_i (x) n_i

    ok = True


@dataclass(frozen=True)
class Fails:
    condition: int  # 1: difference not a (.) n along the ray, 2: sum does not vanish
    index: int  # offending ray, -1 for condition 2
    residual: float

    ok = False


CornerResult = Union[Compatible, Fails]


def check_corner(c: CornerConfig, tol: float = 1e-10) -> CornerResult:
    """Test whether the sector strains come from a continuous displacement."""
    validate(c)
    labels = c.labels
    total = np.zeros((2, 2))
    interfaces = []
    for i, theta in enumerate(c.rays()):
        d = strain_of(labels[i - 1]) - strain_of(labels[i])
        t = _unit(theta)
        n = (-t[1], t[0])
        D = np.array([[d.alpha, d.beta], [d.beta, -d.alpha]], dtype=float)
        along = float(np.dot(t, D @ t))
        if abs(along) > tol * max(1.0, d.norm()):
            return Fails(1, i, abs(along))
        a = 2 * (D @ n)
        interfaces.append(((float(a[0]), float(a[1])), n))
        total += np.outer(a, n)
    res = float(np.abs(total).max())
    if res > tol:
        return Fails(2, -1, res)
    return Compatible(tuple(interfaces), res)


def admissible_rays(p: int, q: int) -> list[float]:
    """Ray directions in ``[0, 2 pi)`` along which strains ``p`` and ``q`` can meet."""
    dec = symmetrized_rank_one(strain_of(p), strain_of(q))
    out: list[float] = []
    for _, n in dec.equivalent_pairs():
        theta = _wrap(math.atan2(n[1], n[0]) - math.pi / 2)
        if all(abs(theta - t) > ANGLE_TOL for t in out):
            out.append(theta)
    return sorted(out)


def _ray_table(labels: Sequence[int]) -> list[tuple[float, tuple[int, int]]]:
    table = []
    for i, p in enumerate(labels):
        for q in labels[i + 1:]:
            for theta in admissible_rays(p, q):
                table.append((theta, (p, q)))
    table.sort()
    return table


def _rotate_label(label: int, k: int) -> int:
    # turning the plane by k*pi/3 turns strain space by 2k*pi/3
    return 0 if label == 0 else (label - 1 + k) % 3 + 1


def _reflect_label(label: int) -> int:
    return {0: 0, 1: 1, 2: 3, 3: 2}[label]


def _key(rays: Sequence[float], labels: Sequence[int]) -> tuple:
    m = len(rays)
    best = None
    for s in range(m):
        rr = [round(_wrap(rays[(s + i) % m]), 9) for i in range(m)]
        ll = [labels[(s + i) % m] for i in range(m)]
        opening = [round(_wrap(rr[(i + 1) % m] - rr[i]) or TWO_PI, 9) for i in range(m)]
        k = (tuple(ll), tuple(opening), rr[0])
        best = k if best is None or k < best else best
    return best


def images(c: CornerConfig) -> Iterable[CornerConfig]:
    """The orbit of ``c`` under the symmetries of the three wells."""
    for k in range(6):
        turned = CornerConfig(tuple((_rotate_label(s, k), a) for s, a in c.sectors),
                              _wrap(c.start + k * math.pi / 3))
        yield turned
        # mirror in the first axis reverses the order of the sectors
        rays = turned.rays()
        m = c.m
        sectors = tuple((_reflect_label(turned.sectors[(-i) % m][0]),
                         turned.sectors[(-i) % m][1]) for i in range(m))
        yield CornerConfig(sectors, _wrap(-rays[1 % m]))


def canonical(c: CornerConfig) -> tuple:
    return min(_key(x.rays(), x.labels) for x in images(c))


def _from_rays(rays: Sequence[tuple[float, int]]) -> CornerConfig:
    m = len(rays)
    sectors = []
    for i, (theta, label) in enumerate(rays):
        nxt = rays[(i + 1) % m][0]
        sectors.append((label, _wrap(nxt - theta) or TWO_PI))
    return CornerConfig(tuple(sectors), rays[0][0])


def enumerate_corners(strain_set: Iterable[int] = (1, 2, 3), max_sectors: int = 12
                      ) -> list[CornerConfig]:
    """All compatible corners with 3 to ``max_sectors`` sectors, one per symmetry class.

    Every admissible ray direction belongs to specific strain pairs, so walking
    the directions in angular order and switching strain only across admissible
    rays visits every candidate exactly once.
    """
    labels = sorted(set(strain_set))
    if not set(labels) <= set(LABELS) or len(labels) < 2:
        raise ConfigError("strain set must hold at least two of the labels 0, 1, 2, 3")
    if not 2 <= max_sectors <= 12:
        raise ConfigError("max_sectors must lie in [2, 12]")
    table = _ray_table(labels)
    found: dict[tuple, CornerConfig] = {}

    def walk(pos: int, cur: int, first: int, rays: list):
        if len(rays) > max_sectors:
            return
        if pos == len(table):
            if cur == first and len(rays) >= 3:
                c = _from_rays(rays)
                if check_corner(c).ok:
                    key = canonical(c)
                    if key not in found:
                        found[key] = min(images(c), key=lambda x: _key(x.rays(), x.labels))
            return
        walk(pos + 1, cur, first, rays)
        theta, pair = table[pos]
        if cur in pair and not (rays and abs(rays[-1][0] - theta) < ANGLE_TOL):
            nxt = pair[1] if cur == pair[0] else pair[0]
            walk(pos + 1, nxt, first, rays + [(theta, nxt)])

    for first in labels:
        walk(0, first, first, [])
    return [found[k] for k in sorted(found, key=lambda k: (len(k[0]), k))]


def perturb(c: CornerConfig, index: int, amount: float) -> CornerConfig:
    """Move the ray closing sector ``index`` by ``amount``, keeping the angle sum."""
    s = list(c.sectors)
    j = (index + 1) % c.m
    s[index] = (s[index][0], s[index][1] + amount)
    s[j] = (s[j][0], s[j][1] - amount)
    return CornerConfig(tuple(s), c.start)


def laminate(p: int = 1, q: int = 2, which: int = 0) -> CornerConfig:
    """Two half-planes of strains ``p`` and ``q`` meeting along an admissible line."""
    theta = admissible_rays(p, q)[which]
    return CornerConfig(((q, math.pi), (p, math.pi)), theta)


# ----------------------------------------------------------------------------
# self-similar triangle with zero boundary data

# base angle of the isosceles cells sitting on each triangle edge
EDGE_ANGLE = math.pi / 12
OUTER_ROTATION = math.pi / 12
INNER_RATIO = 2 - math.sqrt(3)


@dataclass(frozen=True)
class TriCell:
    tri: tuple  # three (x, y) vertices, counter-clockwise
    label: int  # strain label
    level: int
    grad: Mat2


@dataclass
class SymTriangleState:
    level: int
    cells: list[TriCell]
    bv_by_level: list[float]  # BV of the strain after each level

    @property
    def increments(self) -> list[float]:
        out, prev = [], 0.0
        for b in self.bv_by_level:
            out.append(b - prev)
            prev = b
        return out

    def ratios(self) -> list[float]:
        inc = self.increments
        return [b / a for a, b in zip(inc, inc[1:])]

    @property
    def measured_ratio(self) -> float:
        r = self.ratios()
        return r[-1] if r else float("nan")

    def continuity_residual(self) -> float:
        return _edge_residual(self.cells)

    def boundary_residual(self) -> float:
        return _boundary_residual(self.cells)

    def skew_by_level(self) -> list[float]:
        out: dict[int, float] = {}
        for c in self.cells:
            out[c.level] = max(out.get(c.level, 0.0), abs(c.grad.a12 - c.grad.a21) / 2)
        return [out[k] for k in sorted(out)]


def _edge_label(p, q) -> int:
    """Well that can border the zero strain along the segment ``pq``."""
    theta = math.atan2(q[1] - p[1], q[0] - p[0]) % math.pi
    for label in (1, 2, 3):
        for r in admissible_rays(0, label):
            if abs((r - theta + math.pi / 2) % math.pi - math.pi / 2) < 1e-9:
                return label
    raise ContinuityUnsolvable(f"edge direction {theta!r} admits no well next to zero strain")


def outer_triangle(side: float = 1.0) -> tuple:
    """Equilateral triangle with edges at pi/12 + k*pi/3, centred at the origin."""
    a = OUTER_ROTATION
    v = [(0.0, 0.0), (side * math.cos(a), side * math.sin(a)),
         (side * math.cos(a + math.pi / 3), side * math.sin(a + math.pi / 3))]
    cx = sum(p[0] for p in v) / 3
    cy = sum(p[1] for p in v) / 3
    return tuple((x - cx, y - cy) for x, y in v)


def _apex(p, q):
    mx, my = (p[0] + q[0]) / 2, (p[1] + q[1]) / 2
    h = math.hypot(q[0] - p[0], q[1] - p[1]) / 2 * math.tan(EDGE_ANGLE)
    L = math.hypot(q[0] - p[0], q[1] - p[1])
    # inward normal of a counter-clockwise triangle edge
    return (mx - (q[1] - p[1]) / L * h, my + (q[0] - p[0]) / L * h)


def _subdivide(tri) -> tuple[list[tuple], tuple]:
    """Six labelled cells of one level plus the inner triangle."""
    P = tri
    W = [_apex(P[k], P[(k + 1) % 3]) for k in range(3)]  # W[k] over edge k -> k+1
    edge_labels = [_edge_label(P[k], P[(k + 1) % 3]) for k in range(3)]
    cells = []
    for k in range(3):
        cells.append(((P[k], P[(k + 1) % 3], W[k]), edge_labels[k]))
        # the corner cell carries the label of the opposite edge
        cells.append(((P[k], W[k], W[k - 1]), edge_labels[(k + 1) % 3]))
    inner = (W[0], W[1], W[2])
    return cells, inner


def _solve_skews(geoms: list[tuple], labels: list[int]) -> list[Mat2]:
    """Skew parts making the piecewise gradient continuous and zero outside."""
    n = len(geoms)
    edges: dict[tuple, list] = {}

    def key(p):
        return (round(p[0], 11), round(p[1], 11))

    for i, tri in enumerate(geoms):
        for k in range(3):
            p, q = tri[k], tri[(k + 1) % 3]
            edges.setdefault(tuple(sorted((key(p), key(q)))), []).append((i, p, q))
    rows, rhs = [], []
    for owners in edges.values():
        if len(owners) > 2:
            raise ContinuityUnsolvable("an edge is shared by more than two cells")
        i, p, q = owners[0]
        j = owners[1][0] if len(owners) == 2 else None
        L = math.hypot(q[0] - p[0], q[1] - p[1])
        t = ((q[0] - p[0]) / L, (q[1] - p[1]) / L)
        ei = strain_of(labels[i])
        ej = strain_of(labels[j]) if j is not None else Sym2(0.0, 0.0)
        d = ei - ej
        # (d + w J) t = 0 with J = [[0, 1], [-1, 0]] and w = w_i - w_j
        jt = (t[1], -t[0])
        dt = (d.alpha * t[0] + d.beta * t[1], d.beta * t[0] - d.alpha * t[1])
        for comp in range(2):
            row = np.zeros(n)
            row[i] = jt[comp]
            if j is not None:
                row[j] = -jt[comp]
            rows.append(row)
            rhs.append(-dt[comp])
    A, b = np.array(rows), np.array(rhs)
    w, *_ = np.linalg.lstsq(A, b, rcond=None)
    res = float(np.abs(A @ w - b).max()) if len(b) else 0.0
    if res > 1e-10:
        raise ContinuityUnsolvable(f"edge continuity system is inconsistent (residual {res:.3g})")
    out = []
    for lab, wi in zip(labels, w):
        e = strain_of(lab)
        out.append(Mat2(e.alpha, e.beta + float(wi), e.beta - float(wi), -e.alpha))
    return out


def _bv(cells: Sequence[TriCell]) -> float:
    """Jump length of the strain weighted by the jump size, outer boundary included."""
    edges: dict[tuple, list] = {}
    for c in cells:
        for k in range(3):
            p, q = c.tri[k], c.tri[(k + 1) % 3]
            kp = tuple(sorted(((round(p[0], 11), round(p[1], 11)),
                               (round(q[0], 11), round(q[1], 11)))))
            edges.setdefault(kp, []).append((c.label, math.hypot(q[0] - p[0], q[1] - p[1])))
    total = 0.0
    for owners in edges.values():
        a = strain_of(owners[0][0])
        b = strain_of(owners[1][0]) if len(owners) == 2 else Sym2(0.0, 0.0)
        total += (a - b).norm() * owners[0][1]
    return total


def _edge_residual(cells: Sequence[TriCell]) -> float:
    edges: dict[tuple, list] = {}
    for c in cells:
        for k in range(3):
            p, q = c.tri[k], c.tri[(k + 1) % 3]
            kp = tuple(sorted(((round(p[0], 11), round(p[1], 11)),
                               (round(q[0], 11), round(q[1], 11)))))
            edges.setdefault(kp, []).append((c, p, q))
    worst = 0.0
    for owners in edges.values():
        if len(owners) != 2:
            continue
        (a, p, q), (b, _, _) = owners
        worst = max(worst, _jump(a.grad, b.grad, p, q))
    return worst


def _jump(ga: Mat2, gb: Mat2, p, q) -> float:
    L = math.hypot(q[0] - p[0], q[1] - p[1])
    t = ((q[0] - p[0]) / L, (q[1] - p[1]) / L)
    d = ga - gb
    return math.hypot(d.a11 * t[0] + d.a12 * t[1], d.a21 * t[0] + d.a22 * t[1])


def _boundary_residual(cells: Sequence[TriCell]) -> float:
    count: dict[tuple, int] = {}
    for c in cells:
        for k in range(3):
            p, q = c.tri[k], c.tri[(k + 1) % 3]
            kp = tuple(sorted(((round(p[0], 11), round(p[1], 11)),
                               (round(q[0], 11), round(q[1], 11)))))
            count[kp] = count.get(kp, 0) + 1
    zero = Mat2(0.0, 0.0, 0.0, 0.0)
    worst = 0.0
    for c in cells:
        for k in range(3):
            p, q = c.tri[k], c.tri[(k + 1) % 3]
            kp = tuple(sorted(((round(p[0], 11), round(p[1], 11)),
                               (round(q[0], 11), round(q[1], 11)))))
            if count[kp] == 1:
                worst = max(worst, _jump(c.grad, zero, p, q))
    return worst


def bv_triangle(levels: int, side: float = 1.0) -> SymTriangleState:
    """Nested triangle construction with zero boundary data after ``levels`` steps.

    Each level splits the current inner triangle into three edge cells, three
    corner cells and a smaller inverted inner triangle of zero strain; skew
    parts are then solved from edge continuity.
    """
    if levels < 1:
        raise ConfigError("levels must be at least 1")
    geoms: list[tuple] = []
    labels: list[int] = []
    lvls: list[int] = []
    bv_by_level = []
    inner = outer_triangle(side)
    cells: list[TriCell] = []
    for lev in range(1, levels + 1):
        sub, inner = _subdivide(inner)
        for tri, lab in sub:
            geoms.append(tri)
            labels.append(lab)
            lvls.append(lev)
        all_geoms = geoms + [inner]
        all_labels = labels + [0]
        grads = _solve_skews(all_geoms, all_labels)
        cells = [TriCell(g, lab, lv, G)
                 for g, lab, lv, G in zip(all_geoms, all_labels, lvls + [lev], grads)]
        bv_by_level.append(_bv(cells))
    return SymTriangleState(levels, cells, bv_by_level)


__all__ = [
    "CornerConfig", "Compatible", "Fails", "check_corner", "admissible_rays",
    "enumerate_corners", "canonical", "images", "perturb", "laminate", "validate",
    "strain_of", "TriCell", "SymTriangleState", "bv_triangle", "outer_triangle",
    "INNER_RATIO",
]
