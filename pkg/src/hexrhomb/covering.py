"""Covering triangles by thin rectangles: certificates, case tags and constructions.

All constructed vertices are exact rationals (gmpy2 ``mpq``).  Local
frames use a rational, non-normalised direction ``v`` together with
``v_perp = (-v[1], v[0])``, so changing frames never needs a square root.
Angle bands are checked in floating point with a small tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from gmpy2 import mpq as Q
from typing import Optional, Sequence, Union

from . import geom
from .errors import AspectOutOfRange, CertificateInvalid, Unclassifiable

ANGLE_TOL = 1e-9
DEFAULT_C = 1.0
CASES = ("P1", "P2", "R1", "R2", "R3")

Pt = tuple


def _fr(x) -> Q:
    return x if isinstance(x, Q) else Q(x)


def _pt(p) -> Pt:
    return (_fr(p[0]), _fr(p[1]))


def _sub(p, q):
    return (p[0] - q[0], p[1] - q[1])


def _add(p, q):
    return (p[0] + q[0], p[1] + q[1])


def _cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1]


def _norm(u) -> float:
    return math.hypot(float(u[0]), float(u[1]))


def line_angle(u, v) -> float:
    """Unsigned angle in ``[0, pi/2]`` between the lines spanned by ``u`` and ``v``."""
    # atan2 keeps full precision for nearly parallel lines, where acos does not
    return math.atan2(abs(float(_cross(u, v))), abs(float(_dot(u, v))))


# ----------------------------------------------------------------------------
# primitives

def _area_sum(pieces) -> Q:
    """Exact total area; congruent copies sharing one area object are multiplied out."""
    groups: dict = {}
    for p in pieces:
        a = p.area
        g = groups.get(id(a))
        if g is None:
            groups[id(a)] = [a, 1]
        else:
            g[1] += 1
    return sum((n * a for a, n in groups.values()), Q(0))


def _with_shape(obj, template):
    """Give a congruent copy the template's area and perimeter (computed once on the template)."""
    obj.__dict__["area"] = template.area
    obj.__dict__["perimeter"] = template.perimeter
    if "angles" in template.__dict__:  # only triangles have angles
        obj.__dict__["angles"] = template.__dict__["angles"]
    return obj


@dataclass(frozen=True)
class Triangle:
    """Counterclockwise triangle with exact rational vertices."""

    vertices: tuple

    def __post_init__(self):
        vs = tuple(_pt(p) for p in self.vertices)
        if len(vs) != 3:
            raise ValueError("a triangle has three vertices")
        s = geom.signed_area(*vs)
        if s == 0:
            raise ValueError("degenerate triangle")
        if s < 0:
            vs = (vs[0], vs[2], vs[1])
        object.__setattr__(self, "vertices", vs)
        self.__dict__["area"] = abs(s)

    @cached_property
    def area(self) -> Q:
        return abs(geom.signed_area(*self.vertices))

    @cached_property
    def perimeter(self) -> float:
        return geom.perimeter(self.vertices)

    @cached_property
    def angles(self) -> tuple[float, float, float]:
        return geom.angles(self.vertices)

    def translate(self, d) -> "Triangle":
        return _with_shape(Triangle._oriented(tuple(_add(p, d) for p in self.vertices)), self)

    @classmethod
    def _oriented(cls, vs) -> "Triangle":
        """Skip the checks for rational vertices already in counterclockwise order."""
        t = object.__new__(cls)
        object.__setattr__(t, "vertices", vs)
        return t


@dataclass(frozen=True)
class Rect:
    """Rectangle ``corner + s u + t v`` for ``s, t`` in ``[0, 1]``; ``u`` is the long side."""

    corner: Pt
    u: Pt
    v: Pt

    @cached_property
    def area(self) -> Q:
        return abs(_cross(self.u, self.v))

    @cached_property
    def perimeter(self) -> float:
        return 2 * (_norm(self.u) + _norm(self.v))

    @property
    def aspect(self) -> float:
        return _norm(self.v) / _norm(self.u)

    def corners(self) -> list:
        c, u, v = self.corner, self.u, self.v
        return [c, _add(c, u), _add(_add(c, u), v), _add(c, v)]

    def translate(self, d) -> "Rect":
        return _with_shape(Rect(_add(self.corner, d), self.u, self.v), self)


@dataclass(frozen=True)
class DeltaGoodCertificate:
    delta: float
    small_angle: float
    direction: tuple
    aligned: bool


@dataclass(frozen=True)
class R3Marker:
    """Right triangle with one side parallel to the Conti direction ``direction``."""

    direction: tuple


Certificate = Union[DeltaGoodCertificate, R3Marker]


@dataclass
class CoverResult:
    conti_copies: list
    remainder: list  # of (Triangle, Certificate)
    covered_area: Q = Q(0)
    total_perimeter: float = 0.0
    input_area: Q = Q(0)
    input_perimeter: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def covered_fraction(self) -> float:
        return float(self.covered_area / self.input_area)

    @property
    def perimeter_ratio(self) -> float:
        return self.total_perimeter / self.input_perimeter

    def pieces_area(self) -> Q:
        return _area_sum(self.conti_copies) + _area_sum(t for t, _ in self.remainder)


# ----------------------------------------------------------------------------
# certificates


def _tip_index(tri: Triangle) -> int:
    a = tri.angles
    return min(range(3), key=lambda k: a[k])


def certify(tri: Triangle, delta: float, direction=None, tol: float = ANGLE_TOL
            ) -> Optional[DeltaGoodCertificate]:
    """Certificate that ``tri`` is delta-good (aligned to ``direction`` if given)."""
    a = tri.angles
    k = _tip_index(tri)
    alpha = a[k]
    if not (delta / 10 - tol <= alpha <= 1000 * delta + tol):
        return None
    for m in range(3):
        if m != k and abs(a[m] - math.pi / 2) > 2000 * delta + tol:
            return None
    tip = tri.vertices[k]
    sides = [_sub(tri.vertices[(k + 1) % 3], tip), _sub(tri.vertices[(k + 2) % 3], tip)]
    if direction is None:
        s = max(sides, key=_norm)
        return DeltaGoodCertificate(delta, alpha, _unit(s), False)
    best = min(sides, key=lambda s: line_angle(s, direction))
    if line_angle(best, direction) > 1000 * delta + tol:
        return None
    return DeltaGoodCertificate(delta, alpha, _unit(best), True)


def _unit(v) -> tuple:
    n = _norm(v)
    return (float(v[0]) / n, float(v[1]) / n)


def validate_certificate(tri: Triangle, cert: Certificate, tol: float = ANGLE_TOL) -> bool:
    """Re-check a certificate against the band definitions."""
    if isinstance(cert, R3Marker):
        return is_r3_shape(tri, cert.direction, tol=tol)
    got = certify(tri, cert.delta, cert.direction if cert.aligned else None, tol)
    return got is not None


def is_delta_good(tri: Triangle, delta: float, direction=None) -> bool:
    return certify(tri, delta, direction) is not None


def right_angle_index(tri: Triangle, tol: float = ANGLE_TOL) -> Optional[int]:
    a = tri.angles
    k = max(range(3), key=lambda m: a[m])
    return k if abs(a[k] - math.pi / 2) <= tol else None


def is_r3_shape(tri: Triangle, direction, lo: float = 0.0, tol: float = ANGLE_TOL) -> bool:
    """Right triangle, other angles in ``[lo, pi/2 - lo]``, a side parallel to ``direction``."""
    k = right_angle_index(tri, tol)
    if k is None:
        return False
    a = tri.angles
    if any(a[m] < lo - tol or a[m] > math.pi / 2 - lo + tol for m in range(3) if m != k):
        return False
    vs = tri.vertices
    return any(line_angle(_sub(vs[(m + 1) % 3], vs[m]), direction) <= tol for m in range(3))


# ----------------------------------------------------------------------------
# local frames


@dataclass(frozen=True)
class Frame:
    """``x = origin + s v + t v_perp`` (``t`` negated when ``mirror``)."""

    origin: Pt
    v: Pt
    mirror: bool = False

    def to_world(self, p) -> Pt:
        s, t = p
        if self.mirror:
            t = -t
        o, v = self.origin, self.v
        return (o[0] + s * v[0] - t * v[1], o[1] + s * v[1] + t * v[0])

    def to_local(self, x) -> Pt:
        d = _sub(x, self.origin)
        n2 = _dot(self.v, self.v)
        s = _dot(d, self.v) / n2
        t = (-d[0] * self.v[1] + d[1] * self.v[0]) / n2
        return (s, -t if self.mirror else t)

    def vec_to_local(self, w) -> Pt:
        n2 = _dot(self.v, self.v)
        s = _dot(w, self.v) / n2
        t = (-w[0] * self.v[1] + w[1] * self.v[0]) / n2
        return (s, -t if self.mirror else t)

    def tri(self, pts) -> Triangle:
        return Triangle(tuple(self.to_world(p) for p in pts))

    def rect(self, corner, u, v) -> Rect:
        c = self.to_world(corner)
        return Rect(c, _sub(self.to_world(_add(corner, u)), c), _sub(self.to_world(_add(corner, v)), c))


def _tri_frame(D: Triangle, direction=None) -> tuple[Frame, Pt]:
    """Frame with the tip of ``D`` at the origin and its direction side on ``[0,1] x {0}``.

    Returns the frame and the local coordinates of the third vertex (with a
    positive second coordinate).
    """
    k = _tip_index(D)
    O = D.vertices[k]
    P, Q = D.vertices[(k + 1) % 3], D.vertices[(k + 2) % 3]
    if direction is not None:
        B, A = (P, Q) if line_angle(_sub(P, O), direction) <= line_angle(_sub(Q, O), direction) else (Q, P)
    else:
        # the side whose far end sees the larger angle is the right-angle leg
        B, A = (P, Q) if _norm(_sub(P, O)) <= _norm(_sub(Q, O)) else (Q, P)
    f = Frame(O, _sub(B, O))
    a = f.to_local(A)
    if a[1] < 0:
        f = Frame(O, _sub(B, O), mirror=True)
        a = f.to_local(A)
    return f, a


# ----------------------------------------------------------------------------
# rectangle in triangle


@dataclass
class FitResult:
    rect: Rect
    remainder: list
    frame: Frame
    local_rect: tuple  # (x0, x1, y1): rectangle [x0, x1] x [0, y1] in frame coordinates
    fraction: Q


def _check_aspect(r, delta, lo=Q(1, 10), hi=1000, exc=CertificateInvalid):
    if delta is not None and not (float(lo) * delta * (1 - 1e-12) <= float(r) <= hi * delta * (1 + 1e-12)):
        raise exc(f"aspect {float(r):.4g} outside [{float(lo)}, {hi}] * {delta:.4g}")


def fit_rectangle_in_triangle(D: Triangle, r, delta: Optional[float] = None, direction=None,
                              n_slices: Optional[int] = None) -> FitResult:
    """Largest-volume-fraction style placement of an aligned ``1 : r`` rectangle.

    One corner sits at the 2/3 point of the direction side, the opposite corner
    on the other long side.  The rest of ``D`` is cut into a thin triangle to the
    left, one above the rectangle, a copy of ``D`` scaled by 1/3 at the far end
    and ``n_slices`` boxes split along their diagonals.
    """
    r = _fr(r)
    if r <= 0:
        raise CertificateInvalid("aspect must be positive")
    if delta is not None:
        if certify(D, delta, direction) is None:
            raise CertificateInvalid(f"triangle is not {delta:.4g}-good")
        _check_aspect(r, delta)
    f, (xa, ya) = _tri_frame(D, direction)
    two3 = Q(2, 3)
    if xa < two3:
        raise CertificateInvalid("triangle too far from right-angled for the 2/3 construction")
    u = 2 * r / (3 * (r * xa + ya))
    x2, y2 = u * xa, u * ya
    yq = two3 * ya / xa
    # horizontal through the top of the vertical cut meets the far side at H
    hx = 1 + (yq / ya) * (xa - 1)
    pieces = [
        ((0, 0), (x2, 0), (x2, y2)),
        ((x2, y2), (two3, y2), (two3, yq)),
        ((two3, yq), (hx, yq), (xa, ya)),
    ]
    if n_slices is None:
        n_slices = 1
        if delta is not None:
            tan_slice = float(yq) / float(hx - two3 if hx > two3 else 1 - two3)
            n_slices = min(3, max(1, math.ceil(tan_slice / (1000 * delta) - 1e-12)))
    for k in range(n_slices):
        y0, y1 = yq * k / n_slices, yq * (k + 1) / n_slices
        br = (1 + (y0 / ya) * (xa - 1), y0)
        tr = (1 + (y1 / ya) * (xa - 1), y1)
        pieces.append(((two3, y0), br, tr))
        pieces.append(((two3, y0), tr, (two3, y1)))
    rect = f.rect((x2, Q(0)), (two3 - x2, Q(0)), (Q(0), y2))
    rem = [f.tri(p) for p in pieces]
    return FitResult(rect, rem, f, (x2, two3, y2), rect.area / D.area)


# ----------------------------------------------------------------------------
# box around a slightly rotated rectangle


@dataclass
class BoxResult:
    width: Q
    height: Q
    copy: Rect
    remainder: list  # of (Triangle, "e1" | "n")
    tau: Q

    @property
    def aspect(self) -> Q:
        return self.height / self.width

    @property
    def ratio(self) -> Q:
        return self.copy.area / (self.width * self.height)


def box_around_rotated_rectangle(r0, beta=None, delta: Optional[float] = None, tau=None) -> BoxResult:
    """Axis-parallel box around a ``1 : r0`` rectangle tilted by ``beta``.

    Coordinates are local with the box's lower-left corner at the origin; the
    tilted copy has horizontal extent 1 along its long side.  ``tau = tan(beta)``
    may be passed directly (exact).  Remainder triangles are tagged by the
    direction they are aligned with: ``"e1"`` (box axis) or ``"n"`` (copy axis).
    """
    r0 = _fr(r0)
    if tau is None:
        if beta is None:
            raise ValueError("need beta or tau")
        tau = Q(math.tan(beta))
    tau = _fr(tau)
    if delta is None:
        delta = float(r0)
    _check_aspect(r0, delta, Q(1, 10), 10, AspectOutOfRange)
    if abs(math.atan(float(tau))) > 1000 * delta + 1e-12:
        raise AspectOutOfRange(f"tilt {math.atan(float(tau)):.4g} exceeds 1000 * {delta:.4g}")
    neg = tau < 0
    t = -tau if neg else tau
    r2 = (r0 + t) / 2
    one = Q(1)
    P1, P2 = (Q(0), Q(0)), (one, t)
    P3, P4 = (1 - r0 * t, t + r0), (-r0 * t, r0)
    Q1, Q2 = (-1 - r0 * t, r0), (-1 - r0 * t, Q(0))
    Q3, Q4 = (Q(2), t), (Q(2), t + r0)
    Q5, Q6 = (Q(0), -r2), (one, -r2)
    Q7, Q8 = (1 - r0 * t, t + r0 + r2), (-r0 * t, t + r0 + r2)
    x0, x1 = -1 - r0 * t, Q(2)
    y0, y1 = -r2, t + r0 + r2
    split = t > 0 and float(t) >= delta / 10
    rem = [
        ((Q2, P1, P4), "e1"), ((P4, Q1, Q2), "e1"),
        ((Q4, P3, P2), "e1"), ((P2, Q3, Q4), "e1"),
        ((P1, Q5, Q6), "e1"), ((P3, Q7, Q8), "e1"),
    ]
    if split:
        Q9, Q10 = (one, Q(0)), (-r0 * t, t + r0)
        rem += [((P1, Q6, Q9), "e1"), ((P1, Q9, P2), "n"),
                ((P3, Q8, Q10), "e1"), ((P3, Q10, P4), "n")]
    elif t > 0:
        rem += [((P1, Q6, P2), "n"), ((P3, Q8, P4), "n")]
    else:
        rem += [((P1, Q6, P2), "e1"), ((P3, Q8, P4), "e1")]

    def block(xa, xb, ya, yb):
        if ya == yb or xa == xb:
            return []
        return [(((xa, ya), (xb, ya), (xb, yb)), "e1"), (((xa, ya), (xb, yb), (xa, yb)), "e1")]

    rem += block(x0, Q(0), y0, Q(0))
    rem += block(1 - r0 * t, x1, t + r0, y1)
    if split:
        rem += block(one, x1, y0, Q(0)) + block(one, x1, Q(0), t)
        rem += block(x0, -r0 * t, r0, t + r0) + block(x0, -r0 * t, t + r0, y1)
    else:
        rem += block(one, x1, y0, t)
        rem += block(x0, -r0 * t, r0, y1)

    def place(p):
        x, y = p[0] - x0, p[1] - y0
        return (x, (y1 - y0) - y) if neg else (x, y)

    tris = []
    for pts, tag in rem:
        tris.append((Triangle(tuple(place(p) for p in pts)), tag))
    c = place(P1)
    u = _sub(place(P2), c)
    v = _sub(place(P4), c)
    return BoxResult(x1 - x0, y1 - y0, Rect(c, u, v), tris, tau)


# ----------------------------------------------------------------------------
# strips of rotated rectangles (R-cases)


@dataclass
class StripResult:
    width: Q
    height: Q
    n_strips: int
    step: Pt  # strip ``k`` is strip 0 shifted by ``k step``
    anchors: tuple  # strip-0 points: bottom-left, rectangle corner, top-left, inner corner
    end_triangles: tuple

    def pieces(self) -> tuple[list, list]:
        return walk_strips(self.anchors, self.step, self.n_strips)

    @property
    def copies(self) -> list:
        return self.pieces()[0]

    @property
    def triangles(self) -> list:
        return [self.end_triangles[0], *self.pieces()[1], self.end_triangles[1]]


def walk_strips(anchors, step, n: int) -> tuple[list, list]:
    """Rectangles and end triangles of ``n`` strips, each a shift of the previous one.

    Strip ``k`` has the rectangle ``(c2, c3 - c2, A_{k+1} - c2)`` and the
    triangles ``(A_k, A_{k+1}, c2)`` and ``(c3, c3 + step, c4)``; neighbouring
    strips share vertices, so each strip costs four point shifts.
    """
    A, c2, c3, c4 = anchors
    u = _sub(c3, c2)
    v = _sub(_add(A, step), c2)
    rect0 = Rect(c2, u, v)
    tri0 = Triangle((A, _add(A, step), c2))
    tri1 = Triangle((c3, _add(c3, step), c4))
    # vertex order after orientation, as positions in the construction order
    swap0 = tri0.vertices[1] != _add(A, step)
    swap1 = tri1.vertices[1] != _add(c3, step)
    sx, sy = step
    copies, tris = [], []
    for _ in range(n):
        A1 = (A[0] + sx, A[1] + sy)
        c3n = (c3[0] + sx, c3[1] + sy)
        copies.append(_with_shape(Rect(c2, u, v), rect0))
        tris.append(_with_shape(Triangle._oriented((A, c2, A1) if swap0 else (A, A1, c2)), tri0))
        tris.append(_with_shape(Triangle._oriented((c3, c4, c3n) if swap1 else (c3, c3n, c4)), tri1))
        A, c3 = A1, c3n
        c2 = (c2[0] + sx, c2[1] + sy)
        c4 = (c4[0] + sx, c4[1] + sy)
    return copies, tris


def rotated_strips(tau, r0, target_aspect, height=Q(1)) -> StripResult:
    """Box tiled by parallelogram strips along ``(1, tau)``, one ``1 : r0`` rectangle each.

    The end triangles of every strip and the two box corners are right
    triangles with a side along ``(1, tau)``.
    """
    tau, r0, H = _fr(tau), _fr(r0), _fr(height)
    neg = tau < 0
    t = -tau if neg else tau
    if t == 0:
        raise AspectOutOfRange("rectangles parallel to the box need the parallel construction")
    b = H * (1 + t * t) / (t + t * t / r0)
    s = b * t / (1 + t * t)
    w_target = H / _fr(target_aspect)
    n = max(1, int(round(float((w_target - H / t) / b))))
    W = n * b + H / t

    def place(p):
        return (p[0], H - p[1]) if neg else p

    def tri(*pts):
        return Triangle(tuple(place(p) for p in pts))

    anchors = tuple(place(p) for p in [(Q(0), Q(0)), (s / t, s), (H / t, H),
                                        (b + (H - s) / t, H - s)])
    ends = (tri((Q(0), Q(0)), (H / t, H), (Q(0), H)),
            tri((n * b, Q(0)), (W, Q(0)), (W, H)))
    return StripResult(W, H, n, (b, Q(0)), anchors, ends)


# ----------------------------------------------------------------------------
# greedy covering of right triangles (R3)


@dataclass
class GreedyResult:
    copies: list
    triangles: list
    depth: int
    first_length: Q
    similarity: Q


def greedy_depth(lam: Q) -> int:
    """Largest ``L`` with ``lam^L > 1/4`` (at least 1)."""
    L, p = 0, Q(1)
    while p * lam > Q(1, 4):
        p *= lam
        L += 1
    return max(L, 1)


def greedy_right_triangle(m, delta) -> GreedyResult:
    """Greedy cover of the right triangle with legs ``m`` (along x) and 1 (along y)."""
    m, delta = _fr(m), _fr(delta)
    if not 0 < m * delta < 50:
        raise CertificateInvalid("need 0 < m < 50 / delta")
    l1 = m / (1 + m * delta)
    lam = 1 / (1 + m * delta)
    L = greedy_depth(lam)
    copies, tris = [], []
    yb, c = Q(0), Q(1)
    for _ in range(L):
        w, h = c * l1, c * l1 * delta
        copies.append(Rect((Q(0), yb), (w, Q(0)), (Q(0), h)))
        tris.append(Triangle(((w, yb), (c * m, yb), (w, yb + h))))
        yb += h
        c *= lam
    tris.append(Triangle(((Q(0), yb), (c * m, yb), (Q(0), yb + c))))
    return GreedyResult(copies, tris, L, l1, lam)


# ----------------------------------------------------------------------------
# classification


def triangle_direction_angle(tri: Triangle, direction) -> float:
    """Angle between ``direction`` and the closer long side at the tip."""
    k = _tip_index(tri)
    tip = tri.vertices[k]
    return min(line_angle(_sub(tri.vertices[(k + j) % 3], tip), direction) for j in (1, 2))


def classify(t: Triangle, delta_j: float, delta_prev: float, conti_dir, delta0: Optional[float] = None,
             rotated: Optional[bool] = None, C: float = DEFAULT_C) -> str:
    """Case tag of ``t`` for the next covering step.

    ``rotated`` says whether the reference well changed at the last
    modification; when omitted it is read off from the angle to ``conti_dir``.
    """
    if delta0 is None:
        delta0 = delta_j
    is_d0 = math.isclose(delta_j, delta0, rel_tol=1e-12)
    prev_d0 = math.isclose(delta_prev, delta0, rel_tol=1e-12)
    beta = None
    if is_delta_good(t, delta_j) or is_delta_good(t, delta_prev):
        beta = triangle_direction_angle(t, conti_dir)
    par = (not rotated) if rotated is not None else None
    if par is not False:
        if is_d0 and not prev_d0 and is_delta_good(t, delta_prev, conti_dir):
            return "P2"
        if is_delta_good(t, delta_j, conti_dir):
            return "P1"
    if par is not True and beta is not None and C * delta0 <= beta <= math.pi / 2 - C * delta0:
        if is_d0 and not prev_d0 and is_delta_good(t, delta_prev):
            return "R2"
        if is_d0 and is_delta_good(t, delta0):
            return "R1"
    if is_d0 and is_r3_shape(t, conti_dir, lo=C * delta0):
        return "R3"
    raise Unclassifiable("no case matches within tolerances")


# ----------------------------------------------------------------------------
# cover_case


def _local_tau(frame: Frame, conti_dir) -> Q:
    n = frame.vec_to_local(_pt(conti_dir))
    if n[0] == 0:
        raise AspectOutOfRange("Conti direction orthogonal to the triangle")
    return n[1] / n[0]


def _tan_tip(frame_third: Pt) -> Q:
    xa, ya = frame_third
    return ya / xa


def _assemble(t: Triangle, copies, rem) -> CoverResult:
    cov = _area_sum(copies)
    per = sum(r.perimeter for r in copies) + sum(tr.perimeter for tr, _ in rem)
    return CoverResult(copies, rem, cov, per, t.area, t.perimeter)


def _map_box_into(fit: FitResult, width, height):
    """Affine similarity from box-local coordinates onto the fitted rectangle."""
    x0, x1, _ = fit.local_rect
    return _scaled_frame_map(fit.frame, x0, (x1 - x0) / width)


def _scaled_frame_map(f: Frame, x0, k):
    """``p -> f.to_world((x0 + k p0, k p1))`` as one affine map."""
    # x = o + M p with M = k [v, +-v_perp]
    v = f.v
    sg = -1 if f.mirror else 1
    o = f.to_world((x0, Q(0)))
    m11, m21 = k * v[0], k * v[1]
    m12, m22 = -sg * m21, sg * m11

    def to_world(p):
        return (o[0] + m11 * p[0] + m12 * p[1], o[1] + m21 * p[0] + m22 * p[1])

    def linear(w):
        return (m11 * w[0] + m12 * w[1], m21 * w[0] + m22 * w[1])

    to_world.linear = linear
    return to_world


def _rect_to_world(to_world, r: Rect) -> Rect:
    lin = to_world.linear
    return Rect(to_world(r.corner), lin(r.u), lin(r.v))


def _cover_parallel(t: Triangle, d_tri: float, r0: Q, d_box: float, K: int, conti_dir
                    ) -> CoverResult:
    f0, third = _tri_frame(t, conti_dir)
    tau = _local_tau(f0, conti_dir)
    box = box_around_rotated_rectangle(r0, tau=tau, delta=d_box)
    fit = fit_rectangle_in_triangle(t, box.aspect / K, d_tri, conti_dir)
    # the stacked boxes fill the fitted rectangle exactly
    to_world = _map_box_into(fit, K * box.width, box.height)
    copies, rem = [], []
    for tri in fit.remainder:
        rem.append((tri, certify(tri, d_tri, conti_dir) or certify(tri, d_tri)))
    # box k is box 0 shifted; shapes and certificates carry over
    base_copy = _rect_to_world(to_world, box.copy)
    base_rem = []
    for tr, tag in box.remainder:
        tri = Triangle(tuple(to_world(p) for p in tr.vertices))
        base_rem.append((tri, certify(tri, d_box, conti_dir if tag == "n" else _axis(fit.frame))
                         or certify(tri, d_box)))
    step = to_world.linear((box.width, Q(0)))
    d = (Q(0), Q(0))
    for _ in range(K):
        copies.append(base_copy.translate(d))
        rem += [(tri.translate(d), cert) for tri, cert in base_rem]
        d = _add(d, step)
    res = _assemble(t, copies, rem)
    res.meta.update(K=K, tau=float(tau), box_aspect=float(box.aspect))
    return res


def _axis(frame: Frame):
    return frame.v


def _cover_rotated(t: Triangle, d_tri: float, delta0: float, conti_dir) -> CoverResult:
    f0, third = _tri_frame(t)
    tau = _local_tau(f0, conti_dir)
    strips = rotated_strips(tau, _fr(delta0), _tan_tip(third))
    fit = fit_rectangle_in_triangle(t, strips.height / strips.width, d_tri)
    to_world = _map_box_into(fit, strips.width, strips.height)
    # map the strip-0 points once, then shift them in world coordinates
    anchors = tuple(to_world(p) for p in strips.anchors)
    copies, strip_tris = walk_strips(anchors, to_world.linear(strips.step), strips.n_strips)
    marker = R3Marker(_unit(_pt(conti_dir)))
    rem = [(tri, certify(tri, d_tri, _axis(fit.frame)) or certify(tri, d_tri)) for tri in fit.remainder]
    ends = [Triangle(tuple(to_world(p) for p in tr.vertices)) for tr in strips.end_triangles]
    rem.append((ends[0], marker))
    rem += [(tr, marker) for tr in strip_tris]
    rem.append((ends[1], marker))
    res = _assemble(t, copies, rem)
    res.meta.update(K=strips.n_strips, tau=float(tau))
    return res


def _cover_r3(t: Triangle, delta0: float, conti_dir) -> CoverResult:
    k = right_angle_index(t)
    if k is None:
        raise CertificateInvalid("R3 needs a right triangle")
    O = t.vertices[k]
    X, Y = t.vertices[(k + 1) % 3], t.vertices[(k + 2) % 3]
    hyp = _sub(Y, X)
    if line_angle(hyp, conti_dir) <= ANGLE_TOL:
        # split at the foot of the altitude so the parallel side becomes a leg
        d = hyp
        s = _dot(_sub(O, X), d) / _dot(d, d)
        F = _add(X, (s * d[0], s * d[1]))
        parts = [_cover_r3(Triangle((O, X, F)), delta0, conti_dir),
                 _cover_r3(Triangle((O, F, Y)), delta0, conti_dir)]
        copies = parts[0].conti_copies + parts[1].conti_copies
        rem = parts[0].remainder + parts[1].remainder
        res = _assemble(t, copies, rem)
        res.meta.update(depth=max(p.meta["depth"] for p in parts), split=True)
        return res
    if line_angle(_sub(Y, O), conti_dir) < line_angle(_sub(X, O), conti_dir):
        X, Y = Y, X
    f = Frame(O, _sub(X, O))
    yl = f.to_local(Y)
    if yl[1] < 0:
        f = Frame(O, _sub(X, O), mirror=True)
        yl = f.to_local(Y)
    if yl[0] != 0:
        raise CertificateInvalid("R3 triangle is not exactly right-angled")
    q = yl[1]
    g = greedy_right_triangle(1 / q, _fr(delta0))

    to_world = _scaled_frame_map(f, Q(0), q)
    copies = [_rect_to_world(to_world, r) for r in g.copies]
    marker = R3Marker(_unit(_pt(conti_dir)))
    rem = [(Triangle(tuple(to_world(p) for p in tri.vertices)), marker) for tri in g.triangles]
    res = _assemble(t, copies, rem)
    res.meta.update(depth=g.depth, m=float(1 / q))
    return res


def cover_case(t: Triangle, tag: str, delta_j: float, delta_prev: float, delta0: float, conti_dir
               ) -> CoverResult:
    """Cover ``t`` by Conti rectangles and certified remainder triangles."""
    dj, dp, d0 = _fr(delta_j), _fr(delta_prev), _fr(delta0)
    if tag == "P1":
        return _cover_parallel(t, delta_j, dj, delta_j, 1, conti_dir)
    if tag == "P2":
        K = max(1, int(round(float(d0 / dp))))
        return _cover_parallel(t, delta_prev, d0, delta0, K, conti_dir)
    if tag == "R1":
        return _cover_rotated(t, delta0, delta0, conti_dir)
    if tag == "R2":
        return _cover_rotated(t, delta_prev, delta0, conti_dir)
    if tag == "R3":
        return _cover_r3(t, delta0, conti_dir)
    raise Unclassifiable(f"unknown case {tag!r}")


# ----------------------------------------------------------------------------
# Conti patch split


@dataclass(frozen=True)
class PatchPiece:
    triangle: Triangle
    label: str
    delta: float
    seed: str  # "resolved", "parallel" (stagnant) or "reset" (push-out, delta back to delta0)


def split_conti_patch(patch, delta0: float) -> list[PatchPiece]:
    """The 16 triangles of a patch with the data the next step starts from."""
    out = []
    for tri in patch.triangles:
        T = Triangle(tuple((Q(x), Q(y)) for x, y in tri.vertices))
        if tri.label == "M0":
            out.append(PatchPiece(T, tri.label, 0.0, "resolved"))
        elif tri.label == "M4":
            out.append(PatchPiece(T, tri.label, patch.delta / 2, "parallel"))
        else:
            out.append(PatchPiece(T, tri.label, delta0, "reset"))
    return out


def partition_ok(t: Triangle, res: CoverResult) -> bool:
    """Exact area bookkeeping of a cover."""
    return res.pieces_area() == t.area


def pieces_disjoint(res: CoverResult, samples: Sequence = ()) -> bool:
    """Pairwise interiors disjoint, checked by the separating-axis test on all pieces."""
    polys = [r.corners() for r in res.conti_copies] + [list(tr.vertices) for tr, _ in res.remainder]
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            if _overlap(polys[i], polys[j]):
                return False
    return True


def _overlap(P, Q) -> bool:
    for poly in (P, Q):
        n = len(poly)
        for k in range(n):
            e = _sub(poly[(k + 1) % n], poly[k])
            ax = (-e[1], e[0])
            pa = [_dot(ax, p) for p in P]
            qa = [_dot(ax, q) for q in Q]
            if max(pa) <= min(qa) or max(qa) <= min(pa):
                return False
    return True
