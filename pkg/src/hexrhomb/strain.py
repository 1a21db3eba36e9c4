"""Strain-space geometry of the three hexagonal-to-rhombic wells.

Trace-free symmetric 2x2 matrices are stored as ``(alpha, beta)`` for
``[[alpha, beta], [beta, -alpha]]``.  In these coordinates the spectral norm is
the Euclidean norm, so hull and distance queries are planar geometry on the
equilateral triangle spanned by the wells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .errors import DegenerateDifference, NonTraceFree, OutsideStar

TOL = 1e-12
SQRT3 = math.sqrt(3.0)



@dataclass(frozen=True)
class Sym2:
    """Trace-free symmetric matrix ``[[alpha, beta], [beta, -alpha]]``."""

    alpha: float
    beta: float

    def __add__(self, other: "Sym2") -> "Sym2":
        return Sym2(self.alpha + other.alpha, self.beta + other.beta)

    def __sub__(self, other: "Sym2") -> "Sym2":
        return Sym2(self.alpha - other.alpha, self.beta - other.beta)

    def __neg__(self) -> "Sym2":
        return Sym2(-self.alpha, -self.beta)

    def __mul__(self, s) -> "Sym2":
        return Sym2(self.alpha * s, self.beta * s)

    __rmul__ = __mul__

    def norm(self) -> float:
        return math.hypot(float(self.alpha), float(self.beta))

    def as_matrix(self) -> "Mat2":
        return Mat2(self.alpha, self.beta, self.beta, -self.alpha)

    def as_tuple(self) -> tuple:
        return (self.alpha, self.beta)


@dataclass(frozen=True, order=True)
class Skew2:
    """Skew matrix ``[[0, w], [-w, 0]]`` identified with its (1,2) entry ``w``."""

    omega_tilde: float

    def as_matrix(self) -> "Mat2":
        w = self.omega_tilde
        return Mat2(0 * w, w, -w, 0 * w)

    def norm(self) -> float:
        return abs(float(self.omega_tilde))


@dataclass(frozen=True)
class Mat2:
    a11: float
    a12: float
    a21: float
    a22: float

    @classmethod
    def from_array(cls, arr) -> "Mat2":
        a = np.asarray(arr, dtype=float).reshape(2, 2)
        return cls(float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]], dtype=float)

    def as_tuple(self) -> tuple:
        return (self.a11, self.a12, self.a21, self.a22)

    def __add__(self, o: "Mat2") -> "Mat2":
        return Mat2(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)

    def __sub__(self, o: "Mat2") -> "Mat2":
        return Mat2(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)

    def __neg__(self) -> "Mat2":
        return Mat2(-self.a11, -self.a12, -self.a21, -self.a22)

    def __mul__(self, s) -> "Mat2":
        return Mat2(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)

    __rmul__ = __mul__

    def __matmul__(self, o: "Mat2") -> "Mat2":
        return Mat2(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )

    def apply(self, v):
        return (self.a11 * v[0] + self.a12 * v[1], self.a21 * v[0] + self.a22 * v[1])

    @property
    def T(self) -> "Mat2":
        return Mat2(self.a11, self.a21, self.a12, self.a22)

    def trace(self):
        return self.a11 + self.a22

    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    def norm(self) -> float:
        """Spectral norm."""
        return float(np.linalg.norm(self.as_array(), 2))


def outer(a, b) -> Mat2:
    return Mat2(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])


def sym_product(a, n) -> Sym2:
    """``(a (x) n + n (x) a) / 2`` for orthogonal ``a``, ``n`` (trace-free)."""
    return Sym2(a[0] * n[0], (a[0] * n[1] + a[1] * n[0]) / 2)


def skew_of_outer(a, n) -> Skew2:
    return Skew2((a[0] * n[1] - a[1] * n[0]) / 2)


@dataclass(frozen=True)
class Well:
    index: int
    matrix: Sym2


WELLS: tuple[Well, ...] = (
    Well(1, Sym2(1.0, 0.0)),
    Well(2, Sym2(-0.5, SQRT3 / 2)),
    Well(3, Sym2(-0.5, -SQRT3 / 2)),
)

WELL_ARRAY = np.array([[w.matrix.alpha, w.matrix.beta] for w in WELLS])

# outward unit normals of the hull edges opposite to wells 1, 2, 3; every edge
# line sits at distance 1/2 from the origin
EDGE_NORMALS = np.array([[-1.0, 0.0], [0.5, SQRT3 / 2], [0.5, -SQRT3 / 2]])


def well(i: int) -> Well:
    return WELLS[i - 1]


def split_parts(M: Mat2, trace_free: bool = True, tol: float = TOL) -> tuple[Sym2, Skew2]:
    """Symmetric and skew parts of ``M``.

    With ``trace_free`` the symmetric part is returned as a :class:`Sym2` and a
    nonzero trace raises :class:`NonTraceFree`.  Without it the trace part is
    dropped silently.
    """
    if trace_free and abs(float(M.trace())) > tol:
        raise NonTraceFree(f"trace {float(M.trace()):.3e} exceeds {tol:g}")
    e = Sym2((M.a11 - M.a22) / 2, (M.a12 + M.a21) / 2)
    w = Skew2((M.a12 - M.a21) / 2)
    return e, w


def compose(e: Sym2, w: Skew2) -> Mat2:
    return e.as_matrix() + w.as_matrix()


# ----------------------------------------------------------------------------
# hull queries


@dataclass(frozen=True)
class Interior:
    d0: float
    dK: float
    nearest_well: Well


@dataclass(frozen=True)
class Boundary:
    pass


@dataclass(frozen=True)
class Exterior:
    pass


HullResult = Union[Interior, Boundary, Exterior]


def edge_distances(e: Sym2) -> np.ndarray:
    """Signed distances to the three hull edge lines, positive inside."""
    p = np.array([float(e.alpha), float(e.beta)])
    return 0.5 - EDGE_NORMALS @ p


def well_distances(e: Sym2) -> np.ndarray:
    p = np.array([float(e.alpha), float(e.beta)])
    return np.hypot(*(WELL_ARRAY - p).T)


def nearest_well(e: Sym2, tol: float = TOL) -> Well:
    d = well_distances(e)
    best = d.min()
    for k in range(3):
        if d[k] <= best + tol:
            return WELLS[k]
    raise AssertionError("unreachable")


def dist_to_boundary(e: Sym2) -> float:
    """Distance from a point of the closed hull to its boundary."""
    return float(max(edge_distances(e).min(), 0.0))


def hull_query(e: Sym2, tol: float = TOL) -> HullResult:
    sd = edge_distances(e)
    m = float(sd.min())
    if m < -tol:
        return Exterior()
    if m <= tol:
        return Boundary()
    return Interior(d0=m, dK=float(well_distances(e).min()), nearest_well=nearest_well(e))


def barycentric(e: Sym2) -> np.ndarray:
    """Weights ``w`` with ``sum(w) = 1`` and ``sum(w_i * well_i) = e``."""
    A = np.vstack([WELL_ARRAY.T, np.ones(3)])
    return np.linalg.solve(A, np.array([float(e.alpha), float(e.beta), 1.0]))


# ----------------------------------------------------------------------------
# symmetrized rank-one decompositions


def _half_angle_frame(phi: float) -> tuple[tuple[float, float], tuple[float, float]]:
    t = phi / 2 + math.pi / 4
    return (math.sin(t), -math.cos(t)), (math.cos(t), math.sin(t))


@dataclass(frozen=True)
class RankOneDecomposition:
    """``difference = a (.) n`` with amplitude ``a`` orthogonal to unit ``n``.

    ``a = 2 |difference| a(phi)`` where ``a(phi)`` is the unit direction from
    the half-angle parametrisation; it is exposed as :attr:`a_unit`.
    """

    a: tuple[float, float]
    n: tuple[float, float]
    phi: float

    @property
    def amplitude(self) -> float:
        return math.hypot(*self.a)

    @property
    def a_unit(self) -> tuple[float, float]:
        s = self.amplitude
        return (self.a[0] / s, self.a[1] / s)

    def sym(self) -> Sym2:
        return sym_product(self.a, self.n)

    def skew(self) -> Skew2:
        """``omega(a (x) n)``."""
        return skew_of_outer(self.a, self.n)

    def equivalent_pairs(self) -> Iterator[tuple[tuple[float, float], tuple[float, float]]]:
        """All ``(a, n)`` with unit ``n`` giving the same ``a (.) n``."""
        s = self.amplitude
        au = self.a_unit
        yield self.a, self.n
        yield (-self.a[0], -self.a[1]), (-self.n[0], -self.n[1])
        yield (s * self.n[0], s * self.n[1]), au
        yield (-s * self.n[0], -s * self.n[1]), (-au[0], -au[1])


def difference_angle(d: Sym2) -> float:
    return math.atan2(float(d.beta), float(d.alpha))


def symmetrized_rank_one(e1: Sym2, e2: Sym2, tol: float = TOL) -> RankOneDecomposition:
    d = e1 - e2
    r = d.norm()
    if r <= tol:
        raise DegenerateDifference("strains coincide")
    phi = difference_angle(d)
    au, n = _half_angle_frame(phi)
    return RankOneDecomposition(a=(2 * r * au[0], 2 * r * au[1]), n=n, phi=phi)


def rank_one_with_skew(e: Sym2, well_index: int, sign: int = 1) -> Mat2:
    """A gradient with strain ``e`` that is rank-one connected to a well.

    The skew part is ``sign * omega(a (x) n)`` for ``e - well_i = a (.) n``.
    """
    dec = symmetrized_rank_one(e, well(well_index).matrix)
    return compose(e, Skew2(sign * dec.skew().omega_tilde))


# ----------------------------------------------------------------------------
# star-shaped strain region and the angle separation between wells


def star_vertices(d: float) -> np.ndarray:
    """Hexagram-like star: the wells alternating with notches at the edge midpoints.

    Each notch sits at radius ``(1 - d) / 2``, i.e. ``d / 2`` inside the
    midpoint of the opposite hull edge.
    """
    if not 0 < d < 0.5:
        raise ValueError("d must lie in (0, 1/2)")
    r = (1 - d) / 2
    pts = []
    for k in range(3):
        a = 2 * math.pi * k / 3
        pts.append((math.cos(a), math.sin(a)))
        b = a + math.pi / 3
        pts.append((r * math.cos(b), r * math.sin(b)))
    return np.array(pts)


def in_star(e: Sym2, d: float, tol: float = 1e-12) -> bool:
    poly = star_vertices(d)
    x, y = float(e.alpha), float(e.beta)
    inside = False
    n = len(poly)
    for k in range(n):
        (x1, y1), (x2, y2) = poly[k], poly[(k + 1) % n]
        # on-edge counts as inside
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        seg = math.hypot(x2 - x1, y2 - y1)
        if abs(cross) <= tol * seg and min(x1, x2) - tol <= x <= max(x1, x2) + tol \
                and min(y1, y2) - tol <= y <= max(y1, y2) + tol:
            return True
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xi > x:
                inside = not inside
    return inside


def sector_half_width(d: float) -> float:
    """Half opening of the cone of ``e - well_i`` directions for ``e`` in the star."""
    r = (1 - d) / 2
    return math.atan2(r * SQRT3 / 2, 1 - r / 2)


def sector_bounds(d: float) -> dict[int, tuple[float, float]]:
    """Open interval of difference angles ``phi(e - well_i)`` per well."""
    g = sector_half_width(d)
    centers = {1: math.pi, 2: -math.pi / 3, 3: math.pi / 3}
    return {i: (c - g, c + g) for i, c in centers.items()}


def gap_constant(d: float) -> float:
    """Angular margin by which the star sectors sit inside the hull sectors."""
    return math.pi / 6 - sector_half_width(d)


def _line_angle(u, v) -> float:
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), abs(u[0] * v[0] + u[1] * v[1]))


def angle_gap_check(e_hat: Sym2, e_bar: Sym2, wells: tuple[int, int], d: float) -> bool:
    """Directions of the decompositions towards two distinct wells stay apart.

    Returns true iff every angle between ``{a, n}`` of the first and ``{a, n}``
    of the second decomposition lies in ``(C(d), pi - C(d))``.
    """
    i1, i2 = wells
    if i1 == i2:
        raise ValueError("wells must be distinct")
    for e in (e_hat, e_bar):
        if not in_star(e, d):
            raise OutsideStar(f"strain {e.as_tuple()} outside the star for d={d}")
    c = gap_constant(d)
    dirs = []
    for e, i in ((e_hat, i1), (e_bar, i2)):
        if (e - well(i).matrix).norm() <= TOL:
            return True
        dec = symmetrized_rank_one(e, well(i).matrix)
        dirs.append((dec.a_unit, dec.n))
    for m1 in dirs[0]:
        for m2 in dirs[1]:
            if _line_angle(m1, m2) <= c - 1e-12:
                return False
    return True


# ----------------------------------------------------------------------------
# vectorised helpers used by the engine


def strains_of(grads: np.ndarray) -> np.ndarray:
    """``(n, 4)`` gradients ``a11 a12 a21 a22`` to ``(n, 2)`` alpha/beta strains."""
    return np.stack([(grads[:, 0] - grads[:, 3]) / 2, (grads[:, 1] + grads[:, 2]) / 2], axis=1)


def skews_of(grads: np.ndarray) -> np.ndarray:
    return (grads[:, 1] - grads[:, 2]) / 2


def boundary_distances(strains: np.ndarray) -> np.ndarray:
    """Signed distance to the hull boundary (negative outside)."""
    return (0.5 - strains @ EDGE_NORMALS.T).min(axis=1)


def nearest_wells(strains: np.ndarray, tol: float = TOL) -> tuple[np.ndarray, np.ndarray]:
    """Nearest well index (1-based, ties to lowest) and distance, row-wise."""
    d = np.sqrt(((strains[:, None, :] - WELL_ARRAY[None, :, :]) ** 2).sum(axis=2))
    best = d.min(axis=1)
    idx = np.argmax(d <= best[:, None] + tol, axis=1)
    return idx + 1, best
