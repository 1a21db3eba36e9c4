"""Conti building blocks: undeformed, variable volume fraction, deformed and three-well patches.

Every patch is a list of 16 triangles with constant gradients.  The canonical
template lives on ``(-1, 1)^2`` and is built in exact rational arithmetic; the
physical patch is the anisotropically squeezed, rotated and scaled copy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from . import geom
from .errors import (
    BadConvexSplit,
    EpsilonTooLarge,
    ExteriorStrain,
    LambdaOutOfRange,
    NotRankOne,
)
from .strain import (
    Interior,
    Mat2,
    Skew2,
    Sym2,
    Well,
    compose,
    hull_query,
    skew_of_outer,
    split_parts,
    symmetrized_rank_one,
    well,
)

# label of each canonical triangle, in template order
LABELS = ("M0",) * 4 + ("M4",) * 2 + ("M1",) * 2 + ("M2", "M2", "M3", "M3", "M2", "M2", "M3", "M3")

# volume parameter of the deformed construction in the (-1,1)^2 template; the
# level set of M0 then covers 1/8 of the rectangle
DEFORMED_LAMBDA = Fraction(3, 4)


@dataclass(frozen=True)
class PatchTriangle:
    vertices: tuple
    gradient: Mat2
    label: str
    offset: tuple = (0.0, 0.0)  # u(x) = gradient @ x + offset on this triangle

    def area(self):
        return geom.area(self.vertices)

    def displacement(self, x) -> tuple:
        g = self.gradient
        return (g.a11 * x[0] + g.a12 * x[1] + self.offset[0],
                g.a21 * x[0] + g.a22 * x[1] + self.offset[1])


@dataclass(frozen=True)
class ContiPatch:
    """One rectangle replaced by a Conti construction.

    ``direction`` is the long axis, ``normal`` the short one; the rectangle is
    ``center + s * direction + t * normal`` with ``|s| <= length/2`` and
    ``|t| <= delta * length/2``.
    """

    center: tuple
    direction: tuple
    normal: tuple
    length: float
    delta: float
    lam: Fraction
    triangles: tuple
    epsilon: float
    M: Mat2
    canonical_areas: tuple = ()
    well_index: Optional[int] = None
    sign: int = 0
    e_tilde: Optional[Sym2] = None
    amplitude: float = 0.0
    delta_rank_one: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def area(self) -> float:
        return self.length * self.length * self.delta

    def corners(self) -> list[tuple]:
        h = self.length / 2
        k = self.delta * h
        c, p, q = self.center, self.direction, self.normal
        return [(c[0] + s * h * p[0] + t * k * q[0], c[1] + s * h * p[1] + t * k * q[1])
                for s, t in ((-1, -1), (1, -1), (1, 1), (-1, 1))]

    def fractions(self) -> dict[str, Fraction]:
        """Exact area fraction per label (from the rational template)."""
        out: dict[str, Fraction] = {}
        for lab, a in zip(LABELS, self.canonical_areas):
            out[lab] = out.get(lab, Fraction(0)) + a / 4
        return out

    def cells(self):
        return [(t.vertices, t.gradient.as_tuple()) for t in self.triangles]


def _check_lambda(lam) -> Fraction:
    lam = Fraction(lam) if not isinstance(lam, float) else Fraction(lam).limit_denominator(10**12)
    if not 0 < lam < 1:
        raise LambdaOutOfRange(f"lambda={float(lam)} outside (0, 1)")
    return lam


@lru_cache(maxsize=256)
def canonical_template(lam: Fraction, squeeze=Fraction(1)):
    """Triangles, nodal values and gradients on ``(-1,1)^2``.

    Returns a tuple of ``(vertices, values, gradient)``.  The four corner
    triangles are split at the foot of the altitude from the diamond tip onto
    the long side, measured after squeezing the vertical axis by ``squeeze`` so
    the halves are near-right triangles in the physical patch.
    """
    z = lam * 0
    one = z + 1
    A, B, C, D = (-one, -one), (one, -one), (one, one), (-one, one)
    Pp, Pm, Tp, Tm = (lam, z), (-lam, z), (z, lam), (z, -lam)
    Nt, Nb = (z, one), (z, -one)
    c = 2 * (1 - lam)
    val = {A: (z, z), B: (z, z), C: (z, z), D: (z, z), Nt: (z, z), Nb: (z, z),
           Pp: (z, c), Pm: (z, -c), Tp: (-c, z), Tm: (c, z)}

    def corner(vtx, t_node, p_node):
        dx, dy = vtx[0] - t_node[0], (vtx[1] - t_node[1]) * squeeze
        px, py = p_node[0] - t_node[0], (p_node[1] - t_node[1]) * squeeze
        s = (px * dx + py * dy) / (dx * dx + dy * dy)
        f = (t_node[0] + s * (vtx[0] - t_node[0]), t_node[1] + s * (vtx[1] - t_node[1]))
        val[f] = tuple(val[t_node][k] + s * (val[vtx][k] - val[t_node][k]) for k in range(2))
        return [(t_node, f, p_node), (f, vtx, p_node)]

    tris = [
        (D, Nt, Tp), (Nt, C, Tp),      # top, M0
        (A, Nb, Tm), (Nb, B, Tm),      # bottom, M0
        (B, C, Pp), (D, A, Pm),        # sides, M4
        (Tm, Pp, Tp), (Tp, Pm, Tm),    # diamond, M1
    ]
    tris += corner(A, Tm, Pm)
    tris += corner(B, Tm, Pp)
    tris += corner(C, Tp, Pp)
    tris += corner(D, Tp, Pm)
    out = []
    for t in tris:
        t = geom.ccw(t)
        values = [val[v] for v in t]
        g = geom.affine_gradient(t, values)
        out.append((t, tuple(values), g))
    return tuple(out)


def undeformed_conti(lam=Fraction(1, 2)) -> ContiPatch:
    """Variable-fraction Conti construction on ``(-1,1)^2`` with zero boundary values."""
    lam = _check_lambda(lam)
    tmpl = canonical_template(lam)
    tris = []
    for (t, _values, g) in tmpl:
        G = Mat2(*g)
        off = (_values[0][0] - (G.a11 * t[0][0] + G.a12 * t[0][1]),
               _values[0][1] - (G.a21 * t[0][0] + G.a22 * t[0][1]))
        tris.append(PatchTriangle(t, G, _label_of(len(tris)), off))
    areas = tuple(geom.area(t) for (t, _, _) in tmpl)
    return ContiPatch(center=(Fraction(0), Fraction(0)), direction=(1, 0), normal=(0, 1),
                      length=2, delta=1, lam=lam, triangles=tuple(tris), epsilon=0.0,
                      M=Mat2(0, 0, 0, 0), canonical_areas=areas)


def _label_of(k: int) -> str:
    return LABELS[k]


def level_set_areas(patch: ContiPatch) -> dict[str, Fraction]:
    out: dict[str, Fraction] = {}
    for lab, a in zip(LABELS, patch.canonical_areas):
        out[lab] = out.get(lab, Fraction(0)) + a
    return out


def expected_gradients(lam) -> dict[str, Mat2]:
    """Closed-form gradients of the variable construction."""
    lam = Fraction(lam)
    k = 2 * (1 - lam) / (1 - (1 - lam) ** 2)
    M2 = Mat2(k, k * (lam - 1), k * (1 - lam), -k)
    Q = Mat2(0, 1, -1, 0)
    return {
        "M0": Mat2(0, 2, 0, 0),
        "M1": Mat2(0, 2 * (lam - 1) / lam, 2 * (1 - lam) / lam, 0),
        "M2": M2,
        "M3": Q.T @ M2 @ Q,
        "M4": Mat2(0, 0, -2, 0),
    }


def _place(M: Mat2, p_hat, q_hat, amp: float, delta: float, eps: float,
           center=(0.0, 0.0), length: float = 2.0, lam=DEFORMED_LAMBDA, **extra) -> ContiPatch:
    """Squeeze the template by ``delta`` and map it onto the frame ``(p_hat, q_hat)``.

    The jump between the M0 and M1 level sets is ``amp * p_hat (x) q_hat`` to
    leading order; M0 cells get exactly ``M + (3/4) amp p_hat (x) q_hat``.
    """
    tmpl = canonical_template(Fraction(lam), float(delta))
    # v has d2 v1 = 2 on M0 and the template M1 value below; scale so the jump is amp
    s = amp * template_scale(lam)
    h = length / 2
    R = np.array([[p_hat[0], q_hat[0]], [p_hat[1], q_hat[1]]], dtype=float)
    Ma = M.as_array()
    c = np.asarray(center, dtype=float)
    tris = []
    for k, (t, values, g) in enumerate(tmpl):
        g = [float(x) for x in g]
        gu = np.array([[delta * g[0], g[1]], [delta * delta * g[2], delta * g[3]]])
        G = Ma + s * R @ gu @ R.T
        verts = []
        for (y1, y2) in t:
            x = c + h * (R @ np.array([float(y1), delta * float(y2)]))
            verts.append((float(x[0]), float(x[1])))
        # displacement at the first vertex: M x + h s R (delta v1, delta^2 v2)
        x0 = np.array(verts[0])
        v0 = values[0]
        u0 = Ma @ x0 + h * s * (R @ np.array([delta * float(v0[0]), delta * delta * float(v0[1])]))
        off = u0 - G @ x0
        tris.append(PatchTriangle(tuple(verts), Mat2.from_array(G), LABELS[k],
                                  (float(off[0]), float(off[1]))))
    # per-label sums do not depend on where the corner triangles are split
    areas = tuple(geom.area(t) for (t, _, _) in canonical_template(Fraction(lam)))
    return ContiPatch(center=tuple(map(float, center)), direction=tuple(map(float, p_hat)),
                      normal=tuple(map(float, q_hat)), length=float(length), delta=float(delta),
                      lam=Fraction(lam), triangles=tuple(tris), epsilon=float(eps), M=M,
                      canonical_areas=areas, amplitude=float(amp), **extra)


def rank_one_factors(J: Mat2, tol: float = 1e-10) -> tuple[float, tuple, tuple]:
    """``J = amp * p (x) q`` with unit ``p``, ``q``; raises NotRankOne otherwise."""
    u, sv, vt = np.linalg.svd(J.as_array())
    if sv[0] <= tol:
        raise NotRankOne("jump vanishes")
    if sv[1] > tol * max(1.0, sv[0]):
        raise NotRankOne(f"second singular value {sv[1]:.3e}")
    p, q = u[:, 0], vt[0]
    if abs(p @ q) > tol:
        raise NotRankOne(f"a.n = {p @ q:.3e} is not zero")
    # fix the sign so the construction is deterministic
    k = int(np.argmax(np.abs(p)))
    if p[k] < 0:
        p, q = -p, -q
    return float(sv[0]), (float(p[0]), float(p[1])), (float(q[0]), float(q[1]))


def deformed_conti(M: Mat2, M0: Mat2, M1: Mat2, epsilon: float, center=(0.0, 0.0),
                   length: float = 2.0, delta: Optional[float] = None) -> ContiPatch:
    """Replace ``M = M0/4 + 3 M1/4`` on a thin rectangle.

    The rectangle has aspect ``epsilon / (20 |a|)`` unless a smaller ``delta`` is
    requested, where ``M1 - M0 = a (x) n``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    mix = M0 * 0.25 + M1 * 0.75
    if (mix - M).norm() > 1e-10 * max(1.0, M.norm(), M0.norm(), M1.norm()):
        raise BadConvexSplit("M is not M0/4 + 3 M1/4")
    amp, p, q = rank_one_factors(M0 - M1)
    d = epsilon / (20 * amp)
    if delta is not None:
        d = min(d, delta)
    return _place(M, p, q, amp, d, epsilon, center, length)


def push_out_strain(e: Sym2, w: Well) -> Sym2:
    """``e_tilde`` with ``e = well_i/4 + 3 e_tilde/4``."""
    return (e * 4 - w.matrix) * (1 / 3)


@dataclass(frozen=True)
class ThreeWellData:
    """Everything a three-well patch needs except its placement."""

    well_index: int
    sign: int
    p: tuple  # long axis
    q: tuple  # short axis
    amplitude: float
    e_tilde: Sym2
    M0: Mat2
    M1: Mat2
    decomposition: object
    delta_rank_one: float
    delta: float
    skew_increment: float  # omega of the M0 cells minus omega of M


def three_well_data(M: Mat2, well_index: int, epsilon: float, sign: int = 1,
                    eps0: Optional[float] = None, check: bool = True) -> ThreeWellData:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    e, S = split_parts(M)
    hq = hull_query(e)
    if not isinstance(hq, Interior):
        raise ExteriorStrain(f"strain {e.as_tuple()} not interior")
    w = well(well_index)
    r = (e - w.matrix).norm()
    if eps0 is None:
        eps0 = epsilon
    if check:
        if not 0 < epsilon <= eps0 or eps0 > hq.d0 / 100 + 1e-15:
            raise EpsilonTooLarge(f"need 0 < eps <= eps0 <= d0/100 = {hq.d0 / 100:.3e}")
        if r > hq.dK + 4 * eps0 + 1e-12:
            raise EpsilonTooLarge(f"well {well_index} is not near-nearest")
    et = push_out_strain(e, w)
    dec = symmetrized_rank_one(w.matrix, et)
    amp = dec.amplitude
    p, q = (dec.a_unit, dec.n) if sign > 0 else (dec.n, dec.a_unit)
    wt = dec.skew().omega_tilde
    delta_rank_one = epsilon / (20 * r)
    return ThreeWellData(
        well_index=well_index, sign=sign, p=tuple(p), q=tuple(q), amplitude=amp, e_tilde=et,
        M0=compose(w.matrix, Skew2(S.omega_tilde + 0.75 * sign * wt)),
        M1=compose(et, Skew2(S.omega_tilde - 0.25 * sign * wt)),
        decomposition=dec, delta_rank_one=delta_rank_one,
        delta=min(delta_rank_one, epsilon / (20 * amp)), skew_increment=0.75 * sign * wt)


def three_well_conti(M: Mat2, well_index: int, epsilon: float, sign: int = 1,
                     eps0: Optional[float] = None, center=(0.0, 0.0), length: float = 2.0,
                     check: bool = True, delta: Optional[float] = None) -> ContiPatch:
    """Conti patch whose M0 cells carry the strain of well ``well_index`` exactly.

    ``delta`` overrides the aspect ratio (used by the relaxed toy runs).
    """
    d = three_well_data(M, well_index, epsilon, sign, eps0, check)
    patch = _place(M, d.p, d.q, d.amplitude, d.delta if delta is None else delta, epsilon,
                   center, length, well_index=well_index, sign=sign, e_tilde=d.e_tilde,
                   delta_rank_one=d.delta_rank_one)
    patch.extra["M0"] = d.M0
    patch.extra["M1"] = d.M1
    patch.extra["decomposition"] = d.decomposition
    return patch


def template_scale(lam=DEFORMED_LAMBDA) -> float:
    """Factor turning the template gradients into a jump of unit amplitude."""
    return 1.0 / (2 - float(expected_gradients(lam)["M1"].a12))


def patch_targets(patch: ContiPatch) -> dict[str, Mat2]:
    """Nominal matrices the patch gradients approximate (``M2`` also for ``M3``)."""
    M0, M1 = patch.extra["M0"], patch.extra["M1"]
    M2 = M0 * 0.2 + M1 * 0.8
    return {"M0": M0, "M1": M1, "M2": M2, "M3": M2, "M4": patch.M}


def max_deviation(patch: ContiPatch, label: str, target: Mat2) -> float:
    return max((t.gradient - target).norm() for t in patch.triangles if t.label == label)


def boundary_residual(patch: ContiPatch) -> float:
    """Max of ``|u(x) - M x|`` over triangle vertices on the rectangle boundary."""
    h = patch.length / 2
    k = patch.delta * h
    c, p, q = patch.center, patch.direction, patch.normal
    M = patch.M
    worst = 0.0
    for t in patch.triangles:
        for x in t.vertices:
            dx = (x[0] - c[0], x[1] - c[1])
            s = dx[0] * p[0] + dx[1] * p[1]
            r = dx[0] * q[0] + dx[1] * q[1]
            if abs(abs(s) - h) <= 1e-9 * h or abs(abs(r) - k) <= 1e-9 * max(k, 1e-300):
                u = t.displacement(x)
                mx = M.apply(x)
                worst = max(worst, math.hypot(u[0] - mx[0], u[1] - mx[1]))
    return worst


def vertex_residual(patch: ContiPatch) -> float:
    """Max mismatch of the affine pieces at shared vertices (displacement continuity)."""
    seen: dict = {}
    worst = 0.0
    for t in patch.triangles:
        for x in t.vertices:
            key = (round(float(x[0]), 12), round(float(x[1]), 12))
            u = t.displacement(x)
            if key in seen:
                v = seen[key]
                worst = max(worst, math.hypot(float(u[0] - v[0]), float(u[1] - v[1])))
            else:
                seen[key] = u
    return worst


def mean_gradient(patch: ContiPatch) -> Mat2:
    tot = 0.0
    acc = np.zeros((2, 2))
    for t in patch.triangles:
        a = float(t.area())
        acc += a * np.array(t.gradient.as_array(), dtype=float)
        tot += a
    return Mat2.from_array(acc / tot)


def strains(patch: ContiPatch) -> list[Sym2]:
    return [split_parts(t.gradient, trace_free=False)[0] for t in patch.triangles]


__all__ = [
    "ContiPatch", "PatchTriangle", "ThreeWellData", "undeformed_conti", "deformed_conti",
    "three_well_conti", "three_well_data", "template_scale",
    "canonical_template", "expected_gradients", "level_set_areas", "rank_one_factors",
    "push_out_strain", "patch_targets", "max_deviation", "boundary_residual",
    "vertex_residual", "mean_gradient", "strains", "skew_of_outer",
]
