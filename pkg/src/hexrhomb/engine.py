"""The convex integration iteration on a flat cell store.

A state holds every cell of the current partition in parallel numpy arrays.
Each step picks unresolved cells, inscribes the largest Conti rectangle with
the cell's own direction and aspect, replaces it by the 16 patch triangles and
fan-triangulates the rest of the cell.  Cells that are not picked are carried
unchanged.  Every cell edge remembers the line it lies on (see :mod:`sweep`),
which makes the BV and continuity sweeps exact on the non-conforming mesh.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import sweep
from .conti import DEFORMED_LAMBDA, LABELS, canonical_template, template_scale, three_well_data
from .errors import (
    BoundaryStrainNotInterior,
    ConfigError,
    ExteriorStrain,
    InvariantViolation,
    NonTraceFree,
)
from .strain import (
    Interior,
    Mat2,
    WELL_ARRAY,
    boundary_distances,
    hull_query,
    nearest_wells,
    skews_of,
    split_parts,
    strains_of,
)

log = logging.getLogger(__name__)

LABEL_CODE = {"M0": 0, "M1": 1, "M2": 2, "M3": 3, "M4": 4}
REMAINDER = 5
SIDES = ("b", "r", "t", "l")
# template corners (y1, y2) and the side joining corner k to corner k+1
CORNERS = ((-1, -1), (1, -1), (1, 1), (-1, 1))
SIDE_OF_PAIR = {frozenset((0, 1)): "b", frozenset((1, 2)): "r",
                frozenset((2, 3)): "t", frozenset((3, 0)): "l"}


# ----------------------------------------------------------------------------
# configuration and constants


@dataclass(frozen=True)
class EngineConfig:
    M: Mat2 = Mat2(0.0, 0.0, 0.0, 0.0)
    eps0: Optional[float] = None
    v0: float = 1e-6
    delta0_override: Optional[float] = None
    max_steps: int = 5
    strict: bool = False
    # at most this factor of cell-count growth per step (None: refine everything)
    growth_cap: Optional[float] = 4.0
    sliver_area: float = 1e-13

    def validate(self) -> "Constants":
        if self.strict and self.delta0_override is not None:
            raise ConfigError("strict mode forbids delta0_override")
        if self.delta0_override is not None and not 0 < self.delta0_override < 1:
            raise ConfigError("delta0_override must lie in (0, 1)")
        if not 0 < self.v0 < 1:
            raise ConfigError("v0 must lie in (0, 1)")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        if self.growth_cap is not None and self.growth_cap <= 1:
            raise ConfigError("growth_cap must exceed 1")
        return constants(self.M, self.eps0, self.delta0_override)


@dataclass(frozen=True)
class Constants:
    d0: float
    dK: float
    eps0: float
    delta0: float
    K00: int
    N0: int
    C_bar: float
    well0: int

    @property
    def sym_floor(self) -> float:
        return min(1 / 16, self.d0)

    @property
    def dist_floor(self) -> float:
        return min(self.dK, 1 / 8)


def push_out_bound(dK: float) -> int:
    """Largest number of push-outs towards one well before the strain leaves the hull."""
    return math.ceil(math.log(3 / dK) / math.log(101 / 100))


def skew_bound(N0: int, eps0: float) -> float:
    return max(100.0, 20 * (N0 + 1) * (1 + eps0))


def constants(M: Mat2, eps0: Optional[float] = None, delta0_override: Optional[float] = None
              ) -> Constants:
    if abs(float(M.trace())) > 1e-12:
        raise NonTraceFree("boundary matrix must be trace-free")
    e, _ = split_parts(M)
    hq = hull_query(e)
    if not isinstance(hq, Interior):
        raise BoundaryStrainNotInterior(f"e(M) = {e.as_tuple()} is not interior to conv(K)")
    default = min(hq.d0 / 100, 1 / 1600)
    if eps0 is None:
        eps0 = default
    if not 0 < eps0 <= hq.d0 / 100 * (1 + 1e-12):
        raise ConfigError(f"eps0 must lie in (0, d0/100] = (0, {hq.d0 / 100:.4g}]")
    delta0 = eps0 / (100 * hq.dK) if delta0_override is None else delta0_override
    # shrink to the largest value with integer reciprocal
    K = math.ceil(1 / delta0 - 1e-9)
    N0 = push_out_bound(hq.dK)
    return Constants(d0=hq.d0, dK=hq.dK, eps0=eps0, delta0=1 / K, K00=K, N0=N0,
                     C_bar=skew_bound(N0, eps0), well0=hq.nearest_well.index)


# ----------------------------------------------------------------------------
# state


@dataclass(frozen=True)
class Cell:
    triangle: tuple
    gradient: Mat2
    eps: float
    delta: float
    ref_well: int
    skew: float
    tag: str
    lineage: tuple  # (parent id, label, push-outs in the current parallel stretch)
    resolved: bool


class Lines:
    """Append-only table of supporting lines (origin, unit direction)."""

    def __init__(self, origins=None, directions=None):
        self.o: list = [] if origins is None else [tuple(x) for x in np.asarray(origins).tolist()]
        self.d: list = [] if directions is None else [tuple(x) for x in np.asarray(directions).tolist()]

    def add(self, p, q) -> int:
        dx, dy = q[0] - p[0], q[1] - p[1]
        n = math.hypot(dx, dy)
        self.o.append((p[0], p[1]))
        self.d.append((dx / n, dy / n))
        return len(self.o) - 1

    def arrays(self):
        return np.asarray(self.o, float).reshape(-1, 2), np.asarray(self.d, float).reshape(-1, 2)

    def copy(self) -> "Lines":
        return Lines(self.o, self.d)


FIELDS = ("X", "G", "eps", "delta", "well", "phase", "label", "parent", "born",
          "resolved_at", "inc_sign", "pushouts", "rotated", "frozen", "EL")


@dataclass
class EngineState:
    j: int
    config: EngineConfig
    consts: Constants
    X: np.ndarray  # (n, 3, 2) counterclockwise vertices
    G: np.ndarray  # (n, 4) gradients a11 a12 a21 a22
    eps: np.ndarray
    delta: np.ndarray
    well: np.ndarray  # index of the reference well, 1..3
    phase: np.ndarray  # 0 unresolved, else the well the strain sits in
    label: np.ndarray  # piece of the creating patch, 5 for carried remainder
    parent: np.ndarray
    born: np.ndarray
    resolved_at: np.ndarray  # step at which the cell became resolved, -1 if not
    inc_sign: np.ndarray  # sign of the last skew increment on the lineage
    pushouts: np.ndarray
    rotated: np.ndarray  # reference well changed at the creating modification
    frozen: np.ndarray
    EL: np.ndarray  # (n, 3) line id of edge k (vertex k to k+1)
    lines: Lines
    domain: np.ndarray  # (4, 2) corners of the rotated square
    stats: dict = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return len(self.X)

    def areas(self) -> np.ndarray:
        X = self.X
        return 0.5 * ((X[:, 1, 0] - X[:, 0, 0]) * (X[:, 2, 1] - X[:, 0, 1])
                      - (X[:, 1, 1] - X[:, 0, 1]) * (X[:, 2, 0] - X[:, 0, 0]))

    def perimeters(self) -> np.ndarray:
        d = np.roll(self.X, -1, axis=1) - self.X
        return np.hypot(d[..., 0], d[..., 1]).sum(axis=1)

    def unresolved_area(self) -> float:
        return float(self.areas()[self.phase == 0].sum())

    def strains(self) -> np.ndarray:
        return strains_of(self.G)

    def skews(self) -> np.ndarray:
        return skews_of(self.G)

    def events(self) -> sweep.Events:
        LO, LD = self.lines.arrays()
        return sweep.edge_events(self.X, self.EL, LO, LD)

    def cell(self, i: int) -> Cell:
        tag = "resolved" if self.phase[i] else ("rotated" if self.rotated[i] else "parallel")
        return Cell(triangle=tuple(map(tuple, self.X[i])), gradient=Mat2(*self.G[i]),
                    eps=float(self.eps[i]), delta=float(self.delta[i]), ref_well=int(self.well[i]),
                    skew=float(self.skews()[i]), tag=tag,
                    lineage=(int(self.parent[i]), int(self.label[i]), int(self.pushouts[i])),
                    resolved=bool(self.phase[i]))

    def fingerprint(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for name in ("X", "G", "phase"):
            h.update(np.ascontiguousarray(getattr(self, name)).tobytes())
        return h.hexdigest()


# ----------------------------------------------------------------------------
# template geometry


@dataclass(frozen=True)
class _Template:
    y: tuple  # 16 triangles of (y1, y2) float triples
    g: tuple  # template gradients per triangle
    labels: tuple
    edges: tuple  # per triangle, three edge codes: a side letter or an internal line index
    internal: tuple  # internal lines as (point, point) in template coordinates


@lru_cache(maxsize=4096)
def _template(delta: float) -> _Template:
    tmpl = canonical_template(DEFORMED_LAMBDA, Fraction(delta))
    internal: list = []
    edges = []
    for (tri, _, _) in tmpl:
        codes = []
        for k in range(3):
            a, b = tri[k], tri[(k + 1) % 3]
            code = None
            for side, (ax, val) in zip(SIDES, ((1, -1), (0, 1), (1, 1), (0, -1))):
                if a[ax] == val and b[ax] == val:
                    code = side
            if code is None:
                for m, (p, q) in enumerate(internal):
                    d = (q[0] - p[0], q[1] - p[1])
                    if all(d[0] * (x[1] - p[1]) - d[1] * (x[0] - p[0]) == 0 for x in (a, b)):
                        code = m
                        break
                if code is None:
                    internal.append((a, b))
                    code = len(internal) - 1
            codes.append(code)
        edges.append(tuple(codes))
    fl = lambda p: (float(p[0]), float(p[1]))  # noqa: E731
    return _Template(
        y=tuple(tuple(fl(p) for p in tri) for (tri, _, _) in tmpl),
        g=tuple(tuple(float(x) for x in g) for (_, _, g) in tmpl),
        labels=LABELS,
        edges=tuple(edges),
        internal=tuple((fl(p), fl(q)) for p, q in internal),
    )


_SCALE = template_scale(DEFORMED_LAMBDA)


def _rot_grad(M, p, q, s, delta, g):
    """``M + s R grad_U R^T`` with ``R = [p q]`` and the squeezed template gradient."""
    A00, A01, A10, A11 = delta * g[0], g[1], delta * delta * g[2], delta * g[3]
    out = []
    for i in range(2):
        for k in range(2):
            out.append(A00 * p[i] * p[k] + A01 * p[i] * q[k] + A10 * q[i] * p[k] + A11 * q[i] * q[k])
    return (M[0] + s * out[0], M[1] + s * out[1], M[2] + s * out[2], M[3] + s * out[3])


# ----------------------------------------------------------------------------
# building blocks


@dataclass
class _Children:
    X: list = field(default_factory=list)
    G: list = field(default_factory=list)
    EL: list = field(default_factory=list)
    label: list = field(default_factory=list)


def _place_patch(out: _Children, lines: Lines, G, data, delta: float, center, L: float,
                 side_ids: dict) -> None:
    """Append the 16 cells of a Conti patch on the rectangle ``center, L, delta``."""
    tm = _template(delta)
    p, q = data.p, data.q
    hp = (0.5 * L * p[0], 0.5 * L * p[1])
    hq = (0.5 * delta * L * q[0], 0.5 * delta * L * q[1])

    def world(y):
        return (center[0] + y[0] * hp[0] + y[1] * hq[0], center[1] + y[0] * hp[1] + y[1] * hq[1])

    ids = dict(side_ids)
    for m, (a, b) in enumerate(tm.internal):
        ids[m] = lines.add(world(a), world(b))
    flip = p[0] * q[1] - p[1] * q[0] < 0
    s = data.amplitude * _SCALE
    M0 = data.M0.as_tuple()
    for y, g, lab, codes in zip(tm.y, tm.g, tm.labels, tm.edges):
        verts = [world(v) for v in y]
        el = [ids[c] for c in codes]
        if flip:
            verts = [verts[0], verts[2], verts[1]]
            el = [el[2], el[1], el[0]]
        out.X.append(verts)
        out.G.append(M0 if lab == "M0" else _rot_grad(G, p, q, s, delta, g))
        out.EL.append(el)
        out.label.append(LABEL_CODE[lab])


def inscribed_rectangle(tri, p, q, delta: float):
    """Largest rectangle ``center + [-L/2, L/2] p + [-delta L/2, delta L/2] q`` inside ``tri``.

    ``tri`` must be counterclockwise.  Returns ``(center, L)``.
    """
    rows = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        ex, ey = b[0] - a[0], b[1] - a[1]
        n = math.hypot(ex, ey)
        ox, oy = ey / n, -ex / n
        w = 0.5 * (abs(ox * p[0] + oy * p[1]) + delta * abs(ox * q[0] + oy * q[1]))
        rows.append((ox, oy, w, ox * a[0] + oy * a[1]))
    (a1, b1, c1, d1), (a2, b2, c2, d2), (a3, b3, c3, d3) = rows
    det = a1 * (b2 * c3 - b3 * c2) - b1 * (a2 * c3 - a3 * c2) + c1 * (a2 * b3 - a3 * b2)
    cx = (d1 * (b2 * c3 - b3 * c2) - b1 * (d2 * c3 - d3 * c2) + c1 * (d2 * b3 - d3 * b2)) / det
    cy = (a1 * (d2 * c3 - d3 * c2) - d1 * (a2 * c3 - a3 * c2) + c1 * (a2 * d3 - a3 * d2)) / det
    L = (a1 * (b2 * d3 - b3 * d2) - b1 * (a2 * d3 - a3 * d2) + d1 * (a2 * b3 - a3 * b2)) / det
    return (cx, cy), L


def _remainder(out: _Children, lines: Lines, tri, el, corners, rect_ids: dict, tol: float) -> None:
    """Fan-triangulate ``tri`` minus the inscribed rectangle with ``corners`` (template order)."""
    # counterclockwise order of the template corners in the plane
    c0, c1, c3 = corners[0], corners[1], corners[3]
    ccw = (c1[0] - c0[0]) * (c3[1] - c0[1]) - (c1[1] - c0[1]) * (c3[0] - c0[0]) > 0
    order = [0, 1, 2, 3] if ccw else [0, 3, 2, 1]
    pos = {k: i for i, k in enumerate(order)}
    first, last = [], []  # touching corner nearest to the start / end vertex of each side
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        ex, ey = b[0] - a[0], b[1] - a[1]
        n = math.hypot(ex, ey)
        ox, oy = ey / n, -ex / n
        h = [ox * c[0] + oy * c[1] for c in corners]
        hm = max(h)
        touch = [k for k in range(4) if h[k] >= hm - tol]
        along = sorted(touch, key=lambda k: (corners[k][0] - a[0]) * ex + (corners[k][1] - a[1]) * ey)
        first.append(along[0])
        last.append(along[-1])
        if len(touch) == 2:
            rect_ids[SIDE_OF_PAIR[frozenset(touch)]] = el[i]
    for k in range(4):
        side = SIDE_OF_PAIR[frozenset((k, (k + 1) % 4))]
        if side not in rect_ids:
            rect_ids[side] = lines.add(corners[k], corners[(k + 1) % 4])
    for i in range(3):
        v = tri[(i + 1) % 3]
        a_k, b_k = last[i], first[(i + 1) % 3]
        steps = (pos[b_k] - pos[a_k]) % 4
        chain = [order[(pos[b_k] - m) % 4] for m in range(steps + 1)]
        prev_id = el[(i + 1) % 3]
        for m in range(steps):
            k1, k2 = chain[m], chain[m + 1]
            side = rect_ids[SIDE_OF_PAIR[frozenset((k1, k2))]]
            closing = el[i] if m == steps - 1 else lines.add(v, corners[k2])
            out.X.append([v, corners[k1], corners[k2]])
            out.EL.append([prev_id, side, closing])
            out.label.append(REMAINDER)
            out.G.append(None)
            prev_id = closing


def _delta_for(consts: Constants, config: EngineConfig, eps: float, strain, well_idx: int) -> float:
    if eps <= 0:
        return 0.0
    if config.delta0_override is not None:
        return consts.delta0 * eps / consts.eps0
    w = WELL_ARRAY[well_idx - 1]
    amp = 8 / 3 * math.hypot(w[0] - strain[0], w[1] - strain[1])
    return min(eps / (100 * consts.dK), eps / (20 * amp))


def _desired_sign(rotated: bool, inc_sign: int, omega: float) -> int:
    if rotated:
        return -1 if omega >= 0 else 1
    return inc_sign


def _data_for(G, well_idx: int, eps: float, desired: int):
    """Three-well data whose skew increment has the sign ``desired``."""
    d = three_well_data(Mat2(*G), well_idx, eps, 1, check=False)
    if d.skew_increment * desired < 0:
        d = three_well_data(Mat2(*G), well_idx, eps, -1, check=False)
    return d


# ----------------------------------------------------------------------------
# operations


def initialize(config: EngineConfig) -> EngineState:
    """Rotated unit square covered by ``K00`` side-by-side Conti rectangles."""
    c = config.validate()
    M = config.M
    G0 = (M - Mat2(0, split_parts(M)[1].omega_tilde, -split_parts(M)[1].omega_tilde, 0)).as_tuple()
    data = _data_for(G0, c.well0, c.eps0, 1)
    p = data.p
    qq = (-p[1], p[0])
    K = c.K00
    up = data.q[0] * qq[0] + data.q[1] * qq[1] > 0
    # one patch on the first row, then translated copies along qq
    proto = Lines()
    proto.add((0.0, 0.0), qq)
    proto.add(p, (p[0] + qq[0], p[1] + qq[1]))
    proto.add((0.0, 0.0), p)
    proto.add((qq[0] / K, qq[1] / K), (qq[0] / K + p[0], qq[1] / K + p[1]))
    one = _Children()
    center = (0.5 * p[0] + 0.5 / K * qq[0], 0.5 * p[1] + 0.5 / K * qq[1])
    _place_patch(one, proto, G0, data, 1 / K, center, 1.0,
                 {"l": 0, "r": 1, "b": 2 if up else 3, "t": 3 if up else 2})
    LO1, LD1 = proto.arrays()
    n_int = len(LO1) - 4
    shift = (np.arange(K, dtype=float) / K)[:, None] * np.asarray(qq)[None, :]
    rows_o = np.arange(K + 1, dtype=float)[:, None] / K * np.asarray(qq)[None, :]
    LO = np.concatenate([LO1[:2], rows_o, (LO1[4:][None, :, :] + shift[:, None, :]).reshape(-1, 2)])
    LD = np.concatenate([LD1[:2], np.repeat(LD1[2:3], K + 1, axis=0), np.tile(LD1[4:], (K, 1))])
    lines = Lines(LO, LD)
    el1 = np.asarray(one.EL, np.int64)
    k = np.arange(K, dtype=np.int64)[:, None, None]
    EL = np.where(el1 < 2, el1, 0) + np.where(el1 == 2, 2 + k, 0) + np.where(el1 == 3, 3 + k, 0) \
        + np.where(el1 >= 4, K + 3 + k * n_int + (el1 - 4), 0)
    out = _Children()
    out.X = (np.asarray(one.X)[None] + shift[:, None, None, :]).reshape(-1, 3, 2)
    out.G = np.tile(np.asarray(one.G, float), (K, 1))
    out.EL = EL.reshape(-1, 3)
    out.label = np.tile(np.asarray(one.label, np.int8), K)
    n = len(out.X)
    state = _fresh_state(config, c, out, lines, n)
    lab = state.label
    st = state.strains()
    nw, _ = nearest_wells(st)
    state.phase[lab == 0] = c.well0
    state.resolved_at[lab == 0] = 0
    unres = lab != 0
    state.eps[unres] = np.where(lab[unres] == 4, c.eps0 / 2, c.eps0)
    state.eps[~unres] = 0.0
    state.well[:] = np.where(lab == 4, c.well0, nw)
    state.well[~unres] = c.well0
    state.rotated[:] = unres & (state.well != c.well0)
    state.pushouts[:] = np.where(unres & (lab != 4) & ~state.rotated, 1, 0)
    state.inc_sign[:] = 1 if data.skew_increment > 0 else -1
    # the 16 cells of every patch carry the same data
    for i in np.flatnonzero(unres[:16]):
        state.delta[i::16] = _delta_for(c, config, state.eps[i], st[i], int(state.well[i]))
    sq = np.array([(0.0, 0.0), p, (p[0] + qq[0], p[1] + qq[1]), qq])
    state.domain = sq
    return state


def _fresh_state(config, consts, out: _Children, lines: Lines, n: int) -> EngineState:
    return EngineState(
        j=0, config=config, consts=consts,
        X=np.asarray(out.X, float).reshape(n, 3, 2), G=np.asarray(out.G, float).reshape(n, 4),
        eps=np.zeros(n), delta=np.zeros(n), well=np.zeros(n, np.int8),
        phase=np.zeros(n, np.int8), label=np.asarray(out.label, np.int8),
        parent=-np.ones(n, np.int64), born=np.zeros(n, np.int32),
        resolved_at=-np.ones(n, np.int32), inc_sign=np.ones(n, np.int8),
        pushouts=np.zeros(n, np.int32), rotated=np.zeros(n, bool), frozen=np.zeros(n, bool),
        EL=np.asarray(out.EL, np.int64).reshape(n, 3), lines=lines, domain=np.zeros((4, 2)))


@dataclass
class _Refined:
    X: np.ndarray
    G: np.ndarray
    EL: np.ndarray
    label: np.ndarray
    fraction: float
    area_error: float
    data: object


def refine_cell(state: EngineState, i: int, lines: Lines) -> Optional[_Refined]:
    """Conti patch plus fan remainder for cell ``i``; ``None`` if nothing fits."""
    tri = [tuple(v) for v in state.X[i]]
    G = tuple(state.G[i])
    omega = (G[1] - G[2]) / 2
    desired = _desired_sign(bool(state.rotated[i]), int(state.inc_sign[i]), omega)
    data = _data_for(G, int(state.well[i]), float(state.eps[i]), desired)
    delta = float(state.delta[i])
    center, L = inscribed_rectangle(tri, data.p, data.q, delta)
    area = abs((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
               - (tri[1][1] - tri[0][1]) * (tri[2][0] - tri[0][0])) / 2
    if not L > 0:
        return None
    frac = delta * L * L / area
    if frac < state.config.v0:
        return None
    p, q = data.p, data.q
    corners = [(center[0] + sx * 0.5 * L * p[0] + sy * 0.5 * delta * L * q[0],
                center[1] + sx * 0.5 * L * p[1] + sy * 0.5 * delta * L * q[1]) for sx, sy in CORNERS]
    diam = max(math.hypot(tri[k][0] - tri[k - 1][0], tri[k][1] - tri[k - 1][1]) for k in range(3))
    rect_ids: dict = {}
    rem = _Children()
    _remainder(rem, lines, tri, [int(x) for x in state.EL[i]], corners, rect_ids, 1e-12 * diam)
    out = _Children()
    _place_patch(out, lines, G, data, delta, center, L, rect_ids)
    X = np.asarray(out.X + rem.X, float)
    Gs = np.asarray(out.G + [G] * len(rem.X), float)
    EL = np.asarray(out.EL + rem.EL, np.int64)
    lab = np.asarray(out.label + rem.label, np.int8)
    a = 0.5 * ((X[:, 1, 0] - X[:, 0, 0]) * (X[:, 2, 1] - X[:, 0, 1])
               - (X[:, 1, 1] - X[:, 0, 1]) * (X[:, 2, 0] - X[:, 0, 0]))
    return _Refined(X, Gs, EL, lab, frac, abs(a.sum() - area) / area, data)


def _domain_area(state: EngineState) -> float:
    u, v = state.domain[1] - state.domain[0], state.domain[3] - state.domain[0]
    return abs(float(u[0] * v[1] - u[1] * v[0]))


def step(state: EngineState) -> EngineState:
    """One modification step; unpicked cells are carried unchanged."""
    cfg = state.config
    n = state.n_cells
    lines = state.lines  # append-only, shared with earlier snapshots
    areas = state.areas()
    frozen = state.frozen.copy()
    cand = np.flatnonzero((state.phase == 0) & ~frozen)
    order = cand[np.lexsort((cand, -areas[cand]))]
    budget = math.inf if cfg.growth_cap is None else cfg.growth_cap * n - n
    floor = cfg.sliver_area * _domain_area(state)
    results: dict[int, _Refined] = {}
    added = 0
    exterior = []
    for i in order:
        i = int(i)
        if areas[i] < floor:
            frozen[i] = True
            continue
        try:
            r = refine_cell(state, i, lines)
        except ExteriorStrain:
            frozen[i] = True
            exterior.append(i)
            continue
        if r is None:
            frozen[i] = True
            continue
        if added + len(r.X) - 1 > budget:
            break
        results[i] = r
        added += len(r.X) - 1
    new = _assemble(state, results, frozen)
    fr = [r.fraction for r in results.values()]
    new.stats = {
        "n_refined": len(results),
        "v0_measured": min(fr) if fr else float("nan"),
        "mean_fraction": float(np.mean(fr)) if fr else float("nan"),
        "covered_area": float(sum(r.fraction * areas[i] for i, r in results.items())),
        "area_error": max((r.area_error for r in results.values()), default=0.0),
        "n_frozen": int(frozen.sum()),
        "exterior": exterior,
    }
    log.info("step %d: refined %d cells, %d cells total", new.j, len(results), new.n_cells)
    return new


def _children_fields(state: EngineState, i: int, r: _Refined) -> dict:
    c, cfg = state.consts, state.config
    k = len(r.X)
    d = r.data
    target = d.well_index
    lab = r.label
    st = strains_of(r.G)
    nw, _ = nearest_wells(st)
    eps_i = float(state.eps[i])
    inc = 1 if d.skew_increment > 0 else -1
    out = {
        "X": r.X, "G": r.G, "EL": r.EL, "label": lab,
        "parent": np.full(k, i, np.int64), "born": np.full(k, state.j + 1, np.int32),
        "frozen": np.zeros(k, bool),
    }
    rem = lab == REMAINDER
    res = lab == 0
    stag = lab == 4
    push = ~(rem | res | stag)
    eps = np.where(res, 0.0, np.where(stag, eps_i / 2, c.eps0))
    well_ = np.where(push, nw, target).astype(np.int8)
    rotated = push & (well_ != target)
    out["eps"] = np.where(rem, eps_i, eps)
    out["well"] = np.where(rem, state.well[i], well_).astype(np.int8)
    out["phase"] = np.where(res, target, 0).astype(np.int8)
    out["resolved_at"] = np.where(res, state.j + 1, -1).astype(np.int32)
    out["rotated"] = np.where(rem, state.rotated[i], rotated)
    pu = int(state.pushouts[i])
    out["pushouts"] = np.where(rem | stag, pu, np.where(rotated, 0, pu + 1)).astype(np.int32)
    out["inc_sign"] = np.where(rem, state.inc_sign[i], inc).astype(np.int8)
    delta = np.zeros(k)
    for m in range(k):
        if rem[m]:
            delta[m] = state.delta[i]
        elif not res[m]:
            delta[m] = _delta_for(c, cfg, float(out["eps"][m]), st[m], int(out["well"][m]))
    out["delta"] = delta
    return out


def _assemble(state: EngineState, results: dict, frozen: np.ndarray) -> EngineState:
    names = [f for f in FIELDS]
    src = {f: getattr(state, f) for f in names}
    src["frozen"] = frozen
    parts: dict = {f: [] for f in names}
    start = 0
    for i in sorted(results):
        for f in names:
            parts[f].append(src[f][start:i])
        ch = _children_fields(state, i, results[i])
        for f in names:
            parts[f].append(ch[f])
        start = i + 1
    for f in names:
        parts[f].append(src[f][start:])
    arrays = {f: np.concatenate(parts[f]).astype(src[f].dtype, copy=False) for f in names}
    return EngineState(j=state.j + 1, config=state.config, consts=state.consts,
                       lines=state.lines, domain=state.domain, **arrays)


# ----------------------------------------------------------------------------
# monitors


@dataclass
class MonitorReport:
    j: int
    checked: dict  # monitor name -> number of cells checked
    failures: dict  # monitor name -> array of failing cell ids
    worst: dict  # monitor name -> smallest margin (negative when failing)

    @property
    def ok(self) -> bool:
        return all(len(v) == 0 for v in self.failures.values())

    def first_failure(self) -> Optional[tuple]:
        for name, ids in self.failures.items():
            if len(ids):
                return name, int(ids[0])
        return None


def monitors(state: EngineState) -> MonitorReport:
    """Check the monitor inequalities on every cell; never raises."""
    c = state.consts
    st = state.strains()
    om = np.abs(state.skews())
    unres = state.phase == 0
    slack = 2 * (c.eps0 - state.eps)
    dB = boundary_distances(st)
    _, dW = nearest_wells(st)
    margins = {
        "symmetric_part": np.where(unres, dB - (c.sym_floor - slack), np.inf),
        "well_distance": np.where(unres, dW - (c.dist_floor - slack), np.inf),
        "skew_part": np.where(unres, c.C_bar + slack - om, 2 * c.C_bar - om),
        "push_outs": (c.N0 - state.pushouts).astype(float),
        "hull": dB + 1e-12,
    }
    res = ~unres
    if res.any():
        w = WELL_ARRAY[state.phase[res] - 1]
        err = np.hypot(*(st[res] - w).T)
        m = np.full(len(st), np.inf)
        m[res] = 1e-12 - err
        margins["resolved_exact"] = m
    failures = {k: np.flatnonzero(v < 0) for k, v in margins.items()}
    worst = {k: float(v.min()) if len(v) else math.inf for k, v in margins.items()}
    checked = {k: int(np.isfinite(v).sum()) for k, v in margins.items()}
    return MonitorReport(state.j, checked, failures, worst)


def continuity_residual(state: EngineState) -> float:
    """Largest relative tangential gradient jump over all shared edge pieces."""
    jumps = sweep.tangential_jumps(state.events(), state.G)
    return float(jumps.max()) if len(jumps) else 0.0


def mean_strain(state: EngineState) -> tuple:
    a = state.areas()
    st = state.strains()
    return tuple((st * a[:, None]).sum(axis=0) / a.sum())


# ----------------------------------------------------------------------------
# run


@dataclass
class RunResult:
    state: EngineState
    metrics: list
    reports: list
    stats: list
    states: list


def run(config: EngineConfig, raise_on_violation: bool = True, keep_states: bool = False,
        on_step: Optional[Callable[[EngineState], None]] = None) -> RunResult:
    """Initialize and iterate ``config.max_steps`` times, collecting metrics rows."""
    from . import metrics

    state = initialize(config)
    rows = [metrics.metrics_row(state, None)]
    reports, stats, states = [], [], []

    def check(s):
        rep = monitors(s)
        reports.append(rep)
        if raise_on_violation and not rep.ok:
            name, cid = rep.first_failure()
            raise InvariantViolation(name, cid, f"step {s.j}, cell {serialize_cell(s, cid)}")

    check(state)
    if keep_states:
        states.append(state)
    if on_step:
        on_step(state)
    for _ in range(config.max_steps):
        prev = state
        state = step(state)
        stats.append(state.stats)
        rows.append(metrics.metrics_row(state, prev, rows))
        check(state)
        if keep_states:
            states.append(state)
        if on_step:
            on_step(state)
    return RunResult(state, rows, reports, stats, states)


def serialize_cell(state: EngineState, i: int) -> str:
    x = " ".join(repr(float(v)) for v in state.X[i].ravel())
    g = " ".join(repr(float(v)) for v in state.G[i])
    return (f"[{x}] grad [{g}] eps={state.eps[i]!r} delta={state.delta[i]!r} "
            f"well={int(state.well[i])} phase={int(state.phase[i])}")


__all__ = [
    "EngineConfig", "EngineState", "Constants", "Cell", "MonitorReport", "RunResult",
    "constants", "initialize", "step", "monitors", "run", "refine_cell",
    "inscribed_rectangle", "continuity_residual", "mean_strain", "push_out_bound", "skew_bound",
]
