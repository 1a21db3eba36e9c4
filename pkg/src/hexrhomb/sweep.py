"""Jump sweeps over a non-conforming triangulation.

Every cell edge carries the id of the supporting line it lies on.  Lines are
stored as an origin and a unit direction, so each edge becomes an interval of
the line parameter plus the side (left or right) on which its cell lies.
Sorting the interval endpoints per line gives elementary intervals on which
exactly one cell per side (or none, on the domain boundary) is active.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Events:
    line: np.ndarray
    t: np.ndarray
    cell: np.ndarray
    left: np.ndarray  # bool
    kind: np.ndarray  # +1 start, -1 end
    direction: np.ndarray  # (n, 2) direction of the line of each event


def edge_events(X: np.ndarray, EL: np.ndarray, LO: np.ndarray, LD: np.ndarray) -> Events:
    """Sorted interval endpoints of all cell edges along their lines."""
    n = len(X)
    a = X.reshape(-1, 2)
    b = np.roll(X, -1, axis=1).reshape(-1, 2)
    opp = np.roll(X, -2, axis=1).reshape(-1, 2)
    lid = EL.reshape(-1)
    O, D = LO[lid], LD[lid]
    ta = ((a - O) * D).sum(axis=1)
    tb = ((b - O) * D).sum(axis=1)
    w = opp - O
    left = (D[:, 0] * w[:, 1] - D[:, 1] * w[:, 0]) > 0
    cell = np.repeat(np.arange(n), 3)
    line = np.concatenate([lid, lid])
    t = np.concatenate([np.minimum(ta, tb), np.maximum(ta, tb)])
    kind = np.concatenate([np.ones(3 * n, np.int8), -np.ones(3 * n, np.int8)])
    cell2 = np.concatenate([cell, cell])
    left2 = np.concatenate([left, left])
    # ends before starts at equal parameter
    order = np.lexsort((kind, t, line))
    return Events(line[order], t[order], cell2[order], left2[order], kind[order],
                  np.concatenate([D, D])[order])


def _intervals(ev: Events):
    same = ev.line[1:] == ev.line[:-1]
    length = np.where(same, ev.t[1:] - ev.t[:-1], 0.0)
    return length


def jump_length(ev: Events, values: np.ndarray) -> float:
    """Total length where the integer cell field ``values`` differs across lines.

    The outside of the domain counts as value 0.
    """
    v = np.asarray(values, dtype=np.int64)[ev.cell] * ev.kind
    fl = np.cumsum(np.where(ev.left, v, 0))
    fr = np.cumsum(np.where(ev.left, 0, v))
    length = _intervals(ev)
    return float((length * np.abs(fl[:-1] - fr[:-1])).sum())


def weighted_jump(ev: Events, values: np.ndarray) -> float:
    """Like :func:`jump_length` for a real field: the integral of ``|v_left - v_right|``."""
    v = np.asarray(values, dtype=float)
    fl_cell, fr_cell, both, one, length = _active(ev)
    vl = np.where(fl_cell >= 0, v[np.maximum(fl_cell, 0)], 0.0)
    vr = np.where(fr_cell >= 0, v[np.maximum(fr_cell, 0)], 0.0)
    return float((length * np.abs(vl - vr)).sum())


def _active(ev: Events):
    """Active cell on each side of every elementary interval (-1 if none)."""
    idx = np.arange(len(ev.t))
    start = ev.kind > 0
    cl = np.cumsum(np.where(ev.left, ev.kind, 0).astype(np.int64))
    cr = np.cumsum(np.where(ev.left, 0, ev.kind).astype(np.int64))
    last_l = np.maximum.accumulate(np.where(start & ev.left, idx, -1))
    last_r = np.maximum.accumulate(np.where(start & ~ev.left, idx, -1))
    cell_l = np.where((cl == 1) & (last_l >= 0), ev.cell[np.maximum(last_l, 0)], -1)[:-1]
    cell_r = np.where((cr == 1) & (last_r >= 0), ev.cell[np.maximum(last_r, 0)], -1)[:-1]
    length = _intervals(ev)
    both = (cell_l >= 0) & (cell_r >= 0)
    one = (cell_l >= 0) ^ (cell_r >= 0)
    return cell_l, cell_r, both, one, length


@dataclass(frozen=True)
class Topology:
    boundary_length: float
    overlap_length: float  # length covered twice on one side (should be 0)
    max_offline: float  # largest distance of an edge endpoint from its line


def topology_report(X, EL, LO, LD, ev: Events | None = None) -> Topology:
    ev = ev if ev is not None else edge_events(X, EL, LO, LD)
    cl = np.cumsum(np.where(ev.left, ev.kind, 0).astype(np.int64))[:-1]
    cr = np.cumsum(np.where(ev.left, 0, ev.kind).astype(np.int64))[:-1]
    length = _intervals(ev)
    one = (cl + cr) == 1
    over = (cl > 1) | (cr > 1)
    a = X.reshape(-1, 2)
    lid = EL.reshape(-1)
    w = a - LO[lid]
    off = np.abs(LD[lid][:, 0] * w[:, 1] - LD[lid][:, 1] * w[:, 0])
    return Topology(float(length[one].sum()), float(length[over].sum()),
                    float(off.max()) if len(off) else 0.0)


def tangential_jumps(ev: Events, G: np.ndarray, min_length: float = 1e-12) -> np.ndarray:
    """Relative tangential gradient jump on every two-sided elementary interval."""
    cell_l, cell_r, both, _, length = _active(ev)
    m = both & (length > min_length)
    if not m.any():
        return np.zeros(0)
    gl, gr = G[cell_l[m]], G[cell_r[m]]
    d = ev.direction[:-1][m]
    diff = gl - gr
    ja = diff[:, 0] * d[:, 0] + diff[:, 1] * d[:, 1]
    jb = diff[:, 2] * d[:, 0] + diff[:, 3] * d[:, 1]
    scale = np.maximum(1.0, np.maximum(np.abs(gl).max(axis=1), np.abs(gr).max(axis=1)))
    return np.hypot(ja, jb) / scale
