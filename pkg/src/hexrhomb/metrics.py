"""Phase indicators, their BV and L1 norms, and the interpolation threshold."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import sweep
from .errors import DomainError, StateMismatch

CSV_HEADER = ["j", "n_cells", "unresolved_area", "total_perimeter", "bv1", "bv2", "bv3",
              "l1d1", "l1d2", "l1d3", "theta_measured", "C0_measured"]


@dataclass
class MetricsRow:
    j: int
    n_cells: int
    unresolved_area: float
    total_perimeter: float
    bv: tuple  # BV of the indicator of each well
    l1d: tuple  # L1 distance to the previous indicator
    bvd: tuple  # BV of the change of each indicator
    theta_measured: float = float("nan")
    C0_measured: float = float("nan")
    theta0_nominal: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def l1_total(self) -> float:
        return float(sum(self.l1d))

    @property
    def bvd_total(self) -> float:
        return float(sum(self.bvd))

    def interp_product(self, theta: float) -> float:
        return interp_product(self.l1_total, self.bvd_total, theta)

    def csv_row(self) -> list:
        return [self.j, self.n_cells, repr(self.unresolved_area), repr(self.total_perimeter),
                *map(repr, self.bv), *map(repr, self.l1d), repr(self.theta_measured),
                repr(self.C0_measured)]


# ----------------------------------------------------------------------------
# indicator norms


def indicator(state, i: int) -> np.ndarray:
    return (state.phase == i).astype(np.int64)


def bv_norm(state, i: int, events: Optional[sweep.Events] = None) -> float:
    """Jump-set length of the indicator of well ``i``, domain boundary included."""
    ev = events if events is not None else state.events()
    return sweep.jump_length(ev, indicator(state, i))


def _check_successor(state_j, state_j1) -> None:
    if state_j1.j != state_j.j + 1:
        raise StateMismatch(f"steps {state_j.j} and {state_j1.j} are not consecutive")
    if not np.array_equal(state_j.domain, state_j1.domain):
        raise StateMismatch("states live on different domains")
    a, b = state_j.areas().sum(), state_j1.areas().sum()
    if abs(a - b) > 1e-9 * max(a, b):
        raise StateMismatch("states cover different areas")


def changed(state_j1, i: Optional[int] = None) -> np.ndarray:
    """Cells of ``state_j1`` whose indicator differs from the previous step."""
    m = state_j1.resolved_at == state_j1.j
    if i is not None:
        m &= state_j1.phase == i
    return m


def l1_diff(state_j, state_j1, i: int) -> float:
    """Area on which the indicator of well ``i`` changed between consecutive states."""
    _check_successor(state_j, state_j1)
    return float(state_j1.areas()[changed(state_j1, i)].sum())


def bv_diff(state_j1, i: int, events: Optional[sweep.Events] = None) -> float:
    """BV of the change of the indicator of well ``i`` at the last step."""
    ev = events if events is not None else state_j1.events()
    return sweep.jump_length(ev, changed(state_j1, i).astype(np.int64))


# ----------------------------------------------------------------------------
# interpolation


def interp_product(l1: float, bv: float, theta: float) -> float:
    if l1 <= 0 or bv <= 0:
        return 0.0
    return math.exp((1 - theta) * math.log(l1) + theta * math.log(bv))


def theta0(delta0: float, v0: float, C0: float) -> float:
    """Nominal interpolation threshold from the decay and growth rates."""
    if not 0 < delta0 < 1:
        raise DomainError("delta0 must lie in (0, 1)")
    if not 0 < v0 < 1:
        raise DomainError("v0 must lie in (0, 1)")
    if not C0 > 0:
        raise DomainError("C0 must be positive")
    a = math.log1p(-7 * v0 / 8)
    return a / (a + math.log(delta0) - math.log(C0))


def crossing_theta(l1: Sequence[float], bv: Sequence[float], window: Optional[int] = 3) -> float:
    """``theta`` at which ``l1^(1-theta) bv^theta`` stops decaying.

    Uses least-squares slopes of ``log l1`` and ``log bv`` against the step
    index over the last ``window`` steps (all steps if ``None``); ``nan`` when
    the series are too short or do not straddle.
    """
    pts = [(k, a, b) for k, (a, b) in enumerate(zip(l1, bv)) if a > 0 and b > 0]
    if window is not None:
        pts = pts[-window:]
    if len(pts) < 2:
        return float("nan")
    k = np.array([p[0] for p in pts], float)
    sl = np.polyfit(k, np.log([p[1] for p in pts]), 1)[0]
    sb = np.polyfit(k, np.log([p[2] for p in pts]), 1)[0]
    if sb - sl <= 1e-9 * max(1.0, abs(sl), abs(sb)):
        return float("nan")
    return float(-sl / (sb - sl))


def ratio_theta(r_l1: float, r_bv: float) -> float:
    """Threshold for one pair of geometric ratios."""
    return -math.log(r_l1) / (math.log(r_bv) - math.log(r_l1))


@dataclass(frozen=True)
class SobolevBound:
    theta_tilde: float
    p: float
    bound: float


def sobolev_family_bound(theta0_bound: float, q: float, rows: Iterable[MetricsRow] = ()
                         ) -> SobolevBound:
    """Exponents ``theta0/q`` and ``p`` for a given ``q``, plus the summed product bound."""
    if not q > 1:
        raise DomainError("q must exceed 1")
    if not 0 < theta0_bound < 1:
        raise DomainError("theta0 must lie in (0, 1)")
    tt = theta0_bound / q
    p = ((1 - tt) / tt) * (theta0_bound / (1 - theta0_bound))
    total = sum(r.interp_product(theta0_bound) for r in rows)
    return SobolevBound(tt, p, total)


def product_series(rows: Sequence[MetricsRow], theta: float, start: int = 1) -> list[float]:
    return [r.interp_product(theta) for r in rows[start:]]


# ----------------------------------------------------------------------------
# rows and CSV


def metrics_row(state, prev=None, rows: Sequence[MetricsRow] = ()) -> MetricsRow:
    ev = state.events()
    unres = state.phase == 0
    bv = tuple(bv_norm(state, i, ev) for i in (1, 2, 3))
    if prev is None:
        a = state.areas()
        l1d = tuple(float(a[changed(state, i)].sum()) for i in (1, 2, 3))
    else:
        l1d = tuple(l1_diff(prev, state, i) for i in (1, 2, 3))
    bvd = tuple(bv_diff(state, i, ev) for i in (1, 2, 3))
    row = MetricsRow(
        j=state.j, n_cells=state.n_cells, unresolved_area=state.unresolved_area(),
        total_perimeter=float(state.perimeters()[unres].sum()), bv=bv, l1d=l1d, bvd=bvd)
    series = list(rows) + [row]
    tail = series[1:]
    row.theta_measured = crossing_theta([r.l1_total for r in tail], [r.bvd_total for r in tail])
    ratios = [b.bvd_total / a.bvd_total for a, b in zip(tail, tail[1:]) if a.bvd_total > 0]
    delta0 = state.consts.delta0
    row.C0_measured = delta0 * max(ratios) if ratios else float("nan")
    v0 = state.stats.get("v0_measured", float("nan")) if prev is not None else float("nan")
    row.extra["v0_measured"] = v0
    try:
        row.theta0_nominal = theta0(delta0, state.config.v0, row.C0_measured)
    except DomainError:
        row.theta0_nominal = float("nan")
    return row


def write_csv(rows: Sequence[MetricsRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_row())


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected header {rd.fieldnames}")
        return [{k: (int(v) if k in ("j", "n_cells") else float(v)) for k, v in row.items()}
                for row in rd]


__all__ = [
    "MetricsRow", "SobolevBound", "CSV_HEADER", "bv_norm", "bv_diff", "l1_diff", "theta0",
    "crossing_theta", "ratio_theta", "interp_product", "sobolev_family_bound", "metrics_row",
    "write_csv", "read_csv", "indicator", "changed", "product_series",
]
