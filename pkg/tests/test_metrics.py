from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexrhomb.errors import DomainError, StateMismatch
from hexrhomb.metrics import (
    CSV_HEADER,
    bv_norm,
    crossing_theta,
    interp_product,
    l1_diff,
    metrics_row,
    product_series,
    ratio_theta,
    read_csv,
    sobolev_family_bound,
    theta0,
    write_csv,
)

ratio = st.floats(0.05, 0.95)


def test_interp_product_endpoints():
    assert interp_product(0.25, 8.0, 0.0) == pytest.approx(0.25)
    assert interp_product(0.25, 8.0, 1.0) == pytest.approx(8.0)
    assert interp_product(0.25, 4.0, 0.5) == pytest.approx(1.0)
    assert interp_product(0.0, 4.0, 0.5) == 0.0


@settings(max_examples=60, deadline=None)
@given(ratio, st.floats(1.05, 20))
def test_crossing_theta_on_geometric_series(r_l1, r_bv):
    k = np.arange(6)
    l1, bv = r_l1 ** k, 3 * r_bv ** k
    th = crossing_theta(l1, bv)
    assert th == pytest.approx(ratio_theta(r_l1, r_bv), rel=1e-9)
    # the product is flat at the crossing
    p = [interp_product(a, b, th) for a, b in zip(l1, bv)]
    assert p[-1] == pytest.approx(p[-3], rel=1e-8)


def test_crossing_theta_degenerate():
    assert math.isnan(crossing_theta([1.0], [1.0]))
    # both decaying at the same rate: no crossing
    assert math.isnan(crossing_theta([1, 0.5, 0.25], [4, 2, 1]))
    # the window keeps only the tail
    l1 = [1, 1, 1, 0.5, 0.25, 0.125]
    bv = [9, 1, 1, 2, 4, 8]
    assert crossing_theta(l1, bv) == pytest.approx(0.5)
    assert crossing_theta(l1, bv, window=None) != pytest.approx(0.5, abs=0.01)


def test_theta0_formula():
    a = math.log(1 - 7 * 0.5 / 8)
    assert theta0(0.25, 0.5, 2.0) == pytest.approx(a / (a + math.log(0.25) - math.log(2.0)))
    for bad in [(0.0, 0.5, 1.0), (0.5, 1.0, 1.0), (0.5, 0.5, 0.0)]:
        with pytest.raises(DomainError):
            theta0(*bad)


@settings(max_examples=40)
@given(st.floats(0.01, 0.99), st.floats(1.01, 50))
def test_sobolev_family_exponents(th, q):
    b = sobolev_family_bound(th, q)
    assert b.theta_tilde == pytest.approx(th / q)
    assert b.p > 0 and b.bound == 0
    # p = 1 exactly when q = 1 would be allowed
    assert (b.p - 1) * (q - 1) >= -1e-12


def test_sobolev_family_rejects_bad_input():
    with pytest.raises(DomainError):
        sobolev_family_bound(0.5, 1.0)
    with pytest.raises(DomainError):
        sobolev_family_bound(1.5, 2.0)


def test_rows_match_state(toy_run):
    rows = toy_run.metrics
    for row, s in zip(rows, toy_run.states):
        assert row.j == s.j and row.n_cells == s.n_cells
        assert row.unresolved_area == pytest.approx(s.unresolved_area())
        assert row.bv == tuple(bv_norm(s, i) for i in (1, 2, 3))
    # every step resolves something, and from step 2 on every well gains
    assert all(r.l1_total > 0 and r.bvd_total > 0 for r in rows[1:])
    for row in rows[2:]:
        assert all(x > 0 for x in row.l1d) and all(x > 0 for x in row.bvd)
    # resolved area only grows by what each step adds
    for a, b in zip(rows, rows[1:]):
        assert a.unresolved_area - b.unresolved_area == pytest.approx(b.l1_total, rel=1e-9)


def test_first_row_is_reproducible(toy_run):
    s0 = toy_run.states[0]
    again = metrics_row(s0, None)
    assert again.bv == toy_run.metrics[0].bv and again.l1d == toy_run.metrics[0].l1d


def test_l1_diff_needs_consecutive_states(toy_run):
    s = toy_run.states
    assert l1_diff(s[0], s[1], 1) == pytest.approx(toy_run.metrics[1].l1d[0])
    with pytest.raises(StateMismatch):
        l1_diff(s[0], s[2], 1)


def test_product_series(toy_run):
    ps = product_series(toy_run.metrics, 0.5)
    assert len(ps) == len(toy_run.metrics) - 1
    assert all(p > 0 for p in ps)


def test_csv_roundtrip(toy_run, tmp_path):
    path = tmp_path / "m.csv"
    write_csv(toy_run.metrics, path)
    back = read_csv(path)
    assert list(back[0]) == CSV_HEADER
    for row, rec in zip(toy_run.metrics, back):
        assert rec["j"] == row.j and rec["n_cells"] == row.n_cells
        assert rec["unresolved_area"] == row.unresolved_area
        assert (rec["bv1"], rec["bv2"], rec["bv3"]) == row.bv
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(path)
