from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexrhomb.engine import EngineConfig, initialize
from hexrhomb.errors import MeshFormatError
from hexrhomb.meshio import Mesh, format_mesh, from_cells, from_state, parse_mesh, read_mesh, write_mesh

finite = st.floats(allow_nan=False, allow_infinity=False)


def _same(a: Mesh, b: Mesh) -> bool:
    return (np.array_equal(a.j, b.j) and np.array_equal(a.X, b.X) and np.array_equal(a.G, b.G)
            and np.array_equal(a.phase, b.phase) and a.bbox == b.bbox)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.lists(finite, min_size=6, max_size=6),
                          st.lists(finite, min_size=4, max_size=4),
                          st.integers(0, 3)), min_size=1, max_size=8),
       st.integers(0, 50))
def test_roundtrip_is_bit_exact(cells, step):
    m = from_cells(((np.reshape(x, (3, 2)), g, p) for x, g, p in cells), step, (0.0, -1.0, 2.5, 3.0))
    assert _same(parse_mesh(format_mesh(m)), m)


def test_state_roundtrip(tmp_path):
    s = initialize(EngineConfig(delta0_override=1 / 16))
    m = from_state(s)
    assert m.n_cells == s.n_cells and m.steps() == [0]
    write_mesh(m, tmp_path / "m.txt")
    back = read_mesh(tmp_path / "m.txt")
    assert _same(back, m)
    lo = s.domain.min(axis=0)
    assert back.bounding_box()[:2] == pytest.approx(tuple(lo))


def test_select_steps():
    a = from_cells([(((0, 0), (1, 0), (0, 1)), (0, 0, 0, 0), 1)], step=0)
    b = from_cells([(((1, 0), (1, 1), (0, 1)), (0, 0, 0, 0), 0)] * 2, step=3)
    text = format_mesh(a) + format_mesh(b)
    m = parse_mesh(text)
    assert m.steps() == [0, 3]
    assert m.select().n_cells == 2 and m.select(0).n_cells == 1
    assert m.select(7).n_cells == 0
    assert m.bounding_box() == (0.0, 0.0, 1.0, 1.0)


def test_empty_mesh():
    m = parse_mesh("# only a comment\n\n")
    assert m.n_cells == 0 and format_mesh(m) == ""
    assert m.select().n_cells == 0 and m.bounding_box() == (0.0, 0.0, 1.0, 1.0)


@pytest.mark.parametrize("text", [
    "0 0 0 1 0 0 1 0 0 0 0\n",
    "0 0 0 1 0 0 1 0 0 0 0 1 9\n",
    "0 0 0 1 0 0 x 0 0 0 0 1\n",
    "0.5 0 0 1 0 0 1 0 0 0 0 1\n",
    "# bbox 0 0 1\n",
    "# bbox 0 0 1 y\n",
])
def test_malformed_lines(text):
    with pytest.raises(MeshFormatError):
        parse_mesh(text)
