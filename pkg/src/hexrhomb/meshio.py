"""Plain-text mesh files.

One cell per line: ``j x1 y1 x2 y2 x3 y3 a11 a12 a21 a22 phase``.  Floats are
written with ``repr`` so reading a file back reproduces every value bit for
bit.  Lines starting with ``#`` are comments; ``# bbox xmin ymin xmax ymax``
records the domain bounding box.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import MeshFormatError

N_FIELDS = 12


@dataclass
class Mesh:
    j: np.ndarray  # (n,) step index
    X: np.ndarray  # (n, 3, 2)
    G: np.ndarray  # (n, 4)
    phase: np.ndarray  # (n,)
    bbox: Optional[tuple] = None

    @property
    def n_cells(self) -> int:
        return len(self.j)

    def steps(self) -> list[int]:
        return sorted(set(self.j.tolist()))

    def select(self, step: Optional[int] = None) -> "Mesh":
        """Cells of one step (the last one by default)."""
        if self.n_cells == 0:
            return self
        step = max(self.steps()) if step is None else step
        m = self.j == step
        return Mesh(self.j[m], self.X[m], self.G[m], self.phase[m], self.bbox)

    def bounding_box(self) -> tuple:
        if self.bbox is not None:
            return self.bbox
        if self.n_cells == 0:
            return (0.0, 0.0, 1.0, 1.0)
        P = self.X.reshape(-1, 2)
        return (float(P[:, 0].min()), float(P[:, 1].min()),
                float(P[:, 0].max()), float(P[:, 1].max()))


def from_state(state) -> Mesh:
    n = state.n_cells
    P = state.domain
    bbox = (float(P[:, 0].min()), float(P[:, 1].min()), float(P[:, 0].max()), float(P[:, 1].max()))
    return Mesh(np.full(n, state.j, dtype=np.int64), state.X.copy(), state.G.copy(),
                state.phase.astype(np.int64), bbox)


def from_cells(cells, step: int = 0, bbox: Optional[tuple] = None) -> Mesh:
    """Mesh from ``(triangle, (a11, a12, a21, a22), phase)`` triples."""
    cells = list(cells)
    n = len(cells)
    X = np.array([c[0] for c in cells], float).reshape(n, 3, 2)
    G = np.array([c[1] for c in cells], float).reshape(n, 4)
    ph = np.array([c[2] for c in cells], np.int64).reshape(n)
    return Mesh(np.full(n, step, np.int64), X, G, ph, bbox)


def format_mesh(mesh: Mesh) -> str:
    out = []
    if mesh.bbox is not None:
        out.append("# bbox " + " ".join(repr(float(v)) for v in mesh.bbox))
    X = mesh.X.reshape(-1, 6).tolist()
    G = mesh.G.tolist()
    for j, x, g, p in zip(mesh.j.tolist(), X, G, mesh.phase.tolist()):
        out.append(" ".join([str(j), *map(repr, x), *map(repr, g), str(p)]))
    return "\n".join(out) + "\n" if out else ""


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_mesh(mesh))


def parse_mesh(text: str) -> Mesh:
    bbox = None
    rows = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "bbox":
                try:
                    bbox = tuple(float(v) for v in parts[1:])
                except ValueError:
                    raise MeshFormatError(f"line {n}: bad bbox") from None
                if len(bbox) != 4:
                    raise MeshFormatError(f"line {n}: bbox needs four numbers")
            continue
        parts = line.split()
        if len(parts) != N_FIELDS:
            raise MeshFormatError(f"line {n}: expected {N_FIELDS} fields, got {len(parts)}")
        try:
            rows.append((int(parts[0]), [float(v) for v in parts[1:11]], int(parts[11])))
        except ValueError:
            raise MeshFormatError(f"line {n}: malformed number") from None
    n = len(rows)
    j = np.array([r[0] for r in rows], np.int64)
    vals = np.array([r[1] for r in rows], float).reshape(n, 10)
    ph = np.array([r[2] for r in rows], np.int64)
    return Mesh(j, vals[:, :6].reshape(n, 3, 2).copy(), vals[:, 6:].copy(), ph, bbox)


def read_mesh(path) -> Mesh:
    return parse_mesh(Path(path).read_text(encoding="utf-8"))


__all__ = ["Mesh", "from_state", "from_cells", "format_mesh", "write_mesh", "parse_mesh",
           "read_mesh"]
