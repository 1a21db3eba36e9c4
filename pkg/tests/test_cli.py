from __future__ import annotations

import math
import subprocess
import sys

import pytest

from hexrhomb.cli import main, parse_run_config
from hexrhomb.errors import BoundaryStrainNotInterior, ConfigError
from hexrhomb.metrics import read_csv
from hexrhomb.symmetry import laminate

TOY = "steps: 1\ndelta0_override: 0.0625\n"


def _code(argv) -> int:
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code or 0


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_defaults_and_values():
    cfg = parse_run_config("")
    assert cfg.steps == 5 and cfg.domain == "unit-square" and cfg.polygon_path() is None
    cfg = parse_run_config("boundary_matrix: [0.1, 0.05, -0.2, -0.1]\nsteps: 2\n"
                           "delta0_override: 0.0625\nthetas: [0.1, 0.2]\n"
                           "render: {palette: color, max_cells: 10}\n")
    assert cfg.boundary_matrix == (0.1, 0.05, -0.2, -0.1)
    assert cfg.thetas == (0.1, 0.2) and cfg.render.palette == "color"
    assert cfg.engine_config().max_steps == 2


@pytest.mark.parametrize("text", [
    "[1, 2]",
    "stepz: 3",
    "steps: -1",
    "steps: true",
    "boundary_matrix: [1, 2, 3]",
    "v0: .nan",
    "strict: 1",
    "render: {palette: neon}",
    "render: {max_cells: 0}",
    "thetas: 0.5",
    "strict: true\ndelta0_override: 0.1",
    "steps: [",
])
def test_parse_rejects(text):
    with pytest.raises(ConfigError):
        parse_run_config(text)


def test_parse_checks_boundary_matrix():
    with pytest.raises(BoundaryStrainNotInterior):
        parse_run_config("boundary_matrix: [2, 0, 0, -2]")


def test_run_writes_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, "run.yaml", TOY)
    out = tmp_path / "out"
    assert _code(["run", cfg, "-o", str(out), "--per-step-meshes"]) == 0
    assert "steps 1" in capsys.readouterr().out
    rows = read_csv(out / "metrics.csv")
    assert [r["j"] for r in rows] == [0, 1]
    assert rows[0]["unresolved_area"] == pytest.approx(0.875)
    for name in ("mesh_final.txt", "mesh_step_0.txt", "mesh_step_1.txt"):
        assert (out / name).exists()
    assert (out / "mesh_step_1.txt").read_bytes() == (out / "mesh_final.txt").read_bytes()


def test_run_on_polygon_with_report(tmp_path):
    _write(tmp_path, "pent.txt", "0 0\n2 0\n2 1\n1 2\n0 1\n")
    cfg = _write(tmp_path, "run.yaml", TOY + "domain: pent.txt\nk_max: 2\nthetas: [0.25]\n")
    out = tmp_path / "out"
    assert _code(["run", cfg, "-o", str(out), "--report"]) == 0
    cover = (out / "cover.txt").read_text().splitlines()
    assert cover[:2] == ["0 0 0", "0 1 0"]
    agg = (out / "aggregate.csv").read_text().splitlines()
    assert agg[0] == "j,l1_total,bvd_total,unresolved_area,product_0.25" and len(agg) == 3
    for name in ("metrics.png", "mesh_final.svg", "mesh_final.png"):
        assert (out / name).stat().st_size > 0


@pytest.mark.parametrize("text,code", [
    ("boundary_matrix: [1, 0, 0, 0]\n", 3),
    ("boundary_matrix: [2, 0, 0, -2]\n", 3),
    ("steps: x\n", 4),
    ("domain: missing.txt\nsteps: 0\n", 5),
    ("domain: bad.txt\nsteps: 0\n", 4),
])
def test_run_exit_codes(tmp_path, text, code, capsys):
    _write(tmp_path, "bad.txt", "0 0\n1 1\n2 2\n")
    cfg = _write(tmp_path, "run.yaml", text)
    assert _code(["run", cfg, "-o", str(tmp_path / "out")]) == code
    assert capsys.readouterr().err


def test_missing_config_is_io_error(tmp_path):
    assert _code(["run", str(tmp_path / "nope.yaml")]) == 5


def test_usage_errors(tmp_path):
    assert _code(["frobnicate"]) == 64
    assert _code(["bv-triangle", "--levels", "0"]) == 64
    assert _code(["corners", "list", "--strains", "a,b"]) == 64


def test_render_and_metrics(tmp_path, capsys):
    cfg = _write(tmp_path, "run.yaml", TOY)
    out = tmp_path / "out"
    assert _code(["run", cfg, "-o", str(out)]) == 0
    svg = tmp_path / "m.svg"
    assert _code(["render", str(out / "mesh_final.txt"), "-o", str(svg), "--max-cells", "50"]) == 0
    assert svg.read_text().count("<polygon") == 50
    assert _code(["render", str(out / "mesh_final.txt"), "-o", str(svg), "--step", "4"]) == 0
    assert svg.read_text().count("<polygon") == 0
    capsys.readouterr()
    assert _code(["metrics", str(out / "metrics.csv"), "--plot", str(tmp_path / "u.png")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("j  n_cells") and lines[1].startswith("0  256  0.875")
    assert (tmp_path / "u.png").exists()


def test_render_malformed_mesh(tmp_path):
    mesh = _write(tmp_path, "m.txt", "0 1 2 3\n")
    assert _code(["render", mesh, "-o", str(tmp_path / "x.svg")]) == 6


def test_corners_list(capsys):
    assert _code(["corners", "list"]) == 0
    out = capsys.readouterr().out
    assert out.rstrip().endswith("# total: 1 4-fold, 2 6-fold, 1 12-fold")
    assert out.count("start ") == 4


def test_corners_check(tmp_path, capsys):
    good = _write(tmp_path, "good.txt", laminate(1, 2).to_text())
    assert _code(["corners", "check", good]) == 0
    assert capsys.readouterr().out.startswith("Compatible")
    bad = _write(tmp_path, "bad.txt", f"start 0.1\n1 {math.pi!r}\n2 {math.pi!r}\n")
    assert _code(["corners", "check", bad]) == 1
    assert "Fails condition 1 at ray 0" in capsys.readouterr().out
    short = _write(tmp_path, "short.txt", "1 3.0\n2 3.0\n")
    assert _code(["corners", "check", short]) == 4


def test_bv_triangle(tmp_path, capsys):
    args = ["bv-triangle", "--levels", "4", "--mesh", str(tmp_path / "t.txt"),
            "--svg", str(tmp_path / "t.svg"), "--plot", str(tmp_path / "t.png")]
    assert _code(args) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-2].split()[-1].startswith("0.26794919")
    assert len((tmp_path / "t.txt").read_text().splitlines()) == 6 * 4 + 1
    assert (tmp_path / "t.png").exists() and "#cfe3f7" in (tmp_path / "t.svg").read_text()


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-c", "from hexrhomb.cli import main; main()", "--help"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0 and "bv-triangle" in r.stdout
