"""Command-line front end.

Exit codes: 0 success, 1 corner check failed, 2 invariant violation, 3 invalid
boundary matrix, 4 bad configuration or input file, 5 I/O error, 6 malformed
mesh, 7 other construction error, 64 usage error.
"""

from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click
import yaml

from . import domains, meshio, metrics, render, symmetry
from .engine import EngineConfig
from .errors import (
    AngleSumMismatch,
    BoundaryStrainNotInterior,
    ConfigError,
    DegenerateDomain,
    HexRhombError,
    InvariantViolation,
    MeshFormatError,
    NonTraceFree,
)
from .strain import Mat2

log = logging.getLogger("hexrhomb")

EXIT_OK, EXIT_FAILS, EXIT_INVARIANT, EXIT_MATRIX = 0, 1, 2, 3
EXIT_CONFIG, EXIT_IO, EXIT_MESH, EXIT_OTHER, EXIT_USAGE = 4, 5, 6, 7, 64


class Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        self.code = code
        self.message = message
        super().__init__(message)


# ----------------------------------------------------------------------------
# run configuration

CONFIG_KEYS = {"boundary_matrix", "domain", "steps", "strict", "delta0_override", "v0", "eps0",
               "growth_cap", "k_max", "thetas", "render"}
RENDER_KEYS = {"palette", "stroke_width", "max_cells"}


@dataclass
class RunConfig:
    boundary_matrix: tuple = (0.0, 0.0, 0.0, 0.0)
    domain: str = "unit-square"
    steps: int = 5
    strict: bool = False
    delta0_override: Optional[float] = None
    v0: float = 1e-6
    eps0: Optional[float] = None
    growth_cap: Optional[float] = 4.0
    k_max: int = 3
    thetas: tuple = ()
    render: render.RenderOptions = field(default_factory=render.RenderOptions)
    base: Path = Path(".")

    def engine_config(self) -> EngineConfig:
        return EngineConfig(M=Mat2(*self.boundary_matrix), eps0=self.eps0, v0=self.v0,
                            delta0_override=self.delta0_override, max_steps=self.steps,
                            strict=self.strict, growth_cap=self.growth_cap)

    def polygon_path(self) -> Optional[Path]:
        if self.domain == "unit-square":
            return None
        p = Path(self.domain)
        return p if p.is_absolute() else self.base / p


def _number(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number")
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite")
    return float(value)


def parse_run_config(text: str, base: Path = Path(".")) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig(base=base)
    if "boundary_matrix" in raw:
        bm = raw["boundary_matrix"]
        if not isinstance(bm, (list, tuple)) or len(bm) != 4:
            raise ConfigError("boundary_matrix must list four numbers a11 a12 a21 a22")
        cfg.boundary_matrix = tuple(_number(v, "boundary_matrix") for v in bm)
    if "domain" in raw:
        if not isinstance(raw["domain"], str):
            raise ConfigError("domain must be 'unit-square' or a polygon file path")
        cfg.domain = raw["domain"]
    for key in ("steps", "k_max"):
        if key in raw:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(f"{key} must be a non-negative integer")
            setattr(cfg, key, v)
    if "strict" in raw:
        if not isinstance(raw["strict"], bool):
            raise ConfigError("strict must be true or false")
        cfg.strict = raw["strict"]
    for key in ("delta0_override", "eps0", "growth_cap"):
        if key in raw:
            setattr(cfg, key, None if raw[key] is None else _number(raw[key], key))
    if "v0" in raw:
        cfg.v0 = _number(raw["v0"], "v0")
    if "thetas" in raw:
        if not isinstance(raw["thetas"], list):
            raise ConfigError("thetas must be a list")
        cfg.thetas = tuple(_number(v, "thetas") for v in raw["thetas"])
    if "render" in raw:
        r = raw["render"] or {}
        if not isinstance(r, dict) or set(r) - RENDER_KEYS:
            raise ConfigError(f"render accepts only {', '.join(sorted(RENDER_KEYS))}")
        palette = r.get("palette", "figure")
        if palette not in render.PALETTES:
            raise ConfigError(f"palette must be one of {', '.join(render.PALETTES)}")
        mc = r.get("max_cells")
        if mc is not None and (isinstance(mc, bool) or not isinstance(mc, int) or mc < 1):
            raise ConfigError("max_cells must be a positive integer")
        cfg.render = render.RenderOptions(
            palette=palette, stroke_width=_number(r.get("stroke_width", 0.0), "stroke_width"),
            max_cells=mc)
    # engine preconditions before any work
    cfg.engine_config().validate()
    return cfg


def load_run_config(path) -> RunConfig:
    path = Path(path)
    return parse_run_config(path.read_text(encoding="utf-8"), path.parent)


# ----------------------------------------------------------------------------
# commands


def _guard(fn):
    """Map package errors to exit codes."""
    try:
        return fn()
    except Exit:
        raise
    except InvariantViolation as exc:
        raise Exit(EXIT_INVARIANT, f"invariant violation: {exc}")
    except (NonTraceFree, BoundaryStrainNotInterior) as exc:
        raise Exit(EXIT_MATRIX, f"invalid boundary matrix: {exc}")
    except (ConfigError, AngleSumMismatch, DegenerateDomain) as exc:
        raise Exit(EXIT_CONFIG, f"bad input: {exc}")
    except MeshFormatError as exc:
        raise Exit(EXIT_MESH, f"malformed mesh: {exc}")
    except OSError as exc:
        raise Exit(EXIT_IO, f"i/o error: {exc}")
    except HexRhombError as exc:
        raise Exit(EXIT_OTHER, f"{type(exc).__name__}: {exc}")


def cmd_run(config_path, out_dir, per_step: bool = False, report: bool = False) -> int:
    def go():
        cfg = load_run_config(config_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        from .engine import run

        def on_step(state):
            log.info("step %d: %d cells, unresolved area %.6g", state.j, state.n_cells,
                     state.unresolved_area())
            if per_step:
                meshio.write_mesh(meshio.from_state(state), out / f"mesh_step_{state.j}.txt")

        poly = cfg.polygon_path()
        domain = domains.read_polygon(poly) if poly is not None else None
        result = run(cfg.engine_config(), on_step=on_step)
        metrics.write_csv(result.metrics, out / "metrics.csv")
        final = meshio.from_state(result.state)
        meshio.write_mesh(final, out / "mesh_final.txt")
        if domain is not None:
            cover = domains.dyadic_cover(domain, cfg.k_max)
            domains.write_cover(cover, out / "cover.txt")
            thetas = cfg.thetas or (0.1,)
            agg = domains.aggregate_rows(cover, result.metrics, thetas)
            _write_aggregate(agg, out / "aggregate.csv")
        if report:
            thetas = cfg.thetas or _report_thetas(result.metrics)
            render.metrics_figure(result.metrics, out / "metrics.png", thetas)
            render.write_svg(final, out / "mesh_final.svg", cfg.render)
            render.mesh_figure(final, out / "mesh_final.png", cfg.render)
        last = result.metrics[-1]
        click.echo(f"steps {last.j}  cells {last.n_cells}  unresolved area {last.unresolved_area:.6g}"
                   f"  theta_measured {last.theta_measured:.4g}")
        return EXIT_OK

    return _guard(go)


def _report_thetas(rows) -> tuple:
    t = rows[-1].theta_measured if rows else float("nan")
    return (0.5 * t, 2 * t) if math.isfinite(t) and t > 0 else ()


def _write_aggregate(agg, path) -> None:
    thetas = agg.thetas
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["j", "l1_total", "bvd_total", "unresolved_area"]
                          + [f"product_{t!r}" for t in thetas]) + "\n")
        for r in agg.rows:
            fh.write(",".join([str(r.j), repr(r.l1_total), repr(r.bvd_total),
                               repr(r.unresolved_area)]
                              + [repr(r.products[t]) for t in thetas]) + "\n")


def cmd_render(mesh_path, out_svg, step: Optional[int] = None,
               opts: render.RenderOptions = render.RenderOptions()) -> int:
    def go():
        mesh = meshio.read_mesh(mesh_path).select(step)
        render.write_svg(mesh, out_svg, opts)
        click.echo(f"{mesh.n_cells} cells -> {out_svg}")
        return EXIT_OK

    return _guard(go)


def cmd_metrics(csv_path, plot: Optional[str] = None) -> int:
    def go():
        rows = metrics.read_csv(csv_path)
        click.echo("j  n_cells  unresolved_area  l1_change  theta_measured")
        for r in rows:
            l1 = r["l1d1"] + r["l1d2"] + r["l1d3"]
            click.echo(f"{r['j']}  {r['n_cells']}  {r['unresolved_area']:.6g}  {l1:.4g}  "
                       f"{r['theta_measured']:.4g}")
        if plot:
            plt = render._pyplot()
            fig, ax = plt.subplots(figsize=(4.5, 3.2), constrained_layout=True)
            ax.plot([r["j"] for r in rows], [r["unresolved_area"] for r in rows], "o-")
            ax.set_xlabel("step")
            ax.set_ylabel("unresolved area")
            fig.savefig(plot, dpi=120)
            plt.close(fig)
        return EXIT_OK

    return _guard(go)


def format_corners(configs) -> str:
    blocks = []
    for c in configs:
        blocks.append(f"# {c.m}-fold\n" + c.to_text())
    return "\n".join(blocks)


def cmd_corners_list(strains=(1, 2, 3), max_sectors: int = 12) -> int:
    def go():
        configs = symmetry.enumerate_corners(strains, max_sectors)
        click.echo(format_corners(configs), nl=False)
        counts = {}
        for c in configs:
            counts[c.m] = counts.get(c.m, 0) + 1
        summary = ", ".join(f"{n} {m}-fold" for m, n in sorted(counts.items()))
        click.echo(f"# total: {summary}")
        return EXIT_OK

    return _guard(go)


def cmd_corners_check(path) -> int:
    def go():
        c = symmetry.CornerConfig.from_text(Path(path).read_text(encoding="utf-8"))
        res = symmetry.check_corner(c)
        if res.ok:
            click.echo(f"Compatible (residual {res.residual:.3g})")
            return EXIT_OK
        where = f" at ray {res.index}" if res.index >= 0 else ""
        click.echo(f"Fails condition {res.condition}{where} (residual {res.residual:.3g})")
        return EXIT_FAILS

    return _guard(go)


def cmd_bv_triangle(levels: int, mesh_out=None, svg_out=None, plot=None) -> int:
    def go():
        st = symmetry.bv_triangle(levels)
        click.echo("level  bv  increment  ratio")
        ratios = [float("nan")] + st.ratios()
        for k, (b, inc, r) in enumerate(zip(st.bv_by_level, st.increments, ratios), 1):
            click.echo(f"{k}  {b:.12g}  {inc:.6g}  {r:.12g}")
        click.echo(f"continuity residual {st.continuity_residual():.3g}  "
                   f"boundary residual {st.boundary_residual():.3g}")
        if mesh_out or svg_out:
            mesh = meshio.from_cells(((c.tri, c.grad.as_tuple(), c.label) for c in st.cells),
                                     step=levels)
            if mesh_out:
                meshio.write_mesh(mesh, mesh_out)
            if svg_out:
                render.write_svg(mesh, svg_out, render.RenderOptions(zero_fill="#cfe3f7"))
        if plot:
            render.bv_figure(st, plot)
        return EXIT_OK

    return _guard(go)


# ----------------------------------------------------------------------------
# click wiring


def _finish(code: int) -> None:
    if code:
        sys.exit(code)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool) -> None:
    """Piecewise affine microstructures for the hexagonal-to-rhombic transition."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")


@cli.command("run")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("-o", "--out", "out_dir", default=".", show_default=True, help="Output directory.")
@click.option("--per-step-meshes", is_flag=True, help="Also write mesh_step_<j>.txt.")
@click.option("--report", is_flag=True, help="Render metrics and mesh figures.")
def run_cmd(config, out_dir, per_step_meshes, report):
    """Run the iteration described by CONFIG (YAML)."""
    _finish(cmd_run(config, out_dir, per_step_meshes, report))


@cli.command("render")
@click.argument("mesh", type=click.Path(dir_okay=False))
@click.option("-o", "--out", "out_svg", required=True, help="SVG file to write.")
@click.option("--step", type=int, default=None, help="Step to draw (default: last).")
@click.option("--palette", type=click.Choice(sorted(render.PALETTES)), default="figure")
@click.option("--stroke-width", type=float, default=0.0)
@click.option("--max-cells", type=int, default=None)
def render_cmd(mesh, out_svg, step, palette, stroke_width, max_cells):
    """Draw MESH as SVG: well 1 white, well 2 gray, well 3 black, unresolved hatched."""
    opts = render.RenderOptions(palette=palette, stroke_width=stroke_width, max_cells=max_cells)
    _finish(cmd_render(mesh, out_svg, step, opts))


@cli.command("metrics")
@click.argument("csv_path", type=click.Path(dir_okay=False))
@click.option("--plot", default=None, help="Write a PNG of the unresolved area.")
def metrics_cmd(csv_path, plot):
    """Summarize a metrics.csv file."""
    _finish(cmd_metrics(csv_path, plot))


@cli.group("corners")
def corners_cmd():
    """Enumerate or check zero-homogeneous corners."""


@corners_cmd.command("list")
@click.option("--strains", default="1,2,3", show_default=True,
              help="Comma-separated labels; 0 is the zero strain.")
@click.option("--max-sectors", type=int, default=12, show_default=True)
def corners_list_cmd(strains, max_sectors):
    try:
        labels = tuple(int(s) for s in strains.split(","))
    except ValueError:
        raise click.BadParameter("labels must be integers", param_hint="--strains")
    _finish(cmd_corners_list(labels, max_sectors))


@corners_cmd.command("check")
@click.argument("path", type=click.Path(dir_okay=False))
def corners_check_cmd(path):
    """Check the corner described in PATH."""
    _finish(cmd_corners_check(path))


@cli.command("bv-triangle")
@click.option("--levels", type=click.IntRange(min=1), default=6, show_default=True)
@click.option("--mesh", "mesh_out", default=None, help="Write the cells as a mesh file.")
@click.option("--svg", "svg_out", default=None, help="Write an SVG picture.")
@click.option("--plot", default=None, help="Write a PNG of the BV increments.")
def bv_triangle_cmd(levels, mesh_out, svg_out, plot):
    """Nested triangle construction with zero boundary data."""
    _finish(cmd_bv_triangle(levels, mesh_out, svg_out, plot))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="hexrhomb", standalone_mode=False)
    except Exit as exc:
        if exc.message:
            click.echo(exc.message, err=True)
        sys.exit(exc.code)
    except click.exceptions.Abort:
        sys.exit(EXIT_USAGE)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    return 0


if __name__ == "__main__":
    main()
