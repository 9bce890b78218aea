"""Command-line entry points wiring the pipeline over on-disk datasets.

Exit codes: 0 success, 1 no landing site found, 2 usage/config error,
3 I/O error (missing or unwritable files). All numeric output uses fixed
6-decimal formatting.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np

from . import dataset as dsio
from . import sim
from .config import RunConfig, load_config, save_config
from .formats import ParseError, fmt, write_kv
from .geometry import CameraIntrinsics
from .selector import DroneState, annotate_map, clearance_transform, select_landing_site


class IOFailure(click.ClickException):
    exit_code = 3


def _guard(func):
    """Map library errors onto the CLI exit-code contract."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
            raise IOFailure(str(exc)) from exc
        except ParseError as exc:
            raise click.UsageError(str(exc)) from exc
        except ValueError as exc:
            raise click.UsageError(str(exc)) from exc
        except OSError as exc:
            raise IOFailure(str(exc)) from exc

    return wrapper


_CONFIG_FLAGS = [
    ("--config", "config_path", str, "Key=value config file (flags override it)."),
    ("--alpha", "alpha", float, "Weight of the drone-distance cost term."),
    ("--beta", "beta", float, "Weight of the inverse-clearance cost term."),
    ("--resolution", "resolution", float, "Grid resolution in meters per cell."),
    ("--patch-size", "patch_size", float, "Landing patch side in meters."),
    ("--slope-max-deg", "slope_max_deg", float, "Maximum landable plane inclination."),
    ("--rough-max", "rough_max", float, "Maximum point-to-plane roughness in meters."),
    ("--leaf", "leaf_size", float, "Voxel downsampling leaf size in meters."),
    ("--p-safe", "p_safe", float, "Cell probability needed to classify Safe."),
    ("--p-unsafe", "p_unsafe", float, "Cell probability below which a cell is Unsafe."),
    ("--seed", "seed", int, "Base RNG seed."),
    ("--threads", "threads", int, "Worker threads for frame conditioning."),
    ("--label-corruption", "label_corruption", float, "Fraction of label pixels to flip."),
    ("--l-hit", "l_hit", float, "Log-odds increment per safe observation."),
    ("--l-miss", "l_miss", float, "Log-odds decrement per unsafe observation."),
    ("--l-min", "l_min", float, "Lower log-odds clamp."),
    ("--l-max", "l_max", float, "Upper log-odds clamp."),
    ("--clearance-cap", "clearance_cap", float, "Clearance cap for all-safe maps, meters."),
    ("--drone-diameter", "drone_diameter", float, "Drone diameter in meters."),
    ("--patch-scale", "patch_scale", float, "Patch side as a multiple of the drone size."),
    ("--sor-k", "sor_neighbors", int, "Neighbors for statistical outlier removal."),
    ("--sor-std", "sor_std_mult", float, "Std-dev multiplier for outlier removal."),
    ("--mls-radius", "mls_radius", float, "MLS smoothing radius in meters."),
    ("--ransac-dist", "ransac_dist", float, "RANSAC inlier distance in meters."),
    ("--ransac-iters", "ransac_iters", int, "RANSAC iterations per plane."),
    ("--min-plane-points", "min_plane_points", int, "Minimum plane support."),
]


def config_options(func):
    for flag, name, ftype, help_text in reversed(_CONFIG_FLAGS):
        func = click.option(flag, name, type=ftype, default=None, help=help_text)(func)
    return func


def build_config(kwargs: dict) -> RunConfig:
    """Resolve defaults -> config file -> explicit flags, in that order."""
    cfg = RunConfig()
    config_path = kwargs.pop("config_path", None)
    if config_path is not None:
        if not Path(config_path).is_file():
            raise FileNotFoundError(f"config file not found: {config_path}")
        cfg = load_config(config_path, cfg)
    patch_size = kwargs.pop("patch_size", None)
    overrides = {k: v for k, v in kwargs.items() if v is not None}
    if overrides:
        cfg = cfg.with_overrides(overrides)
    if patch_size is not None:
        cfg = cfg.with_overrides(
            {"patch_scale": patch_size / cfg.selector.drone_diameter}
        )
    return cfg


@click.group()
@click.version_option(package_name="safeland")
def main():
    """Safe landing zone detection: simulate, map, select, evaluate."""


@main.command()
@click.argument("scene_spec", type=click.Path())
@click.argument("trajectory_spec", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--noise-sigma", type=float, default=0.01, help="Depth noise sigma, meters.")
@click.option("--seed", type=int, default=0, help="Rendering RNG seed.")
@click.option("--resolution", type=float, default=0.1, help="Truth map resolution, meters.")
@click.option("--truth-margin", type=float, default=None, help="Hazard inflation, meters.")
@click.option("--width", type=int, default=640, help="Rendered image width.")
@click.option("--height", type=int, default=480, help="Rendered image height.")
@click.option("--fx", type=float, default=300.0, help="Focal length x, pixels.")
@click.option("--fy", type=float, default=300.0, help="Focal length y, pixels.")
@_guard
def simulate(scene_spec, trajectory_spec, out_dir, noise_sigma, seed, resolution,
             truth_margin, width, height, fx, fy):
    """Render a synthetic dataset from a scene and a trajectory spec."""
    for path in (scene_spec, trajectory_spec):
        if not Path(path).is_file():
            raise FileNotFoundError(f"spec file not found: {path}")
    scene_cfg = sim.parse_scene_spec(scene_spec)
    traj_cfg = sim.parse_trajectory_spec(trajectory_spec)
    intr = CameraIntrinsics(fx, fy, width / 2, height / 2, width, height)
    if truth_margin is None:
        defaults = RunConfig()
        side = defaults.selector.patch_side(resolution)
        truth_margin = side * resolution / 2
    count = sim.simulate_dataset(
        scene_cfg,
        traj_cfg,
        out_dir,
        intr,
        noise_sigma=noise_sigma,
        seed=seed,
        resolution=resolution,
        safety_margin=truth_margin,
    )
    click.echo(f"wrote {count} frames to {out_dir}")


def _write_map_outputs(result, cfg: RunConfig, out: Path, dump_clouds=None):
    from .pipeline import write_timing_log

    cg = result.grid.class_grid(cfg.grid)
    dsio.save_class_grid(out / "map.pgm", cg)
    write_timing_log(out / "timing.csv", result.timings)
    save_config(out / "config.txt", cfg)
    return cg


@main.command()
@click.argument("dataset_dir", type=click.Path())
@click.option("-o", "--out", "out_dir", type=click.Path(), required=True)
@click.option("--dump-clouds", type=click.Path(), default=None,
              help="Directory for per-frame ASCII XYZ cloud dumps.")
@config_options
@_guard
def process(dataset_dir, out_dir, dump_clouds, **kwargs):
    """Process a dataset into map.pgm / map.hdr plus a per-frame timing log."""
    from .pipeline import process_dataset

    cfg = build_config(kwargs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = process_dataset(dataset_dir, cfg, dump_cloud_dir=dump_clouds)
    _write_map_outputs(result, cfg, out)
    click.echo(f"processed {result.frames} frames into {out / 'map.pgm'}")


def _select_from_grid(cg, drone_xyz, yaw, cfg):
    drone = DroneState(np.array(drone_xyz), yaw)
    return select_landing_site(cg, drone, cfg.selector)


def _site_line(site) -> str:
    x, y = site.center_world
    return f"{fmt(x)} {fmt(y)} {fmt(site.cost)} {fmt(site.j_d)} {fmt(site.j_un)}"


@main.command()
@click.argument("map_pgm", type=click.Path())
@click.option("--header", "hdr_path", type=click.Path(), default=None,
              help="Map header sidecar (defaults to <map>.hdr).")
@click.option("--drone", nargs=3, type=float, required=True, metavar="X Y Z",
              help="Drone position in world coordinates.")
@click.option("--yaw", type=float, default=0.0, help="Drone yaw, radians.")
@click.option("-o", "--out", "site_path", type=click.Path(), default=None,
              help="Also write the site report to this file.")
@click.option("--annotate", "annotate_path", type=click.Path(), default=None,
              help="Write a copy of the map with the chosen cell marked (byte 64).")
@config_options
@_guard
def select(map_pgm, hdr_path, drone, yaw, site_path, annotate_path, **kwargs):
    """Pick the lowest-cost landing site from an exported map."""
    cfg = build_config(kwargs)
    if not Path(map_pgm).is_file():
        raise FileNotFoundError(f"map file not found: {map_pgm}")
    cg = dsio.load_class_grid(map_pgm, hdr_path)
    site = _select_from_grid(cg, drone, yaw, cfg)
    line = "NO_SITE" if site is None else _site_line(site)
    click.echo(line)
    if site_path is not None:
        Path(site_path).write_text(line + "\n")
    if site is not None and annotate_path is not None:
        dsio.save_class_grid(annotate_path, cg, image=annotate_map(cg, site))
    if site is None:
        sys.exit(1)


@main.command()
@click.argument("map_pgm", type=click.Path())
@click.argument("truth_pgm", type=click.Path())
@click.option("--map-header", type=click.Path(), default=None)
@click.option("--truth-header", type=click.Path(), default=None)
@_guard
def evaluate(map_pgm, truth_pgm, map_header, truth_header):
    """Compare an exported map against a ground-truth map, cell by cell."""
    for path in (map_pgm, truth_pgm):
        if not Path(path).is_file():
            raise FileNotFoundError(f"map file not found: {path}")
    pred = dsio.load_class_grid(map_pgm, map_header)
    truth = dsio.load_class_grid(truth_pgm, truth_header)
    report = sim.evaluate_class_grid(pred, truth)
    click.echo("# positive_class=safe")
    click.echo(
        f"tp={report.tp} tn={report.tn} fp={report.fp} fn={report.fn} acc={fmt(report.acc)}"
    )


@main.command(name="run-all")
@click.argument("scene_spec", type=click.Path())
@click.argument("trajectory_spec", type=click.Path())
@click.argument("out_dir", type=click.Path())
@click.option("--noise-sigma", type=float, default=0.01)
@click.option("--width", type=int, default=640)
@click.option("--height", type=int, default=480)
@click.option("--fx", type=float, default=300.0)
@click.option("--fy", type=float, default=300.0)
@click.option("--drone", nargs=3, type=float, default=None,
              help="Selection position; defaults to the final trajectory pose.")
@click.option("--yaw", type=float, default=0.0)
@config_options
@_guard
def run_all(scene_spec, trajectory_spec, out_dir, noise_sigma, width, height,
            fx, fy, drone, yaw, **kwargs):
    """Chain simulate -> process -> select -> evaluate in one run."""
    from .pipeline import process_dataset

    cfg = build_config(kwargs)
    for path in (scene_spec, trajectory_spec):
        if not Path(path).is_file():
            raise FileNotFoundError(f"spec file not found: {path}")
    scene_cfg = sim.parse_scene_spec(scene_spec)
    traj_cfg = sim.parse_trajectory_spec(trajectory_spec)
    intr = CameraIntrinsics(fx, fy, width / 2, height / 2, width, height)
    out = Path(out_dir)
    dataset_dir = out / "dataset"
    side = cfg.selector.patch_side(cfg.resolution)
    count = sim.simulate_dataset(
        scene_cfg,
        traj_cfg,
        dataset_dir,
        intr,
        noise_sigma=noise_sigma,
        seed=cfg.seed,
        resolution=cfg.resolution,
        safety_margin=side * cfg.resolution / 2,
        slope_max_deg=cfg.pipeline.slope_max_deg,
    )
    result = process_dataset(dataset_dir, cfg)
    cg = _write_map_outputs(result, cfg, out)

    if drone is None:
        poses = sim.generate_trajectory(traj_cfg, scene_cfg.extent)
        drone = tuple(poses[-1][1].translation)
    site = _select_from_grid(cg, drone, yaw, cfg)
    line = "NO_SITE" if site is None else _site_line(site)
    (out / "site.txt").write_text(line + "\n")
    click.echo(f"frames={count}")
    click.echo(f"site: {line}")
    if site is not None:
        dsio.save_class_grid(out / "map_annotated.pgm", cg, image=annotate_map(cg, site))

    truth = dsio.load_class_grid(dataset_dir / "truth.pgm")
    report = sim.evaluate_class_grid(cg, truth)
    eval_line = (
        f"tp={report.tp} tn={report.tn} fp={report.fp} fn={report.fn} acc={fmt(report.acc)}"
    )
    (out / "eval.txt").write_text("# positive_class=safe\n" + eval_line + "\n")
    click.echo(f"eval: {eval_line}")
    if site is None:
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the mapping service (FastAPI over uvicorn)."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
