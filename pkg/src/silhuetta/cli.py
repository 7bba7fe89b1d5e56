"""End-to-end pipeline driver and the `silhuetta` command line tool.

Pipeline stages: acquire views (synthesize from a scene file or load
images + rig) -> extract silhouettes -> classify voxels -> carve ->
mesh -> volume -> report. Artifacts are deterministic for a fixed
config and seed; wall-clock timings go only into the run summary.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels, data_path, image_io, metrics, synth
from .camera import load_rig
from .carving import CarveResult, ColorImageSet, ConsistencyParams, carve
from .hull import (BoundingVolume, SilhouetteSet, build_grid, classify_voxels,
                   hull_volume, save_grid)
from .mesh import extract_surface_mesh, read_obj, signed_volume, write_obj, write_stl
from .silhouette import EmptySilhouette, PreprocessConfig, StructuringElement, extract_silhouette


class PipelineError(Exception):
    """Pipeline stage failure; carries the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    scene_path: str | None = None
    image_paths: tuple = ()
    rig_path: str | None = None
    out_dir: str = "out"
    grid_dims: tuple = (128, 128, 128)
    bv: BoundingVolume | None = None
    preprocess: PreprocessConfig | None = None  # None: scene hints / defaults
    consistency: ConsistencyParams = field(default_factory=ConsistencyParams)
    naive: bool = False
    invert: bool | None = None  # None: use the scene's recommendation
    no_carve: bool = False
    seed: int = 0
    stl: bool = False

    def __post_init__(self):
        has_scene = self.scene_path is not None
        has_images = len(self.image_paths) > 0
        if has_scene == has_images:
            raise ValueError("provide exactly one of scene_path / image_paths")
        if has_images and self.rig_path is None:
            raise ValueError("image input needs a rig file")
        self.grid_dims = tuple(int(d) for d in self.grid_dims)
        if len(self.grid_dims) != 3 or any(d < 8 for d in self.grid_dims):
            raise ValueError(f"grid dims must be >= 8 per axis, got {self.grid_dims}")


@dataclass
class PipelineResult:
    out_dir: str
    volume_cm3: float
    hull_volume_cm3: float
    solid_after_classify: int
    solid_after_carve: int
    carve: CarveResult | None
    ground_truth_cm3: float | None
    artifacts: dict
    timings: dict


def _n_workers(n_tasks: int) -> int:
    cap = os.environ.get("SILHUETTA_THREADS")
    workers = int(cap) if cap else min(4, os.cpu_count() or 1)
    return max(1, min(workers, n_tasks))


def _bundled_or_path(path: str) -> Path:
    """Resolve a path on disk, falling back to the bundled data files
    (so `scenes/exp1_sphere_shadow.json` works from anywhere)."""
    p = Path(path)
    if p.exists():
        return p
    candidate = data_path(path)
    if candidate.is_file():
        return Path(str(candidate))
    return p


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    artifacts: dict[str, str] = {}

    # --- acquire views -----------------------------------------------------
    t0 = time.perf_counter()
    scene = None
    ground_truth = None
    if cfg.scene_path is not None:
        scene = synth.load_scene(_bundled_or_path(cfg.scene_path))
        rig = scene.rig
        ground_truth = scene.largest_volume()
        with ThreadPoolExecutor(_n_workers(len(rig))) as pool:
            images = list(pool.map(lambda c: synth.render_color(scene, c, cfg.seed), rig))
        for cam, img in zip(rig, images):
            p = out / f"view_{cam.id}.ppm"
            image_io.save_ppm(p, img)
            artifacts[f"view_{cam.id}"] = str(p)
    else:
        rig = load_rig(_bundled_or_path(cfg.rig_path))
        if len(cfg.image_paths) != len(rig):
            raise PipelineError(
                "acquire", f"{len(cfg.image_paths)} images for a {len(rig)}-camera rig"
            )
        images = [image_io.load_image(p) for p in cfg.image_paths]
    if cfg.bv is not None:
        bv = cfg.bv
    elif scene is not None:
        bv = scene.bv
    else:
        raise PipelineError("acquire", "image input needs an explicit bounding volume (--bv)")
    invert = cfg.invert
    if invert is None:
        invert = scene.invert if scene is not None else False
    preprocess = cfg.preprocess
    if preprocess is None:
        preprocess = PreprocessConfig(window=scene.window) if scene is not None \
            else PreprocessConfig()
    timings["acquire"] = time.perf_counter() - t0

    # --- silhouettes -------------------------------------------------------
    t0 = time.perf_counter()

    def _extract(arg):
        cam, img = arg
        try:
            return extract_silhouette(img, preprocess, naive=cfg.naive, invert=invert)
        except EmptySilhouette as exc:
            raise PipelineError("silhouette", f"view '{cam.id}': {exc}") from exc

    with ThreadPoolExecutor(_n_workers(len(rig))) as pool:
        masks = list(pool.map(_extract, zip(rig, images)))
    for cam, mask in zip(rig, masks):
        p = out / f"mask_{cam.id}.pgm"
        image_io.save_mask_pgm(p, mask)
        artifacts[f"mask_{cam.id}"] = str(p)
    timings["silhouette"] = time.perf_counter() - t0

    # --- visual hull -------------------------------------------------------
    t0 = time.perf_counter()
    silhouettes = SilhouetteSet(views=tuple(zip(masks, rig)))
    grid = classify_voxels(build_grid(bv, cfg.grid_dims), silhouettes)
    solid_classify = grid.solid_count()
    if solid_classify == 0:
        raise PipelineError("classify", "visual hull is empty")
    timings["classify"] = time.perf_counter() - t0

    # --- carving -----------------------------------------------------------
    t0 = time.perf_counter()
    carve_result = None
    if not cfg.no_carve:
        carve_result = carve(grid, ColorImageSet(views=tuple(zip(images, rig))),
                             cfg.consistency)
        grid = carve_result.grid
    solid_carve = grid.solid_count()
    if solid_carve == 0:
        raise PipelineError("carve", "carving removed every voxel")
    timings["carve"] = time.perf_counter() - t0
    grid_path = out / "hull.vox"
    save_grid(grid, grid_path)
    artifacts["grid"] = str(grid_path)

    # --- mesh + volume -----------------------------------------------------
    t0 = time.perf_counter()
    mesh = extract_surface_mesh(grid)
    obj_path = out / "mesh.obj"
    write_obj(mesh, obj_path)
    artifacts["mesh"] = str(obj_path)
    if cfg.stl:
        stl_path = out / "mesh.stl"
        write_stl(mesh, stl_path)
        artifacts["stl"] = str(stl_path)
    volume = signed_volume(mesh)
    timings["mesh"] = time.perf_counter() - t0

    # --- report ------------------------------------------------------------
    t0 = time.perf_counter()
    report_path = out / "report.csv"
    method = "naive" if cfg.naive else "optimized"
    if ground_truth is not None:
        rec = metrics.VolumeRecord(
            experiment=scene.name, method=method,
            experimental_volume=volume, real_volume=ground_truth,
        )
        report_path.write_text(metrics.report([rec]))
    else:
        report_path.write_text(
            "experiment,method,exp_volume_cm3,real_volume_cm3,RE_pct,precision_pct\n"
            f"# no ground truth available; measured volume {volume!r} cm3\n"
        )
    artifacts["report"] = str(report_path)
    timings["report"] = time.perf_counter() - t0

    summary = {
        "backend": _kernels.BACKEND,
        "method": method,
        "grid_dims": list(cfg.grid_dims),
        "seed": cfg.seed,
        "invert": bool(invert),
        "solid_after_classify": solid_classify,
        "solid_after_carve": solid_carve,
        "hull_volume_cm3": hull_volume(grid),
        "mesh_volume_cm3": volume,
        "ground_truth_cm3": ground_truth,
        "carve_iterations": carve_result.iterations if carve_result else 0,
        "carve_removed": carve_result.removed if carve_result else 0,
        "carve_converged": carve_result.converged if carve_result else True,
        "consistency_check": None if cfg.no_carve else {
            "statistic": "per-channel population std vs tau "
                         "(substitute for an unspecified criterion)",
            "tau": cfg.consistency.tau,
            "min_views": cfg.consistency.min_views,
        },
        "stage_seconds": {k: round(v, 4) for k, v in timings.items()},
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    artifacts["summary"] = str(summary_path)

    return PipelineResult(
        out_dir=str(out), volume_cm3=volume, hull_volume_cm3=hull_volume(grid),
        solid_after_classify=solid_classify, solid_after_carve=solid_carve,
        carve=carve_result, ground_truth_cm3=ground_truth,
        artifacts=artifacts, timings=timings,
    )


# ---------------------------------------------------------------------------
# argument parsing

def _parse_grid(text: str):
    parts = text.lower().split("x")
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be N or N1xN2xN3, got {text!r}")
    return tuple(int(p) for p in parts)


def _parse_bv(text: str) -> BoundingVolume:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 6:
        raise argparse.ArgumentTypeError("bv needs x0,y0,z0,x1,y1,z1")
    return BoundingVolume(vmin=np.array(vals[:3]), vmax=np.array(vals[3:]))


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="silhuetta",
        description="Shape-from-silhouette reconstruction with silhouette optimization",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="render/jitter seed")
    common.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("synth", parents=[common],
                       help="render a scene: color PPMs, exact mask PGMs, metadata")
    p.add_argument("scene", help="scene JSON (bundled name or path)")

    p = sub.add_parser("silhouette", help="extract one silhouette mask")
    p.add_argument("--in", dest="input", required=True, help="input PPM/PGM image")
    p.add_argument("--out", required=True, help="output mask PGM")
    p.add_argument("--naive", action="store_true", help="plain Otsu baseline")
    p.add_argument("--invert", action="store_true",
                   help="object darker than background: invert before thresholding")
    p.add_argument("--window", type=int, default=3, help="normalization window (odd)")
    p.add_argument("--se", type=int, default=3, help="opening structuring element size")

    p = sub.add_parser("reconstruct", parents=[common],
                       help="full pipeline: silhouettes, hull, carving, mesh, report")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scene", help="scene JSON (bundled name or path)")
    src.add_argument("--images", nargs="+", help="color views (PPM), in rig order")
    p.add_argument("--rig", help="rig JSON (with --images)")
    p.add_argument("--grid", type=_parse_grid, default=(128, 128, 128),
                   help="voxel grid dims, N or N1xN2xN3")
    p.add_argument("--bv", type=_parse_bv, default=None,
                   help="bounding volume x0,y0,z0,x1,y1,z1 in mm")
    p.add_argument("--naive", action="store_true")
    p.add_argument("--invert", action="store_true", default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--se", type=int, default=3)
    p.add_argument("--tau", type=float, default=25.0, help="photo-consistency threshold")
    p.add_argument("--min-views", type=int, default=2)
    p.add_argument("--max-iters", type=int, default=64)
    p.add_argument("--no-carve", action="store_true", help="visual hull only")
    p.add_argument("--stl", action="store_true", help="also write binary STL")

    p = sub.add_parser("volume", help="signed volume of an OBJ mesh")
    p.add_argument("mesh", help="OBJ file")

    p = sub.add_parser("report", help="volume comparison metrics from a records CSV")
    p.add_argument("records", help="CSV: experiment,method,exp_volume_cm3,real_volume_cm3")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    return ap


def _cmd_synth(args) -> int:
    scene = synth.load_scene(_bundled_or_path(args.scene))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cam in scene.rig:
        image_io.save_ppm(out / f"view_{cam.id}.ppm", synth.render_color(scene, cam, args.seed))
        image_io.save_mask_pgm(out / f"mask_{cam.id}.pgm",
                               synth.render_silhouette_exact(scene, cam))
    meta = {
        "name": scene.name,
        "cameras": [c.id for c in scene.rig],
        "ground_truth_volume_cm3": synth.analytic_volume(scene),
        "largest_object_volume_cm3": scene.largest_volume(),
        "bv": {"min": list(map(float, scene.bv.vmin)), "max": list(map(float, scene.bv.vmax))},
        "invert": scene.invert,
        "window": scene.window,
        "seed": args.seed,
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {2 * len(scene.rig)} images + metadata to {out}")
    return 0


def _cmd_silhouette(args) -> int:
    img = image_io.load_image(args.input)
    cfg = PreprocessConfig(window=args.window, se=StructuringElement.square(args.se))
    mask = extract_silhouette(img, cfg, naive=args.naive, invert=args.invert)
    image_io.save_mask_pgm(args.out, mask)
    print(f"wrote {args.out} ({int(mask.sum())} foreground px)")
    return 0


def _cmd_reconstruct(args) -> int:
    if args.window is None and args.se == 3:
        preprocess = None  # fall back to the scene's recommended settings
    else:
        preprocess = PreprocessConfig(
            window=args.window if args.window is not None else 3,
            se=StructuringElement.square(args.se),
        )
    cfg = PipelineConfig(
        scene_path=args.scene,
        image_paths=tuple(args.images or ()),
        rig_path=args.rig,
        out_dir=args.out,
        grid_dims=args.grid,
        bv=args.bv,
        preprocess=preprocess,
        consistency=ConsistencyParams(tau=args.tau, min_views=args.min_views,
                                      max_iters=args.max_iters),
        naive=args.naive,
        invert=args.invert,
        no_carve=args.no_carve,
        seed=args.seed,
        stl=args.stl,
    )
    result = run_pipeline(cfg)
    print(f"volume: {result.volume_cm3:.6f} cm3")
    if result.ground_truth_cm3:
        err = (result.volume_cm3 - result.ground_truth_cm3) / result.ground_truth_cm3 * 100
        print(f"ground truth: {result.ground_truth_cm3:.6f} cm3 (error {err:+.2f}%)")
    print(f"artifacts in {result.out_dir}")
    return 0


def _cmd_volume(args) -> int:
    print(f"{signed_volume(read_obj(args.mesh)):.6f} cm3")
    return 0


def _cmd_report(args) -> int:
    table = metrics.report(metrics.load_records_csv(_bundled_or_path(args.records)))
    if args.out:
        Path(args.out).write_text(table)
    else:
        sys.stdout.write(table)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "synth": _cmd_synth,
        "silhouette": _cmd_silhouette,
        "reconstruct": _cmd_reconstruct,
        "volume": _cmd_volume,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (PipelineError, EmptySilhouette, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
