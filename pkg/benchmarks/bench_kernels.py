"""Benchmark the compiled kernel core against the numpy fallback.

Times the two hot kernels (voxel classification, one carving sweep) and
a full pipeline-style carve on the bundled two-tone sphere scene, and
verifies both backends return identical results while at it.

Usage: python benchmarks/bench_kernels.py [--grid N] [--repeat K]
"""

import argparse
import time

import numpy as np

from silhuetta import data_path
from silhuetta._kernels import available_backends
from silhuetta.hull import (SilhouetteSet, build_grid, cam_tuple, classify_voxels,
                            label_solid)
from silhuetta.synth import exact_silhouette_views, load_scene, render_color


def best_of(fn, repeat):
    times = []
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("note: compiled extension not built; benchmarking numpy only")

    scene = load_scene(data_path("scenes/twotone_sphere.json"))
    views = exact_silhouette_views(scene)
    cams = [cam_tuple(c) for _, c in views]
    masks = [np.ascontiguousarray(m, dtype=np.uint8) for m, _ in views]
    images = [np.ascontiguousarray(render_color(scene, c, seed=3)) for _, c in views]
    n = args.grid
    grid = build_grid(scene.bv, (n, n, n))
    origin, h = grid.bv.vmin, grid.h

    # a padded hull so the carve sweep has plenty of surface to test
    hull = classify_voxels(grid, SilhouetteSet(views=tuple(views)))
    from scipy import ndimage

    padded = ndimage.binary_dilation(hull.solid(), iterations=4)
    labels = label_solid(padded)
    n_surface = int((labels == 1).sum())

    rows = []
    results = {}
    for name, mod in backends.items():
        t_cls, solid = best_of(
            lambda m=mod: m.classify_solid(origin, h, (n, n, n), cams, masks),
            args.repeat)
        t_carve, removed = best_of(
            lambda m=mod: m.carve_sweep(labels, origin, h, cams, images, 25.0, 2),
            args.repeat)
        rows.append((name, t_cls, t_carve))
        results[name] = (solid, removed)

    if len(results) == 2:
        a, b = results["compiled"], results["numpy"]
        assert np.array_equal(a[0], b[0]), "classify results differ between backends"
        assert np.array_equal(a[1], b[1]), "carve results differ between backends"
        agree = "backends agree bit-exactly"
    else:
        agree = "single backend"

    print(f"\ngrid {n}^3, {len(cams)} views, {n_surface} surface voxels ({agree})")
    print(f"{'backend':<10} {'classify':>12} {'carve sweep':>12}")
    for name, t_cls, t_carve in rows:
        print(f"{name:<10} {t_cls * 1e3:>10.1f}ms {t_carve * 1e3:>10.1f}ms")
    if len(rows) == 2:
        base = {r[0]: r for r in rows}
        print(f"{'speedup':<10} {base['numpy'][1] / base['compiled'][1]:>11.1f}x "
              f"{base['numpy'][2] / base['compiled'][2]:>11.1f}x")


if __name__ == "__main__":
    main()
