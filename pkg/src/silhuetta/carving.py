"""Iterative photo-consistency carving of the visual hull.

Surface voxels whose observed colors disagree across the views that see
them (per-channel population std above tau) are removed; removals are
batched per sweep (Jacobi style) so the result is independent of
visitation order, and relabelling exposes interior voxels for the next
sweep. Occlusion is decided by walking the ray toward each camera in
half-voxel steps against the current solid set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .camera import in_sensor, project_points
from .hull import OUTSIDE, VoxelGrid, cam_tuple, label_solid, voxel_center


@dataclass(frozen=True)
class ColorImageSet:
    views: tuple  # ((rgb uint8 image, CameraParams), ...)

    def __post_init__(self):
        views = tuple((np.ascontiguousarray(img, dtype=np.uint8), cam) for img, cam in self.views)
        object.__setattr__(self, "views", views)
        if len(views) < 2:
            raise ValueError(f"need >= 2 views, got {len(views)}")
        for img, cam in views:
            k = cam.intrinsics
            if img.shape != (k.height, k.width, 3):
                raise ValueError(
                    f"view '{cam.id}': image shape {img.shape} != sensor {(k.height, k.width, 3)}"
                )

    def __len__(self):
        return len(self.views)


@dataclass(frozen=True)
class ConsistencyParams:
    tau: float = 25.0
    min_views: int = 2
    max_iters: int = 64

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.min_views < 2:
            raise ValueError(f"min_views must be >= 2, got {self.min_views}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class CarveResult:
    grid: VoxelGrid
    iterations: int
    removed: int
    converged: bool


def _ray_occluded_scalar(g: VoxelGrid, idx, center, cam_center) -> bool:
    """Reference occlusion walk for a single voxel/camera pair."""
    labels = g.labels
    h = g.h
    lo = g.bv.vmin
    hi = g.bv.vmax
    d = np.asarray(cam_center, dtype=np.float64) - center
    dist = float(np.sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]))
    if dist == 0.0:
        return False
    u = d / dist
    step = 0.5 * float(min(h))
    t = step
    while t < dist:
        p = center + u * t
        if (p < lo).any() or (p >= hi).any():
            return False
        ii = tuple(np.floor((p - lo) / h).astype(int))
        if labels[ii] != OUTSIDE and ii != tuple(idx):
            return True
        t += step
    return False


def voxel_samples(g: VoxelGrid, idx, imgs: ColorImageSet) -> list:
    """RGB samples of one solid voxel: one per view whose projection is
    on-sensor and whose sight line is not blocked by other solid voxels.
    Returns possibly-empty list of (r, g, b) tuples in view order."""
    i, j, k = idx
    if g.labels[i, j, k] == OUTSIDE:
        raise ValueError(f"voxel {idx} is not solid")
    center = voxel_center(g, i, j, k)
    samples = []
    for img, cam in imgs.views:
        uv, z = project_points(center[None, :], cam)
        if z[0] <= 0.0 or not in_sensor(uv[0, 0], uv[0, 1], cam.intrinsics):
            continue
        if _ray_occluded_scalar(g, idx, center, cam.center):
            continue
        px, py = int(np.floor(uv[0, 0])), int(np.floor(uv[0, 1]))
        samples.append(tuple(int(c) for c in img[py, px]))
    return samples


def is_consistent(samples, p: ConsistencyParams) -> bool:
    """Photo-consistency verdict for one voxel's color samples.

    Fewer than min_views samples never carves (insufficient evidence);
    otherwise every channel's population std must stay within tau.
    """
    if len(samples) < p.min_views:
        return True
    arr = np.asarray(samples, dtype=np.float64)
    n = float(len(samples))
    mean = arr.sum(axis=0) / n
    var = (arr * arr).sum(axis=0) / n - mean * mean
    return not bool((var > p.tau * p.tau).any())


def carve(g: VoxelGrid, imgs: ColorImageSet, p: ConsistencyParams | None = None) -> CarveResult:
    """Carve until a full sweep removes nothing or max_iters is reached.

    Only surface voxels are tested; removals expose interior voxels,
    which the relabelling pass promotes to the surface for the next
    sweep. Returns a fresh grid; the input is untouched.
    """
    p = p or ConsistencyParams()
    cams = [cam_tuple(c) for _, c in imgs.views]
    images = [img for img, _ in imgs.views]
    labels = g.labels.copy()
    origin = g.bv.vmin
    h = g.h
    removed_total = 0
    iterations = 0
    converged = False
    for _ in range(p.max_iters):
        iterations += 1
        remove = _kernels.carve_sweep(
            labels, origin, h, cams, images, float(p.tau), int(p.min_views)
        )
        n_removed = int(np.count_nonzero(remove))
        if n_removed == 0:
            converged = True
            break
        removed_total += n_removed
        solid = (labels != OUTSIDE) & ~np.asarray(remove, dtype=bool)
        labels = label_solid(solid)
    out = VoxelGrid(bv=g.bv, dims=g.dims, labels=labels)
    return CarveResult(grid=out, iterations=iterations, removed=removed_total,
                       converged=converged)
