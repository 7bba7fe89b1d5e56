"""Pure-numpy implementations of the hot reconstruction kernels.

Used when the compiled extension is unavailable (or forced via
SILHUETTA_BACKEND=numpy). Arithmetic is written as explicit elementwise
steps in the same order as the compiled loops so both backends return
bit-identical results.

Camera tuples are (R, t, fx, fy, cx, cy, width, height) with R a (3, 3)
world->camera rotation and t the translation in mm.
"""

from __future__ import annotations

import numpy as np


def _project(pts, cam):
    """Elementwise pinhole projection; returns (u, v, z)."""
    r, t, fx, fy, cx, cy, _, _ = cam
    x = r[0, 0] * pts[:, 0] + r[0, 1] * pts[:, 1] + r[0, 2] * pts[:, 2] + t[0]
    y = r[1, 0] * pts[:, 0] + r[1, 1] * pts[:, 1] + r[1, 2] * pts[:, 2] + t[1]
    z = r[2, 0] * pts[:, 0] + r[2, 1] * pts[:, 1] + r[2, 2] * pts[:, 2] + t[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = fx * x / z + cx
        v = fy * y / z + cy
    return u, v, z


def _voxel_centers(origin, h, dims):
    n1, n2, n3 = dims
    i, j, k = np.meshgrid(
        np.arange(n1, dtype=np.float64),
        np.arange(n2, dtype=np.float64),
        np.arange(n3, dtype=np.float64),
        indexing="ij",
    )
    pts = np.empty((n1 * n2 * n3, 3), dtype=np.float64)
    pts[:, 0] = (origin[0] + (i.ravel() + 0.5) * h[0])
    pts[:, 1] = (origin[1] + (j.ravel() + 0.5) * h[1])
    pts[:, 2] = (origin[2] + (k.ravel() + 0.5) * h[2])
    return pts


def classify_solid(origin, h, dims, cams, masks):
    """Visual-hull membership of every voxel centre.

    A voxel stays solid iff, for every view, its projection is behind
    the camera, off-sensor, or lands on a foreground mask pixel
    (floor lookup). Returns a (N1, N2, N3) bool array.
    """
    dims = tuple(int(d) for d in dims)
    pts = _voxel_centers(np.asarray(origin, float), np.asarray(h, float), dims)
    solid = np.ones(pts.shape[0], dtype=bool)
    for cam, mask in zip(cams, masks):
        width, height = cam[6], cam[7]
        u, v, z = _project(pts, cam)
        sees = (z > 0.0) & (u >= 0.0) & (u < width) & (v >= 0.0) & (v < height)
        veto = sees.copy()
        px = np.floor(u[sees]).astype(np.intp)
        py = np.floor(v[sees]).astype(np.intp)
        veto[sees] = ~np.asarray(mask, dtype=bool)[py, px]
        solid &= ~veto
    return solid.reshape(dims)


def _ray_occluded(labels, origin, h, src_idx, centers, cam_center):
    """March each ray from voxel centre toward the camera in half-voxel
    steps; a ray is occluded iff a strictly nearer sample falls in a
    solid voxel other than the source. Rays leaving the grid box stop
    (a straight ray cannot re-enter a convex box)."""
    n = centers.shape[0]
    occluded = np.zeros(n, dtype=bool)
    if n == 0:
        return occluded
    dx = cam_center[0] - centers[:, 0]
    dy = cam_center[1] - centers[:, 1]
    dz = cam_center[2] - centers[:, 2]
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    safe = np.where(dist > 0.0, dist, 1.0)
    ux, uy, uz = dx / safe, dy / safe, dz / safe
    step = 0.5 * min(float(h[0]), float(h[1]), float(h[2]))
    bmin = np.asarray(origin, dtype=np.float64)
    bmax = bmin + np.asarray(h, dtype=np.float64) * np.array(labels.shape, dtype=np.float64)

    alive = np.arange(n)[dist > 0.0]
    t = step
    while alive.size:
        alive = alive[t < dist[alive]]
        if not alive.size:
            break
        px = centers[alive, 0] + ux[alive] * t
        py = centers[alive, 1] + uy[alive] * t
        pz = centers[alive, 2] + uz[alive] * t
        inside = (
            (px >= bmin[0]) & (px < bmax[0])
            & (py >= bmin[1]) & (py < bmax[1])
            & (pz >= bmin[2]) & (pz < bmax[2])
        )
        alive = alive[inside]
        if not alive.size:
            break
        # the box test uses bmax directly while the cell index divides by
        # h; clamp so boundary-grazing points cannot round out of range
        nd = labels.shape
        ii = np.clip(np.floor((px[inside] - bmin[0]) / h[0]).astype(np.intp), 0, nd[0] - 1)
        jj = np.clip(np.floor((py[inside] - bmin[1]) / h[1]).astype(np.intp), 0, nd[1] - 1)
        kk = np.clip(np.floor((pz[inside] - bmin[2]) / h[2]).astype(np.intp), 0, nd[2] - 1)
        hit = (labels[ii, jj, kk] != 0) & (
            (ii != src_idx[alive, 0]) | (jj != src_idx[alive, 1]) | (kk != src_idx[alive, 2])
        )
        occluded[alive[hit]] = True
        alive = alive[~hit]
        t += step
    return occluded


def carve_sweep(labels, origin, h, cams, images, tau, min_views):
    """One Jacobi carving sweep over the surface voxels.

    Every label-1 voxel is projected into each view; unoccluded
    on-sensor views contribute the RGB at the projected pixel. Voxels
    with at least `min_views` samples whose per-channel population
    variance exceeds tau^2 are flagged. Returns a (N1, N2, N3) bool
    array of voxels to remove; the caller applies removals after the
    sweep, so visitation order cannot matter.
    """
    labels = np.asarray(labels)
    surf = np.argwhere(labels == 1)  # ascending row-major order
    remove = np.zeros(labels.shape, dtype=bool)
    if surf.shape[0] == 0:
        return remove
    origin = np.asarray(origin, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    centers = origin + (surf.astype(np.float64) + 0.5) * h
    ns = surf.shape[0]
    count = np.zeros(ns, dtype=np.int64)
    ssum = np.zeros((ns, 3), dtype=np.float64)
    ssq = np.zeros((ns, 3), dtype=np.float64)
    for cam, img in zip(cams, images):
        r, t, fx, fy, cx, cy, width, height = cam
        cam_center = np.array([
            -(r[0, 0] * t[0] + r[1, 0] * t[1] + r[2, 0] * t[2]),
            -(r[0, 1] * t[0] + r[1, 1] * t[1] + r[2, 1] * t[2]),
            -(r[0, 2] * t[0] + r[1, 2] * t[1] + r[2, 2] * t[2]),
        ])
        u, v, z = _project(centers, cam)
        sees = (z > 0.0) & (u >= 0.0) & (u < width) & (v >= 0.0) & (v < height)
        if not sees.any():
            continue
        occ = _ray_occluded(
            labels, origin, h, surf[sees], centers[sees], cam_center
        )
        take = np.nonzero(sees)[0][~occ]
        px = np.floor(u[take]).astype(np.intp)
        py = np.floor(v[take]).astype(np.intp)
        rgb = np.asarray(img)[py, px].astype(np.float64)
        count[take] += 1
        ssum[take] += rgb
        ssq[take] += rgb * rgb
    tested = count >= max(int(min_views), 1)
    if tested.any():
        n = count[tested].astype(np.float64)[:, None]
        mean = ssum[tested] / n
        var = ssq[tested] / n - mean * mean
        bad = (var > tau * tau).any(axis=1)
        sel = surf[tested][bad]
        remove[sel[:, 0], sel[:, 1], sel[:, 2]] = True
    return remove
