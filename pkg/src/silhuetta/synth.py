"""Synthetic scenes: analytic primitives, exact silhouette and color
renders with injectable shadows, and ground-truth volume oracles.

Scenes stand in for the physical capture rig: every render is a pure
function of (scene, camera, seed), silhouettes come from exact
ray-primitive tests, and object volumes are known in closed form.

Texture comes as seeded per-cell jitter in two styles: "uniform" draws
each cell's offset uniformly from [-noise, +noise]; "speckle" is
two-level (a `texture_bright` fraction of cells at +noise, the rest at
-noise). The textured demo scenes use speckle because a thresholded
two-level texture yields a dense, opening-robust mask, whereas an Otsu
cut bisects a continuous jitter distribution into ~50% salt that a 3x3
opening destroys.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass

import numpy as np

from .camera import CameraParams, CameraRig, Intrinsics, look_at
from .hull import BoundingVolume

_SPLIT_GAMMA = np.uint64(0x9E3779B97F4A7C15)


class OverlappingPrimitives(Exception):
    """Analytic volumes only add up for pairwise disjoint primitives."""


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _SPLIT_GAMMA
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class Primitive:
    kind: str  # sphere | box | cylinder
    size: tuple  # sphere: (r,); box: (hx, hy, hz) half-extents; cylinder: (r, height)
    translation: tuple = (0.0, 0.0, 0.0)
    rotation: tuple | None = None  # row-major 3x3, local -> world; None = identity
    albedo: tuple = (200, 200, 200)
    texture_noise: int = 0
    albedo2: tuple | None = None  # optional second color (two-tone objects)
    split_axis: int = 0  # local axis whose sign selects albedo vs albedo2
    texture_style: str = "uniform"  # uniform jitter in [-A, A] | two-level "speckle"
    texture_cell: int = 1  # jitter cell size in image pixels
    texture_bright: float = 0.12  # speckle style: fraction of bright cells

    def __post_init__(self):
        if self.kind not in ("sphere", "box", "cylinder"):
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        want = {"sphere": 1, "box": 3, "cylinder": 2}[self.kind]
        if len(self.size) != want or any(s <= 0 for s in self.size):
            raise ValueError(f"{self.kind} needs {want} positive size value(s), got {self.size}")
        if not 0 <= self.texture_noise <= 255:
            raise ValueError("texture_noise outside [0, 255]")
        if self.texture_style not in ("uniform", "speckle"):
            raise ValueError(f"unknown texture style {self.texture_style!r}")

    def rot(self) -> np.ndarray:
        if self.rotation is None:
            return np.eye(3)
        return np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)

    def volume_mm3(self) -> float:
        if self.kind == "sphere":
            return 4.0 / 3.0 * math.pi * self.size[0] ** 3
        if self.kind == "box":
            return 8.0 * self.size[0] * self.size[1] * self.size[2]
        return math.pi * self.size[0] ** 2 * self.size[1]

    def bounding_radius(self) -> float:
        if self.kind == "sphere":
            return self.size[0]
        if self.kind == "box":
            return math.sqrt(sum(s * s for s in self.size))
        return math.hypot(self.size[0], self.size[1] / 2.0)


@dataclass(frozen=True)
class ShadowPatch:
    view_id: str
    polygon: tuple  # ((x, y), ...) pixel coordinates
    darkening: float

    def __post_init__(self):
        if not 0.0 < self.darkening < 1.0:
            raise ValueError(f"darkening must be in (0, 1), got {self.darkening}")
        if len(self.polygon) < 3:
            raise ValueError("polygon needs >= 3 vertices")


@dataclass(frozen=True)
class Scene:
    primitives: tuple
    rig: CameraRig
    bv: BoundingVolume
    background: tuple = (200, 200, 200)
    shadows: tuple = ()
    invert: bool = False  # recommended segmentation polarity
    window: int = 3  # recommended normalization window
    name: str = "scene"

    def ground_truth_volume(self) -> float:
        return analytic_volume(self)

    def largest_volume(self) -> float:
        """Analytic volume (cm^3) of the biggest primitive: the target of
        largest-object reconstruction in multi-object scenes."""
        return max(p.volume_mm3() for p in self.primitives) / 1000.0


def analytic_volume(scene: Scene) -> float:
    """Sum of closed-form primitive volumes in cm^3.

    Primitives must be pairwise disjoint (conservative bounding-sphere
    test); overlap would double-count.
    """
    prims = scene.primitives
    for i in range(len(prims)):
        for j in range(i + 1, len(prims)):
            ci = np.asarray(prims[i].translation)
            cj = np.asarray(prims[j].translation)
            if np.linalg.norm(ci - cj) <= prims[i].bounding_radius() + prims[j].bounding_radius():
                raise OverlappingPrimitives(
                    f"primitives {i} and {j} may overlap (bounding spheres touch)"
                )
    return sum(p.volume_mm3() for p in prims) / 1000.0


# ---------------------------------------------------------------------------
# ray casting

def _ray_sphere(o, d, r):
    b = 2.0 * (o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1] + o[:, 2] * d[:, 2])
    a = np.einsum("ij,ij->i", d, d)
    c = np.einsum("ij,ij->i", o, o) - r * r
    disc = b * b - 4.0 * a * c
    t = np.full(len(d), np.inf)
    ok = disc >= 0.0
    if ok.any():
        sq = np.sqrt(disc[ok])
        t0 = (-b[ok] - sq) / (2.0 * a[ok])
        t1 = (-b[ok] + sq) / (2.0 * a[ok])
        tt = np.where(t0 > 1e-9, t0, np.where(t1 > 1e-9, t1, np.inf))
        t[ok] = tt
    return t


def _ray_box(o, d, half):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-np.asarray(half) - o) * inv
        t2 = (np.asarray(half) - o) * inv
    lo = np.fmin(t1, t2)
    hi = np.fmax(t1, t2)
    # rays parallel to a slab: NaN from 0 * inf; inside -> -inf/inf bounds
    parallel = d == 0.0
    if parallel.any():
        inside = np.abs(o) <= np.asarray(half)
        lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
    tn = lo.max(axis=1)
    tf = hi.min(axis=1)
    hit = (tn <= tf) & (tf > 1e-9)
    t = np.where(tn > 1e-9, tn, tf)
    return np.where(hit, t, np.inf)


def _ray_cylinder(o, d, r, height):
    hz = height / 2.0
    best = np.full(len(d), np.inf)
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = 2.0 * (o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1])
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
    disc = b * b - 4.0 * a * c
    ok = (disc >= 0.0) & (a > 0.0)
    if ok.any():
        sq = np.sqrt(disc[ok])
        for sign in (-1.0, 1.0):
            t = (-b[ok] + sign * sq) / (2.0 * a[ok])
            z = o[ok, 2] + t * d[ok, 2]
            good = (t > 1e-9) & (np.abs(z) <= hz)
            sel = np.where(good, t, np.inf)
            best[ok] = np.fmin(best[ok], sel)
    dz = d[:, 2]
    cap_ok = dz != 0.0
    if cap_ok.any():
        for zc in (-hz, hz):
            t = (zc - o[:, 2]) / np.where(cap_ok, dz, 1.0)
            x = o[:, 0] + t * d[:, 0]
            y = o[:, 1] + t * d[:, 1]
            good = cap_ok & (t > 1e-9) & (x * x + y * y <= r * r)
            best = np.where(good & (t < best), t, best)
    return best


def _primitive_hits(prim: Primitive, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Hit distances (inf = miss) for world-space rays against one primitive."""
    rot = prim.rot()
    tr = np.asarray(prim.translation, dtype=np.float64)
    o_local = (rot.T @ (origin - tr))[None, :].repeat(len(dirs), axis=0)
    d_local = dirs @ rot  # == (rot.T @ dirs.T).T
    if prim.kind == "sphere":
        return _ray_sphere(o_local, d_local, prim.size[0])
    if prim.kind == "box":
        return _ray_box(o_local, d_local, prim.size)
    return _ray_cylinder(o_local, d_local, prim.size[0], prim.size[1])


def _camera_rays(cam: CameraParams):
    """World-space origin and per-pixel (through pixel centres) directions."""
    k = cam.intrinsics
    xs = (np.arange(k.width, dtype=np.float64) + 0.5 - k.cx) / k.fx
    ys = (np.arange(k.height, dtype=np.float64) + 0.5 - k.cy) / k.fy
    gx, gy = np.meshgrid(xs, ys)
    d_cam = np.stack([gx.ravel(), gy.ravel(), np.ones(gx.size)], axis=1)
    d_world = d_cam @ cam.extrinsics.rotation  # R^T @ d per row
    return cam.center, d_world


def scaled_camera(cam: CameraParams, scale: int) -> CameraParams:
    """Same pose, sensor super-sampled by an integer factor."""
    k = cam.intrinsics
    intr = Intrinsics(fx=k.fx * scale, fy=k.fy * scale, cx=k.cx * scale, cy=k.cy * scale,
                      width=k.width * scale, height=k.height * scale)
    return CameraParams(intrinsics=intr, extrinsics=cam.extrinsics, id=cam.id)


def _scene_hits(scene: Scene, cam: CameraParams):
    """(t, prim_index) per pixel; prim_index = -1 where no primitive is hit."""
    origin, dirs = _camera_rays(cam)
    k = cam.intrinsics
    t_best = np.full(len(dirs), np.inf)
    idx = np.full(len(dirs), -1, dtype=np.int64)
    for i, prim in enumerate(scene.primitives):
        t = _primitive_hits(prim, origin, dirs)
        closer = t < t_best
        t_best = np.where(closer, t, t_best)
        idx = np.where(closer, i, idx)
    return t_best.reshape(k.height, k.width), idx.reshape(k.height, k.width), origin, dirs


def render_silhouette_exact(scene: Scene, cam: CameraParams, scale: int = 1) -> np.ndarray:
    """Ground-truth silhouette: foreground iff the pixel-centre ray hits
    any primitive. `scale` super-samples the sensor for oracle use."""
    if scale != 1:
        cam = scaled_camera(cam, scale)
    t, _, _, _ = _scene_hits(scene, cam)
    return np.isfinite(t)


def _point_in_polygon(px: np.ndarray, py: np.ndarray, poly) -> np.ndarray:
    """Even-odd rule point-in-polygon test, vectorised over points."""
    inside = np.zeros(px.shape, dtype=bool)
    pts = list(poly)
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (py > min(y1, y2)) & (py <= max(y1, y2))
        xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xint)
    return inside


def render_color(scene: Scene, cam: CameraParams, seed: int = 0) -> np.ndarray:
    """Flat-shaded color view: hit primitives take their (optionally
    two-tone) albedo plus seeded speckle; shadow patches then darken the
    covered background pixels. Deterministic in (scene, cam, seed)."""
    k = cam.intrinsics
    t, idx, origin, dirs = _scene_hits(scene, cam)
    img = np.empty((k.height, k.width, 3), dtype=np.float64)
    img[:, :] = scene.background
    hit = np.isfinite(t)

    view_tag = np.uint64(zlib.crc32(cam.id.encode()))
    base_key = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ (view_tag << np.uint64(1)))

    ys, xs = np.nonzero(hit)
    if ys.size:
        tt = t[ys, xs]
        pts = origin[None, :] + dirs.reshape(k.height, k.width, 3)[ys, xs] * tt[:, None]
        for i, prim in enumerate(scene.primitives):
            sel = idx[ys, xs] == i
            if not sel.any():
                continue
            color = np.asarray(prim.albedo, dtype=np.float64)
            pix = np.tile(color, (int(sel.sum()), 1))
            if prim.albedo2 is not None:
                local = (pts[sel] - np.asarray(prim.translation)) @ prim.rot()
                second = local[:, prim.split_axis] < 0.0
                pix[second] = np.asarray(prim.albedo2, dtype=np.float64)
            if prim.texture_noise > 0:
                cell = max(1, int(prim.texture_cell))
                cy = (ys[sel] // cell).astype(np.uint64)
                cx = (xs[sel] // cell).astype(np.uint64)
                hsh = _splitmix64(base_key ^ ((cy << np.uint64(32)) | cx))
                u = (hsh >> np.uint64(11)).astype(np.float64) / float(1 << 53)
                amp = float(prim.texture_noise)
                if prim.texture_style == "speckle":
                    jit = np.where(u < prim.texture_bright, amp, -amp)
                else:
                    jit = np.floor(u * (2.0 * amp + 1.0)) - amp
                pix += jit[:, None]
            img[ys[sel], xs[sel]] = pix

    for patch in scene.shadows:
        if patch.view_id != cam.id:
            continue
        gx, gy = np.meshgrid(np.arange(k.width) + 0.5, np.arange(k.height) + 0.5)
        covered = _point_in_polygon(gx, gy, patch.polygon) & ~hit
        img[covered] = np.floor(img[covered] * patch.darkening + 0.5)

    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def exact_silhouette_views(scene: Scene, scale: int = 1):
    """[(mask, cam), ...] of exact silhouettes for every rig camera."""
    return [(render_silhouette_exact(scene, cam, scale), cam) for cam in scene.rig]


def shadow_footprint(scene: Scene, cam: CameraParams) -> np.ndarray:
    """Exact set of pixels darkened by shadow patches in this view
    (covered background pixels; object pixels are never darkened)."""
    k = cam.intrinsics
    t, _, _, _ = _scene_hits(scene, cam)
    hit = np.isfinite(t)
    covered = np.zeros((k.height, k.width), dtype=bool)
    for patch in scene.shadows:
        if patch.view_id != cam.id:
            continue
        gx, gy = np.meshgrid(np.arange(k.width) + 0.5, np.arange(k.height) + 0.5)
        covered |= _point_in_polygon(gx, gy, patch.polygon)
    return covered & ~hit


def brute_force_hull_volume(scene: Scene, rig: CameraRig, samples: int,
                            seed: int = 0, scale: int = 4):
    """Monte Carlo visual-hull volume with 99% confidence half-width.

    Uniform points over the scene bounding volume count as inside iff
    every view that sees them lands on exact-silhouette foreground
    (rendered at `scale`x resolution). Independent of the voxel
    classifier: it is the oracle the hull is checked against.
    """
    if samples < 10_000:
        raise ValueError(f"need >= 1e4 samples for the normal approximation, got {samples}")
    rng = np.random.default_rng(seed)
    lo, hi = scene.bv.vmin, scene.bv.vmax
    pts = rng.uniform(lo, hi, size=(samples, 3))
    inside = np.ones(samples, dtype=bool)
    for cam in rig:
        big = scaled_camera(cam, scale)
        mask = render_silhouette_exact(scene, cam, scale)
        k = big.intrinsics
        r = big.extrinsics.rotation
        tv = big.extrinsics.translation
        x = pts @ r.T + tv
        with np.errstate(divide="ignore", invalid="ignore"):
            u = k.fx * x[:, 0] / x[:, 2] + k.cx
            v = k.fy * x[:, 1] / x[:, 2] + k.cy
        sees = (x[:, 2] > 0) & (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)
        bad = sees.copy()
        bad[sees] = ~mask[np.floor(v[sees]).astype(np.intp),
                          np.floor(u[sees]).astype(np.intp)]
        inside &= ~bad
    p_hat = inside.sum() / samples
    vol_bv = scene.bv.volume_cm3()
    half = 2.5758293035489004 * vol_bv * math.sqrt(p_hat * (1.0 - p_hat) / samples)
    return vol_bv * p_hat, half


# ---------------------------------------------------------------------------
# scene file I/O

def _prim_to_dict(p: Primitive) -> dict:
    d = {
        "kind": p.kind,
        "size": [float(s) for s in p.size],
        "translation": [float(v) for v in p.translation],
        "albedo": [int(c) for c in p.albedo],
        "texture_noise": int(p.texture_noise),
        "texture_style": p.texture_style,
        "texture_cell": int(p.texture_cell),
        "texture_bright": float(p.texture_bright),
    }
    if p.rotation is not None:
        d["rotation"] = [float(v) for v in np.asarray(p.rotation).reshape(9)]
    if p.albedo2 is not None:
        d["albedo2"] = [int(c) for c in p.albedo2]
        d["split_axis"] = int(p.split_axis)
    return d


def _prim_from_dict(d: dict) -> Primitive:
    return Primitive(
        kind=d["kind"],
        size=tuple(d["size"]),
        translation=tuple(d.get("translation", (0.0, 0.0, 0.0))),
        rotation=tuple(d["rotation"]) if "rotation" in d else None,
        albedo=tuple(d.get("albedo", (200, 200, 200))),
        texture_noise=int(d.get("texture_noise", 0)),
        albedo2=tuple(d["albedo2"]) if d.get("albedo2") is not None else None,
        split_axis=int(d.get("split_axis", 0)),
        texture_style=d.get("texture_style", "uniform"),
        texture_cell=int(d.get("texture_cell", 1)),
        texture_bright=float(d.get("texture_bright", 0.12)),
    )


def save_scene(scene: Scene, path) -> None:
    from .camera import _cam_to_dict  # shared rig schema

    doc = {
        "name": scene.name,
        "background": [int(c) for c in scene.background],
        "bv": {"min": [float(v) for v in scene.bv.vmin],
               "max": [float(v) for v in scene.bv.vmax]},
        "invert": bool(scene.invert),
        "window": int(scene.window),
        "primitives": [_prim_to_dict(p) for p in scene.primitives],
        "shadows": [
            {"view_id": s.view_id,
             "polygon": [[float(x), float(y)] for x, y in s.polygon],
             "darkening": float(s.darkening)}
            for s in scene.shadows
        ],
        "rig": {"cameras": [_cam_to_dict(c) for c in scene.rig.cameras]},
        "ground_truth_volume_cm3": analytic_volume(scene),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_scene(path) -> Scene:
    from .camera import _camera_from_dict

    with open(path) as fh:
        doc = json.load(fh)
    if not doc.get("primitives"):
        raise ValueError(f"{path}: scene file needs at least one primitive")
    rig = CameraRig(cameras=tuple(_camera_from_dict(d) for d in doc["rig"]["cameras"]))
    scene = Scene(
        primitives=tuple(_prim_from_dict(d) for d in doc["primitives"]),
        rig=rig,
        bv=BoundingVolume(vmin=np.array(doc["bv"]["min"]), vmax=np.array(doc["bv"]["max"])),
        background=tuple(doc.get("background", (200, 200, 200))),
        shadows=tuple(
            ShadowPatch(view_id=s["view_id"],
                        polygon=tuple((float(x), float(y)) for x, y in s["polygon"]),
                        darkening=float(s["darkening"]))
            for s in doc.get("shadows", ())
        ),
        invert=bool(doc.get("invert", False)),
        window=int(doc.get("window", 3)),
        name=doc.get("name", "scene"),
    )
    stored = doc.get("ground_truth_volume_cm3")
    if stored is not None:
        actual = analytic_volume(scene)
        if not math.isclose(stored, actual, rel_tol=1e-9):
            raise ValueError(f"{path}: stored ground truth {stored} != analytic {actual}")
    return scene


# ---------------------------------------------------------------------------
# rig and scene builders (source of the bundled data files)

def build_ring_rig(n_lateral: int, radius: float, fx: float = 700.0,
                   width: int = 640, height: int = 480,
                   with_top: bool = True, target=(0.0, 0.0, 0.0)) -> CameraRig:
    """Cameras on a horizontal circle aimed at the target + optional
    top-down camera at the same distance."""
    intr = Intrinsics(fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0,
                      width=width, height=height)
    target = np.asarray(target, dtype=np.float64)
    cams = []
    for i in range(n_lateral):
        theta = 2.0 * math.pi * i / n_lateral
        center = target + np.array([radius * math.cos(theta), radius * math.sin(theta), 0.0])
        cams.append(CameraParams(intrinsics=intr, extrinsics=look_at(center, target),
                                 id=f"cam{i + 1}"))
    if with_top:
        center = target + np.array([0.0, 0.0, radius])
        # looking straight down: image up = world +x
        ext = look_at(center, target, up=(1.0, 0.0, 0.0))
        cams.append(CameraParams(intrinsics=intr, extrinsics=ext, id="top"))
    return CameraRig(cameras=tuple(cams))


def build_paper_rig() -> CameraRig:
    """The 4-camera layout: three lateral cameras at 120 degrees on a
    600 mm circle plus one top-down camera, 640x480 each."""
    return build_ring_rig(n_lateral=3, radius=600.0)


def _convex_hull_2d(points):
    """Monotone-chain convex hull; returns CCW vertex list."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def shadow_patches_for_cylinder(rig: CameraRig, center, radius: float, height: float,
                                darkening: float, skip_ids=("top",), pad: float = 1.0):
    """Per-view shadow polygons shaped like a vertical cylinder: the
    projected convex outline of its two rim circles, padded by `pad` px.

    Emulates a physically consistent cast shadow: the virtual cylinder
    projects inside silhouette+shadow in every view, so a threshold that
    merges the shadow inflates the visual hull by the cylinder.
    """
    from .camera import project_point

    cx, cy, cz = center
    ring = []
    for zoff in (0.0, height):
        for i in range(48):
            a = 2.0 * math.pi * i / 48
            ring.append((cx + radius * math.cos(a), cy + radius * math.sin(a), cz - zoff))
    patches = []
    for cam in rig:
        if cam.id in skip_ids:
            continue
        pts2d = [project_point(p, cam) for p in ring]
        hull = _convex_hull_2d(pts2d)
        centroid = (sum(p[0] for p in hull) / len(hull), sum(p[1] for p in hull) / len(hull))
        grown = []
        for x, y in hull:
            dx, dy = x - centroid[0], y - centroid[1]
            n = math.hypot(dx, dy) or 1.0
            grown.append((x + pad * dx / n, y + pad * dy / n))
        patches.append(ShadowPatch(view_id=cam.id, polygon=tuple(grown), darkening=darkening))
    return patches
