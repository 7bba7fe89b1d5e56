"""Pinhole camera model, multi-camera rig description and rig file I/O.

Conventions (OpenCV-style): world -> camera is ``x_cam = R @ p + t``,
the camera looks along +z, image u grows right, v grows down, and
``u = fx * x/z + cx``. World units are millimetres throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9


class BehindCamera(Exception):
    """Point lies at or behind the camera's optical plane (z <= 0)."""


class RigParseError(ValueError):
    """Rig file is not valid JSON or misses required fields."""


class InvalidRig(ValueError):
    """Rig violates a structural invariant (orthonormality, ids, ...)."""


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidRig(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise InvalidRig(f"sensor size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise InvalidRig(f"principal point ({self.cx}, {self.cy}) outside sensor")


@dataclass(frozen=True)
class Extrinsics:
    rotation: np.ndarray  # 3x3, world -> camera
    translation: np.ndarray  # 3-vector, mm

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if not np.allclose(r.T @ r, np.eye(3), rtol=0.0, atol=ORTHO_TOL):
            raise InvalidRig("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHO_TOL:
            raise InvalidRig(f"rotation determinant {np.linalg.det(r)} != +1")


@dataclass(frozen=True)
class CameraParams:
    intrinsics: Intrinsics
    extrinsics: Extrinsics
    id: str = "cam"

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates: -R^T t."""
        return -self.extrinsics.rotation.T @ self.extrinsics.translation


@dataclass(frozen=True)
class CameraRig:
    cameras: tuple = field(default_factory=tuple)

    def __post_init__(self):
        cams = tuple(self.cameras)
        object.__setattr__(self, "cameras", cams)
        if len(cams) < 2:
            raise InvalidRig(f"rig needs at least 2 cameras, got {len(cams)}")
        ids = [c.id for c in cams]
        if len(set(ids)) != len(ids):
            raise InvalidRig(f"camera ids not unique: {ids}")

    def __len__(self):
        return len(self.cameras)

    def __iter__(self):
        return iter(self.cameras)


def project_point(p, cam: CameraParams) -> tuple[float, float]:
    """Project a world point (mm) to pixel coordinates.

    Raises BehindCamera if the point is at or behind the optical plane.
    The result may lie outside the sensor; see in_sensor().
    """
    r = cam.extrinsics.rotation
    t = cam.extrinsics.translation
    px, py, pz = (float(v) for v in np.asarray(p, dtype=np.float64))
    z = r[2, 0] * px + r[2, 1] * py + r[2, 2] * pz + t[2]
    if z <= 0.0:
        raise BehindCamera(f"point {p} has camera depth {z} <= 0")
    x = r[0, 0] * px + r[0, 1] * py + r[0, 2] * pz + t[0]
    y = r[1, 0] * px + r[1, 1] * py + r[1, 2] * pz + t[1]
    k = cam.intrinsics
    return (k.fx * x / z + k.cx, k.fy * y / z + k.cy)


def project_points(pts: np.ndarray, cam: CameraParams):
    """Vectorised projection of an (N, 3) array of world points.

    Returns (uv, z): uv is (N, 2) pixel coordinates and z the camera
    depth; entries with z <= 0 hold garbage uv and must be masked out
    by the caller.

    The arithmetic is kept as explicit elementwise multiply-adds so the
    rounding matches the compiled kernels exactly.
    """
    pts = np.asarray(pts, dtype=np.float64)
    r = cam.extrinsics.rotation
    t = cam.extrinsics.translation
    x = r[0, 0] * pts[:, 0] + r[0, 1] * pts[:, 1] + r[0, 2] * pts[:, 2] + t[0]
    y = r[1, 0] * pts[:, 0] + r[1, 1] * pts[:, 1] + r[1, 2] * pts[:, 2] + t[1]
    z = r[2, 0] * pts[:, 0] + r[2, 1] * pts[:, 1] + r[2, 2] * pts[:, 2] + t[2]
    k = cam.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * x / z + k.cx
        v = k.fy * y / z + k.cy
    return np.stack([u, v], axis=1), z


def in_sensor(u: float, v: float, intr: Intrinsics) -> bool:
    """True iff (u, v) falls on the sensor; intervals are half-open."""
    return 0.0 <= u < intr.width and 0.0 <= v < intr.height


def look_at(center: np.ndarray, target: np.ndarray, up=(0.0, 0.0, 1.0)) -> Extrinsics:
    """Extrinsics for a camera at `center` looking at `target` (world mm).

    `up` fixes the image roll: world `up` maps to image "up" (-v).
    """
    center = np.asarray(center, dtype=np.float64)
    zc = np.asarray(target, dtype=np.float64) - center
    nz = np.linalg.norm(zc)
    if nz == 0:
        raise ValueError("camera center coincides with target")
    zc = zc / nz
    up = np.asarray(up, dtype=np.float64)
    xc = np.cross(zc, -up)  # image right = view x up_image; up_image = -up_world
    nx = np.linalg.norm(xc)
    if nx < 1e-12:
        # Looking straight along up: pick an arbitrary horizontal right axis.
        xc = np.array([1.0, 0.0, 0.0])
    else:
        xc = xc / nx
    yc = np.cross(zc, xc)
    r = np.stack([xc, yc, zc])
    # Orthonormalise against accumulated rounding so Extrinsics validation
    # at 1e-9 always passes.
    u_svd, _, vt = np.linalg.svd(r)
    r = u_svd @ vt
    return Extrinsics(rotation=r, translation=-r @ center)


def _intr_to_dict(k: Intrinsics) -> dict:
    return {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
            "width": k.width, "height": k.height}


def _cam_to_dict(c: CameraParams) -> dict:
    return {
        "id": c.id,
        "intrinsics": _intr_to_dict(c.intrinsics),
        "rotation": [float(v) for v in c.extrinsics.rotation.reshape(9)],
        "translation": [float(v) for v in c.extrinsics.translation],
    }


def save_rig(rig: CameraRig, path) -> None:
    """Write the rig as JSON. Floats keep full round-trip precision."""
    doc = {"cameras": [_cam_to_dict(c) for c in rig.cameras]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _camera_from_dict(d: dict) -> CameraParams:
    try:
        ki = d["intrinsics"]
        intr = Intrinsics(fx=float(ki["fx"]), fy=float(ki["fy"]),
                          cx=float(ki["cx"]), cy=float(ki["cy"]),
                          width=int(ki["width"]), height=int(ki["height"]))
        rot = np.array([float(v) for v in d["rotation"]], dtype=np.float64)
        tr = np.array([float(v) for v in d["translation"]], dtype=np.float64)
        cam_id = str(d["id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RigParseError(f"malformed camera record: {exc}") from exc
    if rot.size != 9:
        raise RigParseError(f"rotation must have 9 entries, got {rot.size}")
    if tr.size != 3:
        raise RigParseError(f"translation must have 3 entries, got {tr.size}")
    try:
        ext = Extrinsics(rotation=rot.reshape(3, 3), translation=tr)
    except InvalidRig as exc:
        raise InvalidRig(f"camera '{cam_id}': {exc}") from exc
    return CameraParams(intrinsics=intr, extrinsics=ext, id=cam_id)


def load_rig(path) -> CameraRig:
    """Load and validate a camera rig from its JSON file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise RigParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or "cameras" not in doc:
        raise RigParseError(f"{path}: missing 'cameras' list")
    cams = [_camera_from_dict(d) for d in doc["cameras"]]
    return CameraRig(cameras=tuple(cams))


def rotation_about_z(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
