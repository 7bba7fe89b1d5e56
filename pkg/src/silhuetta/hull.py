"""Voxel grid over a bounding volume and visual-hull classification.

Labels: 0 = outside, 1 = surface (solid with an exposed face or on the
grid boundary), 2 = inside. Classification projects every voxel centre
into all silhouettes; a view only vetoes a voxel it can actually see.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .camera import CameraParams

OUTSIDE, SURFACE, INSIDE = 0, 1, 2

_GRID_MAGIC = b"SILHVOXG"
_GRID_VERSION = 1


class EmptyGrid(Exception):
    """Grid holds no solid voxel."""


@dataclass(frozen=True)
class BoundingVolume:
    vmin: np.ndarray  # (3,) mm
    vmax: np.ndarray  # (3,) mm

    def __post_init__(self):
        lo = np.asarray(self.vmin, dtype=np.float64).reshape(3).copy()
        hi = np.asarray(self.vmax, dtype=np.float64).reshape(3).copy()
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "vmin", lo)
        object.__setattr__(self, "vmax", hi)
        if not (lo < hi).all():
            raise ValueError(f"bounding volume needs min < max per axis, got {lo} .. {hi}")

    @property
    def extent(self) -> np.ndarray:
        return self.vmax - self.vmin

    def volume_cm3(self) -> float:
        return float(np.prod(self.extent)) / 1000.0


@dataclass
class VoxelGrid:
    bv: BoundingVolume
    dims: tuple[int, int, int]
    labels: np.ndarray  # (N1, N2, N3) uint8

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be >= 1 per axis, got {self.dims}")
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.labels.shape != self.dims:
            raise ValueError(f"labels shape {self.labels.shape} != dims {self.dims}")

    @property
    def h(self) -> np.ndarray:
        """Voxel edge lengths in mm per axis."""
        return self.bv.extent / np.asarray(self.dims, dtype=np.float64)

    def solid(self) -> np.ndarray:
        return self.labels != OUTSIDE

    def solid_count(self) -> int:
        return int(np.count_nonzero(self.labels))

    def copy(self) -> "VoxelGrid":
        return VoxelGrid(bv=self.bv, dims=self.dims, labels=self.labels.copy())

    def validate(self) -> None:
        """Check the label invariants; raises ValueError on violation."""
        if not np.isin(self.labels, (OUTSIDE, SURFACE, INSIDE)).all():
            raise ValueError("labels outside {0, 1, 2}")
        expected = label_solid(self.labels != OUTSIDE)
        if not np.array_equal(expected, self.labels):
            raise ValueError("surface/inside labelling inconsistent with 6-neighbourhood")


@dataclass(frozen=True)
class SilhouetteSet:
    views: tuple  # ((mask, CameraParams), ...)

    def __post_init__(self):
        views = tuple((np.asarray(m, dtype=bool), c) for m, c in self.views)
        object.__setattr__(self, "views", views)
        if len(views) < 2:
            raise ValueError(f"need >= 2 views, got {len(views)}")
        for mask, cam in views:
            k = cam.intrinsics
            if mask.shape != (k.height, k.width):
                raise ValueError(
                    f"view '{cam.id}': mask shape {mask.shape} != sensor {(k.height, k.width)}"
                )

    def __len__(self):
        return len(self.views)


def build_grid(bv: BoundingVolume, dims) -> VoxelGrid:
    """Fresh grid with every voxel labelled inside."""
    dims = tuple(int(d) for d in dims)
    labels = np.full(dims, INSIDE, dtype=np.uint8)
    return VoxelGrid(bv=bv, dims=dims, labels=labels)


def voxel_center(g: VoxelGrid, i: int, j: int, k: int) -> np.ndarray:
    """World coordinates (mm) of the centre of voxel (i, j, k)."""
    n1, n2, n3 = g.dims
    if not (0 <= i < n1 and 0 <= j < n2 and 0 <= k < n3):
        raise IndexError(f"voxel ({i}, {j}, {k}) outside grid {g.dims}")
    return g.bv.vmin + (np.array([i, j, k], dtype=np.float64) + 0.5) * g.h


def label_solid(solid: np.ndarray) -> np.ndarray:
    """Split a solid/empty map into outside/surface/inside labels.

    Solid voxels with an outside 6-neighbour or on the grid boundary
    become surface; every other solid voxel is inside. Padding with
    "outside" handles both cases in one pass.
    """
    solid = np.asarray(solid, dtype=bool)
    padded = np.pad(solid, 1, mode="constant", constant_values=False)
    exposed = np.zeros_like(solid)
    n1, n2, n3 = solid.shape
    core = (slice(1, n1 + 1), slice(1, n2 + 1), slice(1, n3 + 1))
    for axis in range(3):
        for off in (-1, 1):
            sl = list(core)
            sl[axis] = slice(core[axis].start + off, core[axis].stop + off)
            exposed |= ~padded[tuple(sl)]
    labels = np.zeros(solid.shape, dtype=np.uint8)
    labels[solid & exposed] = SURFACE
    labels[solid & ~exposed] = INSIDE
    return labels


def cam_tuple(cam: CameraParams):
    """Flatten CameraParams into the array/scalar tuple the kernels use."""
    k = cam.intrinsics
    return (
        np.ascontiguousarray(cam.extrinsics.rotation, dtype=np.float64),
        np.ascontiguousarray(cam.extrinsics.translation, dtype=np.float64),
        float(k.fx), float(k.fy), float(k.cx), float(k.cy),
        float(k.width), float(k.height),
    )


def classify_voxels(g: VoxelGrid, silhouettes: SilhouetteSet) -> VoxelGrid:
    """Carve the visual hull into a fresh grid.

    A voxel stays solid iff every view that sees its centre (projection
    on-sensor, in front of the camera) lands on a foreground pixel;
    views that cannot see the voxel do not veto it. Solid voxels are
    then split into surface and inside.
    """
    cams = [cam_tuple(c) for _, c in silhouettes.views]
    masks = [np.ascontiguousarray(m, dtype=np.uint8) for m, _ in silhouettes.views]
    solid = _kernels.classify_solid(
        g.bv.vmin, g.h, g.dims, cams, masks
    )
    return VoxelGrid(bv=g.bv, dims=g.dims, labels=label_solid(np.asarray(solid, dtype=bool)))


def hull_volume(g: VoxelGrid) -> float:
    """Solid-voxel volume in cm^3."""
    h = g.h
    return g.solid_count() * float(h[0] * h[1] * h[2]) / 1000.0


def save_grid(g: VoxelGrid, path) -> None:
    """Persist the grid: 16-byte magic/version header, bv as 6 LE f64,
    dims as 3 LE u32, then the raw label bytes in C order."""
    with open(path, "wb") as fh:
        fh.write(_GRID_MAGIC + struct.pack("<II", _GRID_VERSION, 0))
        fh.write(struct.pack("<6d", *g.bv.vmin, *g.bv.vmax))
        fh.write(struct.pack("<3I", *g.dims))
        fh.write(g.labels.tobytes())


def load_grid(path) -> VoxelGrid:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:8] != _GRID_MAGIC:
            raise ValueError(f"{path}: not a voxel grid file")
        version = struct.unpack("<II", head[8:])[0]
        if version != _GRID_VERSION:
            raise ValueError(f"{path}: unsupported grid version {version}")
        bv_vals = struct.unpack("<6d", fh.read(48))
        dims = struct.unpack("<3I", fh.read(12))
        n = dims[0] * dims[1] * dims[2]
        raw = fh.read(n)
        if len(raw) != n:
            raise ValueError(f"{path}: truncated label data")
    labels = np.frombuffer(raw, dtype=np.uint8).reshape(dims).copy()
    bv = BoundingVolume(vmin=np.array(bv_vals[:3]), vmax=np.array(bv_vals[3:]))
    return VoxelGrid(bv=bv, dims=dims, labels=labels)
