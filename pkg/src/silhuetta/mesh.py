"""Watertight cuberille meshes from voxel grids and tetrahedron-sum volume.

Every exposed voxel face becomes two triangles wound counter-clockwise
as seen from outside, so the mesh volume equals the voxel volume
exactly; that identity is the module's main correctness oracle.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .hull import EmptyGrid, VoxelGrid


class NotClosed(Exception):
    """Mesh does not bound a volume (directed edge multiset unbalanced)."""


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64 mm
    triangles: np.ndarray  # (T, 3) int64, CCW seen from outside
    normals: np.ndarray = field(init=False)  # (T, 3) unit, right-hand rule

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle indices out of range")
        v0, v1, v2 = (self.vertices[self.triangles[:, i]] for i in range(3))
        cross = np.cross(v1 - v0, v2 - v0)
        norms = np.linalg.norm(cross, axis=1)
        if (norms == 0.0).any():
            raise ValueError("degenerate (zero-area) triangle")
        self.normals = cross / norms[:, None]

    def __len__(self):
        return len(self.triangles)


_FACE_QUADS = {
    # axis -> corner offsets of the +face quad, CCW seen from outside
    0: [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    1: [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
    2: [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
}


def extract_surface_mesh(g: VoxelGrid) -> TriangleMesh:
    """Cuberille mesh of every face between a solid voxel and empty space.

    Vertices are voxel corners, deduplicated by exact integer corner
    index; emission order is fixed (axis, then direction, then row-major
    voxel order) so output is deterministic.
    """
    solid = g.solid()
    if not solid.any():
        raise EmptyGrid("no solid voxels to mesh")
    n1, n2, n3 = g.dims
    padded = np.pad(solid, 1, mode="constant", constant_values=False)
    core = (slice(1, n1 + 1), slice(1, n2 + 1), slice(1, n3 + 1))

    corner_tris = []  # (M, 3, 3) int corner indices per triangle
    for axis in range(3):
        plus_quad = np.array(_FACE_QUADS[axis], dtype=np.int64)
        minus_quad = plus_quad[[0, 3, 2, 1]] - np.eye(3, dtype=np.int64)[axis]
        for direction, quad in ((1, plus_quad), (-1, minus_quad)):
            sl = list(core)
            sl[axis] = slice(core[axis].start + direction, core[axis].stop + direction)
            exposed = solid & ~padded[tuple(sl)]
            cells = np.argwhere(exposed)
            if cells.size == 0:
                continue
            quad_corners = cells[:, None, :] + quad[None, :, :]  # (M, 4, 3)
            corner_tris.append(quad_corners[:, (0, 1, 2), :])
            corner_tris.append(quad_corners[:, (0, 2, 3), :])

    tris_c = np.concatenate(corner_tris, axis=0)  # (T, 3, 3) corner ijk
    key = (tris_c[..., 0] * (n2 + 1) + tris_c[..., 1]) * (n3 + 1) + tris_c[..., 2]
    unique_keys, tri_idx = np.unique(key.ravel(), return_inverse=True)
    ck = unique_keys
    corners = np.stack(
        [ck // ((n2 + 1) * (n3 + 1)), (ck // (n3 + 1)) % (n2 + 1), ck % (n3 + 1)],
        axis=1,
    ).astype(np.float64)
    vertices = g.bv.vmin + corners * g.h
    return TriangleMesh(vertices=vertices, triangles=tri_idx.reshape(-1, 3))


def _directed_edges(m: TriangleMesh) -> np.ndarray:
    t = m.triangles
    return np.concatenate([t[:, (0, 1)], t[:, (1, 2)], t[:, (2, 0)]], axis=0)


def is_closed(m: TriangleMesh) -> bool:
    """True iff the mesh bounds a volume: every directed edge is matched
    by an equal count of the reverse edge (boundary-free surface).

    A manifold closed mesh has each undirected edge in exactly two
    opposite-oriented triangles; cuberille output of voxels meeting only
    along an edge legitimately carries four balanced triangles there.
    """
    if len(m) == 0:
        return False
    e = _directed_edges(m)
    if (e[:, 0] == e[:, 1]).any():
        return False
    nv = len(m.vertices)
    fwd = np.sort(e[:, 0] * nv + e[:, 1])
    rev = np.sort(e[:, 1] * nv + e[:, 0])
    return bool(np.array_equal(fwd, rev))


def signed_volume(m: TriangleMesh) -> float:
    """Volume in cm^3 by summing origin-tetrahedron determinants.

    V = |sum det[v0 v1 v2]| / 6, converted mm^3 -> cm^3. Refuses meshes
    that do not bound a volume (NotClosed): the sum is meaningless then.
    """
    if not is_closed(m):
        raise NotClosed("mesh edges are not balanced; volume undefined")
    v0 = m.vertices[m.triangles[:, 0]]
    v1 = m.vertices[m.triangles[:, 1]]
    v2 = m.vertices[m.triangles[:, 2]]
    det = np.einsum("ij,ij->i", np.cross(v0, v1), v2)
    return abs(float(det.sum())) / 6.0 / 1000.0


def signed_volume_raw(m: TriangleMesh) -> float:
    """Pre-absolute-value tetrahedron sum in mm^3 (orientation checks)."""
    v0 = m.vertices[m.triangles[:, 0]]
    v1 = m.vertices[m.triangles[:, 1]]
    v2 = m.vertices[m.triangles[:, 2]]
    return float(np.einsum("ij,ij->i", np.cross(v0, v1), v2).sum()) / 6.0


def write_obj(m: TriangleMesh, path) -> None:
    """Wavefront OBJ with 1-based faces; floats keep full precision."""
    lines = ["# silhuetta surface mesh\n"]
    for x, y, z in m.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
    for a, b, c in m.triangles:
        lines.append(f"f {a + 1} {b + 1} {c + 1}\n")
    with open(path, "w", newline="\n") as fh:
        fh.writelines(lines)


def read_obj(path) -> TriangleMesh:
    """Minimal OBJ reader for v/f records (as written by write_obj)."""
    verts, tris = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                if len(idx) != 3:
                    raise ValueError(f"{path}: only triangle faces supported")
                tris.append(idx)
    if not verts or not tris:
        raise ValueError(f"{path}: no mesh data found")
    return TriangleMesh(vertices=np.array(verts), triangles=np.array(tris))


def write_stl(m: TriangleMesh, path) -> None:
    """Binary STL: 80-byte header, little-endian float32 triangles."""
    header = b"silhuetta binary stl".ljust(80, b"\0")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<I", len(m)))
        for n, tri in zip(m.normals, m.triangles):
            fh.write(struct.pack("<3f", *n.astype(np.float32)))
            for vi in tri:
                fh.write(struct.pack("<3f", *m.vertices[vi].astype(np.float32)))
            fh.write(struct.pack("<H", 0))
