# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled reconstruction kernels.

Semantics (and floating-point evaluation order) match
silhuetta._kernels._numpy exactly; the extension is built with
-ffp-contract=off so both backends return bit-identical arrays.
"""

from libc.math cimport floor, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef void _classify_view(
    cnp.uint8_t[::1] solid,
    double ox, double oy, double oz,
    double hx, double hy, double hz,
    Py_ssize_t n1, Py_ssize_t n2, Py_ssize_t n3,
    double r00, double r01, double r02,
    double r10, double r11, double r12,
    double r20, double r21, double r22,
    double t0, double t1, double t2,
    double fx, double fy, double cx, double cy,
    double width, double height,
    cnp.uint8_t[:, ::1] mask,
) noexcept nogil:
    cdef Py_ssize_t i, j, k, n, px, py
    cdef double wx, wy, wz, xc, yc, zc, u, v
    n = 0
    for i in range(n1):
        wx = ox + (<double>i + 0.5) * hx
        for j in range(n2):
            wy = oy + (<double>j + 0.5) * hy
            for k in range(n3):
                if solid[n]:
                    wz = oz + (<double>k + 0.5) * hz
                    zc = r20 * wx + r21 * wy + r22 * wz + t2
                    if zc > 0.0:
                        xc = r00 * wx + r01 * wy + r02 * wz + t0
                        yc = r10 * wx + r11 * wy + r12 * wz + t1
                        u = fx * xc / zc + cx
                        v = fy * yc / zc + cy
                        if u >= 0.0 and u < width and v >= 0.0 and v < height:
                            px = <Py_ssize_t>floor(u)
                            py = <Py_ssize_t>floor(v)
                            if mask[py, px] == 0:
                                solid[n] = 0
                n += 1


def classify_solid(origin, h, dims, cams, masks):
    """Visual-hull membership of every voxel centre (see _numpy twin)."""
    cdef Py_ssize_t n1 = int(dims[0]), n2 = int(dims[1]), n3 = int(dims[2])
    solid = np.ones(n1 * n2 * n3, dtype=np.uint8)
    cdef cnp.uint8_t[::1] solid_v = solid
    cdef double ox = float(origin[0]), oy = float(origin[1]), oz = float(origin[2])
    cdef double hx = float(h[0]), hy = float(h[1]), hz = float(h[2])
    for cam, mask in zip(cams, masks):
        r, t, fx, fy, cx, cy, width, height = cam
        m = np.ascontiguousarray(mask, dtype=np.uint8)
        _classify_view(
            solid_v, ox, oy, oz, hx, hy, hz, n1, n2, n3,
            r[0, 0], r[0, 1], r[0, 2], r[1, 0], r[1, 1], r[1, 2],
            r[2, 0], r[2, 1], r[2, 2], t[0], t[1], t[2],
            float(fx), float(fy), float(cx), float(cy), float(width), float(height),
            m,
        )
    return solid.reshape((n1, n2, n3)).astype(bool)


cdef bint _occluded(
    cnp.uint8_t[:, :, ::1] labels,
    double ox, double oy, double oz,
    double hx, double hy, double hz,
    double bx, double by, double bz,
    Py_ssize_t si, Py_ssize_t sj, Py_ssize_t sk,
    double cx0, double cy0, double cz0,
    double ccx, double ccy, double ccz,
    double step,
) noexcept nogil:
    cdef double dx = ccx - cx0
    cdef double dy = ccy - cy0
    cdef double dz = ccz - cz0
    cdef double dist = sqrt(dx * dx + dy * dy + dz * dz)
    if dist <= 0.0:
        return 0
    cdef double ux = dx / dist
    cdef double uy = dy / dist
    cdef double uz = dz / dist
    cdef double t = step
    cdef double px, py, pz
    cdef Py_ssize_t ii, jj, kk
    while t < dist:
        px = cx0 + ux * t
        py = cy0 + uy * t
        pz = cz0 + uz * t
        if px < ox or px >= bx or py < oy or py >= by or pz < oz or pz >= bz:
            return 0
        # box test uses bmax while the index divides by h: clamp so
        # boundary-grazing points cannot round out of range
        ii = <Py_ssize_t>floor((px - ox) / hx)
        jj = <Py_ssize_t>floor((py - oy) / hy)
        kk = <Py_ssize_t>floor((pz - oz) / hz)
        if ii < 0:
            ii = 0
        elif ii >= labels.shape[0]:
            ii = labels.shape[0] - 1
        if jj < 0:
            jj = 0
        elif jj >= labels.shape[1]:
            jj = labels.shape[1] - 1
        if kk < 0:
            kk = 0
        elif kk >= labels.shape[2]:
            kk = labels.shape[2] - 1
        if labels[ii, jj, kk] != 0 and (ii != si or jj != sj or kk != sk):
            return 1
        t += step
    return 0


def carve_sweep(labels, origin, h, cams, images, tau, min_views):
    """One Jacobi carving sweep over surface voxels (see _numpy twin)."""
    cdef cnp.uint8_t[:, :, ::1] lab = np.ascontiguousarray(labels, dtype=np.uint8)
    cdef Py_ssize_t n1 = lab.shape[0], n2 = lab.shape[1], n3 = lab.shape[2]
    cdef double ox = float(origin[0]), oy = float(origin[1]), oz = float(origin[2])
    cdef double hx = float(h[0]), hy = float(h[1]), hz = float(h[2])
    cdef double bx = ox + hx * <double>n1
    cdef double by = oy + hy * <double>n2
    cdef double bz = oz + hz * <double>n3
    cdef double step
    if hx <= hy and hx <= hz:
        step = 0.5 * hx
    elif hy <= hz:
        step = 0.5 * hy
    else:
        step = 0.5 * hz

    cdef Py_ssize_t nviews = len(cams)
    cam_r = np.empty((nviews, 3, 3), dtype=np.float64)
    cam_t = np.empty((nviews, 3), dtype=np.float64)
    cam_k = np.empty((nviews, 6), dtype=np.float64)  # fx fy cx cy width height
    cam_c = np.empty((nviews, 3), dtype=np.float64)  # camera centres
    img_w = np.empty(nviews, dtype=np.int64)
    img_off = np.empty(nviews + 1, dtype=np.int64)
    flat_parts = []
    cdef Py_ssize_t v
    off = 0
    for v in range(nviews):
        r, t, fx, fy, cx, cy, width, height = cams[v]
        cam_r[v] = r
        cam_t[v] = t
        cam_k[v] = (fx, fy, cx, cy, width, height)
        cam_c[v, 0] = -(r[0, 0] * t[0] + r[1, 0] * t[1] + r[2, 0] * t[2])
        cam_c[v, 1] = -(r[0, 1] * t[0] + r[1, 1] * t[1] + r[2, 1] * t[2])
        cam_c[v, 2] = -(r[0, 2] * t[0] + r[1, 2] * t[1] + r[2, 2] * t[2])
        img = np.ascontiguousarray(images[v], dtype=np.uint8)
        img_w[v] = img.shape[1]
        img_off[v] = off
        off += img.size
        flat_parts.append(img.reshape(-1))
    img_off[nviews] = off
    img_flat = np.concatenate(flat_parts) if flat_parts else np.zeros(0, dtype=np.uint8)

    remove = np.zeros((n1, n2, n3), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, ::1] rem = remove
    cdef cnp.float64_t[:, :, ::1] crv = cam_r
    cdef cnp.float64_t[:, ::1] ctv = cam_t
    cdef cnp.float64_t[:, ::1] ckv = cam_k
    cdef cnp.float64_t[:, ::1] ccv = cam_c
    cdef cnp.int64_t[::1] iwv = img_w
    cdef cnp.int64_t[::1] iov = img_off
    cdef cnp.uint8_t[::1] ifv = img_flat

    cdef double tau2 = float(tau) * float(tau)
    cdef Py_ssize_t minv = int(min_views)
    if minv < 1:
        minv = 1

    cdef Py_ssize_t i, j, k, px, py, nsamp
    cdef double wx, wy, wz, xc, yc, zc, u, vv
    cdef double s0, s1, s2, q0, q1, q2, c0, c1, c2, n, mean, var
    cdef Py_ssize_t base
    with nogil:
        for i in range(n1):
            for j in range(n2):
                for k in range(n3):
                    if lab[i, j, k] != 1:
                        continue
                    wx = ox + (<double>i + 0.5) * hx
                    wy = oy + (<double>j + 0.5) * hy
                    wz = oz + (<double>k + 0.5) * hz
                    nsamp = 0
                    s0 = s1 = s2 = 0.0
                    q0 = q1 = q2 = 0.0
                    for v in range(nviews):
                        zc = crv[v, 2, 0] * wx + crv[v, 2, 1] * wy + crv[v, 2, 2] * wz + ctv[v, 2]
                        if zc <= 0.0:
                            continue
                        xc = crv[v, 0, 0] * wx + crv[v, 0, 1] * wy + crv[v, 0, 2] * wz + ctv[v, 0]
                        yc = crv[v, 1, 0] * wx + crv[v, 1, 1] * wy + crv[v, 1, 2] * wz + ctv[v, 1]
                        u = ckv[v, 0] * xc / zc + ckv[v, 2]
                        vv = ckv[v, 1] * yc / zc + ckv[v, 3]
                        if u < 0.0 or u >= ckv[v, 4] or vv < 0.0 or vv >= ckv[v, 5]:
                            continue
                        if _occluded(lab, ox, oy, oz, hx, hy, hz, bx, by, bz,
                                     i, j, k, wx, wy, wz,
                                     ccv[v, 0], ccv[v, 1], ccv[v, 2], step):
                            continue
                        px = <Py_ssize_t>floor(u)
                        py = <Py_ssize_t>floor(vv)
                        base = iov[v] + (py * iwv[v] + px) * 3
                        c0 = <double>ifv[base]
                        c1 = <double>ifv[base + 1]
                        c2 = <double>ifv[base + 2]
                        nsamp += 1
                        s0 += c0
                        s1 += c1
                        s2 += c2
                        q0 += c0 * c0
                        q1 += c1 * c1
                        q2 += c2 * c2
                    if nsamp >= minv:
                        n = <double>nsamp
                        mean = s0 / n
                        var = q0 / n - mean * mean
                        if var > tau2:
                            rem[i, j, k] = 1
                            continue
                        mean = s1 / n
                        var = q1 / n - mean * mean
                        if var > tau2:
                            rem[i, j, k] = 1
                            continue
                        mean = s2 / n
                        var = q2 / n - mean * mean
                        if var > tau2:
                            rem[i, j, k] = 1
    return remove.astype(bool)
