# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels.

Must stay arithmetically identical to ``_kernels_py`` (same expressions in
the same order) so both backends produce bit-identical buffers.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor, sqrt, fabs

cnp.import_array()


def rasterize(const double[:, ::1] sxy, const double[::1] depth,
              const cnp.int64_t[:, ::1] faces, int width, int height):
    """Z-buffered coverage of pixel centres; returns (H, W) int32 face ids, -1 = empty."""
    fid_arr = np.full((height, width), -1, dtype=np.int32)
    zbuf_arr = np.zeros((height, width), dtype=np.float64)
    cdef int[:, ::1] fid = fid_arr
    cdef double[:, ::1] zbuf = zbuf_arr
    cdef Py_ssize_t F = faces.shape[0]
    cdef Py_ssize_t f
    cdef long long i0, i1, i2
    cdef double x0, y0, x1, y1, x2, y2, area2, px, py, b0, b1, b2, invz
    cdef int xmin, xmax, ymin, ymax, ix, iy
    with nogil:
        for f in range(F):
            i0 = faces[f, 0]
            i1 = faces[f, 1]
            i2 = faces[f, 2]
            x0 = sxy[i0, 0]
            y0 = sxy[i0, 1]
            x1 = sxy[i1, 0]
            y1 = sxy[i1, 1]
            x2 = sxy[i2, 0]
            y2 = sxy[i2, 1]
            area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            if fabs(area2) < 1e-12:
                continue
            xmin = <int>ceil(min(x0, min(x1, x2)) - 0.5)
            xmax = <int>floor(max(x0, max(x1, x2)) - 0.5)
            ymin = <int>ceil(min(y0, min(y1, y2)) - 0.5)
            ymax = <int>floor(max(y0, max(y1, y2)) - 0.5)
            if xmin < 0:
                xmin = 0
            if ymin < 0:
                ymin = 0
            if xmax > width - 1:
                xmax = width - 1
            if ymax > height - 1:
                ymax = height - 1
            for iy in range(ymin, ymax + 1):
                py = iy + 0.5
                for ix in range(xmin, xmax + 1):
                    px = ix + 0.5
                    b0 = ((x1 - px) * (y2 - py) - (x2 - px) * (y1 - py)) / area2
                    b1 = ((x2 - px) * (y0 - py) - (x0 - px) * (y2 - py)) / area2
                    b2 = ((x0 - px) * (y1 - py) - (x1 - px) * (y0 - py)) / area2
                    if b0 < 0.0 or b1 < 0.0 or b2 < 0.0:
                        continue
                    invz = b0 / depth[i0] + b1 / depth[i1] + b2 / depth[i2]
                    if invz > zbuf[iy, ix]:
                        zbuf[iy, ix] = invz
                        fid[iy, ix] = <int>f
    return fid_arr


def contour_distance(const double[:, ::1] sxy, const cnp.int64_t[:, ::1] edges,
                     int width, int height, double band):
    """Distance from each pixel centre to the nearest projected segment, within ``band``.

    Returns ``(dist, eid, t)``: distances (``band`` where no segment is closer),
    the winning row of ``edges`` (-1 if none) and the clamped segment parameter
    of the closest point.
    """
    dist_arr = np.full((height, width), band, dtype=np.float64)
    eid_arr = np.full((height, width), -1, dtype=np.int32)
    t_arr = np.zeros((height, width), dtype=np.float64)
    cdef double[:, ::1] dist = dist_arr
    cdef int[:, ::1] eid = eid_arr
    cdef double[:, ::1] tt = t_arr
    cdef Py_ssize_t E = edges.shape[0]
    cdef Py_ssize_t k
    cdef double ax, ay, bx, by, dx, dy, l2, px, py, t, qx, qy, d
    cdef int xmin, xmax, ymin, ymax, ix, iy
    with nogil:
        for k in range(E):
            ax = sxy[edges[k, 0], 0]
            ay = sxy[edges[k, 0], 1]
            bx = sxy[edges[k, 1], 0]
            by = sxy[edges[k, 1], 1]
            dx = bx - ax
            dy = by - ay
            l2 = dx * dx + dy * dy
            xmin = <int>ceil(min(ax, bx) - band - 0.5)
            xmax = <int>floor(max(ax, bx) + band - 0.5)
            ymin = <int>ceil(min(ay, by) - band - 0.5)
            ymax = <int>floor(max(ay, by) + band - 0.5)
            if xmin < 0:
                xmin = 0
            if ymin < 0:
                ymin = 0
            if xmax > width - 1:
                xmax = width - 1
            if ymax > height - 1:
                ymax = height - 1
            for iy in range(ymin, ymax + 1):
                py = iy + 0.5
                for ix in range(xmin, xmax + 1):
                    px = ix + 0.5
                    if l2 > 0.0:
                        t = ((px - ax) * dx + (py - ay) * dy) / l2
                    else:
                        t = 0.0
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                    qx = ax + t * dx
                    qy = ay + t * dy
                    d = sqrt((px - qx) * (px - qx) + (py - qy) * (py - qy))
                    if d < dist[iy, ix]:
                        dist[iy, ix] = d
                        eid[iy, ix] = <int>k
                        tt[iy, ix] = t
    return dist_arr, eid_arr, t_arr
