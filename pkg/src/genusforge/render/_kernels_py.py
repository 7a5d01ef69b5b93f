"""Pure-numpy raster kernels.

Same contract and same floating-point expressions as the compiled
``_kernels`` module; candidate (primitive, pixel) pairs are enumerated in
bulk and the per-pixel winner is picked with a lexicographic sort that
mirrors the compiled loop's "first strictly better wins" rule.
"""
import numpy as np


def _pixel_pairs(xmin, xmax, ymin, ymax):
    """Enumerate (primitive, ix, iy) for every pixel of each clipped bbox."""
    bw = np.maximum(xmax - xmin + 1, 0)
    bh = np.maximum(ymax - ymin + 1, 0)
    counts = bw * bh
    total = int(counts.sum())
    prim = np.repeat(np.arange(len(counts)), counts)
    start = np.cumsum(counts) - counts
    off = np.arange(total) - np.repeat(start, counts)
    bw_r = bw[prim]
    ix = xmin[prim] + off % np.maximum(bw_r, 1)
    iy = ymin[prim] + off // np.maximum(bw_r, 1)
    return prim, ix, iy


def _clip_box(lo_x, hi_x, lo_y, hi_y, width, height):
    xmin = np.maximum(np.ceil(lo_x - 0.5).astype(np.int64), 0)
    xmax = np.minimum(np.floor(hi_x - 0.5).astype(np.int64), width - 1)
    ymin = np.maximum(np.ceil(lo_y - 0.5).astype(np.int64), 0)
    ymax = np.minimum(np.floor(hi_y - 0.5).astype(np.int64), height - 1)
    return xmin, xmax, ymin, ymax


def _first_winner(pix, key, order_idx, n_pix):
    """Per pixel, index of the candidate with max ``key`` (ties: smallest order_idx)."""
    srt = np.lexsort((order_idx, -key, pix))
    p = pix[srt]
    first = np.ones(len(p), dtype=bool)
    first[1:] = p[1:] != p[:-1]
    return srt[first]


def rasterize(sxy, depth, faces, width, height):
    fid = np.full((height, width), -1, dtype=np.int32)
    if len(faces) == 0:
        return fid
    P = sxy[faces]  # (F, 3, 2)
    x0, y0 = P[:, 0, 0], P[:, 0, 1]
    x1, y1 = P[:, 1, 0], P[:, 1, 1]
    x2, y2 = P[:, 2, 0], P[:, 2, 1]
    area2 = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    ok = np.abs(area2) >= 1e-12
    xmin, xmax, ymin, ymax = _clip_box(
        np.minimum(x0, np.minimum(x1, x2)),
        np.maximum(x0, np.maximum(x1, x2)),
        np.minimum(y0, np.minimum(y1, y2)),
        np.maximum(y0, np.maximum(y1, y2)),
        width,
        height,
    )
    xmax = np.where(ok, xmax, xmin - 1)
    f, ix, iy = _pixel_pairs(xmin, xmax, ymin, ymax)
    if len(f) == 0:
        return fid
    px = ix + 0.5
    py = iy + 0.5
    X0, Y0, X1, Y1, X2, Y2, A = x0[f], y0[f], x1[f], y1[f], x2[f], y2[f], area2[f]
    b0 = ((X1 - px) * (Y2 - py) - (X2 - px) * (Y1 - py)) / A
    b1 = ((X2 - px) * (Y0 - py) - (X0 - px) * (Y2 - py)) / A
    b2 = ((X0 - px) * (Y1 - py) - (X1 - px) * (Y0 - py)) / A
    inside = (b0 >= 0.0) & (b1 >= 0.0) & (b2 >= 0.0)
    f, ix, iy, b0, b1, b2 = f[inside], ix[inside], iy[inside], b0[inside], b1[inside], b2[inside]
    fc = faces[f]
    invz = b0 / depth[fc[:, 0]] + b1 / depth[fc[:, 1]] + b2 / depth[fc[:, 2]]
    keep = invz > 0.0
    f, ix, iy, invz = f[keep], ix[keep], iy[keep], invz[keep]
    if len(f) == 0:
        return fid
    pix = iy * width + ix
    win = _first_winner(pix, invz, f, height * width)
    fid.ravel()[pix[win]] = f[win]
    return fid


def contour_distance(sxy, edges, width, height, band):
    dist = np.full((height, width), band, dtype=np.float64)
    eid = np.full((height, width), -1, dtype=np.int32)
    tt = np.zeros((height, width), dtype=np.float64)
    if len(edges) == 0:
        return dist, eid, tt
    ax, ay = sxy[edges[:, 0], 0], sxy[edges[:, 0], 1]
    bx, by = sxy[edges[:, 1], 0], sxy[edges[:, 1], 1]
    xmin, xmax, ymin, ymax = _clip_box(
        np.minimum(ax, bx) - band, np.maximum(ax, bx) + band, np.minimum(ay, by) - band, np.maximum(ay, by) + band,
        width, height,
    )
    k, ix, iy = _pixel_pairs(xmin, xmax, ymin, ymax)
    if len(k) == 0:
        return dist, eid, tt
    px = ix + 0.5
    py = iy + 0.5
    AX, AY = ax[k], ay[k]
    dx = bx[k] - AX
    dy = by[k] - AY
    l2 = dx * dx + dy * dy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(l2 > 0.0, ((px - AX) * dx + (py - AY) * dy) / l2, 0.0)
    t = np.where(t < 0.0, 0.0, np.where(t > 1.0, 1.0, t))
    qx = AX + t * dx
    qy = AY + t * dy
    d = np.sqrt((px - qx) * (px - qx) + (py - qy) * (py - qy))
    near = d < band
    k, ix, iy, d, t = k[near], ix[near], iy[near], d[near], t[near]
    if len(k) == 0:
        return dist, eid, tt
    pix = iy * width + ix
    win = _first_winner(pix, -d, k, height * width)
    dist.ravel()[pix[win]] = d[win]
    eid.ravel()[pix[win]] = k[win]
    tt.ravel()[pix[win]] = t[win]
    return dist, eid, tt
