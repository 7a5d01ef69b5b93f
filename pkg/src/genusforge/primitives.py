"""Closed orientable starting surfaces of prescribed genus.

* genus 0: icosphere
* genus 1: regular grid torus
* genus >= 2: rounded slab with ``g`` through-holes in a row along x,
  swept from a planar cell layout (top sheet, bottom sheet, side walls)
  and rounded by Taubin smoothing.

All primitives are centred at the origin and scaled to bounding radius
``scale``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ResolutionTooLow
from .halfedge import HalfEdgeMesh, build_mesh

MIN_HANDLE_SEGMENTS = 8


@dataclass(frozen=True)
class PrimitiveSpec:
    genus: int
    resolution: int = 16
    scale: float = 1.0

    def __post_init__(self):
        if self.genus < 0:
            raise ValueError("genus must be non-negative")
        if self.scale <= 0:
            raise ValueError("scale must be positive")


_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


def icosahedron_arrays():
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), _ICO_FACES.copy()


def subdivide(positions, faces):
    """Loop-free 1-to-4 midpoint subdivision; returns new arrays."""
    faces = np.asarray(faces)
    n = len(positions)
    e = np.stack([faces, faces[:, [1, 2, 0]]], axis=2).reshape(-1, 2)
    key = np.minimum(e[:, 0], e[:, 1]) * n + np.maximum(e[:, 0], e[:, 1])
    uniq, inv = np.unique(key, return_inverse=True)
    mid_pos = 0.5 * (positions[uniq // n] + positions[uniq % n])
    mids = (n + inv).reshape(-1, 3)  # mid of edge (k, k+1)
    a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
    ab, bc, ca = mids[:, 0], mids[:, 1], mids[:, 2]
    new_faces = np.concatenate(
        [
            np.stack([a, ab, ca], 1),
            np.stack([b, bc, ab], 1),
            np.stack([c, ca, bc], 1),
            np.stack([ab, bc, ca], 1),
        ]
    )
    return np.concatenate([positions, mid_pos]), new_faces


def icosphere(level: int = 3, radius: float = 1.0) -> HalfEdgeMesh:
    v, f = icosahedron_arrays()
    for _ in range(level):
        v, f = subdivide(v, f)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
    return build_mesh(f, radius * v)


def torus_arrays(n_major: int, n_minor: int, major: float, minor: float):
    u = 2.0 * np.pi * np.arange(n_major) / n_major
    v = 2.0 * np.pi * np.arange(n_minor) / n_minor
    U, V = np.meshgrid(u, v, indexing="ij")
    ring = major + minor * np.cos(V)
    pos = np.stack([ring * np.cos(U), ring * np.sin(U), minor * np.sin(V)], axis=-1).reshape(-1, 3)
    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    i, j = i.ravel(), j.ravel()

    def vid(a, b):
        return (a % n_major) * n_minor + (b % n_minor)

    a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
    faces = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return pos, faces


def grid_torus(n_major: int = 32, n_minor: int = 16, major: float = 0.7, minor: float = 0.3) -> HalfEdgeMesh:
    """Regular (all valence 6) triangulated torus around the z axis."""
    pos, faces = torus_arrays(n_major, n_minor, major, minor)
    return build_mesh(faces, pos)


def planar_grid(nx: int, ny: int, spacing: float = 1.0, equilateral: bool = False) -> HalfEdgeMesh:
    """Triangulated ``nx`` by ``ny`` quad grid in the z=0 plane (has a border).

    With ``equilateral=True`` alternate rows are sheared by half a cell and
    compressed vertically so that every triangle is equilateral.
    """
    xs, ys = np.meshgrid(np.arange(nx + 1, dtype=float), np.arange(ny + 1, dtype=float), indexing="xy")
    if equilateral:
        xs = xs + 0.5 * (ys % 2)
        ys = ys * math.sqrt(3.0) / 2.0
    pos = np.stack([xs.ravel(), ys.ravel(), np.zeros(xs.size)], 1) * spacing
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 2, a + nx + 1
            if equilateral and j % 2 == 0:
                faces += [[a, b, d], [b, c, d]]
            else:
                faces += [[a, b, c], [a, c, d]]
    return build_mesh(np.array(faces), pos)


def _slab_with_holes(genus: int, m: int, k: int):
    """Planar cell layout (2g+1) x 3 with the odd cells of the middle row removed."""
    ncx, ncy = 2 * genus + 1, 3
    solid_cell = np.ones((ncx, ncy), dtype=bool)
    solid_cell[1::2, 1] = False
    NX, NY = ncx * m, ncy * m

    def solid(qx, qy):
        if qx < 0 or qy < 0 or qx >= NX or qy >= NY:
            return False
        return bool(solid_cell[qx // m, qy // m])

    thickness = 0.5
    pts = []
    top, bot = {}, {}
    quads = [(qx, qy) for qy in range(NY) for qx in range(NX) if solid(qx, qy)]
    for qx, qy in quads:
        for p in ((qx, qy), (qx + 1, qy), (qx + 1, qy + 1), (qx, qy + 1)):
            if p not in top:
                top[p] = len(pts)
                pts.append((p[0] / m, p[1] / m, thickness))
    for p in list(top):
        bot[p] = len(pts)
        pts.append((p[0] / m, p[1] / m, -thickness))

    faces = []
    border = []  # lattice edges a->b, oriented like the top sheet
    for qx, qy in quads:
        a, b, c, d = (qx, qy), (qx + 1, qy), (qx + 1, qy + 1), (qx, qy + 1)
        faces += [[top[a], top[b], top[c]], [top[a], top[c], top[d]]]
        faces += [[bot[a], bot[c], bot[b]], [bot[a], bot[d], bot[c]]]
        for (p, q), nb in (((a, b), (qx, qy - 1)), ((b, c), (qx + 1, qy)), ((c, d), (qx, qy + 1)), ((d, a), (qx - 1, qy))):
            if not solid(*nb):
                border.append((p, q))

    levels = {}
    border_pts = sorted({p for e in border for p in e})
    for p in border_pts:
        col = [top[p]]
        for lvl in range(1, k):
            col.append(len(pts))
            pts.append((p[0] / m, p[1] / m, thickness - 2.0 * thickness * lvl / k))
        col.append(bot[p])
        levels[p] = col
    for a, b in border:
        ca, cb = levels[a], levels[b]
        for lvl in range(k):
            faces += [[cb[lvl], ca[lvl], ca[lvl + 1]], [cb[lvl], ca[lvl + 1], cb[lvl + 1]]]
    return np.array(pts, dtype=np.float64), np.array(faces, dtype=np.int64)


def taubin_smooth(mesh: HalfEdgeMesh, iterations: int = 10, lam: float = 0.5, mu: float = -0.53) -> np.ndarray:
    """Shrink-free low-pass smoothing with the uniform Laplacian; returns new positions."""
    n = mesh.n_vertices
    e = mesh.edges
    A = sp.coo_matrix(
        (np.ones(2 * len(e)), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
        shape=(n, n),
    ).tocsr()
    W = sp.diags(1.0 / np.asarray(A.sum(axis=1)).ravel()) @ A
    x = mesh.positions.copy()
    for _ in range(iterations):
        x = x + lam * (W @ x - x)
        x = x + mu * (W @ x - x)
    return x


def normalize_to_radius(positions, scale: float = 1.0):
    """Centre on the bounding-box centre and scale to the given bounding radius."""
    lo, hi = positions.min(axis=0), positions.max(axis=0)
    p = positions - 0.5 * (lo + hi)
    return p * (scale / np.linalg.norm(p, axis=1).max())


def make_primitive(spec: PrimitiveSpec) -> HalfEdgeMesh:
    g, res = spec.genus, spec.resolution
    if g == 0:
        if res < 1:
            raise ResolutionTooLow("resolution must be >= 1")
        level = 0
        while 5 * 2**level < res:
            level += 1
        mesh = icosphere(level)
    else:
        if res < MIN_HANDLE_SEGMENTS:
            raise ResolutionTooLow(
                "resolution %d gives fewer than %d segments around a handle loop" % (res, MIN_HANDLE_SEGMENTS)
            )
        if g == 1:
            pos, faces = torus_arrays(2 * res, res, 0.7, 0.3)
            mesh = build_mesh(faces, pos)
        else:
            m = max(2, math.ceil(res / 4))
            pos, faces = _slab_with_holes(g, m, m)
            mesh = build_mesh(faces, pos)
            mesh = mesh.with_positions(taubin_smooth(mesh, iterations=6 * m))
    return mesh.with_positions(normalize_to_radius(mesh.positions, spec.scale))
