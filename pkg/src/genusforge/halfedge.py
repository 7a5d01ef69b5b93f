"""Index-based half-edge triangle mesh.

Connectivity lives in flat integer arrays: half-edge ``h`` of face ``f``
(corner ``k``) has id ``3*f + k`` and runs from ``faces[f, k]`` to
``faces[f, (k+1) % 3]``. Boundary half-edges (face id ``-1``) are appended
after the ``3*F`` interior ones, in the order of the interior half-edges they
pair with, so ids are a pure function of the input face order.

Edges are never stored; an edge is a pair ``(h, twin[h])`` and is
represented by the smaller of the two ids.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateFace,
    InconsistentOrientation,
    MeshError,
    NonManifoldEdge,
    NonManifoldVertex,
    NonTriangular,
    ParseError,
)


class HalfEdgeMesh:
    """Closed or bordered orientable 2-manifold triangle mesh.

    Do not call the constructor directly; use :func:`build_mesh`, which
    validates the input.

    Attributes
    ----------
    positions : (n, 3) float64
    faces : (F, 3) int64
        Triangle list the half-edges were built from.
    he_origin, he_twin, he_next, he_prev, he_face : (H,) int64
    face_he : (F,) int64
        ``face_he[f] == 3*f``.
    vert_he : (n,) int64
        An outgoing half-edge per vertex; on the border it is the outgoing
        border half-edge, so that :func:`one_ring` starts there.
    """

    __slots__ = (
        "positions",
        "faces",
        "he_origin",
        "he_twin",
        "he_next",
        "he_prev",
        "he_face",
        "face_he",
        "vert_he",
        "_edges",
    )

    def __init__(self, positions, faces, origin, twin, nxt, prev, face, face_he, vert_he):
        self.positions = positions
        self.faces = faces
        self.he_origin = origin
        self.he_twin = twin
        self.he_next = nxt
        self.he_prev = prev
        self.he_face = face
        self.face_he = face_he
        self.vert_he = vert_he
        self._edges = None

    # -- sizes -------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_halfedges(self) -> int:
        return len(self.he_origin)

    @property
    def n_edges(self) -> int:
        return len(self.he_origin) // 2

    @property
    def is_closed(self) -> bool:
        return len(self.he_origin) == 3 * len(self.faces)

    # -- derived connectivity ---------------------------------------------
    def he_dest(self, h=None):
        d = self.he_origin[self.he_next]
        return d if h is None else d[h]

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) vertex pairs, one per edge, ordered by representative half-edge id."""
        if self._edges is None:
            h = self.edge_halfedges
            self._edges = np.stack([self.he_origin[h], self.he_origin[self.he_next[h]]], axis=1)
        return self._edges

    @property
    def edge_halfedges(self) -> np.ndarray:
        """Representative half-edge per edge (the smaller id of each twin pair)."""
        h = np.arange(self.n_halfedges)
        return h[h < self.he_twin]

    def valence(self) -> np.ndarray:
        return np.bincount(self.he_origin, minlength=self.n_vertices)

    def boundary_vertices(self) -> np.ndarray:
        """Boolean mask of vertices on the border."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        border = self.he_face < 0
        mask[self.he_origin[border]] = True
        return mask

    def face_normals(self, normalized=True) -> np.ndarray:
        p = self.positions[self.faces]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        if normalized:
            n = n / np.linalg.norm(n, axis=1, keepdims=True)
        return n

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(normalized=False), axis=1)

    def vertex_normals(self) -> np.ndarray:
        """Area-weighted vertex normals (unit length)."""
        fn = self.face_normals(normalized=False)
        vn = np.zeros_like(self.positions)
        for k in range(3):
            np.add.at(vn, self.faces[:, k], fn)
        return vn / np.linalg.norm(vn, axis=1, keepdims=True)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.linalg.norm(self.positions[e[:, 1]] - self.positions[e[:, 0]], axis=1)

    def copy(self) -> "HalfEdgeMesh":
        return HalfEdgeMesh(
            self.positions.copy(),
            self.faces.copy(),
            self.he_origin.copy(),
            self.he_twin.copy(),
            self.he_next.copy(),
            self.he_prev.copy(),
            self.he_face.copy(),
            self.face_he.copy(),
            self.vert_he.copy(),
        )

    def assign(self, other: "HalfEdgeMesh") -> None:
        """Replace this mesh's content in place (used by the remesher)."""
        for name in self.__slots__:
            setattr(self, name, getattr(other, name))

    def with_positions(self, positions) -> "HalfEdgeMesh":
        """Same connectivity (shared arrays), new vertex positions."""
        positions = np.asarray(positions, dtype=np.float64)
        if positions.shape != self.positions.shape:
            raise ValueError("positions shape %s != %s" % (positions.shape, self.positions.shape))
        m = HalfEdgeMesh(
            positions,
            self.faces,
            self.he_origin,
            self.he_twin,
            self.he_next,
            self.he_prev,
            self.he_face,
            self.face_he,
            self.vert_he,
        )
        m._edges = self._edges
        return m

    def validate(self) -> None:
        """Re-check every structural invariant; raises :class:`MeshError`."""
        H = self.n_halfedges
        h = np.arange(H)
        tw, nx, pv = self.he_twin, self.he_next, self.he_prev
        if np.any(tw[tw] != h) or np.any(tw == h):
            raise MeshError("twin is not a fixed-point-free involution")
        if np.any(pv[nx] != h):
            raise MeshError("prev is not the inverse of next")
        interior = self.he_face >= 0
        hi = h[interior]
        if np.any(nx[nx[nx[hi]]] != hi):
            raise MeshError("interior next does not form 3-cycles")
        if np.any(self.he_face[nx[hi]] != self.he_face[hi]):
            raise MeshError("face id differs inside a 3-cycle")
        if np.any(self.he_origin[nx[tw]] != self.he_origin):
            raise MeshError("twin half-edges are not reversed")
        if np.any((self.he_face < 0) & (self.he_face[tw] < 0)):
            raise MeshError("edge without any face")
        f = self.faces
        if np.any(f[:, 0] == f[:, 1]) or np.any(f[:, 1] == f[:, 2]) or np.any(f[:, 0] == f[:, 2]):
            raise DegenerateFace("face with repeated vertex")
        ref = build_mesh(self.faces, self.positions)
        for name in ("he_origin", "he_twin", "he_next", "he_face"):
            if not np.array_equal(getattr(ref, name), getattr(self, name)):
                raise MeshError("connectivity array %s is inconsistent with faces" % name)

    def __repr__(self):
        return "HalfEdgeMesh(V=%d, E=%d, F=%d)" % (self.n_vertices, self.n_edges, self.n_faces)


@dataclass(frozen=True)
class TopologySummary:
    num_vertices: int
    num_edges: int
    num_faces: int
    euler_characteristic: int
    genus: Optional[int]
    is_closed: bool
    is_orientable: bool
    num_components: int = 1


def build_mesh(triangles, positions) -> HalfEdgeMesh:
    """Build and validate a half-edge mesh from a triangle list.

    Raises
    ------
    DegenerateFace
        A face repeats a vertex id, or references a vertex out of range.
    NonManifoldEdge
        An edge is shared by more than two faces.
    InconsistentOrientation
        Two faces traverse a shared edge in the same direction.
    NonManifoldVertex
        A vertex fan is disconnected, or a vertex is unreferenced.
    """
    pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
    tri = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
    n = len(pos)
    F = len(tri)
    if F == 0:
        raise MeshError("mesh has no faces")
    if tri.min() < 0 or tri.max() >= n:
        raise DegenerateFace("vertex index out of range [0, %d)" % n)
    bad = (tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])
    if bad.any():
        raise DegenerateFace("face %d has repeated vertex ids %s" % (np.flatnonzero(bad)[0], tri[bad][0]))

    origin = tri.ravel()
    dest = tri[:, [1, 2, 0]].ravel()
    lo = np.minimum(origin, dest)
    hi = np.maximum(origin, dest)
    ukey = lo * n + hi
    uniq, inv, counts = np.unique(ukey, return_inverse=True, return_counts=True)
    if counts.max() > 2:
        k = uniq[np.argmax(counts)]
        raise NonManifoldEdge("edge (%d, %d) bounded by %d faces" % (k // n, k % n, counts.max()))
    dkey = origin * n + dest
    order = np.argsort(dkey, kind="stable")
    sk = dkey[order]
    if np.any(sk[1:] == sk[:-1]):
        k = sk[1:][sk[1:] == sk[:-1]][0]
        raise InconsistentOrientation("half-edge %d->%d appears twice" % (k // n, k % n))

    H0 = 3 * F
    rkey = dest * n + origin
    pos_r = np.searchsorted(sk, rkey)
    pos_r = np.minimum(pos_r, H0 - 1)
    found = sk[pos_r] == rkey
    twin = np.full(H0, -1, dtype=np.int64)
    twin[found] = order[pos_r[found]]

    nxt = (np.arange(H0) // 3) * 3 + (np.arange(H0) + 1) % 3
    face = np.arange(H0) // 3

    # border half-edges
    lone = np.flatnonzero(~found)
    nb = len(lone)
    if nb:
        b_ids = H0 + np.arange(nb)
        b_origin = dest[lone]
        b_dest = origin[lone]
        twin[lone] = b_ids
        twin = np.concatenate([twin, lone])
        origin_all = np.concatenate([origin, b_origin])
        face = np.concatenate([face, np.full(nb, -1, dtype=np.int64)])
        start = np.full(n, -1, dtype=np.int64)
        if len(np.unique(b_origin)) != nb:
            v = b_origin[np.argsort(b_origin)]
            v = v[1:][v[1:] == v[:-1]][0]
            raise NonManifoldVertex("vertex %d has more than one border gap" % v)
        start[b_origin] = b_ids
        b_next = start[b_dest]
        nxt = np.concatenate([nxt, b_next])
    else:
        origin_all = origin

    H = len(origin_all)
    prev = np.empty(H, dtype=np.int64)
    prev[nxt] = np.arange(H)

    used = np.bincount(origin_all, minlength=n)
    if np.any(used == 0):
        raise NonManifoldVertex("vertex %d is not referenced by any face" % np.flatnonzero(used == 0)[0])

    # every vertex fan must be a single cycle of the rotation h -> next(twin(h))
    rot = nxt[twin]
    g = coo_matrix((np.ones(H, dtype=np.int8), (np.arange(H), rot)), shape=(H, H))
    ncyc, labels = connected_components(g, directed=True, connection="weak")
    if ncyc != n:
        owner = np.full(n, -1, dtype=np.int64)
        for h_, lab in enumerate(labels):
            v = origin_all[h_]
            if owner[v] >= 0 and owner[v] != lab:
                raise NonManifoldVertex("vertex %d has a disconnected face fan" % v)
            owner[v] = lab

    vert_he = np.empty(n, dtype=np.int64)
    # interior half-edges first, border ones override
    vert_he[origin_all[::-1]] = np.arange(H)[::-1]
    if nb:
        vert_he[origin_all[H0:]] = np.arange(H0, H)

    return HalfEdgeMesh(
        pos,
        tri,
        origin_all.astype(np.int64),
        twin,
        nxt.astype(np.int64),
        prev,
        face.astype(np.int64),
        np.arange(F, dtype=np.int64) * 3,
        vert_he,
    )


def topology_summary(mesh: HalfEdgeMesh) -> TopologySummary:
    V, E, F = mesh.n_vertices, mesh.n_edges, mesh.n_faces
    chi = V + F - E
    e = mesh.edges
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(V, V))
    ncomp, _ = connected_components(g, directed=False)
    closed = mesh.is_closed
    # inconsistent orientation is rejected at construction time
    orientable = True
    genus = None
    if closed and orientable and ncomp == 1:
        genus = 1 - chi // 2
    return TopologySummary(V, E, F, chi, genus, closed, orientable, int(ncomp))


def one_ring(mesh: HalfEdgeMesh, v: int):
    """Neighbour vertices and incident faces of ``v`` in counter-clockwise order.

    Returns
    -------
    neighbors : list of int
        One entry per outgoing half-edge (length == valence).
    faces : list of int
        Incident faces; border gaps are skipped.
    """
    h0 = int(mesh.vert_he[v])
    nbrs, faces = [], []
    h = h0
    nx, tw, pv, org, fc = mesh.he_next, mesh.he_twin, mesh.he_prev, mesh.he_origin, mesh.he_face
    limit = mesh.n_halfedges
    while True:
        nbrs.append(int(org[nx[h]]))
        if fc[h] >= 0:
            faces.append(int(fc[h]))
        h = int(tw[pv[h]])
        if h == h0:
            break
        limit -= 1
        if limit < 0:
            raise MeshError("vertex fan of %d does not close" % v)
    return nbrs, faces


# ---------------------------------------------------------------------------
# Wavefront OBJ
# ---------------------------------------------------------------------------


def read_obj_arrays(path):
    """Parse ``v`` and ``f`` records; returns ``(positions, triangles)``."""
    verts, tris = [], []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            toks = line.split()
            if not toks or toks[0].startswith("#"):
                continue
            tag = toks[0]
            if tag == "v":
                if len(toks) < 4:
                    raise ParseError("%s:%d: vertex needs 3 coordinates" % (path, lineno))
                try:
                    verts.append([float(t) for t in toks[1:4]])
                except ValueError:
                    raise ParseError("%s:%d: bad vertex coordinate" % (path, lineno)) from None
            elif tag == "f":
                corners = toks[1:]
                if len(corners) != 3:
                    raise NonTriangular("%s:%d: face with %d vertices" % (path, lineno, len(corners)))
                face = []
                for c in corners:
                    try:
                        idx = int(c.split("/", 1)[0])
                    except ValueError:
                        raise ParseError("%s:%d: bad face index %r" % (path, lineno, c)) from None
                    if idx == 0:
                        raise ParseError("%s:%d: face index 0 (OBJ is 1-based)" % (path, lineno))
                    # negative indices are relative to the vertices read so far
                    idx = idx - 1 if idx > 0 else len(verts) + idx
                    face.append(idx)
                tris.append(face)
    pos = np.array(verts, dtype=np.float64).reshape(-1, 3)
    tri = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if len(tri) and (tri.min() < 0 or tri.max() >= len(pos)):
        raise ParseError("%s: face index out of range (have %d vertices)" % (path, len(pos)))
    return pos, tri


def load_obj(path) -> HalfEdgeMesh:
    pos, tri = read_obj_arrays(path)
    return build_mesh(tri, pos)


def save_obj(mesh: HalfEdgeMesh, path) -> None:
    lines = ["# V=%d F=%d\n" % (mesh.n_vertices, mesh.n_faces)]
    lines.extend("v %.9g %.9g %.9g\n" % tuple(p) for p in mesh.positions)
    lines.extend("f %d %d %d\n" % tuple(f + 1) for f in mesh.faces)
    Path(path).write_text("".join(lines))
