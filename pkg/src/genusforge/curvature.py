"""Discrete curvature operators on triangle meshes.

Gaussian curvature comes from the angle deficit, mean curvature from the
magnitude of the Laplacian of the embedding, and the principal curvatures
from the pair (H, K). Curvature densities are normalised by the mixed
Voronoi vertex area of Meyer et al.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateAngle
from .halfedge import HalfEdgeMesh

UNIFORM = "uniform"
COTANGENT = "cotangent"


@dataclass
class LaplacianOperator:
    """Sparse Laplacian ``L`` with ``L[i, j] = w_ij`` and zero row sums."""

    matrix: sp.csr_matrix
    scheme: str
    areas: np.ndarray

    def __matmul__(self, x):
        return self.matrix @ x

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class CurvatureField:
    gaussian: np.ndarray
    mean: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    area: np.ndarray
    deficit: np.ndarray
    boundary: np.ndarray

    def to_csv(self, path) -> None:
        rows = ["vid,K,H,k1,k2\n"]
        for i in range(len(self.mean)):
            rows.append(
                "%d,%.9g,%.9g,%.9g,%.9g\n"
                % (i, self.gaussian[i], self.mean[i], self.k1[i], self.k2[i])
            )
        with open(path, "w") as fh:
            fh.writelines(rows)


def _corner_geometry(mesh: HalfEdgeMesh):
    """Per-face corner angles, cotangents and double areas.

    Corner ``k`` of face ``f`` sits at vertex ``faces[f, k]`` and is opposite
    the edge ``(faces[f, k+1], faces[f, k+2])``.
    """
    p = mesh.positions[mesh.faces]
    a = p[:, [1, 2, 0]] - p  # edge k -> k+1
    b = p[:, [2, 0, 1]] - p  # edge k -> k+2
    dot = np.einsum("fkc,fkc->fk", a, b)
    crs = np.linalg.norm(np.cross(a, b), axis=2)
    scale = np.einsum("fkc,fkc->fk", a, a) * np.einsum("fkc,fkc->fk", b, b)
    bad = crs <= 1e-14 * np.sqrt(scale)
    if bad.any():
        f = int(np.flatnonzero(bad.any(axis=1))[0])
        raise DegenerateAngle("face %d has collinear vertices" % f)
    angles = np.arctan2(crs, dot)
    cot = dot / crs
    return angles, cot, crs[:, 0]


def angle_deficits(mesh: HalfEdgeMesh) -> np.ndarray:
    """Integrated Gaussian curvature per vertex: 2*pi (or pi on the border) minus the angle sum."""
    angles, _, _ = _corner_geometry(mesh)
    total = np.bincount(mesh.faces.ravel(), weights=angles.ravel(), minlength=mesh.n_vertices)
    full = np.where(mesh.boundary_vertices(), np.pi, 2.0 * np.pi)
    return full - total


def mixed_areas(mesh: HalfEdgeMesh) -> np.ndarray:
    """Mixed Voronoi vertex areas with the obtuse-triangle fallback."""
    angles, cot, dbl = _corner_geometry(mesh)
    p = mesh.positions[mesh.faces]
    # squared length of the edge opposite corner k
    opp = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    l2 = np.einsum("fkc,fkc->fk", opp, opp)
    area = 0.5 * dbl
    # Voronoi share of corner k: (|e_k,k+1|^2 cot(k+2) + |e_k,k+2|^2 cot(k+1)) / 8
    vor = (l2[:, [2, 0, 1]] * cot[:, [2, 0, 1]] + l2[:, [1, 2, 0]] * cot[:, [1, 2, 0]]) / 8.0
    obtuse = angles > 0.5 * np.pi
    any_obtuse = obtuse.any(axis=1)
    share = np.where(any_obtuse[:, None], np.where(obtuse, area[:, None] / 2.0, area[:, None] / 4.0), vor)
    return np.bincount(mesh.faces.ravel(), weights=share.ravel(), minlength=mesh.n_vertices)


def build_laplacian(mesh: HalfEdgeMesh, scheme: str = COTANGENT) -> LaplacianOperator:
    """Discrete Laplacian with uniform (1/valence) or cotangent weights."""
    n = mesh.n_vertices
    e = mesh.edges
    i, j = e[:, 0], e[:, 1]
    if scheme == UNIFORM:
        val = mesh.valence().astype(np.float64)
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        w = 1.0 / val[rows]
        areas = np.ones(n)
    elif scheme == COTANGENT:
        _, cot, _ = _corner_geometry(mesh)
        f = mesh.faces
        # corner k contributes cot/2 to the opposite edge (k+1, k+2)
        r = f[:, [1, 2, 0]].ravel()
        c = f[:, [2, 0, 1]].ravel()
        half = 0.5 * cot.ravel()
        rows = np.concatenate([r, c])
        cols = np.concatenate([c, r])
        w = np.concatenate([half, half])
        areas = mixed_areas(mesh)
    else:
        raise ValueError("unknown Laplacian scheme %r" % scheme)
    diag = np.bincount(rows, weights=w, minlength=n)
    # one assembly keeps explicit zeros, so the pattern always matches the edges
    idx = np.arange(n)
    L = sp.coo_matrix(
        (np.concatenate([w, -diag]), (np.concatenate([rows, idx]), np.concatenate([cols, idx]))), shape=(n, n)
    ).tocsr()
    L.sum_duplicates()
    L.sort_indices()
    return LaplacianOperator(L, scheme, areas)


def combinatorial_laplacian(mesh: HalfEdgeMesh) -> sp.csr_matrix:
    """Graph Laplacian ``D - A`` (symmetric positive semidefinite, unit weights)."""
    n = mesh.n_vertices
    e = mesh.edges
    A = sp.coo_matrix(
        (np.ones(2 * len(e)), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
        shape=(n, n),
    ).tocsr()
    L = (sp.diags(np.asarray(A.sum(axis=1)).ravel()) - A).tocsr()
    L.sort_indices()
    return L


def gaussian_curvature(mesh: HalfEdgeMesh, areas=None) -> np.ndarray:
    """Angle deficit divided by the mixed vertex area."""
    if areas is None:
        areas = mixed_areas(mesh)
    return angle_deficits(mesh) / areas


def mean_curvature(mesh: HalfEdgeMesh, laplacian: LaplacianOperator) -> np.ndarray:
    """Signed mean curvature ``H = |L x| / (2 A)``.

    Positive where ``L x`` points against the outward vertex normal (convex
    regions of an outward-oriented surface). The uniform scheme has no area
    normalisation, so its values are not in units of 1/length.
    """
    if laplacian.shape[0] != mesh.n_vertices:
        raise ValueError("Laplacian size does not match the mesh")
    lx = laplacian @ mesh.positions
    mag = 0.5 * np.linalg.norm(lx, axis=1)
    if laplacian.scheme == COTANGENT:
        mag = mag / laplacian.areas
    sign = np.where(np.einsum("ij,ij->i", lx, mesh.vertex_normals()) > 0.0, -1.0, 1.0)
    return sign * mag


def principal_curvatures(K, H):
    """``k1, k2 = H +/- sqrt(max(H^2 - K, 0))``."""
    K = np.asarray(K, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if K.shape != H.shape:
        raise ValueError("K and H differ in shape")
    root = np.sqrt(np.maximum(H * H - K, 0.0))
    return H + root, H - root


def curvature_field(mesh: HalfEdgeMesh) -> CurvatureField:
    """All per-vertex curvature quantities, cotangent scheme."""
    lap = build_laplacian(mesh, COTANGENT)
    deficit = angle_deficits(mesh)
    K = deficit / lap.areas
    H = mean_curvature(mesh, lap)
    k1, k2 = principal_curvatures(K, H)
    return CurvatureField(K, H, k1, k2, lap.areas, deficit, mesh.boundary_vertices())
