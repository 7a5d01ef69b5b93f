"""Soft-silhouette and flat-normal rasteriser with exact vertex gradients.

Coverage of a pixel is ``s(d / sigma)`` where ``d`` is the signed screen
distance from the pixel centre to the nearest projected contour edge
(positive when the centre is covered by some triangle). ``s`` is the
logistic function rescaled to reach exactly 0 and 1 at ``|t| = 3``, so
pixels further than ``3 sigma`` from every contour saturate without a jump.

A contour edge is a mesh edge whose two faces face opposite ways as seen
from the camera centre (or a border edge). For a closed mesh the outline of
the covered region is made of pieces of contour edges.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit

from ..errors import DegenerateProjection
from ..halfedge import HalfEdgeMesh
from . import backend
from .camera import Camera

SATURATION = 3.0
_LO = float(expit(-SATURATION))
_SPAN = float(expit(SATURATION)) - _LO


def coverage_profile(t):
    """Rescaled logistic: 0 for t <= -3, 1 for t >= 3, 0.5 at 0."""
    return np.clip((expit(t) - _LO) / _SPAN, 0.0, 1.0)


def coverage_slope(t):
    s = expit(t)
    return np.where(np.abs(t) < SATURATION, s * (1.0 - s) / _SPAN, 0.0)


@dataclass
class RenderedView:
    silhouette: np.ndarray  # (H, W) coverage in [0, 1]
    normals: np.ndarray  # (H, W, 3) camera-space unit normals, 0 off the mesh
    camera_id: int = 0
    # forward-pass bookkeeping used by the backward pass
    face_id: Optional[np.ndarray] = None
    edge_id: Optional[np.ndarray] = None
    edge_t: Optional[np.ndarray] = None
    signed_distance: Optional[np.ndarray] = None
    contour: Optional[np.ndarray] = None
    sigma: float = 1.0

    @property
    def shape(self):
        return self.silhouette.shape

    def structure_key(self) -> bytes:
        """Fingerprint of every discrete choice made by the forward pass.

        Two renders with equal keys lie on the same smooth piece of the
        forward model (same visible faces and contour edges, same nearest
        contour edge and clamping case per pixel).
        """
        region = np.where(self.edge_t <= 0.0, 0, np.where(self.edge_t >= 1.0, 2, 1)).astype(np.int8)
        m = self.edge_id >= 0
        verts = np.full(self.edge_id.shape + (2,), -1, dtype=np.int64)
        verts[m] = self.contour[self.edge_id[m]]
        region[~m] = -1
        parts = (self.face_id.astype(np.int32), verts, region, np.asarray(self.contour, dtype=np.int64))
        return b"".join(a.tobytes() for a in parts)


@dataclass
class ViewGradients:
    grad: np.ndarray  # (n, 3) dLoss/dx
    camera_id: int = 0


def _check_projection(mesh: HalfEdgeMesh, camera: Camera):
    center = camera.look_at
    radius = np.linalg.norm(mesh.positions - center, axis=1).max()
    if np.linalg.norm(camera.position - center) <= radius:
        raise DegenerateProjection("camera lies inside the mesh bounding sphere")


def contour_edges(mesh: HalfEdgeMesh, camera: Camera) -> np.ndarray:
    """(Ec, 2) vertex pairs of the edges separating front- from back-facing faces."""
    X = mesh.positions
    f = mesh.faces
    N = np.cross(X[f[:, 1]] - X[f[:, 0]], X[f[:, 2]] - X[f[:, 0]])
    facing = np.einsum("ij,ij->i", N, camera.position - X[f[:, 0]]) > 0.0
    eh = mesh.edge_halfedges
    f1 = mesh.he_face[eh]
    f2 = mesh.he_face[mesh.he_twin[eh]]
    border = (f1 < 0) | (f2 < 0)
    sil = border | (facing[np.maximum(f1, 0)] != facing[np.maximum(f2, 0)])
    return np.ascontiguousarray(mesh.edges[sil])


_VIS_SAMPLES = np.array([0.1, 0.3, 0.5, 0.7, 0.9])


def visible_contours(mesh: HalfEdgeMesh, camera: Camera, cedges, sxy, cam, fid) -> np.ndarray:
    """Mask of contour edges that are not hidden behind other surface.

    Each edge is sampled at a few screen points. A sample is hidden when a
    face whose projection contains it lies strictly in front of the edge
    there; candidate faces are the front-most faces of the surrounding 3x3
    pixels. An edge survives if any sample is unhidden.
    """
    if len(cedges) == 0:
        return np.zeros(0, dtype=bool)
    H, W = fid.shape
    a, b = cedges[:, 0], cedges[:, 1]
    t = _VIS_SAMPLES[None, :]
    s = sxy[a][:, None, :] * (1.0 - t[..., None]) + sxy[b][:, None, :] * t[..., None]
    # depth along the edge, interpolated in 1/z like screen-space positions
    z_edge = 1.0 / ((1.0 - t) / cam[a, 2][:, None] + t / cam[b, 2][:, None])
    s = s.reshape(-1, 2)
    z_edge = z_edge.reshape(-1)
    hidden = np.zeros(len(s), dtype=bool)
    ix0 = np.floor(s[:, 0]).astype(np.int64)
    iy0 = np.floor(s[:, 1]).astype(np.int64)
    foc = camera.focal
    ray = np.stack([(s[:, 0] - 0.5 * W) / foc, -(s[:, 1] - 0.5 * H) / foc, np.ones(len(s))], axis=1)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            ix, iy = ix0 + dx, iy0 + dy
            inside = (ix >= 0) & (ix < W) & (iy >= 0) & (iy < H) & ~hidden
            f = np.full(len(s), -1, dtype=np.int64)
            f[inside] = fid[iy[inside], ix[inside]]
            k = np.nonzero(f >= 0)[0]
            if len(k) == 0:
                continue
            fc = mesh.faces[f[k]]
            # containment of the sample in the projected triangle
            q0, q1, q2 = sxy[fc[:, 0]], sxy[fc[:, 1]], sxy[fc[:, 2]]
            p = s[k]
            c0 = _cross2(q1 - q0, p - q0)
            c1 = _cross2(q2 - q1, p - q1)
            c2 = _cross2(q0 - q2, p - q2)
            contains = ((c0 >= 0) & (c1 >= 0) & (c2 >= 0)) | ((c0 <= 0) & (c1 <= 0) & (c2 <= 0))
            p0 = cam[fc[:, 0]]
            nrm = np.cross(cam[fc[:, 1]] - p0, cam[fc[:, 2]] - p0)
            den = np.einsum("ij,ij->i", nrm, ray[k])
            with np.errstate(divide="ignore", invalid="ignore"):
                z_face = np.einsum("ij,ij->i", nrm, p0) / den
            front = np.isfinite(z_face) & (z_face > 0.0) & (z_face < z_edge[k] * (1.0 - 1e-7))
            hidden[k] |= contains & front
    return ~np.all(hidden.reshape(len(cedges), -1), axis=1)


def _cross2(u, v):
    return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]


def render(mesh: HalfEdgeMesh, camera: Camera, sigma: float = 1.0, camera_id: int = 0) -> RenderedView:
    _check_projection(mesh, camera)
    W, H = camera.width, camera.height
    sxy, z, cam = camera.project(mesh.positions)
    if np.any(z <= 1e-9):
        raise DegenerateProjection("vertex behind the camera")
    sxy = np.ascontiguousarray(sxy)
    faces = np.ascontiguousarray(mesh.faces, dtype=np.int64)
    fid = backend.rasterize(sxy, np.ascontiguousarray(z), faces, W, H)
    cedges = contour_edges(mesh, camera)
    cedges = np.ascontiguousarray(cedges[visible_contours(mesh, camera, cedges, sxy, cam, fid)])
    band = SATURATION * sigma
    dist, eid, t = backend.contour_distance(sxy, cedges, W, H, band)
    covered = fid >= 0
    inband = eid >= 0
    sd = np.where(covered, dist, -dist)
    sil = np.where(inband, coverage_profile(sd / sigma), covered.astype(np.float64))

    n_cam = face_normals_camera(mesh, camera)
    normals = np.zeros((H, W, 3))
    normals[covered] = n_cam[fid[covered]]
    return RenderedView(sil, normals, camera_id, fid, eid, t, sd, cedges, sigma)


def normal_basis(camera: Camera) -> np.ndarray:
    """Rows mapping world normals to camera space (x right, y up, z toward the viewer)."""
    B = camera.basis.copy()
    B[2] *= -1.0
    return B


def face_normals_camera(mesh: HalfEdgeMesh, camera: Camera) -> np.ndarray:
    return mesh.face_normals() @ normal_basis(camera).T


def render_backward(
    mesh: HalfEdgeMesh, camera: Camera, adjoint: RenderedView, view: Optional[RenderedView] = None, sigma: float = 1.0
) -> ViewGradients:
    """Pull per-pixel adjoints (dLoss/dsilhouette, dLoss/dnormals) back to vertex positions."""
    if view is None:
        view = render(mesh, camera, sigma, adjoint.camera_id)
    sigma = view.sigma
    X = mesh.positions
    n = len(X)
    grad = np.zeros((n, 3))
    if adjoint.silhouette.shape != view.silhouette.shape:
        raise ValueError("adjoint shape does not match the view")
    sxy, z, c = camera.project(X)
    B = camera.basis

    # silhouette term through the signed contour distance
    gs = adjoint.silhouette
    m = (view.edge_id >= 0) & (gs != 0.0)
    if m.any():
        iy, ix = np.nonzero(m)
        k = view.edge_id[m]
        t = view.edge_t[m]
        sd = view.signed_distance[m]
        sign = np.where(view.face_id[m] >= 0, 1.0, -1.0)
        dl_ddist = gs[m] * coverage_slope(sd / sigma) / sigma * sign
        ia = view.contour[k, 0]
        ib = view.contour[k, 1]
        pa, pb = sxy[ia], sxy[ib]
        q = pa + t[:, None] * (pb - pa)
        d = q - np.stack([ix + 0.5, iy + 0.5], axis=1)
        ln = np.linalg.norm(d, axis=1)
        ok = ln > 0.0
        u = np.zeros_like(d)
        u[ok] = d[ok] / ln[ok, None]
        ga = (dl_ddist * (1.0 - t))[:, None] * u
        gb = (dl_ddist * t)[:, None] * u
        gsc = np.zeros((n, 2))
        for j in range(2):
            gsc[:, j] = np.bincount(ia, weights=ga[:, j], minlength=n) + np.bincount(ib, weights=gb[:, j], minlength=n)
        f = camera.focal
        inv_z = 1.0 / z
        r, up, fwd = B
        dsx = f * (inv_z[:, None] * r - (c[:, 0] * inv_z * inv_z)[:, None] * fwd)
        dsy = -f * (inv_z[:, None] * up - (c[:, 1] * inv_z * inv_z)[:, None] * fwd)
        grad += gsc[:, 0:1] * dsx + gsc[:, 1:2] * dsy

    # normal term through the flat face normals
    gn = adjoint.normals
    cov = view.face_id >= 0
    if cov.any() and np.any(gn[cov] != 0.0):
        fid = view.face_id[cov]
        F = mesh.n_faces
        gcam = np.stack([np.bincount(fid, weights=gn[cov][:, j], minlength=F) for j in range(3)], axis=1)
        gw = gcam @ normal_basis(camera)
        faces = mesh.faces
        p0, p1, p2 = X[faces[:, 0]], X[faces[:, 1]], X[faces[:, 2]]
        e1, e2 = p1 - p0, p2 - p0
        N = np.cross(e1, e2)
        lnN = np.linalg.norm(N, axis=1)
        nh = N / lnN[:, None]
        gN = (gw - nh * np.einsum("ij,ij->i", nh, gw)[:, None]) / lnN[:, None]
        g1 = np.cross(e2, gN)
        g2 = np.cross(gN, e1)
        g0 = -(g1 + g2)
        for j in range(3):
            grad[:, j] += (
                np.bincount(faces[:, 0], weights=g0[:, j], minlength=n)
                + np.bincount(faces[:, 1], weights=g1[:, j], minlength=n)
                + np.bincount(faces[:, 2], weights=g2[:, j], minlength=n)
            )
    return ViewGradients(grad, view.camera_id)
