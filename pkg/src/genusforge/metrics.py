"""Mesh comparison: ICP alignment, point-to-surface Chamfer distance, volume IoU."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import NotClosed
from .halfedge import HalfEdgeMesh

CONVENTION = (
    "meshes scaled by the reference's unit bounding radius; ICP point-to-point; "
    "Chamfer = mean of the two point-to-surface means over area-weighted samples; "
    "IoU by z-column parity on an r^3 grid over the joint bounding box"
)


def sample_surface(mesh: HalfEdgeMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform with respect to surface area."""
    if n < 1:
        raise ValueError("need at least one sample")
    area = mesh.face_areas()
    f = rng.choice(len(area), size=n, p=area / area.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    X = mesh.positions
    tri = mesh.faces[f]
    a, b, c = X[tri[:, 0]], X[tri[:, 1]], X[tri[:, 2]]
    return (1.0 - r1)[:, None] * a + (r1 * (1.0 - r2))[:, None] * b + (r1 * r2)[:, None] * c


def closest_on_triangles(p, a, b, c):
    """Closest points on triangles ``(a, b, c)`` to points ``p`` (all (n, 3))."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    out = a + v_in[:, None] * ab + w_in[:, None] * ac

    # regions are tested from the most specific to the least; later writes win
    def put(mask, val):
        out[mask] = val[mask]

    put((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + t_bc[:, None] * (c - b))
    put((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + t_ac[:, None] * ac)
    put((d6 >= 0) & (d5 <= d6), c)
    put((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + t_ab[:, None] * ab)
    put((d3 >= 0) & (d4 <= d3), b)
    put((d1 <= 0) & (d2 <= 0), a)
    return out


class SurfaceIndex:
    """Exact closest-point queries against a triangle mesh.

    Candidate faces come from a k-d tree over face centroids; a face whose
    centroid is further than ``best + r_max`` from the query cannot beat the
    best exact distance found so far, which bounds the search.
    """

    def __init__(self, mesh: HalfEdgeMesh):
        X = mesh.positions
        self.tri = X[mesh.faces]  # (F, 3, 3)
        self.centroids = self.tri.mean(axis=1)
        self.r_max = float(np.linalg.norm(self.tri - self.centroids[:, None, :], axis=2).max())
        self.tree = cKDTree(self.centroids)

    def _exact(self, p, fidx):
        t = self.tri[fidx]
        q = closest_on_triangles(p, t[:, 0], t[:, 1], t[:, 2])
        return np.linalg.norm(p - q, axis=1), q

    def query(self, points):
        """``(distances, closest points)`` for an (n, 3) array."""
        points = np.asarray(points, dtype=np.float64)
        n = len(points)
        F = len(self.centroids)
        best = np.full(n, np.inf)
        best_q = np.zeros((n, 3))
        todo = np.arange(n)
        k = min(8, F)
        while len(todo):
            cd, ci = self.tree.query(points[todo], k=k)
            if k == 1:
                cd, ci = cd[:, None], ci[:, None]
            p = points[todo]
            for j in range(k):
                d, q = self._exact(p, ci[:, j])
                better = d < best[todo]
                best[todo[better]] = d[better]
                best_q[todo[better]] = q[better]
            if k == F:
                break
            # unresolved when an unexamined centroid may still hide a closer face
            unresolved = cd[:, -1] <= best[todo] + self.r_max
            todo = todo[unresolved]
            k = min(4 * k, F)
        return best, best_q


def chamfer_distance(a: HalfEdgeMesh, b: HalfEdgeMesh, samples: int = 100_000, seed: int = 0) -> float:
    """Symmetric point-to-surface Chamfer distance (mean of the two directions)."""
    rng = np.random.default_rng(seed)
    pa = sample_surface(a, samples, rng)
    pb = sample_surface(b, samples, rng)
    da, _ = SurfaceIndex(b).query(pa)
    db, _ = SurfaceIndex(a).query(pb)
    return 0.5 * (float(da.mean()) + float(db.mean()))


@dataclass
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    errors: list = field(default_factory=list)

    def apply(self, X):
        return np.asarray(X) @ self.rotation.T + self.translation


def kabsch(P, Q):
    """Rotation R and translation t minimising ``sum |R p + t - q|^2``."""
    cp = P.mean(axis=0)
    cq = Q.mean(axis=0)
    H = (P - cp).T @ (Q - cq)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d if d != 0 else 1.0])
    R = Vt.T @ D @ U.T
    return R, cq - R @ cp


def icp_align(
    source: HalfEdgeMesh, target: HalfEdgeMesh, max_iters: int = 50, samples: int = 5000, seed: int = 0, tol=1e-12
) -> RigidTransform:
    """Point-to-point ICP of ``source`` samples onto the ``target`` surface.

    ``errors`` holds the mean squared closest-point distance after each
    iteration; it never increases.
    """
    rng = np.random.default_rng(seed)
    P = sample_surface(source, samples, rng)
    index = SurfaceIndex(target)
    R = np.eye(3)
    t = np.zeros(3)
    d, Q = index.query(P)
    errors = [float(np.mean(d * d))]
    for _ in range(max_iters):
        R_new, t_new = kabsch(P, Q)
        d, Q_new = index.query(P @ R_new.T + t_new)
        err = float(np.mean(d * d))
        if err > errors[-1]:
            break
        R, t, Q = R_new, t_new, Q_new
        errors.append(err)
        if errors[-2] - err <= tol * max(errors[-2], 1e-300):
            break
    return RigidTransform(R, t, errors)


def _parity_occupancy(mesh: HalfEdgeMesh, lo, hi, r):
    """Voxel-centre occupancy by upward z rays; a centre is inside for odd crossings."""
    step = (hi - lo) / r
    X = mesh.positions
    # keep rays off mesh edges and vertices
    off = np.array([np.sqrt(2.0) * 1e-7, np.sqrt(3.0) * 1e-7]) * step[:2]
    tri = X[mesh.faces]
    x, y, z = tri[..., 0], tri[..., 1], tri[..., 2]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    ok = np.abs(area2) > 1e-15
    tri, x, y, z, area2 = tri[ok], x[ok], y[ok], z[ok], area2[ok]
    # column range per triangle: centres lo + (i + 0.5) * step + off
    ix0 = np.maximum(np.ceil((x.min(axis=1) - lo[0] - off[0]) / step[0] - 0.5), 0).astype(np.int64)
    ix1 = np.minimum(np.floor((x.max(axis=1) - lo[0] - off[0]) / step[0] - 0.5), r - 1).astype(np.int64)
    iy0 = np.maximum(np.ceil((y.min(axis=1) - lo[1] - off[1]) / step[1] - 0.5), 0).astype(np.int64)
    iy1 = np.minimum(np.floor((y.max(axis=1) - lo[1] - off[1]) / step[1] - 0.5), r - 1).astype(np.int64)
    bw = np.maximum(ix1 - ix0 + 1, 0)
    bh = np.maximum(iy1 - iy0 + 1, 0)
    counts = bw * bh
    f = np.repeat(np.arange(len(counts)), counts)
    start = np.cumsum(counts) - counts
    o = np.arange(int(counts.sum())) - np.repeat(start, counts)
    ci = ix0[f] + o % np.maximum(bw[f], 1)
    cj = iy0[f] + o // np.maximum(bw[f], 1)
    px = lo[0] + (ci + 0.5) * step[0] + off[0]
    py = lo[1] + (cj + 0.5) * step[1] + off[1]
    X0, Y0, X1, Y1, X2, Y2 = x[f, 0], y[f, 0], x[f, 1], y[f, 1], x[f, 2], y[f, 2]
    A = area2[f]
    b0 = ((X1 - px) * (Y2 - py) - (X2 - px) * (Y1 - py)) / A
    b1 = ((X2 - px) * (Y0 - py) - (X0 - px) * (Y2 - py)) / A
    b2 = 1.0 - b0 - b1
    hit = (b0 >= 0) & (b1 >= 0) & (b2 >= 0)
    f, ci, cj, b0, b1, b2 = f[hit], ci[hit], cj[hit], b0[hit], b1[hit], b2[hit]
    zh = b0 * z[f, 0] + b1 * z[f, 1] + b2 * z[f, 2]
    # a hit at height zh is above every centre with index < k
    k = np.clip(np.ceil((zh - lo[2]) / step[2] - 0.5), 0, r).astype(np.int64)
    cnt = np.zeros((r, r, r + 1), dtype=np.int64)
    np.add.at(cnt, (ci, cj, k), 1)
    above = np.cumsum(cnt[:, :, ::-1], axis=2)[:, :, ::-1]  # above[..., i] = hits with k >= i
    return (above[:, :, 1:] % 2) == 1


def voxelize(mesh: HalfEdgeMesh, lo, hi, resolution: int) -> np.ndarray:
    """Boolean (r, r, r) occupancy of voxel centres inside a closed mesh."""
    if not mesh.is_closed:
        raise NotClosed("parity voxelization needs a closed mesh")
    return _parity_occupancy(mesh, np.asarray(lo, float), np.asarray(hi, float), resolution)


def volume_iou(a: HalfEdgeMesh, b: HalfEdgeMesh, resolution: int = 128) -> float:
    for m in (a, b):
        if not m.is_closed:
            raise NotClosed("volume IoU needs closed meshes")
    lo = np.minimum(a.positions.min(axis=0), b.positions.min(axis=0))
    hi = np.maximum(a.positions.max(axis=0), b.positions.max(axis=0))
    hi = np.where(hi - lo > 0, hi, lo + 1e-12)
    va = voxelize(a, lo, hi, resolution)
    vb = voxelize(b, lo, hi, resolution)
    union = np.count_nonzero(va | vb)
    if union == 0:
        return 0.0
    return np.count_nonzero(va & vb) / union


def unit_frame(mesh: HalfEdgeMesh):
    """Centre and scale mapping ``mesh`` into the unit ball (bounding-box centre)."""
    X = mesh.positions
    c = 0.5 * (X.min(axis=0) + X.max(axis=0))
    r = np.linalg.norm(X - c, axis=1).max()
    return c, 1.0 / r


@dataclass
class EvalReport:
    chamfer: float
    iou: float
    rotation: np.ndarray
    translation: np.ndarray
    samples: int
    resolution: int
    convention: str = CONVENTION

    def csv_header(self) -> str:
        return "chamfer,iou,samples,resolution"

    def csv_row(self) -> str:
        return "%.9g,%.9g,%d,%d" % (self.chamfer, self.iou, self.samples, self.resolution)

    def as_dict(self):
        d = asdict(self)
        d["rotation"] = self.rotation.tolist()
        d["translation"] = self.translation.tolist()
        return d


def evaluate(
    result: HalfEdgeMesh,
    reference: HalfEdgeMesh,
    samples: int = 100_000,
    resolution: int = 128,
    icp_iters: int = 50,
    seed: int = 0,
) -> EvalReport:
    """Normalise both meshes by the reference's unit frame, align ``result`` by ICP, then score."""
    c, s = unit_frame(reference)
    a = result.with_positions((result.positions - c) * s)
    b = reference.with_positions((reference.positions - c) * s)
    T = icp_align(a, b, icp_iters, seed=seed)
    a = a.with_positions(T.apply(a.positions))
    cd = chamfer_distance(a, b, samples, seed)
    iou = volume_iou(a, b, resolution)
    return EvalReport(cd, iou, T.rotation, T.translation, samples, resolution)
