"""Curvature-adaptive incremental remeshing.

A remesh event runs ``split -> collapse -> flip -> smooth`` against a
per-vertex target edge length derived from the principal curvatures. Every
local operation preserves the topology of the surface: splits and flips
trivially, collapses through the link condition.

Local operations run on :class:`_WorkMesh`, a face-list representation with
vertex-to-face incidence sets, and the result is rebuilt (and re-validated)
as a :class:`~genusforge.halfedge.HalfEdgeMesh`.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .curvature import CurvatureField, curvature_field
from .errors import MeshError, RemeshInternalError
from .halfedge import HalfEdgeMesh, build_mesh, topology_summary

log = logging.getLogger(__name__)

SPLIT_RATIO = 4.0 / 3.0
COLLAPSE_RATIO = 4.0 / 5.0
MAX_ROUNDS = 10


@dataclass
class RemeshParams:
    epsilon: float = 0.002
    l_min: float = 0.02
    l_max: float = 0.2
    target_valence: int = 6
    mu: float = 0.5
    passes: int = 1
    period: tuple = (130, 200)
    kappa_floor: float = 1e-6
    # optional cap L_max <= factor * mean edge length at event time
    mean_length_factor: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.l_min < self.l_max):
            raise ValueError("need 0 < l_min < l_max")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not (0.0 < self.mu <= 1.0):
            raise ValueError("mu must lie in (0, 1]")
        lo, hi = self.period
        if not (1 <= lo <= hi):
            raise ValueError("period range must satisfy 1 <= lo <= hi")


@dataclass
class SizingField:
    lengths: np.ndarray


@dataclass
class MutationReport:
    splits: int = 0
    collapses: int = 0
    flips: int = 0
    smooth_passes: int = 0

    def __add__(self, other):
        return MutationReport(
            self.splits + other.splits,
            self.collapses + other.collapses,
            self.flips + other.flips,
            self.smooth_passes + other.smooth_passes,
        )

    def as_dict(self):
        return asdict(self)


def target_length(kappa, epsilon, l_min, l_max, kappa_floor=1e-6):
    """Edge length whose chord deviates by at most ``epsilon`` from a circle of curvature ``kappa``."""
    kappa = np.asarray(kappa, dtype=np.float64)
    flat = kappa <= kappa_floor
    k = np.maximum(kappa, kappa_floor)
    sq = 6.0 * epsilon / k - 3.0 * epsilon * epsilon
    L = np.sqrt(np.maximum(sq, 0.0))
    L = np.where(flat, l_max, L)
    return np.clip(L, l_min, l_max)


def sizing_field(mesh: HalfEdgeMesh, curvature: CurvatureField, params: RemeshParams) -> SizingField:
    kappa = np.maximum(np.abs(curvature.k1), np.abs(curvature.k2))
    l_max = params.l_max
    if params.mean_length_factor is not None:
        l_max = max(params.l_min * 1.0001, min(l_max, params.mean_length_factor * mesh.edge_lengths().mean()))
    return SizingField(target_length(kappa, params.epsilon, params.l_min, l_max, params.kappa_floor))


# ---------------------------------------------------------------------------
# working representation
# ---------------------------------------------------------------------------


def _normals(T):
    """Unnormalised normals of triangles given as a (k, 3, 3) corner array."""
    u = T[:, 1] - T[:, 0]
    v = T[:, 2] - T[:, 0]
    return np.stack(
        [u[:, 1] * v[:, 2] - u[:, 2] * v[:, 1], u[:, 2] * v[:, 0] - u[:, 0] * v[:, 2], u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]],
        axis=1,
    )


class _WorkMesh:
    def __init__(self, mesh: HalfEdgeMesh, sizing=None):
        n = mesh.n_vertices
        cap = max(16, 2 * n)
        self.P = np.zeros((cap, 3))
        self.P[:n] = mesh.positions
        self.S = np.zeros(cap)
        if sizing is not None:
            self.S[:n] = sizing
        self.nv = n
        self.alive_v = [True] * n
        self.n_alive = n
        self.faces = [list(map(int, f)) for f in mesh.faces]
        self.alive_f = [True] * len(self.faces)
        self.vf = [set() for _ in range(n)]
        for fi, f in enumerate(self.faces):
            for v in f:
                self.vf[v].add(fi)
        self.border = set(int(v) for v in np.flatnonzero(mesh.boundary_vertices()))

    # -- queries ------------------------------------------------------------
    def edge_faces(self, a, b):
        return sorted(self.vf[a] & self.vf[b])

    def neighbors(self, v):
        out = set()
        for f in self.vf[v]:
            out.update(self.faces[f])
        out.discard(v)
        return out

    def valence(self, v):
        # manifold fan: one more neighbour than faces on the border
        return len(self.vf[v]) + (v in self.border)

    def edges(self):
        seen = set()
        for fi, f in enumerate(self.faces):
            if not self.alive_f[fi]:
                continue
            for k in range(3):
                a, b = f[k], f[(k + 1) % 3]
                seen.add((a, b) if a < b else (b, a))
        return sorted(seen)

    def length(self, a, b):
        d = self.P[a] - self.P[b]
        return float(np.sqrt(d @ d))

    def is_border_edge(self, a, b):
        return len(self.vf[a] & self.vf[b]) == 1

    @staticmethod
    def _rotate(f, a):
        i = f.index(a)
        return f[i:] + f[:i]

    def _add_vertex(self, p, s):
        if self.nv == len(self.P):
            self.P = np.concatenate([self.P, np.zeros_like(self.P)])
            self.S = np.concatenate([self.S, np.zeros_like(self.S)])
        self.P[self.nv] = p
        self.S[self.nv] = s
        self.alive_v.append(True)
        self.n_alive += 1
        self.vf.append(set())
        self.nv += 1
        return self.nv - 1

    def _add_face(self, f):
        self.faces.append(list(f))
        self.alive_f.append(True)
        fi = len(self.faces) - 1
        for v in f:
            self.vf[v].add(fi)
        return fi

    # -- local operators -------------------------------------------------------
    def split(self, a, b):
        fs = self.edge_faces(a, b)
        m = self._add_vertex(0.5 * (self.P[a] + self.P[b]), 0.5 * (self.S[a] + self.S[b]))
        if len(fs) == 1 and (a in self.border and b in self.border):
            self.border.add(m)
        for fi in fs:
            f = self._rotate(self.faces[fi], a)
            if f[1] == b:
                u, w, c = a, b, f[2]
            else:
                u, w, c = b, a, f[1]
            self.faces[fi] = [u, m, c]
            self.vf[w].discard(fi)
            self.vf[m].add(fi)
            self._add_face([m, w, c])
        return m

    def try_collapse(self, a, b):
        """Collapse edge (a, b) into its midpoint, keeping ``a``; returns success."""
        if a in self.border or b in self.border:
            return False
        fs = self.edge_faces(a, b)
        if len(fs) != 2:
            return False
        opp = set()
        for fi in fs:
            opp.update(self.faces[fi])
        opp -= {a, b}
        na, nb = self.neighbors(a), self.neighbors(b)
        if (na & nb) != opp or len(opp) != 2:
            return False
        c, d = sorted(opp)
        # edge part of the link condition: cd may not lie in both links
        if any({a, c, d} == set(self.faces[fi]) for fi in self.vf[a]) and any(
            {b, c, d} == set(self.faces[fi]) for fi in self.vf[b]
        ):
            return False
        if self.n_alive <= 4:
            return False
        p = 0.5 * (self.P[a] + self.P[b])
        s = 0.5 * (self.S[a] + self.S[b])
        for n in (na | nb) - {a, b}:
            d_ = p - self.P[n]
            if np.sqrt(d_ @ d_) > SPLIT_RATIO * min(s, self.S[n]):
                return False
        touched = sorted((self.vf[a] | self.vf[b]) - set(fs))
        if touched:
            F = np.array([self.faces[fi] for fi in touched])
            T = self.P[F]
            old = _normals(T)
            T[(F == a) | (F == b)] = p
            new = _normals(T)
            if np.any(np.einsum("ij,ij->i", new, old) <= 0.0) or np.any(np.einsum("ij,ij->i", new, new) <= 1e-30):
                return False
        for fi in fs:
            self.alive_f[fi] = False
            for v in self.faces[fi]:
                self.vf[v].discard(fi)
        for fi in list(self.vf[b]):
            f = self.faces[fi]
            f[f.index(b)] = a
            self.vf[a].add(fi)
        self.vf[b] = set()
        self.alive_v[b] = False
        self.n_alive -= 1
        self.P[a] = p
        self.S[a] = s
        return True

    def _val_target(self, v, target):
        return 4 if v in self.border else target

    def try_flip(self, a, b, target=6):
        fs = self.edge_faces(a, b)
        if len(fs) != 2:
            return False
        f1, f2 = fs
        if self._rotate(self.faces[f1], a)[1] != b:
            f1, f2 = f2, f1
        c = self._rotate(self.faces[f1], a)[2]
        d = self._rotate(self.faces[f2], b)[2]
        if c == d or any(d in self.faces[fi] for fi in self.vf[c]):
            return False
        va, vb, vc, vd = (self.valence(v) for v in (a, b, c, d))
        ta, tb, tc, td = (self._val_target(v, target) for v in (a, b, c, d))
        before = (va - ta) ** 2 + (vb - tb) ** 2 + (vc - tc) ** 2 + (vd - td) ** 2
        after = (va - 1 - ta) ** 2 + (vb - 1 - tb) ** 2 + (vc + 1 - tc) ** 2 + (vd + 1 - td) ** 2
        if after >= before:
            return False
        n1, n2, m1, m2 = _normals(self.P[[[a, b, c], [b, a, d], [a, d, c], [b, c, d]]])
        for m in (m1, m2):
            if m @ n1 <= 0.0 or m @ n2 <= 0.0 or m @ m <= 1e-30:
                return False
        self.faces[f1] = [a, d, c]
        self.faces[f2] = [b, c, d]
        self.vf[a].discard(f2)
        self.vf[b].discard(f1)
        self.vf[c].add(f2)
        self.vf[d].add(f1)
        return True

    # -- passes -----------------------------------------------------------
    def split_pass(self):
        count = 0
        for _ in range(MAX_ROUNDS):
            todo = []
            for a, b in self.edges():
                ln = self.length(a, b)
                if ln > SPLIT_RATIO * min(self.S[a], self.S[b]):
                    todo.append((-ln, a, b))
            if not todo:
                break
            todo.sort()
            done = 0
            for _, a, b in todo:
                if not (self.vf[a] & self.vf[b]):
                    continue
                if self.length(a, b) > SPLIT_RATIO * min(self.S[a], self.S[b]):
                    self.split(a, b)
                    done += 1
            count += done
            if not done:
                break
        return count

    def collapse_pass(self):
        count = 0
        for _ in range(MAX_ROUNDS):
            todo = []
            for a, b in self.edges():
                ln = self.length(a, b)
                if ln < COLLAPSE_RATIO * min(self.S[a], self.S[b]):
                    todo.append((ln, a, b))
            if not todo:
                break
            todo.sort()
            done = 0
            for _, a, b in todo:
                if not (self.alive_v[a] and self.alive_v[b]) or not (self.vf[a] & self.vf[b]):
                    continue
                if self.length(a, b) < COLLAPSE_RATIO * min(self.S[a], self.S[b]) and self.try_collapse(a, b):
                    done += 1
            count += done
            if not done:
                break
        return count

    def flip_pass(self, target=6):
        count = 0
        for _ in range(MAX_ROUNDS):
            done = 0
            for a, b in self.edges():
                if self.vf[a] & self.vf[b] and self.try_flip(a, b, target):
                    done += 1
            count += done
            if not done:
                break
        return count

    def to_mesh(self):
        keep = np.flatnonzero(self.alive_v)
        remap = np.full(self.nv, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        faces = np.array([f for f, ok in zip(self.faces, self.alive_f) if ok], dtype=np.int64)
        try:
            mesh = build_mesh(remap[faces], self.P[keep])
        except MeshError as exc:
            raise RemeshInternalError("remesh produced an invalid mesh: %s" % exc) from exc
        return mesh, self.S[keep].copy()


def _apply(mesh, sizing, op):
    work = _WorkMesh(mesh, None if sizing is None else sizing.lengths)
    count = op(work)
    new_mesh, new_sizing = work.to_mesh()
    mesh.assign(new_mesh)
    if sizing is not None:
        sizing.lengths = new_sizing
    return count


def split_long_edges(mesh: HalfEdgeMesh, sizing: SizingField) -> MutationReport:
    """Split every edge longer than 4/3 of its target at the midpoint (in place)."""
    return MutationReport(splits=_apply(mesh, sizing, _WorkMesh.split_pass))


def collapse_short_edges(mesh: HalfEdgeMesh, sizing: SizingField) -> MutationReport:
    """Collapse edges shorter than 4/5 of their target where legal (in place)."""
    return MutationReport(collapses=_apply(mesh, sizing, _WorkMesh.collapse_pass))


def flip_edges_for_valence(mesh: HalfEdgeMesh, target: int = 6) -> MutationReport:
    """Flip interior edges that strictly reduce the squared valence excess (in place)."""
    return MutationReport(flips=_apply(mesh, None, lambda w: w.flip_pass(target)))


def tangential_smooth(mesh: HalfEdgeMesh, mu: float = 0.5, passes: int = 1) -> MutationReport:
    """Move vertices toward their one-ring centroid within the tangent plane (in place).

    Border vertices stay fixed. Vertices of faces whose normal would turn by
    more than 90 degrees are held back for that pass.
    """
    e = mesh.edges
    n = mesh.n_vertices
    deg = np.bincount(e.ravel(), minlength=n).astype(np.float64)
    fixed = mesh.boundary_vertices()
    x = mesh.positions.copy()
    f = mesh.faces
    for _ in range(passes):
        s = np.zeros_like(x)
        np.add.at(s, e[:, 0], x[e[:, 1]])
        np.add.at(s, e[:, 1], x[e[:, 0]])
        centroid = s / deg[:, None]
        nrm = mesh.with_positions(x).vertex_normals()
        d = centroid - x
        d -= np.einsum("ij,ij->i", d, nrm)[:, None] * nrm
        d *= mu
        d[fixed] = 0.0
        old = np.cross(x[f[:, 1]] - x[f[:, 0]], x[f[:, 2]] - x[f[:, 0]])
        movable = np.ones(n, dtype=bool)
        for _ in range(10):
            y = x + d * movable[:, None]
            new = np.cross(y[f[:, 1]] - y[f[:, 0]], y[f[:, 2]] - y[f[:, 0]])
            bad = np.einsum("ij,ij->i", new, old) <= 0.0
            if not bad.any():
                break
            movable[f[bad].ravel()] = False
        else:
            y = x
        x = y
    mesh.assign(mesh.with_positions(x))
    return MutationReport(smooth_passes=passes)


def valence_deviation(mesh: HalfEdgeMesh, target: int = 6) -> int:
    return int(((mesh.valence() - target) ** 2).sum())


def fraction_in_band(mesh: HalfEdgeMesh, sizing: np.ndarray, lo=0.8, hi=SPLIT_RATIO) -> float:
    """Fraction of edges whose length lies in [lo, hi] times the smaller endpoint target."""
    e = mesh.edges
    ln = mesh.edge_lengths()
    t = np.minimum(sizing[e[:, 0]], sizing[e[:, 1]])
    return float(np.mean((ln >= lo * t) & (ln <= hi * t)))


def remesh_event(
    mesh: HalfEdgeMesh,
    curvature: Optional[CurvatureField],
    params: RemeshParams,
    mode: str = "refine",
    log_to: Optional[list] = None,
) -> HalfEdgeMesh:
    """One coarsen or refine event; returns a new validated mesh.

    ``mode="coarsen"`` doubles the target lengths. Genus is checked before
    and after; a change raises :class:`RemeshInternalError`.
    """
    if mode not in ("coarsen", "refine"):
        raise ValueError("mode must be 'coarsen' or 'refine'")
    if curvature is None:
        curvature = curvature_field(mesh)
    before = topology_summary(mesh)
    sizing = sizing_field(mesh, curvature, params)
    if mode == "coarsen":
        sizing.lengths = 2.0 * sizing.lengths
    work = _WorkMesh(mesh, sizing.lengths)
    report = MutationReport()
    out = mesh
    for _ in range(params.passes):
        report.splits += work.split_pass()
        report.collapses += work.collapse_pass()
        report.flips += work.flip_pass(params.target_valence)
        out, lengths = work.to_mesh()
        report = report + tangential_smooth(out, params.mu, 1)
        work = _WorkMesh(out, lengths)
    out.validate()
    after = topology_summary(out)
    if (after.euler_characteristic, after.genus) != (before.euler_characteristic, before.genus):
        raise RemeshInternalError("remesh changed topology: %s -> %s" % (before, after))
    if log_to is not None:
        log_to.append(dict(mode=mode, **report.as_dict(), num_vertices=out.n_vertices))
    log.debug("remesh %s: %s -> V=%d", mode, report, out.n_vertices)
    return out


@dataclass
class VCycleSchedule:
    """Remesh trigger times: gaps drawn uniformly from ``period``, modes alternating coarsen/refine."""

    period: tuple
    rng: np.random.Generator
    next_at: int = 0
    count: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.next_at = self._draw(0)

    def _draw(self, start):
        lo, hi = self.period
        return start + int(self.rng.integers(lo, hi + 1))

    def due(self, iteration: int) -> Optional[str]:
        if iteration < self.next_at:
            return None
        mode = "coarsen" if self.count % 2 == 0 else "refine"
        self.count += 1
        self.history.append((iteration, mode))
        self.next_at = self._draw(iteration)
        return mode
