"""Inverse rendering: reparametrised Adam on the rendering objective.

The objective for vertex positions ``x`` is

    sum over views of the l1 image loss
    + w1 * tr(x^T M x)                      M = Lu^T Lu, Lu the uniform Laplacian
    + w2 * sum_k min(0, det J_k)^2

where ``J_k`` maps face ``k``'s edge vectors at the last reference capture
to its current edge vectors, both written in the reference tangent frame.
Adam runs on latent coordinates ``u`` with ``x = (I + lam * L)^-1 u`` and
``L = D - A`` the graph Laplacian of the mesh.
"""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .curvature import UNIFORM, build_laplacian, combinatorial_laplacian
from .errors import GenusChanged, ShapeMismatch, SolveFailure, StaleFrames, TargetMismatch
from .halfedge import HalfEdgeMesh, save_obj, topology_summary
from .remesh import RemeshParams, VCycleSchedule, remesh_event
from .render import Camera, RenderedView, render, render_backward

log = logging.getLogger(__name__)

CSV_HEADER = ["iter", "loss_render", "loss_smooth", "loss_invert", "num_vertices", "genus"]


def thread_count() -> int:
    env = os.environ.get("GENUSFORGE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class OptimizeParams:
    lam: float = 19.0
    alpha: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    w1: float = 1e-4
    w2: float = 1e2
    sigma: float = 1.0
    plateau_window: int = 100
    plateau_tol: float = 1e-5

    def __post_init__(self):
        if self.lam < 0 or self.w1 < 0 or self.w2 < 0:
            raise ValueError("lam, w1 and w2 must be non-negative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")


# ---------------------------------------------------------------------------
# objective terms
# ---------------------------------------------------------------------------


@dataclass
class ReferenceFrames:
    """Per-face unit normal and doubled area at capture time."""

    faces: np.ndarray
    normals: np.ndarray
    area2: np.ndarray

    @classmethod
    def capture(cls, mesh: HalfEdgeMesh) -> "ReferenceFrames":
        N = mesh.face_normals(normalized=False)
        a2 = np.linalg.norm(N, axis=1)
        if np.any(a2 <= 1e-12):
            raise StaleFrames("degenerate reference triangle")
        return cls(mesh.faces.copy(), N / a2[:, None], a2)

    def matches(self, mesh: HalfEdgeMesh) -> bool:
        return self.faces.shape == mesh.faces.shape and np.array_equal(self.faces, mesh.faces)


def jacobian_dets(x: np.ndarray, faces: np.ndarray, frames: ReferenceFrames) -> np.ndarray:
    """det J_k for every face; 1 for congruent faces, -1 for mirrored ones."""
    e1 = x[faces[:, 1]] - x[faces[:, 0]]
    e2 = x[faces[:, 2]] - x[faces[:, 0]]
    return np.einsum("ij,ij->i", np.cross(e1, e2), frames.normals) / frames.area2


def inversion_penalty(x: np.ndarray, faces: np.ndarray, frames: ReferenceFrames):
    """``(sum_k min(0, det J_k)^2, gradient)``; zero on faces with det J_k >= 0."""
    d = jacobian_dets(x, faces, frames)
    neg = np.minimum(d, 0.0)
    value = float(np.sum(neg * neg))
    grad = np.zeros_like(x)
    idx = np.nonzero(neg < 0.0)[0]
    if len(idx):
        f = faces[idx]
        n = frames.normals[idx]
        c = (2.0 * neg[idx] / frames.area2[idx])[:, None]
        e1 = x[f[:, 1]] - x[f[:, 0]]
        e2 = x[f[:, 2]] - x[f[:, 0]]
        g1 = c * np.cross(e2, n)
        g2 = c * np.cross(n, e1)
        for j in range(3):
            grad[:, j] += np.bincount(f[:, 1], g1[:, j], len(x)) + np.bincount(f[:, 2], g2[:, j], len(x))
            grad[:, j] -= np.bincount(f[:, 0], g1[:, j] + g2[:, j], len(x))
    return value, grad


def bilaplacian(mesh: HalfEdgeMesh) -> sp.csr_matrix:
    Lu = build_laplacian(mesh, UNIFORM).matrix
    return (Lu.T @ Lu).tocsr()


def smoothness_term(x: np.ndarray, L) -> tuple:
    """``(tr(x^T L x), 2 L x)`` for a symmetric positive semidefinite ``L``."""
    Lx = L @ x
    return float(np.sum(x * Lx)), 2.0 * Lx


def view_loss(view: RenderedView, target: RenderedView):
    """Mean l1 difference of silhouette and normal buffers and its pixel adjoint."""
    ds = view.silhouette - target.silhouette
    dn = view.normals - target.normals
    value = 0.5 * np.mean(np.abs(ds)) + 0.5 * np.mean(np.abs(dn))
    adj = RenderedView(0.5 * np.sign(ds) / ds.size, 0.5 * np.sign(dn) / dn.size, view.camera_id)
    return float(value), adj


@dataclass
class LossBreakdown:
    render: float
    smooth: float
    invert: float

    @property
    def total(self) -> float:
        return self.render + self.smooth + self.invert


@dataclass
class Objective:
    """Targets, weights and the per-connectivity data of the current mesh."""

    targets: List[RenderedView]
    cameras: List[Camera]
    mesh: HalfEdgeMesh
    w1: float = 1e-4
    w2: float = 1e2
    sigma: float = 1.0
    laplacian_scheme: str = UNIFORM
    frames: Optional[ReferenceFrames] = None
    smooth_matrix: Optional[sp.csr_matrix] = None
    threads: int = 1

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("weights must be non-negative")
        if len(self.targets) != len(self.cameras):
            raise TargetMismatch("%d targets for %d cameras" % (len(self.targets), len(self.cameras)))
        for t, c in zip(self.targets, self.cameras):
            if t.silhouette.shape != (c.height, c.width):
                raise TargetMismatch("target %s does not match camera %dx%d" % (t.silhouette.shape, c.width, c.height))
        if self.frames is None or self.smooth_matrix is None:
            self.rebind(self.mesh)

    def rebind(self, mesh: HalfEdgeMesh) -> None:
        """Adopt new connectivity: rebuild the smoothing matrix and recapture frames."""
        self.mesh = mesh
        self.smooth_matrix = bilaplacian(mesh)
        self.frames = ReferenceFrames.capture(mesh)


def _view_work(args):
    mesh, cam, target, sigma, i = args
    v = render(mesh, cam, sigma, i)
    value, adj = view_loss(v, target)
    return value, render_backward(mesh, cam, adj, v).grad


def objective_value_and_grad(x: np.ndarray, objective: Objective):
    """Loss terms and the exact gradient with respect to ``x``."""
    mesh = objective.mesh
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (mesh.n_vertices, 3):
        raise ShapeMismatch("x has shape %s, mesh has %d vertices" % (x.shape, mesh.n_vertices))
    if not objective.frames.matches(mesh) or objective.smooth_matrix.shape[0] != mesh.n_vertices:
        raise StaleFrames("connectivity changed without refreshing the objective")
    m = mesh.with_positions(x)
    jobs = [(m, c, t, objective.sigma, i) for i, (c, t) in enumerate(zip(objective.cameras, objective.targets))]
    if objective.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(objective.threads) as pool:
            results = list(pool.map(_view_work, jobs))
    else:
        results = [_view_work(j) for j in jobs]
    # fixed reduction order keeps the sum bit-reproducible
    grad = np.zeros_like(x)
    render_loss = 0.0
    for value, g in results:
        render_loss += value
        grad += g
    s_val, s_grad = smoothness_term(x, objective.smooth_matrix)
    i_val, i_grad = inversion_penalty(x, mesh.faces, objective.frames)
    grad += objective.w1 * s_grad + objective.w2 * i_grad
    return LossBreakdown(render_loss, objective.w1 * s_val, objective.w2 * i_val), grad


# ---------------------------------------------------------------------------
# reparametrised Adam
# ---------------------------------------------------------------------------


class Reparametrization:
    """Factorised ``I + lam * L`` mapping latent ``u`` to positions ``x``."""

    def __init__(self, mesh: HalfEdgeMesh, lam: float):
        n = mesh.n_vertices
        self.lam = lam
        self.n = n
        A = (sp.identity(n, format="csc") + lam * combinatorial_laplacian(mesh)).tocsc()
        self.matrix = A
        try:
            self._lu = splu(A) if lam > 0 else None
        except RuntimeError as exc:  # singular factor
            raise SolveFailure(str(exc)) from exc

    def to_x(self, u):
        if self._lu is None:
            return np.array(u, dtype=np.float64)
        x = self._lu.solve(np.asarray(u, dtype=np.float64))
        if not np.all(np.isfinite(x)):
            raise SolveFailure("non-finite solution")
        return x

    def to_u(self, x):
        return self.matrix @ np.asarray(x, dtype=np.float64)

    def pull_back(self, gx):
        # the system matrix is symmetric, so the transposed solve is the same solve
        return self.to_x(gx)


@dataclass
class OptimizerState:
    u: np.ndarray
    m: np.ndarray
    v: np.ndarray
    alpha: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lam: float = 19.0
    iteration: int = 0
    adam_t: int = 0
    reparam: Optional[Reparametrization] = field(default=None, repr=False)

    @classmethod
    def start(cls, mesh: HalfEdgeMesh, params: OptimizeParams, iteration: int = 0) -> "OptimizerState":
        """Fresh moments for ``mesh``; latent coordinates chosen so that x is unchanged."""
        rep = Reparametrization(mesh, params.lam)
        u = rep.to_u(mesh.positions)
        z = np.zeros_like(u)
        return cls(
            u, z, z.copy(), params.alpha, params.beta1, params.beta2, params.eps, params.lam, iteration, 0, rep
        )

    @property
    def x(self) -> np.ndarray:
        return self.reparam.to_x(self.u)

    def adam_update(self, gu: np.ndarray) -> None:
        if gu.shape != self.u.shape:
            raise ShapeMismatch("gradient shape %s != latent shape %s" % (gu.shape, self.u.shape))
        self.adam_t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * gu
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * gu * gu
        mhat = self.m / (1.0 - self.beta1**self.adam_t)
        vhat = self.v / (1.0 - self.beta2**self.adam_t)
        self.u = self.u - self.alpha * mhat / (np.sqrt(vhat) + self.eps)


def step(state: OptimizerState, mesh: HalfEdgeMesh, objective: Objective):
    """One Adam step in latent space.

    Returns ``(loss terms at the incoming x, new x)``; the mesh positions are
    updated in place.
    """
    if state.u.shape != (mesh.n_vertices, 3):
        raise ShapeMismatch("optimizer state does not match the mesh")
    x = state.x
    loss, gx = objective_value_and_grad(x, objective)
    state.adam_update(state.reparam.pull_back(gx))
    state.iteration += 1
    x_new = state.x
    mesh.positions = x_new
    return loss, x_new


# ---------------------------------------------------------------------------
# full loop
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    rows: list = field(default_factory=list)
    remesh_events: list = field(default_factory=list)
    stopped: str = "budget"
    iterations: int = 0
    genus: Optional[int] = None
    # det J_k of the final mesh against the frames of the last capture
    final_min_det: float = float("nan")
    final_inverted: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([r[0], repr(r[1]), repr(r[2]), repr(r[3]), r[4], r[5]])


def default_budget(genus: int) -> int:
    return 1500 if genus <= 1 else 3000


def _plateaued(totals, window, tol) -> bool:
    if window <= 0 or len(totals) <= window:
        return False
    old = totals[-window - 1]
    new = totals[-1]
    if old <= 0.0:
        return True
    return (old - new) / old < tol


def reconstruct(
    init: HalfEdgeMesh,
    targets: List[RenderedView],
    cameras: List[Camera],
    params: Optional[OptimizeParams] = None,
    remesh_params: Optional[RemeshParams] = None,
    iterations: Optional[int] = None,
    seed: int = 0,
    remesh: bool = True,
    snapshot_every: int = 0,
    out_dir=None,
    on_mesh=None,
):
    """Fit ``init`` to the target views; returns ``(final mesh, RunReport)``.

    ``on_mesh`` (optional) is called with every mesh produced by a remesh
    event and with the final mesh.
    """
    params = params or OptimizeParams()
    remesh_params = remesh_params or RemeshParams()
    mesh = init.copy()
    genus = topology_summary(mesh).genus
    if iterations is None:
        iterations = default_budget(genus if genus is not None else 0)
    objective = Objective(
        list(targets), list(cameras), mesh, params.w1, params.w2, params.sigma, threads=thread_count()
    )
    state = OptimizerState.start(mesh, params)
    schedule = VCycleSchedule(tuple(remesh_params.period), np.random.default_rng(seed)) if remesh else None
    report = RunReport(genus=genus)
    if out_dir is not None and snapshot_every:
        os.makedirs(os.path.join(out_dir, "snapshots"), exist_ok=True)
    totals = []
    for it in range(iterations):
        mode = schedule.due(it) if schedule is not None else None
        if mode is not None:
            mesh = remesh_event(mesh, None, remesh_params, mode, log_to=report.remesh_events)
            g = topology_summary(mesh).genus
            if g != genus:
                raise GenusChanged("genus %s -> %s at iteration %d" % (genus, g, it))
            objective.rebind(mesh)
            state = OptimizerState.start(mesh, params, it)
            # the loss jumps at a remesh event; measure plateaus from here on
            totals = []
            if on_mesh is not None:
                on_mesh(mesh)
        loss, _ = step(state, mesh, objective)
        if not np.isfinite(loss.total):
            raise SolveFailure("non-finite loss at iteration %d" % it)
        report.rows.append((it, loss.render, loss.smooth, loss.invert, mesh.n_vertices, genus))
        totals.append(loss.total)
        if snapshot_every and out_dir is not None and (it + 1) % snapshot_every == 0:
            save_obj(mesh, os.path.join(out_dir, "snapshots", "iter_%05d.obj" % (it + 1)))
        if _plateaued(totals, params.plateau_window, params.plateau_tol):
            report.stopped = "plateau"
            report.iterations = it + 1
            break
    else:
        report.iterations = iterations
    dets = jacobian_dets(mesh.positions, mesh.faces, objective.frames)
    report.final_min_det = float(dets.min())
    report.final_inverted = int(np.count_nonzero(dets <= 0.0))
    if on_mesh is not None:
        on_mesh(mesh)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        report.write_csv(os.path.join(out_dir, "loss.csv"))
    return mesh, report
