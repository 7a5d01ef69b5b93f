"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed immediately and again in the
terminal summary). The desk reconstructions are shared through
module-scoped fixtures so the torus run is computed twice (for the
determinism check) and the sphere-init run once.
"""
import math
import time

import numpy as np
import pytest

import conftest
from genusforge.curvature import curvature_field, principal_curvatures
from genusforge.halfedge import build_mesh, topology_summary
from genusforge.metrics import chamfer_distance, evaluate, volume_iou
from genusforge.optimize import (
    Objective,
    OptimizeParams,
    jacobian_dets,
    objective_value_and_grad,
    reconstruct,
    smoothness_term,
)
from genusforge.primitives import PrimitiveSpec, grid_torus, icosphere, make_primitive, normalize_to_radius
from genusforge.remesh import RemeshParams, fraction_in_band, remesh_event, sizing_field, valence_deviation
from genusforge.render import make_camera_rig, render

from oracles import box_mesh, central_fd, homology_genus, random_flips, rel_err

pytestmark = pytest.mark.slow

DESK_VIEWS = 36
DESK_RES = 64
DESK_ITERS = 600
DESK_SEED = 0


def record(k, ok, detail):
    conftest.ACCEPTANCE[k] = (bool(ok), detail)
    print("criterion %d: %s  %s" % (k, "PASS" if ok else "FAIL", detail))
    assert ok, detail


# ---------------------------------------------------------------------------
# shared desk problem
# ---------------------------------------------------------------------------


def desk_target():
    """Unit-normalised grid torus, tilted so no camera sees it edge-on by symmetry."""
    t = grid_torus(48, 24, 0.7, 0.2)
    a = math.radians(20.0)
    R = np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])
    return t.with_positions(normalize_to_radius(t.positions @ R.T))


@pytest.fixture(scope="module")
def desk():
    target = desk_target()
    cams = make_camera_rig(DESK_VIEWS, 2.5, DESK_RES)
    views = [render(target, c, 1.0, i) for i, c in enumerate(cams)]
    return target, cams, views


def desk_run(desk, genus, out_dir):
    target, cams, views = desk
    init = make_primitive(PrimitiveSpec(genus, 16, 1.0))
    t0 = time.time()
    mesh, report = reconstruct(
        init, views, cams, OptimizeParams(), RemeshParams(period=(130, 200)), iterations=DESK_ITERS,
        seed=DESK_SEED, out_dir=out_dir,
    )
    ev = evaluate(mesh, target, samples=100_000, resolution=128, seed=DESK_SEED)
    return {"mesh": mesh, "report": report, "eval": ev, "seconds": time.time() - t0, "dir": out_dir}


@pytest.fixture(scope="module")
def torus_run(desk, tmp_path_factory):
    return desk_run(desk, 1, tmp_path_factory.mktemp("desk_g1_a"))


@pytest.fixture(scope="module")
def sphere_run(desk, tmp_path_factory):
    return desk_run(desk, 0, tmp_path_factory.mktemp("desk_g0"))


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_01_topology_suite():
    t0 = time.time()
    problems = []
    for g in range(6):
        m = make_primitive(PrimitiveSpec(g, 12))
        s = topology_summary(m)
        if s.genus != g or s.euler_characteristic != 2 - 2 * g or homology_genus(m.faces, m.n_vertices) != g:
            problems.append("primitive g=%d: %s" % (g, s))
        rng = np.random.default_rng(100 + g)
        for k in range(20):
            p = RemeshParams(
                epsilon=float(rng.uniform(0.002, 0.02)), l_min=0.03, l_max=0.3,
                mean_length_factor=float(rng.uniform(0.7, 1.5)),
            )
            mode = ("coarsen", "refine")[int(rng.integers(2))]
            m = m.with_positions(m.positions + 0.002 * rng.normal(size=m.positions.shape))
            m = remesh_event(m, None, p, mode)
            s = topology_summary(m)
            if s.genus != g or s.euler_characteristic != 2 - 2 * g:
                problems.append("g=%d event %d (%s): %s" % (g, k, mode, s))
        if homology_genus(m.faces, m.n_vertices) != g:
            problems.append("g=%d: homology genus disagrees after remeshing" % g)
    dt = time.time() - t0
    record(1, not problems and dt < 60.0, "6 primitives x 20 events, %d problems, %.1f s (limit 60 s)" % (len(problems), dt))


def test_criterion_03_curvature_accuracy():
    t0 = time.time()
    errs = [float(np.abs(curvature_field(icosphere(k)).mean - 1.0).max()) for k in (3, 4, 5)]
    rng = np.random.default_rng(3)
    H = np.concatenate([rng.uniform(-50, 50, 20000), [0.0, 1.0, -1.0]])
    K = np.concatenate([rng.uniform(-2500, 2500, 20000), [0.0, 1.0, 1.0]])
    k1, k2 = principal_curvatures(K, H)
    scale = np.maximum(1.0, np.maximum(H * H, np.abs(K)))
    e_h = float(np.max(np.abs(0.5 * (k1 + k2) - H) / np.maximum(1.0, np.abs(H))))
    e_k = float(np.max(np.abs(k1 * k2 - np.minimum(K, H * H)) / scale))
    dt = time.time() - t0
    ok = errs[0] > errs[1] > errs[2] and errs[2] < 0.02 and e_h < 1e-12 and e_k < 1e-12 and dt < 30.0
    record(3, ok, "max|H-1| L3/L4/L5 = %.4g/%.4g/%.4g, round trip H %.1e K %.1e, %.1f s" % (*errs, e_h, e_k, dt))


def _fd_config(rng):
    kind = int(rng.integers(3))
    if kind == 0:
        base = icosphere(1, float(rng.uniform(0.5, 0.8)))
    elif kind == 1:
        base = grid_torus(int(rng.integers(6, 11)), int(rng.integers(4, 7)), float(rng.uniform(0.45, 0.6)),
                          float(rng.uniform(0.15, 0.3)))
    else:
        base = make_primitive(PrimitiveSpec(0, 8, float(rng.uniform(0.5, 0.8))))
    target = grid_torus(12, 6, float(rng.uniform(0.4, 0.6)), float(rng.uniform(0.15, 0.3)))
    cams = [make_camera_rig(8, 2.5, 32)[i] for i in rng.choice(8, 2, replace=False)]
    sigma = float(rng.uniform(0.7, 1.5))
    targets = [render(target, c, sigma, i) for i, c in enumerate(cams)]
    w1 = float(10 ** rng.uniform(-4, -1))
    obj = Objective(targets, cams, base, w1=w1, w2=100.0, sigma=sigma)
    # frames come from the unperturbed mesh, so large noise exercises the inversion term
    noise = float(rng.choice([0.01, 0.03, 0.08]))
    x = base.positions + noise * rng.normal(size=base.positions.shape)
    return base, obj, x


def _structure(base, obj, x):
    m = base.with_positions(x)
    parts = []
    for c, t in zip(obj.cameras, obj.targets):
        v = render(m, c, obj.sigma)
        parts += [v.structure_key(), np.sign(v.silhouette - t.silhouette).tobytes(),
                  np.sign(v.normals - t.normals).tobytes()]
    parts.append(np.sign(np.minimum(0.0, _dets(obj, x))).tobytes())
    return b"".join(parts)


def _dets(obj, x):
    return jacobian_dets(x, obj.mesh.faces, obj.frames)


def test_criterion_04_gradient_oracle():
    t0 = time.time()
    rng = np.random.default_rng(4)
    worst = 0.0
    worst_smooth = 0.0
    checked = 0
    excluded = 0
    inverted_cfgs = 0
    n_cfg = 50
    for _ in range(n_cfg):
        base, obj, x = _fd_config(rng)
        assert base.n_faces <= 200
        inverted_cfgs += bool(np.any(_dets(obj, x) < 0))
        _, g = objective_value_and_grad(x, obj)
        fd, ok = central_fd(lambda y: objective_value_and_grad(y, obj)[0].total, x,
                            lambda y: _structure(base, obj, y), h0=1e-4)
        big = ok & (np.abs(fd) > 1e-6)
        excluded += int((~ok).sum())
        checked += int(big.sum())
        if big.any():
            worst = max(worst, float(rel_err(g[big], fd[big]).max()))
        L = obj.smooth_matrix
        _, gs = smoothness_term(x, L)
        fs, _ = central_fd(lambda y: smoothness_term(y, L)[0], x, h0=1e-3)
        m = np.abs(fs) > 1e-6
        worst_smooth = max(worst_smooth, float(rel_err(gs[m], fs[m]).max()))
    dt = time.time() - t0
    ok = worst < 1e-3 and worst_smooth < 1e-8 and checked > 0 and dt < 300.0
    record(4, ok, "%d configs (%d with inverted faces), %d components, worst rel err %.2e, smoothness %.2e, "
           "%d components skipped at a kink, %.0f s" % (n_cfg, inverted_cfgs, checked, worst, worst_smooth,
                                                         excluded, dt))


def test_criterion_05_torus_desk(torus_run):
    ev = torus_run["eval"]
    genus = topology_summary(torus_run["mesh"]).genus
    dt = torus_run["seconds"]
    ok = ev.chamfer < 0.01 and ev.iou > 0.90 and genus == 1 and dt < 900.0
    record(5, ok, "CD %.5f (<0.01), IoU %.4f (>0.90), genus %s, %.0f s (limit 900 s)" % (ev.chamfer, ev.iou, genus, dt))


def test_criterion_06_genus_mismatch(torus_run, sphere_run):
    g0 = topology_summary(sphere_run["mesh"]).genus
    gap = torus_run["eval"].iou - sphere_run["eval"].iou
    ok = g0 == 0 and gap >= 0.10
    record(6, ok, "sphere init: genus %s, IoU %.4f vs %.4f (gap %.4f, need >= 0.10), CD %.5f"
           % (g0, sphere_run["eval"].iou, torus_run["eval"].iou, gap, sphere_run["eval"].chamfer))


def test_criterion_07_no_inversions(torus_run):
    rep = torus_run["report"]
    last_invert = rep.rows[-1][3]
    ok = rep.final_inverted == 0 and last_invert == 0.0
    record(7, ok, "final faces with det J <= 0: %d (min det %.3g), loss_invert at last iteration %r"
           % (rep.final_inverted, rep.final_min_det, last_invert))


def _noisy_icosphere(seed=0):
    rng = np.random.default_rng(seed)
    base = icosphere(3)
    faces = random_flips(base.faces, base.n_vertices, int(0.1 * base.n_edges), rng)
    m = build_mesh(faces, base.positions)
    # tangential jitter, then back onto the sphere
    n = m.positions / np.linalg.norm(m.positions, axis=1)[:, None]
    J = 0.2 * m.edge_lengths().mean() * rng.normal(size=n.shape)
    J -= n * np.einsum("ij,ij->i", J, n)[:, None]
    X = m.positions + J
    return m.with_positions(X / np.linalg.norm(X, axis=1)[:, None])


def test_criterion_08_remesh_quality():
    m = _noisy_icosphere()
    p = RemeshParams(epsilon=0.004, l_min=0.01, l_max=0.5)
    cf = curvature_field(m)
    band0 = fraction_in_band(m, sizing_field(m, cf, p).lengths)
    dev0 = valence_deviation(m)
    out = remesh_event(m, cf, p, "refine")
    band1 = fraction_in_band(out, sizing_field(out, curvature_field(out), p).lengths)
    dev1 = valence_deviation(out)
    valid = True
    try:
        out.validate()
    except Exception:  # noqa: BLE001 - any validation failure fails the criterion
        valid = False
    ok = dev1 <= dev0 and band1 > band0 and valid
    record(8, ok, "sum (val-6)^2 %d -> %d, in-band fraction %.3f -> %.3f, valid %s" % (dev0, dev1, band0, band1, valid))


def test_criterion_09_metric_sanity():
    a = icosphere(4)
    cd_aa = chamfer_distance(a, a, 100_000)
    iou_aa = volume_iou(a, a, 128)
    cd_s = chamfer_distance(icosphere(5, 1.0), icosphere(5, 1.01), 100_000)
    res = 128
    iou_c = volume_iou(box_mesh([-0.5] * 3, [0.5] * 3), box_mesh([-1.0] * 3, [1.0] * 3), res)
    layer = 6 * (res / 2) ** 2 / res**3
    ok = cd_aa < 1e-6 and iou_aa == 1.0 and abs(cd_s - 0.01) <= 0.001 and abs(iou_c - 0.125) <= layer
    record(9, ok, "cd(A,A) %.2e, iou(A,A) %r, concentric CD %.5f (0.01 +- 10%%), cube IoU %.5f (0.125 +- %.4f)"
           % (cd_aa, iou_aa, cd_s, iou_c, layer))


def test_criterion_10_determinism(desk, torus_run, tmp_path_factory):
    again = desk_run(desk, 1, tmp_path_factory.mktemp("desk_g1_b"))
    csv_a = (torus_run["dir"] / "loss.csv").read_bytes()
    csv_b = (again["dir"] / "loss.csv").read_bytes()
    same_faces = np.array_equal(torus_run["mesh"].faces, again["mesh"].faces)
    ok = csv_a == csv_b and same_faces
    record(10, ok, "loss CSVs identical: %s (%d bytes), final connectivity identical: %s"
           % (csv_a == csv_b, len(csv_a), same_faces))


def test_criterion_02_gauss_bonnet_hook():
    # runs after the pipeline tests above; the summary line is refreshed at session end
    hook = conftest.GB_HOOK
    ok = hook.checked > 0 and not hook.violations
    record(2, ok, "%d meshes checked so far, %d violations, worst |sum - 2 pi chi|/|F| = %.2e"
           % (hook.checked, len(hook.violations), hook.worst))
