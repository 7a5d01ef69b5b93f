import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from genusforge.errors import NotClosed
from genusforge.halfedge import build_mesh
from genusforge.metrics import (
    SurfaceIndex,
    chamfer_distance,
    closest_on_triangles,
    evaluate,
    icp_align,
    kabsch,
    sample_surface,
    unit_frame,
    volume_iou,
    voxelize,
)
from genusforge.primitives import PrimitiveSpec, grid_torus, icosphere, make_primitive, planar_grid

from oracles import box_mesh, brute_closest_distance


def test_sampling_is_area_weighted():
    # two boxes, one with 4x the surface area of the other
    small = box_mesh([0, 0, 0], [1, 1, 1])
    big = box_mesh([5, 0, 0], [7, 2, 2])
    both = build_mesh(np.concatenate([small.faces, big.faces + small.n_vertices]),
                      np.concatenate([small.positions, big.positions]))
    p = sample_surface(both, 20000, np.random.default_rng(0))
    frac = np.mean(p[:, 0] > 3)
    assert frac == pytest.approx(0.8, abs=0.01)


def test_samples_lie_on_surface():
    m = icosphere(2)
    p = sample_surface(m, 500, np.random.default_rng(1))
    d, _ = SurfaceIndex(m).query(p)
    assert d.max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_closest_point_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    tri = rng.normal(size=(3, 3))
    p = rng.normal(size=3) * 2
    q = closest_on_triangles(p[None], tri[0][None], tri[1][None], tri[2][None])[0]
    d = np.linalg.norm(p - q)
    brute = brute_closest_distance(p, tri)
    assert d <= brute + 1e-12
    # brute force samples a grid of spacing ~ edge/300
    assert brute - d < 0.01 * np.ptp(tri, axis=0).max()


def test_surface_index_exact_against_all_faces():
    rng = np.random.default_rng(2)
    m = grid_torus(16, 8)
    P = rng.uniform(-1.5, 1.5, size=(300, 3))
    d, _ = SurfaceIndex(m).query(P)
    T = m.positions[m.faces]
    F = len(T)
    full = np.full(len(P), np.inf)
    for k in range(F):
        t = np.repeat(T[k][None], len(P), axis=0)
        q = closest_on_triangles(P, t[:, 0], t[:, 1], t[:, 2])
        full = np.minimum(full, np.linalg.norm(P - q, axis=1))
    assert np.allclose(d, full, atol=1e-14)


def test_kabsch_recovers_transform():
    rng = np.random.default_rng(3)
    P = rng.normal(size=(50, 3))
    R = Rotation.from_euler("xyz", [10, -20, 30], degrees=True).as_matrix()
    t = np.array([0.3, -0.1, 0.2])
    R2, t2 = kabsch(P, P @ R.T + t)
    assert np.allclose(R2, R, atol=1e-12) and np.allclose(t2, t, atol=1e-12)


def asymmetric_shape():
    m = make_primitive(PrimitiveSpec(2, 8))
    return m.with_positions(m.positions * [1.0, 0.6, 0.35] + [0.1, 0.0, 0.0])


def test_icp_recovers_small_rotation():
    ref = asymmetric_shape()
    R = Rotation.from_rotvec(np.radians(10) * np.array([0.2, 0.5, 1.0]) / np.linalg.norm([0.2, 0.5, 1.0]))
    t = np.array([0.02, -0.03, 0.01])
    moved = ref.with_positions(ref.positions @ R.as_matrix().T + t)
    T = icp_align(moved, ref, max_iters=100, samples=4000)
    back = T.apply(moved.positions)
    ang = np.degrees((Rotation.from_matrix(T.rotation) * R).magnitude())
    assert ang < 0.1
    assert np.abs(back - ref.positions).max() < 1e-3
    assert all(b <= a for a, b in zip(T.errors, T.errors[1:]))


def test_icp_identity():
    m = asymmetric_shape()
    T = icp_align(m, m, samples=2000)
    assert np.allclose(T.rotation, np.eye(3), atol=1e-9) and np.allclose(T.translation, 0, atol=1e-9)


def test_chamfer_identity_and_symmetry():
    a = icosphere(3)
    assert chamfer_distance(a, a, 20000) < 1e-6
    b = grid_torus(24, 12)
    assert chamfer_distance(a, b, 20000, seed=4) == pytest.approx(chamfer_distance(b, a, 20000, seed=4), rel=0.02)


def test_chamfer_concentric_spheres():
    cd = chamfer_distance(icosphere(5, 1.0), icosphere(5, 1.01), 50000)
    assert cd == pytest.approx(0.01, rel=0.1)


def test_chamfer_sample_count_convergence():
    a, b = icosphere(3), grid_torus(24, 12)
    c1 = chamfer_distance(a, b, 20000, seed=1)
    c2 = chamfer_distance(a, b, 40000, seed=2)
    assert c1 == pytest.approx(c2, rel=0.02)


def test_iou_identity_and_disjoint():
    a = icosphere(3)
    assert volume_iou(a, a, 64) == 1.0
    far = a.with_positions(a.positions + [3.0, 0, 0])
    assert volume_iou(a, far, 64) == 0.0


@pytest.mark.parametrize("res", [32, 64, 128])
def test_cube_in_cube_iou(res):
    inner = box_mesh([-0.5] * 3, [0.5] * 3)
    outer = box_mesh([-1.0] * 3, [1.0] * 3)
    iou = volume_iou(inner, outer, res)
    layer = 6 * (res / 2) ** 2 / res**3
    assert abs(iou - 0.125) <= layer


def test_voxelized_sphere_volume():
    m = icosphere(4)
    occ = voxelize(m, [-1.0] * 3, [1.0] * 3, 64)
    vol = occ.sum() * (2.0 / 64) ** 3
    assert vol == pytest.approx(4 / 3 * np.pi, rel=0.02)


def test_iou_rigid_invariance():
    a = asymmetric_shape()
    b = a.with_positions(a.positions * 1.05)
    R = Rotation.from_euler("z", 90, degrees=True).as_matrix()  # keeps the voxel grid aligned
    i1 = volume_iou(a, b, 64)
    i2 = volume_iou(a.with_positions(a.positions @ R.T + 0.3), b.with_positions(b.positions @ R.T + 0.3), 64)
    assert i1 == pytest.approx(i2, abs=0.01)


def test_open_mesh_rejected():
    with pytest.raises(NotClosed):
        volume_iou(planar_grid(3, 3), icosphere(1))
    with pytest.raises(NotClosed):
        voxelize(planar_grid(3, 3), [0, 0, 0], [1, 1, 1], 8)


def test_unit_frame():
    m = icosphere(2, 3.0)
    m = m.with_positions(m.positions + [1.0, 2.0, 3.0])
    c, s = unit_frame(m)
    assert np.allclose(c, [1, 2, 3], atol=1e-12)
    assert np.linalg.norm((m.positions - c) * s, axis=1).max() == pytest.approx(1.0)


def test_evaluate_identity_and_report():
    m = grid_torus(24, 12)
    rep = evaluate(m, m, samples=5000, resolution=48)
    assert rep.chamfer < 1e-6 and rep.iou == 1.0
    assert rep.csv_header() == "chamfer,iou,samples,resolution"
    assert rep.csv_row().split(",")[2:] == ["5000", "48"]
    assert rep.as_dict()["rotation"] == rep.rotation.tolist()


def test_evaluate_is_scale_free():
    a, b = grid_torus(24, 12), grid_torus(24, 12, 0.7, 0.25)
    r1 = evaluate(a, b, samples=5000, resolution=48)
    r2 = evaluate(a.with_positions(a.positions * 4), b.with_positions(b.positions * 4), samples=5000, resolution=48)
    assert r1.chamfer == pytest.approx(r2.chamfer, rel=1e-6)
    assert r1.iou == pytest.approx(r2.iou, abs=1e-9)
