import numpy as np
import pytest

from genusforge.errors import ResolutionTooLow
from genusforge.halfedge import topology_summary
from genusforge.primitives import PrimitiveSpec, icosphere, make_primitive

from oracles import count_vef, homology_genus


@pytest.mark.parametrize("g", range(7))
def test_primitive_genus(g):
    m = make_primitive(PrimitiveSpec(g, 8))
    s = topology_summary(m)
    assert s.is_closed and s.num_components == 1
    assert s.genus == g
    assert s.euler_characteristic == 2 - 2 * g
    V, E, F = count_vef(m.faces)
    assert V - E + F == 2 - 2 * g
    assert homology_genus(m.faces, m.n_vertices) == g
    m.validate()
    assert m.face_areas().min() > 0


def test_genus5_euler():
    m = make_primitive(PrimitiveSpec(5, 16))
    V, E, F = count_vef(m.faces)
    assert V - E + F == -8


@pytest.mark.parametrize("scale", [0.5, 1.0, 3.0])
def test_primitive_fits_radius(scale):
    for g in (0, 1, 3):
        m = make_primitive(PrimitiveSpec(g, 8, scale))
        r = np.linalg.norm(m.positions, axis=1).max()
        assert r == pytest.approx(scale, rel=1e-12)


def test_primitives_are_deterministic():
    a = make_primitive(PrimitiveSpec(4, 12))
    b = make_primitive(PrimitiveSpec(4, 12))
    assert np.array_equal(a.faces, b.faces)
    assert np.array_equal(a.positions, b.positions)


@pytest.mark.parametrize("g", [1, 2, 5])
def test_resolution_too_low(g):
    with pytest.raises(ResolutionTooLow):
        make_primitive(PrimitiveSpec(g, 7))


def test_invalid_spec():
    with pytest.raises(ValueError):
        PrimitiveSpec(-1)
    with pytest.raises(ValueError):
        PrimitiveSpec(1, 16, 0.0)


def test_icosphere_on_sphere():
    m = icosphere(3, 2.0)
    assert np.allclose(np.linalg.norm(m.positions, axis=1), 2.0)
    assert (m.n_vertices, m.n_faces) == (642, 1280)


def test_outward_orientation():
    # divergence theorem: signed volume of an outward mesh is positive
    for g in range(4):
        m = make_primitive(PrimitiveSpec(g, 8))
        X = m.positions[m.faces]
        vol = np.einsum("ij,ij->i", X[:, 0], np.cross(X[:, 1], X[:, 2])).sum() / 6.0
        assert vol > 0
