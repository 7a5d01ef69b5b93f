from . import backend
from .camera import Camera, fov_for_fraction, make_camera_rig, sphere_lattice
from .raster import (
    RenderedView,
    ViewGradients,
    contour_edges,
    coverage_profile,
    coverage_slope,
    render,
    render_backward,
)

__all__ = [
    "Camera",
    "RenderedView",
    "ViewGradients",
    "backend",
    "contour_edges",
    "coverage_profile",
    "coverage_slope",
    "fov_for_fraction",
    "make_camera_rig",
    "render",
    "render_backward",
    "sphere_lattice",
]
