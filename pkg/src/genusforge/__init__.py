"""Genus-preserving multi-view mesh reconstruction."""
from .errors import GenusForgeError
from .halfedge import HalfEdgeMesh, TopologySummary, build_mesh, load_obj, one_ring, save_obj, topology_summary

__version__ = "0.1.0"

__all__ = [
    "GenusForgeError",
    "HalfEdgeMesh",
    "TopologySummary",
    "build_mesh",
    "load_obj",
    "one_ring",
    "save_obj",
    "topology_summary",
]
