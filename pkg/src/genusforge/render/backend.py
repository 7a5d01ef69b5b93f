"""Kernel backend selection.

The compiled extension is used when it imports; setting
``GENUSFORGE_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _kernels_py

NAME = "python"
kernels = _kernels_py

if not os.environ.get("GENUSFORGE_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        kernels = _compiled
        NAME = "cython"


def get(name=None):
    """Kernel module by name (``"cython"`` or ``"python"``); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError("unknown backend %r" % name)


def rasterize(sxy, depth, faces, width, height):
    return kernels.rasterize(sxy, depth, faces, width, height)


def contour_distance(sxy, edges, width, height, band):
    return kernels.contour_distance(sxy, edges, width, height, band)
