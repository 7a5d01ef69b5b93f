"""Shared fixtures and the session-wide Gauss-Bonnet hook.

Every ``HalfEdgeMesh`` constructed while the tests run (primitives, remesh
output, optimiser iterates, loaded OBJs, ...) has its angle deficits summed
and compared with ``2 pi chi``. A violation fails the test that produced
the mesh.
"""
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from genusforge.curvature import angle_deficits  # noqa: E402
from genusforge.errors import DegenerateAngle  # noqa: E402
from genusforge.halfedge import HalfEdgeMesh  # noqa: E402


class GaussBonnetHook:
    def __init__(self):
        self.checked = 0
        self.skipped = 0
        self.violations = []
        self.worst = 0.0

    def __call__(self, mesh):
        F = mesh.n_faces
        if F == 0:
            return
        try:
            with np.errstate(all="ignore"):
                d = angle_deficits(mesh)
        except DegenerateAngle:
            self.skipped += 1
            return
        if not np.all(np.isfinite(d)):
            self.skipped += 1
            return
        chi = mesh.n_vertices - mesh.n_edges + F
        err = abs(float(d.sum()) - 2.0 * math.pi * chi)
        self.checked += 1
        self.worst = max(self.worst, err / F)
        if err >= 1e-8 * F:
            self.violations.append((repr(mesh), err))


GB_HOOK = GaussBonnetHook()
_orig_init = HalfEdgeMesh.__init__


def _checked_init(self, *args, **kwargs):
    _orig_init(self, *args, **kwargs)
    GB_HOOK(self)


HalfEdgeMesh.__init__ = _checked_init

# acceptance results, reported at the end of the session
ACCEPTANCE = {}


@pytest.fixture(autouse=True)
def gauss_bonnet_guard():
    before = len(GB_HOOK.violations)
    yield
    new = GB_HOOK.violations[before:]
    assert not new, "Gauss-Bonnet violated on %d meshes: %s" % (len(new), new[:3])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    tr = terminalreporter
    tr.write_sep("-", "Gauss-Bonnet hook")
    tr.write_line(
        "meshes checked: %d, skipped (degenerate): %d, violations: %d, worst |sum - 2 pi chi|/|F|: %.3g"
        % (GB_HOOK.checked, GB_HOOK.skipped, len(GB_HOOK.violations), GB_HOOK.worst)
    )
    if 2 in ACCEPTANCE:
        ok = GB_HOOK.checked > 0 and not GB_HOOK.violations
        ACCEPTANCE[2] = (ok, "%d meshes checked over the whole session, %d violations, worst %.2e"
                         % (GB_HOOK.checked, len(GB_HOOK.violations), GB_HOOK.worst))
    if ACCEPTANCE:
        tr.write_sep("-", "acceptance criteria")
        for k in sorted(ACCEPTANCE):
            ok, detail = ACCEPTANCE[k]
            tr.write_line("criterion %2d: %s  %s" % (k, "PASS" if ok else "FAIL", detail))
