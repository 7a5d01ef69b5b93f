"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`GenusForgeError`; the CLI prints the class name on stderr.
"""


class GenusForgeError(Exception):
    """Base class for all package errors."""


# mesh construction / validation
class MeshError(GenusForgeError):
    pass


class NonManifoldEdge(MeshError):
    pass


class NonManifoldVertex(MeshError):
    pass


class InconsistentOrientation(MeshError):
    pass


class DegenerateFace(MeshError):
    pass


# OBJ I/O
class ParseError(GenusForgeError):
    pass


class NonTriangular(ParseError):
    pass


# geometry
class DegenerateAngle(GenusForgeError):
    pass


class ResolutionTooLow(GenusForgeError):
    pass


class RemeshInternalError(GenusForgeError):
    pass


class DegenerateProjection(GenusForgeError):
    pass


# optimisation
class ShapeMismatch(GenusForgeError):
    pass


class StaleFrames(GenusForgeError):
    pass


class SolveFailure(GenusForgeError):
    pass


class GenusChanged(GenusForgeError):
    pass


class TargetMismatch(GenusForgeError):
    pass


# metrics
class NotClosed(GenusForgeError):
    pass


# configuration
class ConfigError(GenusForgeError):
    pass
