"""Exception hierarchy."""


class ABPError(Exception):
    """Base class for all errors raised by abpcap."""


class InvalidLambda(ABPError, ValueError):
    pass


class EmptyArcSet(ABPError, ValueError):
    pass


class InvalidSection(ABPError, ValueError):
    pass


class NotOnBoundary(ABPError, ValueError):
    pass


class InvalidConfig(ABPError, ValueError):
    pass


class RayPropertyViolation(ABPError):
    """A cell constraint normal m has m . nu_i < -RAY_TOL."""

    def __init__(self, cell, normal, offset, value):
        self.cell = cell
        self.normal = normal
        self.offset = offset
        self.value = value
        super().__init__(
            f"cell {cell}: constraint normal {normal} has m.nu = {value:.3e}"
        )


class InvalidIndex(ABPError, IndexError):
    pass


class PostconditionError(ABPError, AssertionError):
    pass


class NoCellMeetsDisk(ABPError):
    pass


class NearBreakpoint(ABPError, ValueError):
    pass


class OverlappingScene(ABPError, ValueError):
    pass


class DegenerateDroplet(ABPError, ValueError):
    pass


class InvalidVolume(ABPError, ValueError):
    pass


class NonSimplePolygon(ABPError, ValueError):
    pass


class MeshQualityFailure(ABPError):
    pass


class SolverDivergence(ABPError):
    pass


class NoGammaVertices(ABPError):
    pass


class InputError(ABPError, ValueError):
    """Malformed scene or run configuration."""
