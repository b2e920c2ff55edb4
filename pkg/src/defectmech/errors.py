"""Exception hierarchy.

Three coarse classes matter to callers (and to the CLI exit codes):
configuration problems, mathematical obstructions (a body that cannot
exist for the requested symmetry group), and numerical failures.
"""
from __future__ import annotations


class DefectmechError(Exception):
    """Base class for all package errors."""


class ConfigError(DefectmechError):
    """Invalid user-supplied configuration (bad parameters, bad schema)."""


class DomainError(DefectmechError):
    """A point, stencil or curve leaves the declared domain."""


class InvalidFrameError(DefectmechError):
    """Singular or orientation-reversing frame matrix."""


class ChartCoverError(DefectmechError):
    """A curve segment is not contained in any reference chart."""


class DisjointDomainsError(DefectmechError):
    """Overlap check requested for charts with empty overlap."""


class InconsistentGroupError(DefectmechError):
    """Detected symmetry angles are not closed under composition."""


class InfeasiblePointError(DefectmechError):
    """Energy is non-finite at (or around) the evaluation point."""


class DisclinationPresentError(DefectmechError):
    """Burgers vector requested on a loop with nonzero disclination content."""

    def __init__(self, msg: str, distance: float):
        super().__init__(msg)
        self.distance = distance


class IncompatibleDisclinationError(DefectmechError):
    """Disclination magnitude not realizable in the archetype's symmetry group.

    This is the executable form of the discrete-symmetry obstruction.
    """

    def __init__(self, msg: str, distance: float, report: dict | None = None):
        super().__init__(msg)
        self.distance = distance
        self.report = report or {}


class MeshError(DefectmechError):
    """Mesh construction failed (degenerate or misoriented triangles)."""


class MetricDegeneracyError(DefectmechError):
    """Edge lengths violate the triangle inequality."""


class AnisotropyError(DefectmechError):
    """Metric triangle angles fall outside the allowed band."""


class StripError(DefectmechError):
    """Consecutive strip triangles do not share an edge."""


class RoutingError(DefectmechError):
    """Loop could not be routed through the triangulation."""


class StalledDescentError(DefectmechError):
    """Line search failed to make progress; carries the last iterate."""

    def __init__(self, msg: str, positions=None, energy: float | None = None):
        super().__init__(msg)
        self.positions = positions
        self.energy = energy


# Groupings used by the service/CLI to map errors to exit codes.
OBSTRUCTION_ERRORS = (IncompatibleDisclinationError,)
NUMERICAL_ERRORS = (
    StalledDescentError,
    MetricDegeneracyError,
    AnisotropyError,
    RoutingError,
    StripError,
    InfeasiblePointError,
)
