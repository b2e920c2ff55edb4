"""Single record of the numerical tolerances used across the package.

Every threshold that decides pass/fail somewhere (closedness, group
membership, transport isometry, ...) lives here so that the CLI can
override any of them by name via ``--tol name=value``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    # |det P - 1| bound for charts declared Euclidean-volume-preserving,
    # and det-agreement bound between overlapping charts.
    tol_vol: float = 1e-8
    # transport isometry ||Pi^T G(q) Pi - G(p)||_F bounds
    isometry_ode: float = 1e-6
    isometry_chart: float = 1e-12
    # max |d1 P_i2 - d2 P_i1| over the sample grid
    closedness: float = 1e-6
    # FD step used by closedness checks (chart units); small enough that
    # truncation against 1/r^2 frames near thin inner rims stays below
    # the closedness tolerance while roundoff stays ~1e-11
    closedness_step: float = 1e-5
    # distance-to-symmetry-group bound (Frobenius)
    group: float = 1e-8
    # "zero disclination content": two orders below the smallest
    # discrete-group gap at n <= 12
    identity: float = 1e-6
    # cross-chart agreement of induced metric / energy density
    chart_agreement: float = 1e-10
    # max |W(Bg) - W(B)| over the sample set for a group element
    symmetry: float = 1e-8
    # central-difference step for Christoffel symbols (chart units)
    fd_step: float = 1e-5
    # minimum triangle angle for metric triangulations (radians)
    theta_min: float = 0.2

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (v > 0.0):
                raise ValueError(f"tolerance {f.name!r} must be strictly positive, got {v}")

    def with_overrides(self, **overrides: float) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(
                f"unknown tolerance name(s) {sorted(unknown)}; known: {sorted(known)}"
            )
        return replace(self, **overrides)


DEFAULT_TOLERANCES = Tolerances()
