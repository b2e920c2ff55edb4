"""Lattice structures: atlases of reference charts over a global chart.

A Body is (region, charts, archetype): every chart carries a smooth
frame field P with det P > 0, every chart is closed (dP = 0, checked by
finite differences on a sample grid), and on every overlap the
transition P_a P_b^{-1} must sit in the archetype's symmetry group.
The two constructors below build the single-disclination and the
single-dislocation bodies in closed form.

The disclination frame is d(chi^{-1}) for the sector-removal gluing
chi(r cos t, r sin t) = (r cos(t/beta), r sin(t/beta)); in polar terms

    P = e1 (x) (cos(b*phi) dr - b*r sin(b*phi) dphi)
      + e2 (x) (sin(b*phi) dr + b*r cos(b*phi) dphi),   b = 1 - alpha,

which restricts to [[1, 0], [0, b]] on the ray phi = 0+ and has the
rotation by 2*pi*alpha as its cut transition.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .archetypes import Archetype, SymmetryGroup, group_of, nearest_element
from .domains import Annulus, AnnulusSector, Rect, overlap_components
from .errors import (
    DisjointDomainsError,
    DomainError,
    IncompatibleDisclinationError,
    InvalidFrameError,
)
from .geometry import MetricField, det2, frobenius, inv2, metric_from_reference, rotation
from .tolerances import DEFAULT_TOLERANCES, Tolerances

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ReferenceChart:
    """A chart domain plus a frame field P: points (..., 2) -> (..., 2, 2)."""

    domain: object
    P: Callable
    name: str = ""

    def frames(self, pts):
        P = np.asarray(self.P(np.asarray(pts, dtype=float)))
        if np.any(det2(P) <= 0.0):
            raise InvalidFrameError(f"chart {self.name or '?'}: frame with det <= 0")
        return P


@dataclass(frozen=True)
class ClosednessReport:
    max_residual: float
    passed: bool
    h: float
    grid_n: int


@dataclass(frozen=True)
class CompatibilityReport:
    max_distance: float
    passed: bool
    n_components: int
    locally_constant: Optional[bool]
    max_det_mismatch: float


def check_closed(chart: ReferenceChart, h: float = 1e-5, tol: float = 1e-6,
                 grid_n: int = 32) -> ClosednessReport:
    """max |d1 P_i2 - d2 P_i1| over a sample grid, FD step h."""
    pts = chart.domain.sample_grid(grid_n, inset=2.0 * h)
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    Pxp = chart.frames(pts + ex)
    Pxm = chart.frames(pts - ex)
    Pyp = chart.frames(pts + ey)
    Pym = chart.frames(pts - ey)
    d1 = (Pxp - Pxm) / (2.0 * h)  # d/dx of all entries
    d2 = (Pyp - Pym) / (2.0 * h)
    resid = np.abs(d1[..., :, 1] - d2[..., :, 0])
    mx = float(resid.max())
    return ClosednessReport(mx, mx < tol, h, grid_n)


def check_overlap_compatibility(a: ReferenceChart, b: ReferenceChart,
                                archetype: Archetype, tol: float = 1e-8,
                                grid_n: int = 16,
                                group: Optional[SymmetryGroup] = None,
                                det_tol: float = 1e-8) -> CompatibilityReport:
    """Transition P_a P_b^{-1} must be a symmetry-group element on overlaps.

    For a discrete group the transition must additionally be the *same*
    element on each overlap component; for the continuous group only
    pointwise membership is checked. Volume declarations (det P) of the
    two charts must agree.
    """
    comps = overlap_components(a.domain, b.domain)
    if not comps:
        raise DisjointDomainsError("charts have disjoint domains")
    grp = group if group is not None else group_of(archetype)

    max_d = 0.0
    max_det = 0.0
    locally_constant: Optional[bool] = None if grp.continuous else True
    for comp in comps:
        pts = comp.sample_grid(grid_n)
        Pa = a.frames(pts)
        Pb = b.frames(pts)
        T = Pa @ inv2(Pb)
        max_det = max(max_det, float(np.max(np.abs(det2(Pa) - det2(Pb)))))
        if grp.continuous:
            from .geometry import polar_rotation

            d = frobenius(T - polar_rotation(T))
            max_d = max(max_d, float(d.max()))
        else:
            els = grp.elements()
            dd = frobenius(T[:, None, :, :] - els[None, :, :, :])
            idx = np.argmin(dd, axis=1)
            max_d = max(max_d, float(dd.min(axis=1).max()))
            if np.unique(idx).size > 1:
                locally_constant = False
    passed = (max_d < tol) and (max_det <= det_tol) and (locally_constant is not False)
    return CompatibilityReport(max_d, passed, len(comps), locally_constant, max_det)


# ---------------------------------------------------------------------------
# bodies


@dataclass(frozen=True)
class Body:
    """Atlas of reference charts + archetype over a global chart region."""

    charts: tuple
    archetype: Archetype
    group: SymmetryGroup
    region: object
    tol: Tolerances = field(default=DEFAULT_TOLERANCES)

    def chart_index_at(self, pts):
        """Lowest chart index containing each point; -1 where uncovered."""
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        idx = np.full(flat.shape[0], -1, dtype=int)
        for k in reversed(range(len(self.charts))):
            inside = self.charts[k].domain.contains(flat)
            idx[inside] = k
        return idx.reshape(pts.shape[:-1])

    def frames_at(self, pts):
        """Frame of the lowest containing chart at each point."""
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        idx = self.chart_index_at(flat)
        if np.any(idx < 0):
            raise DomainError("point outside all chart domains")
        P = np.empty((flat.shape[0], 2, 2))
        for k, chart in enumerate(self.charts):
            m = idx == k
            if np.any(m):
                P[m] = chart.frames(flat[m])
        return P.reshape(pts.shape[:-1] + (2, 2))


@dataclass(frozen=True)
class BodyReport:
    closedness: tuple
    compatibility: tuple
    covered: bool
    valid: bool


def validate_body(body: Body, grid_n: int = 32) -> BodyReport:
    t = body.tol
    closed = tuple(
        check_closed(c, h=t.closedness_step, tol=t.closedness, grid_n=grid_n)
        for c in body.charts
    )
    compat = []
    for i in range(len(body.charts)):
        for j in range(i + 1, len(body.charts)):
            if overlap_components(body.charts[i].domain, body.charts[j].domain):
                compat.append(
                    check_overlap_compatibility(
                        body.charts[i], body.charts[j], body.archetype,
                        tol=t.group, group=body.group, det_tol=t.tol_vol,
                    )
                )
    pts = body.region.sample_grid(24)
    covered = bool(np.all(body.chart_index_at(pts) >= 0))
    valid = covered and all(r.passed for r in closed) and all(r.passed for r in compat)
    return BodyReport(closed, tuple(compat), covered, valid)


def disclination_frame(beta: float, window: AnnulusSector) -> Callable:
    """Closed-form disclination frame on the given angular branch."""

    def P(pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        phi = window.lift(np.arctan2(y, x))
        c, s = np.cos(phi), np.sin(phi)
        cb, sb = np.cos(beta * phi), np.sin(beta * phi)
        out = np.empty(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = cb * c + beta * sb * s
        out[..., 0, 1] = cb * s - beta * sb * c
        out[..., 1, 0] = sb * c - beta * cb * s
        out[..., 1, 1] = sb * s + beta * cb * c
        return out

    return P


def disclination_charts(r0: float, r1: float, alpha: float):
    """The two-branch atlas of the sector-removal construction."""
    beta = 1.0 - alpha
    u1 = AnnulusSector(r0, r1, 0.0, TWO_PI)
    u2 = AnnulusSector(r0, r1, -np.pi, np.pi)
    return (
        ReferenceChart(u1, disclination_frame(beta, u1), name="U1"),
        ReferenceChart(u2, disclination_frame(beta, u2), name="U2"),
    )


def build_disclination_body(r0: float, r1: float, alpha: float,
                            archetype: Archetype,
                            tol: Tolerances = DEFAULT_TOLERANCES) -> Body:
    """Two-chart annulus with one disclination of angle 2*pi*alpha.

    Valid iff the rotation by 2*pi*alpha lies in the archetype's
    symmetry group; otherwise raises IncompatibleDisclinationError
    carrying the group distance.
    """
    if not (0.0 <= r0 < r1):
        raise DomainError("need 0 <= r0 < r1")
    if not (0.0 < alpha < 1.0):
        raise DomainError("need alpha in (0, 1)")
    grp = group_of(archetype)
    _, dist = nearest_element(grp, rotation(TWO_PI * alpha))
    if dist >= tol.group:
        raise IncompatibleDisclinationError(
            f"rotation by 2*pi*{alpha} is not in the symmetry group "
            f"of {archetype.label} (distance {dist:.6g})",
            distance=dist,
        )
    charts = disclination_charts(r0, r1, alpha)
    return Body(charts, archetype, grp, Annulus(r0, r1), tol)


def build_dislocation_body(eps: float, r1: float, archetype: Archetype,
                           tol: Tolerances = DEFAULT_TOLERANCES) -> Body:
    """Single-chart annulus with one edge dislocation of magnitude eps.

    P = Id + eps/(2*pi) e1 (x) dphi is closed but not exact; the body is
    valid for any archetype.
    """
    if not (0.0 < eps < r1):
        raise DomainError("need 0 < eps < r1")
    dom = Annulus(eps, r1)
    k = eps / TWO_PI

    def P(pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        r2 = x * x + y * y
        out = np.zeros(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0 - k * y / r2
        out[..., 0, 1] = k * x / r2
        out[..., 1, 1] = 1.0
        return out

    chart = ReferenceChart(dom, P, name="U")
    return Body((chart,), archetype, group_of(archetype), dom, tol)


def build_trivial_body(archetype: Archetype, region=None,
                       tol: Tolerances = DEFAULT_TOLERANCES) -> Body:
    """Defect-free body: a single chart with P = Id."""
    if region is None:
        region = Rect(0.0, 1.0, 0.0, 1.0)

    def P(pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(np.eye(2), pts.shape[:-1] + (2, 2)).copy()

    chart = ReferenceChart(region, P, name="U")
    return Body((chart,), archetype, group_of(archetype), region, tol)


def induced_metric(body: Body) -> MetricField:
    """G = P^T P, chart-independent for solid bodies."""

    def func(pts):
        return metric_from_reference(body.frames_at(pts))

    return MetricField(func, body.region, name="induced")


def energy_density_at(body: Body, p, A) -> float:
    """W_p(A) = W(A P(p)^{-1}), evaluated with the lowest containing chart."""
    P = body.frames_at(np.asarray(p, dtype=float))
    A = np.asarray(A, dtype=float)
    return float(body.archetype(A @ inv2(P)))
