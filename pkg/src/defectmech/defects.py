"""Defect content of closed curves: holonomy and Burgers vectors.

Loops are split automatically at chart boundaries (lowest chart index
wins ties); within a chart the transport is the exact path-independent
formula P(q)^{-1} P(p), and the loop holonomy is the ordered product of
the per-run transports. The Burgers integral transports velocities back
to the base point with composite 5-node Gauss-Legendre quadrature per
linear segment, which is exact to rounding for the closed-form bodies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archetypes import nearest_element
from .bodies import Body
from .errors import ChartCoverError, DisclinationPresentError, DomainError
from .geometry import Curve, frobenius, inv2, transport_concat

EYE2 = np.eye(2)


def split_into_chart_runs(body: Body, curve: Curve, max_depth: int = 32):
    """Split a curve into maximal runs contained in single charts.

    Returns a list of (chart_index, vertices) with vertices an (m, 2)
    array; consecutive runs share their junction vertex. Honors the
    curve's chart labels when present (after verifying containment).
    """
    v = curve.vertices
    pieces = []  # (chart_idx, a, b)
    if curve.chart_labels is not None:
        for k, (a, b) in zip(curve.chart_labels, zip(v[:-1], v[1:])):
            if not body.charts[k].domain.contains_segment(a, b):
                raise ChartCoverError(
                    f"segment not contained in its labelled chart {k}"
                )
            pieces.append((k, a, b))
    else:
        for a, b in zip(v[:-1], v[1:]):
            pieces.extend(_assign_segment(body, a, b, max_depth))

    runs = []
    for k, a, b in pieces:
        if runs and runs[-1][0] == k:
            runs[-1][1].append(b)
        else:
            runs.append((k, [a, b]))
    return [(k, np.asarray(pts)) for k, pts in runs]


def _assign_segment(body: Body, a, b, depth: int):
    for k, chart in enumerate(body.charts):
        if chart.domain.contains_segment(a, b):
            return [(k, a, b)]
    if depth <= 0:
        raise ChartCoverError(
            f"segment near {0.5 * (np.asarray(a) + np.asarray(b))} is not "
            "contained in any chart"
        )
    m = 0.5 * (np.asarray(a, dtype=float) + np.asarray(b, dtype=float))
    return _assign_segment(body, a, m, depth - 1) + _assign_segment(body, m, b, depth - 1)


@dataclass(frozen=True)
class DisclinationContent:
    """Loop holonomy c and its conjugated form P(p) c P(p)^{-1}."""

    matrix: np.ndarray
    base_point: np.ndarray
    base_chart: int
    conjugated: np.ndarray

    @property
    def identity_distance(self) -> float:
        return float(frobenius(self.conjugated - EYE2))


def disclination_content(body: Body, curve: Curve) -> DisclinationContent:
    if not curve.closed:
        raise DomainError("disclination content needs a closed curve")
    base = curve.base_point
    base_chart = int(body.chart_index_at(base))
    if base_chart < 0:
        raise DomainError("base point outside all chart domains")
    runs = split_into_chart_runs(body, curve)
    parts = []
    for k, pts in runs:
        chart = body.charts[k]
        Pp = chart.frames(pts[0])
        Pq = chart.frames(pts[-1])
        parts.append(inv2(Pq) @ Pp)
    c = transport_concat(parts)
    Pb = body.charts[base_chart].frames(base)
    return DisclinationContent(c, np.asarray(base, dtype=float), base_chart,
                               Pb @ c @ inv2(Pb))


@dataclass(frozen=True)
class BurgersVector:
    vector: np.ndarray
    base_point: np.ndarray
    curve: Curve
    content_distance: float


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def burgers_vector(body: Body, curve: Curve,
                   allow_circuit_dependent: bool = False) -> BurgersVector:
    """Transported-back line integral of the loop velocity.

    Defined (homotopy-invariantly) only for loops with zero disclination
    content; with nonzero content the value is circuit-dependent and is
    only computed behind ``allow_circuit_dependent=True``.
    """
    content = disclination_content(body, curve)
    dist = content.identity_distance
    if dist >= body.tol.identity and not allow_circuit_dependent:
        raise DisclinationPresentError(
            f"loop has nonzero disclination content (distance {dist:.3g}); "
            "the Burgers integral is circuit-dependent here",
            distance=dist,
        )
    runs = split_into_chart_runs(body, curve)
    acc = EYE2.copy()  # transport from base to current segment start
    b = np.zeros(2)
    for k, pts in runs:
        chart = body.charts[k]
        a_pts = pts[:-1]
        d_pts = pts[1:] - pts[:-1]
        # Gauss-Legendre points on every sub-segment of the run at once
        gpts = a_pts[:, None, :] + _GL_T[None, :, None] * d_pts[:, None, :]
        Pg = chart.frames(gpts)  # (m, 5, 2, 2)
        seg_int = np.einsum("q,mqij,mj->mi", _GL_W, Pg, d_pts)
        P_start = chart.frames(a_pts)  # (m, 2, 2)
        contrib = np.einsum("mij,mj->mi", inv2(P_start), seg_int)
        P_end = chart.frames(pts[1:])
        for m in range(a_pts.shape[0]):
            b = b + inv2(acc) @ contrib[m]
            acc = (inv2(P_end[m]) @ P_start[m]) @ acc
    return BurgersVector(b, content.base_point, curve, dist)


@dataclass(frozen=True)
class GroupMembershipReport:
    nearest: np.ndarray
    distance: float
    passed: bool
    content: DisclinationContent


def verify_content_in_group(body: Body, curve: Curve) -> GroupMembershipReport:
    """The conjugated holonomy must be a symmetry-group element."""
    content = disclination_content(body, curve)
    el, dist = nearest_element(body.group, content.conjugated)
    return GroupMembershipReport(el, dist, dist < body.tol.group, content)
