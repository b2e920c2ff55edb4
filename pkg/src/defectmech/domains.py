"""Chart-domain descriptors: rectangles, annuli and cut annular sectors.

All domains live in a single global Cartesian chart. Containment is
open (boundary points are outside), which is what makes the cut ray of
an annular sector genuinely excluded. Segment containment for sectors
is exact for straight segments: along a straight line the polar angle
is monotone (the cross product with the direction is constant), so the
swept arc is exactly the lift interval between the endpoint angles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi


def lift_angle(theta, lo):
    """Lift angle(s) into the window [lo, lo + 2*pi)."""
    return lo + np.mod(np.asarray(theta) - lo, TWO_PI)


def _point_radii(pts):
    pts = np.asarray(pts, dtype=float)
    return np.sqrt(pts[..., 0] ** 2 + pts[..., 1] ** 2)


def _segment_min_radius(a, b):
    """Distance from the origin to the closed segment [a, b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return float(np.hypot(*a))
    t = float(np.clip(-(a @ d) / dd, 0.0, 1.0))
    p = a + t * d
    return float(np.hypot(*p))


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ConfigError(f"degenerate rectangle {self}")

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)

    def contains_segment(self, a, b) -> bool:
        # rectangles are convex
        return bool(self.contains(np.asarray([a, b])).all())

    def contains_triangle(self, verts) -> bool:
        return bool(self.contains(np.asarray(verts)).all())

    def sample_grid(self, n: int, inset: float = 0.0):
        dx = max(inset, 1e-9 * (self.x1 - self.x0))
        dy = max(inset, 1e-9 * (self.y1 - self.y0))
        xs = np.linspace(self.x0 + dx, self.x1 - dx, n)
        ys = np.linspace(self.y0 + dy, self.y1 - dy, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=-1)

    def interior_point(self):
        return np.array([0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)])

    def relaxed(self, delta: float) -> "Rect":
        """Slightly enlarged copy (meshes touch the closed boundary)."""
        return Rect(self.x0 - delta, self.x1 + delta, self.y0 - delta, self.y1 + delta)


@dataclass(frozen=True)
class Annulus:
    """Full ring r0 < r < r1, no angular cut."""

    r0: float
    r1: float

    def __post_init__(self):
        if not (0.0 <= self.r0 < self.r1):
            raise ConfigError(f"need 0 <= r0 < r1, got {self}")

    def contains(self, pts):
        r = _point_radii(pts)
        return (r > self.r0) & (r < self.r1)

    def contains_segment(self, a, b) -> bool:
        ra, rb = float(np.hypot(*a)), float(np.hypot(*b))
        if not (self.r0 < ra < self.r1 and self.r0 < rb < self.r1):
            return False
        return _segment_min_radius(a, b) > self.r0

    def contains_triangle(self, verts) -> bool:
        verts = np.asarray(verts, dtype=float)
        for i in range(3):
            if not self.contains_segment(verts[i], verts[(i + 1) % 3]):
                return False
        return not _origin_in_triangle(verts)

    def sample_grid(self, n: int, inset: float = 0.0):
        dr = max(inset, 1e-6 * (self.r1 - self.r0))
        rs = np.linspace(self.r0 + dr, self.r1 - dr, n)
        ps = np.linspace(0.0, TWO_PI, n, endpoint=False)
        R, P = np.meshgrid(rs, ps, indexing="ij")
        return np.stack([(R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()], axis=-1)

    def interior_point(self):
        return np.array([0.5 * (self.r0 + self.r1), 0.0])

    def relaxed(self, delta: float) -> "Annulus":
        return Annulus(max(self.r0 - delta, 0.0), self.r1 + delta)


@dataclass(frozen=True)
class AnnulusSector:
    """Cut annular sector r0 < r < r1, phi in (phi0, phi1), width <= 2*pi.

    Width exactly 2*pi gives the annulus minus the single ray phi = phi0:
    the reference-chart geometry of the disclination example.
    """

    r0: float
    r1: float
    phi0: float
    phi1: float

    def __post_init__(self):
        if not (0.0 <= self.r0 < self.r1):
            raise ConfigError(f"need 0 <= r0 < r1, got {self}")
        width = self.phi1 - self.phi0
        if not (0.0 < width <= TWO_PI + 1e-12):
            raise ConfigError(f"sector width must be in (0, 2*pi], got {width}")

    def lift(self, theta):
        return lift_angle(theta, self.phi0)

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = _point_radii(pts)
        phi = self.lift(np.arctan2(pts[..., 1], pts[..., 0]))
        return (r > self.r0) & (r < self.r1) & (phi > self.phi0) & (phi < self.phi1)

    def contains_segment(self, a, b) -> bool:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        ra, rb = float(np.hypot(*a)), float(np.hypot(*b))
        if not (self.r0 < ra < self.r1 and self.r0 < rb < self.r1):
            return False
        if _segment_min_radius(a, b) <= self.r0:
            return False
        pa = float(self.lift(np.arctan2(a[1], a[0])))
        if not (self.phi0 < pa < self.phi1):
            return False
        # signed arc swept from a to b; straight segments sweep monotonically
        delta = float(np.arctan2(a[0] * b[1] - a[1] * b[0], a @ b))
        pb = pa + delta
        return self.phi0 < pb < self.phi1

    def contains_triangle(self, verts) -> bool:
        verts = np.asarray(verts, dtype=float)
        for i in range(3):
            if not self.contains_segment(verts[i], verts[(i + 1) % 3]):
                return False
        return not _origin_in_triangle(verts)

    def sample_grid(self, n: int, inset: float = 0.0):
        dr = max(inset, 1e-6 * (self.r1 - self.r0))
        r_lo = self.r0 + dr
        dphi = max(2.0 * inset / max(r_lo, 1e-12), 1e-6 * (self.phi1 - self.phi0))
        rs = np.linspace(r_lo, self.r1 - dr, n)
        ps = np.linspace(self.phi0 + dphi, self.phi1 - dphi, n)
        R, P = np.meshgrid(rs, ps, indexing="ij")
        return np.stack([(R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()], axis=-1)

    def interior_point(self):
        r = 0.5 * (self.r0 + self.r1)
        p = 0.5 * (self.phi0 + self.phi1)
        return np.array([r * np.cos(p), r * np.sin(p)])

    def relaxed(self, delta: float) -> "AnnulusSector":
        # radial relaxation only: the angular cut stays strict
        return AnnulusSector(max(self.r0 - delta, 0.0), self.r1 + delta,
                             self.phi0, self.phi1)


def _origin_in_triangle(verts) -> bool:
    v = np.asarray(verts, dtype=float)
    s = 0
    for i in range(3):
        a, b = v[i], v[(i + 1) % 3]
        cr = a[0] * b[1] - a[1] * b[0]  # orientation of (a, b, origin-side)
        if cr > 0:
            s |= 1
        elif cr < 0:
            s |= 2
    return s != 3  # strictly inside or on an edge


def overlap_components(a, b):
    """Overlap of two domains as a list of domain descriptors.

    Supported pairs: Rect/Rect and any combination of Annulus and
    AnnulusSector (which is what bodies built here use). An annular
    pair can overlap in up to two angular components.
    """
    if isinstance(a, Rect) and isinstance(b, Rect):
        x0, x1 = max(a.x0, b.x0), min(a.x1, b.x1)
        y0, y1 = max(a.y0, b.y0), min(a.y1, b.y1)
        if x0 < x1 and y0 < y1:
            return [Rect(x0, x1, y0, y1)]
        return []

    ann = (Annulus, AnnulusSector)
    if isinstance(a, ann) and isinstance(b, ann):
        r0, r1 = max(a.r0, b.r0), min(a.r1, b.r1)
        if r0 >= r1:
            return []
        if isinstance(a, Annulus) and isinstance(b, Annulus):
            return [Annulus(r0, r1)]
        if isinstance(a, Annulus):
            return [AnnulusSector(r0, r1, b.phi0, b.phi1)]
        if isinstance(b, Annulus):
            return [AnnulusSector(r0, r1, a.phi0, a.phi1)]
        comps = []
        for k in (-1, 0, 1):
            lo = max(a.phi0, b.phi0 + k * TWO_PI)
            hi = min(a.phi1, b.phi1 + k * TWO_PI)
            if lo < hi:
                comps.append(AnnulusSector(r0, r1, lo, hi))
        return comps

    raise ConfigError(
        f"overlap of {type(a).__name__} and {type(b).__name__} is not supported"
    )
