"""Piecewise-affine configurations on triangle meshes and their elastic energy.

First-order elements: the configuration is affine per triangle, its
derivative A_T is constant, and the triangle contributes
W(A_T P(c_T)^{-1}) |det P(c_T)| area(T) with c_T the barycenter. The
assembled gradient is the exact chain-rule gradient of the discrete
energy. Minimization is a compact limited-memory quasi-Newton loop with
Armijo backtracking (deterministic; no randomized state).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .archetypes import grad_archetype
from .bodies import Body
from .domains import Annulus, AnnulusSector, Rect
from .errors import MeshError, StalledDescentError
from .geometry import det2, inv2

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TriMesh:
    """Positively oriented triangles over a chart domain."""

    vertices: np.ndarray          # (N, 2)
    triangles: np.ndarray         # (M, 3) int
    boundary: np.ndarray          # (N,) bool
    domain: object
    chart_index: Optional[np.ndarray] = None  # (M,) per-triangle chart

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def barycenters(self):
        return self.vertices[self.triangles].mean(axis=1)

    def areas(self):
        v = self.vertices[self.triangles]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _check_mesh(vertices, triangles, boundary, domain, chart_index=None) -> TriMesh:
    mesh = TriMesh(vertices, triangles, boundary, domain, chart_index)
    areas = mesh.areas()
    if np.any(areas <= 1e-12):
        raise MeshError(f"degenerate or misoriented triangle (min area {areas.min():.3g})")
    return mesh


def build_mesh(domain, resolution: int) -> TriMesh:
    """Structured triangulation: 2 * resolution^2 triangles."""
    if resolution < 2:
        raise MeshError("resolution must be >= 2")
    n = resolution
    if isinstance(domain, Rect):
        xs = np.linspace(domain.x0, domain.x1, n + 1)
        ys = np.linspace(domain.y0, domain.y1, n + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        verts = np.stack([X.ravel(), Y.ravel()], axis=-1)
        vid = lambda i, j: i * (n + 1) + j
        tris = []
        for i in range(n):
            for j in range(n):
                a, b = vid(i, j), vid(i + 1, j)
                c, d = vid(i + 1, j + 1), vid(i, j + 1)
                tris.append((a, b, c))
                tris.append((a, c, d))
        bmask = np.zeros(verts.shape[0], dtype=bool)
        I, J = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        bmask[((I == 0) | (I == n) | (J == 0) | (J == n)).ravel()] = True
        return _check_mesh(verts, np.asarray(tris, dtype=int), bmask, domain)

    if isinstance(domain, Annulus):
        if domain.r0 <= 0.0:
            raise MeshError("annular mesh needs a positive inner radius")
        rs = np.linspace(domain.r0, domain.r1, n + 1)
        thetas = TWO_PI * np.arange(n) / n
        R, T = np.meshgrid(rs, thetas, indexing="ij")
        verts = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=-1)
        vid = lambda i, j: i * n + (j % n)
        tris = []
        for i in range(n):
            for j in range(n):
                a, b = vid(i, j), vid(i + 1, j)
                c, d = vid(i + 1, j + 1), vid(i, j + 1)
                tris.append((a, b, c))
                tris.append((a, c, d))
        bmask = np.zeros(verts.shape[0], dtype=bool)
        bmask[: n] = True           # inner ring
        bmask[n * n:] = True        # outer ring
        return _check_mesh(verts, np.asarray(tris, dtype=int), bmask, domain)

    if isinstance(domain, AnnulusSector):
        if domain.r0 <= 0.0:
            raise MeshError("annular mesh needs a positive inner radius")
        pad = 1e-9 * (domain.phi1 - domain.phi0)
        rs = np.linspace(domain.r0, domain.r1, n + 1)
        ps = np.linspace(domain.phi0 + pad, domain.phi1 - pad, n + 1)
        R, T = np.meshgrid(rs, ps, indexing="ij")
        verts = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=-1)
        vid = lambda i, j: i * (n + 1) + j
        tris = []
        for i in range(n):
            for j in range(n):
                a, b = vid(i, j), vid(i + 1, j)
                c, d = vid(i + 1, j + 1), vid(i, j + 1)
                tris.append((a, b, c))
                tris.append((a, c, d))
        bmask = np.zeros(verts.shape[0], dtype=bool)
        I, J = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        bmask[((I == 0) | (I == n) | (J == 0) | (J == n)).ravel()] = True
        return _check_mesh(verts, np.asarray(tris, dtype=int), bmask, domain)

    raise MeshError(f"cannot mesh domain of type {type(domain).__name__}")


def mesh_for_body(body: Body, resolution: int) -> TriMesh:
    """Mesh the body region and assign every triangle a containing chart."""
    mesh = build_mesh(body.region, resolution)
    return TriMesh(mesh.vertices, mesh.triangles, mesh.boundary, mesh.domain,
                   assign_charts(body, mesh))


def _domain_scale(domain) -> float:
    if isinstance(domain, Rect):
        return max(domain.x1 - domain.x0, domain.y1 - domain.y0)
    return domain.r1 - domain.r0


# ---------------------------------------------------------------------------
# energy assembly


class EnergyAssembly:
    """Precomputed per-triangle data for repeated energy/gradient evaluation."""

    def __init__(self, body: Body, mesh: TriMesh):
        if mesh.chart_index is None:
            mesh = TriMesh(mesh.vertices, mesh.triangles, mesh.boundary,
                           mesh.domain, assign_charts(body, mesh))
        self.body = body
        self.mesh = mesh
        v = mesh.vertices[mesh.triangles]
        D = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)  # (M,2,2)
        self.invD = inv2(D)
        bary = mesh.barycenters()
        P = np.empty((mesh.n_triangles, 2, 2))
        for k, chart in enumerate(body.charts):
            m = mesh.chart_index == k
            if np.any(m):
                P[m] = chart.frames(bary[m])
        self.Pinv = inv2(P)
        self.weights = np.abs(det2(P)) * mesh.areas()

    def deformation(self, positions):
        y = positions[self.mesh.triangles]
        Yd = np.stack([y[:, 1] - y[:, 0], y[:, 2] - y[:, 0]], axis=-1)
        return Yd @ self.invD

    def energy(self, positions) -> float:
        B = self.deformation(positions) @ self.Pinv
        w = self.body.archetype(B)
        if not np.all(np.isfinite(w)):
            return float("inf")
        return float(np.sum(w * self.weights))

    def gradient(self, positions):
        B = self.deformation(positions) @ self.Pinv
        GB = grad_archetype(self.body.archetype, B)
        H = (GB @ np.swapaxes(self.Pinv, -1, -2)
             @ np.swapaxes(self.invD, -1, -2)) * self.weights[:, None, None]
        g = np.zeros_like(positions)
        tri = self.mesh.triangles
        np.add.at(g, tri[:, 1], H[:, :, 0])
        np.add.at(g, tri[:, 2], H[:, :, 1])
        np.add.at(g, tri[:, 0], -(H[:, :, 0] + H[:, :, 1]))
        return g


def _min_edge_radius(mesh: TriMesh) -> float:
    """Smallest distance from the origin to any mesh edge (vectorized)."""
    v = mesh.vertices[mesh.triangles]
    r = np.inf
    for i in range(3):
        a = v[:, i]
        d = v[:, (i + 1) % 3] - a
        dd = np.einsum("ij,ij->i", d, d)
        t = np.clip(-np.einsum("ij,ij->i", a, d) / np.maximum(dd, 1e-300), 0.0, 1.0)
        p = a + t[:, None] * d
        r = min(r, float(np.linalg.norm(p, axis=1).min()))
    return r


def assign_charts(body: Body, mesh: TriMesh):
    """Lowest chart whose (radially relaxed) domain contains each triangle.

    Polygonal annuli poke into the hole by the inner-ring chord sagitta;
    chart domains are relaxed by the measured amount so that every mesh
    triangle finds its chart.
    """
    scale = _domain_scale(body.region)
    delta = 1e-9 * scale
    if isinstance(body.region, (Annulus, AnnulusSector)) and body.region.r0 > 0.0:
        delta = max(delta, body.region.r0 - _min_edge_radius(mesh) + 1e-12 * scale)
    relaxed = [c.domain.relaxed(delta) for c in body.charts]
    chart_index = np.full(mesh.n_triangles, -1, dtype=int)
    tri_pts = mesh.vertices[mesh.triangles]
    for t in range(mesh.n_triangles):
        for k, dom in enumerate(relaxed):
            if dom.contains_triangle(tri_pts[t]):
                chart_index[t] = k
                break
    if np.any(chart_index < 0):
        raise MeshError("some mesh triangles are not contained in any chart")
    return chart_index


def assemble_energy(body: Body, mesh: TriMesh, positions) -> float:
    return EnergyAssembly(body, mesh).energy(np.asarray(positions, dtype=float))


def assemble_gradient(body: Body, mesh: TriMesh, positions):
    return EnergyAssembly(body, mesh).gradient(np.asarray(positions, dtype=float))


# ---------------------------------------------------------------------------
# boundary conditions and minimization


@dataclass(frozen=True)
class BoundaryCondition:
    indices: np.ndarray   # pinned vertex ids
    targets: np.ndarray   # (K, 2) pinned positions

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        tgt = np.asarray(self.targets, dtype=float).reshape(-1, 2)
        if idx.shape[0] != tgt.shape[0]:
            raise MeshError("boundary condition needs one target per pinned vertex")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "targets", tgt)


def bc_none() -> BoundaryCondition:
    return BoundaryCondition(np.zeros(0, dtype=int), np.zeros((0, 2)))


def bc_identity(mesh: TriMesh) -> BoundaryCondition:
    idx = np.flatnonzero(mesh.boundary)
    return BoundaryCondition(idx, mesh.vertices[idx])


def bc_affine(mesh: TriMesh, M) -> BoundaryCondition:
    idx = np.flatnonzero(mesh.boundary)
    return BoundaryCondition(idx, mesh.vertices[idx] @ np.asarray(M, dtype=float).T)


@dataclass(frozen=True)
class MinimizeOptions:
    gtol: float = 1e-8
    max_iter: int = 5000
    memory: int = 10
    armijo: float = 1e-4
    max_backtracks: int = 60
    x0: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MinimizeResult:
    positions: np.ndarray
    energy: float
    iterations: int
    grad_norm: float
    converged: bool


def minimize(body: Body, mesh: TriMesh, bc: Optional[BoundaryCondition] = None,
             opts: MinimizeOptions = MinimizeOptions()) -> MinimizeResult:
    """L-BFGS descent of the assembled energy under pinned vertices.

    Terminates when the free-vertex gradient norm drops below
    ``opts.gtol`` or after ``opts.max_iter`` iterations; the energy is
    non-increasing across accepted steps (Armijo backtracking). A failed
    line search raises StalledDescentError carrying the last iterate.
    """
    if bc is None:
        bc = bc_none()
    asm = EnergyAssembly(body, mesh)
    x = mesh.vertices.copy() if opts.x0 is None else np.array(opts.x0, dtype=float)
    if x.shape != mesh.vertices.shape:
        raise MeshError("starting configuration has wrong shape")
    x[bc.indices] = bc.targets
    free = np.ones(mesh.n_vertices, dtype=bool)
    free[bc.indices] = False

    def fg(positions):
        e = asm.energy(positions)
        g = asm.gradient(positions)
        g[~free] = 0.0
        return e, g

    e, g = fg(x)
    if not np.isfinite(e):
        raise StalledDescentError("infeasible starting configuration", positions=x,
                                  energy=e)
    s_hist, y_hist, rho_hist = [], [], []
    it = 0
    gn = float(np.linalg.norm(g))
    while gn >= opts.gtol and it < opts.max_iter:
        d = _lbfgs_direction(g, s_hist, y_hist, rho_hist)
        slope = float(np.sum(g * d))
        if slope >= 0.0:  # not a descent direction: reset to steepest descent
            s_hist, y_hist, rho_hist = [], [], []
            d = -g
            slope = -gn * gn
        t = 1.0
        g_new = None
        accepted = False
        ulp = np.finfo(float).eps * (1.0 + abs(e))
        for _ in range(opts.max_backtracks):
            x_new = x + t * d
            e_new = asm.energy(x_new)
            if np.isfinite(e_new) and e_new <= e + opts.armijo * t * slope:
                accepted = True
                break
            if np.isfinite(e_new) and abs(t * slope) <= 4.0 * ulp and e_new <= e + 4.0 * ulp:
                # predicted decrease below the energy's resolution: accept on
                # gradient decrease instead (keeps descending to the critical
                # point once f-differences are pure rounding)
                g_new = asm.gradient(x_new)
                g_new[~free] = 0.0
                if np.linalg.norm(g_new) < gn:
                    accepted = True
                    break
                g_new = None
            t *= 0.5
        if not accepted:
            if abs(slope) <= 64.0 * ulp:
                break  # stationary within arithmetic resolution
            raise StalledDescentError(
                f"line search failed at iteration {it} (energy {e:.6g})",
                positions=x, energy=e,
            )
        if g_new is None:
            g_new = asm.gradient(x_new)
            g_new[~free] = 0.0
        s = (x_new - x).ravel()
        yv = (g_new - g).ravel()
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            s_hist.append(s)
            y_hist.append(yv)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > opts.memory:
                s_hist.pop(0),  y_hist.pop(0), rho_hist.pop(0)
        x, e, g = x_new, float(e_new), g_new
        gn = float(np.linalg.norm(g))
        it += 1
    return MinimizeResult(x, e, it, gn, gn < opts.gtol)


def _lbfgs_direction(g, s_hist, y_hist, rho_hist):
    q = g.ravel().copy()
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q.reshape(g.shape)
