"""Piecewise-flat homogenization experiments.

Pipeline: triangulate a smooth 2d metric over a rectangle with straight
chart segments carrying quadrature edge lengths, replace every triangle
by the Euclidean triangle with those lengths (a cone manifold whose
curvature concentrates as per-vertex angle deficits), and compare
transport / metric / energy quantities against the smooth field as the
mesh is refined. Discrete symmetry groups obstruct the implant step
exactly when some deficit is not a group rotation.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .archetypes import Archetype, SymmetryGroup, group_of, nearest_element
from .bodies import Body, build_disclination_body
from .domains import Rect
from .errors import (
    AnisotropyError,
    ConfigError,
    DomainError,
    IncompatibleDisclinationError,
    MeshError,
    MetricDegeneracyError,
    RoutingError,
    StripError,
)
from .geometry import (
    Curve,
    MetricField,
    det2,
    frobenius,
    inv2,
    rotation,
    rotation_angle,
    sqrtm_spd,
    transport_ode,
)

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# topology


@dataclass(frozen=True)
class Topology:
    edges: np.ndarray      # (E, 2) sorted vertex pairs
    tri_edges: np.ndarray  # (M, 3); edge j of triangle t joins corners j, j+1
    edge_tris: np.ndarray  # (E, 2) incident triangles, -1 where absent
    neighbors: np.ndarray  # (M, 3) triangle across edge j, -1 on boundary


def triangle_topology(triangles) -> Topology:
    tris = np.asarray(triangles, dtype=int)
    m = tris.shape[0]
    raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    raw_sorted = np.sort(raw, axis=1)
    edges, inverse = np.unique(raw_sorted, axis=0, return_inverse=True)
    tri_edges = inverse.reshape(3, m).T
    edge_tris = np.full((edges.shape[0], 2), -1, dtype=int)
    for t in range(m):
        for j in range(3):
            e = tri_edges[t, j]
            if edge_tris[e, 0] < 0:
                edge_tris[e, 0] = t
            elif edge_tris[e, 1] < 0:
                edge_tris[e, 1] = t
            else:
                raise MeshError("non-manifold edge")
    neighbors = np.full((m, 3), -1, dtype=int)
    for t in range(m):
        for j in range(3):
            a, b = edge_tris[tri_edges[t, j]]
            neighbors[t, j] = b if a == t else a
    return Topology(edges, tri_edges, edge_tris, neighbors)


def _corner_angles(triangles, tri_edges, lengths):
    """Per-corner angles by the law of cosines; strict triangle inequality."""
    L = lengths[tri_edges]  # (M, 3): L[:, j] is the edge joining corners j, j+1
    ang = np.empty_like(L)
    for c in range(3):
        opp = L[:, (c + 1) % 3]
        adj1 = L[:, c]
        adj2 = L[:, (c + 2) % 3]
        cosv = (adj1**2 + adj2**2 - opp**2) / (2.0 * adj1 * adj2)
        if np.any(cosv <= -1.0) or np.any(cosv >= 1.0):
            raise MetricDegeneracyError("edge lengths violate the strict triangle inequality")
        ang[:, c] = np.arccos(cosv)
    return ang


def _heron_areas(tri_edges, lengths):
    L = lengths[tri_edges]
    s = 0.5 * L.sum(axis=1)
    val = s * (s - L[:, 0]) * (s - L[:, 1]) * (s - L[:, 2])
    if np.any(val <= 0.0):
        raise MetricDegeneracyError("edge lengths violate the strict triangle inequality")
    return np.sqrt(val)


# ---------------------------------------------------------------------------
# metric triangulation


_GLQ = {}


def _gauss(n):
    if n not in _GLQ:
        x, w = np.polynomial.legendre.leggauss(n)
        _GLQ[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GLQ[n]


def _segment_lengths(fld: MetricField, a, d, nodes: int = 5):
    """Metric lengths of straight segments a -> a + d (vectorized)."""
    t, w = _gauss(nodes)
    pts = a[..., None, :] + t[:, None] * d[..., None, :]
    G = fld(pts)
    speed = np.sqrt(np.einsum("...i,...ij,...j->...", d[..., None, :], G, d[..., None, :]))
    return np.einsum("q,...q->...", w, speed)


@dataclass(frozen=True)
class MetricTriangulation:
    """Structured chart triangulation with metric edge lengths."""

    vertices: np.ndarray
    triangles: np.ndarray
    topology: Topology
    lengths: np.ndarray
    rect: Rect
    n: int
    fld: MetricField

    @property
    def max_edge_length(self) -> float:
        return float(self.lengths.max())


def triangulate_metric(fld: MetricField, rect: Rect, n: int,
                       nodes: int = 5, theta_min: float = 0.2) -> MetricTriangulation:
    """Structured triangulation of (rect, G) with quadrature edge lengths.

    All metric triangle angles must lie in [theta_min, pi - theta_min];
    an anisotropy error suggests a finer n or a different chart.
    """
    if n < 2:
        raise MeshError("n must be >= 2")
    if not isinstance(rect, Rect):
        raise ConfigError("metric triangulations are built over rectangles")
    xs = np.linspace(rect.x0, rect.x1, n + 1)
    ys = np.linspace(rect.y0, rect.y1, n + 1)
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
    tris = np.asarray(tris, dtype=int)
    topo = triangle_topology(tris)
    ea = verts[topo.edges[:, 0]]
    ed = verts[topo.edges[:, 1]] - ea
    lengths = _segment_lengths(fld, ea, ed, nodes=nodes)
    ang = _corner_angles(tris, topo.tri_edges, lengths)
    if ang.min() < theta_min or ang.max() > np.pi - theta_min:
        raise AnisotropyError(
            f"metric triangle angles in [{ang.min():.3f}, {ang.max():.3f}] exceed "
            f"the [{theta_min}, pi-{theta_min}] band; refine n or change charts"
        )
    return MetricTriangulation(verts, tris, topo, lengths, rect, n, fld)


# ---------------------------------------------------------------------------
# cone manifolds


@dataclass(frozen=True)
class ConeManifold:
    """Euclidean triangles glued along equal-length edges."""

    triangles: np.ndarray
    topology: Topology
    lengths: np.ndarray
    angles: np.ndarray          # (M, 3) per-corner
    areas: np.ndarray           # (M,) Heron
    total_angle: np.ndarray     # (V,) angle sum around each vertex
    boundary_vertex: np.ndarray  # (V,) bool
    deficits: np.ndarray        # (V,) 2*pi - total angle on interior, 0 on boundary
    vertices: Optional[np.ndarray] = None  # chart coordinates when available

    @property
    def interior(self):
        return ~self.boundary_vertex

    def pair_length(self, u: int, v: int) -> float:
        key = (min(u, v), max(u, v))
        table = self._pair_table()
        return table[key]

    def _pair_table(self):
        if not hasattr(self, "_table"):
            table = {}
            for e, (u, v) in enumerate(self.topology.edges):
                table[(int(u), int(v))] = float(self.lengths[e])
            object.__setattr__(self, "_table", table)
        return self._table


def flatten(tri) -> ConeManifold:
    """Replace each triangle by the Euclidean triangle with its edge lengths."""
    if isinstance(tri, MetricTriangulation):
        return flatten_from(tri.triangles, tri.topology, tri.lengths, tri.vertices)
    raise ConfigError("flatten expects a MetricTriangulation (or use flatten_from)")


def flatten_from(triangles, topology: Topology, lengths, vertices=None) -> ConeManifold:
    triangles = np.asarray(triangles, dtype=int)
    lengths = np.asarray(lengths, dtype=float)
    ang = _corner_angles(triangles, topology.tri_edges, lengths)
    areas = _heron_areas(topology.tri_edges, lengths)
    nv = int(triangles.max()) + 1
    total = np.zeros(nv)
    np.add.at(total, triangles.ravel(), ang.ravel())
    boundary = np.zeros(nv, dtype=bool)
    on_boundary = topology.edge_tris[:, 1] < 0
    boundary[topology.edges[on_boundary].ravel()] = True
    deficits = np.where(boundary, 0.0, TWO_PI - total)
    return ConeManifold(triangles, topology, lengths, ang, areas, total,
                        boundary, deficits,
                        None if vertices is None else np.asarray(vertices, dtype=float))


# ---------------------------------------------------------------------------
# transport by unfolding


def _place_third(pa, pb, lac, lbc):
    """Place the third vertex CCW of the directed edge a -> b."""
    d = pb - pa
    dist = float(np.hypot(*d))
    e = d / dist
    ep = np.array([-e[1], e[0]])
    x = (lac * lac + dist * dist - lbc * lbc) / (2.0 * dist)
    y2 = lac * lac - x * x
    y = np.sqrt(max(y2, 0.0))
    return pa + x * e + y * ep


def cone_transport(cone: ConeManifold, strip: Sequence[int]):
    """Parallel transport along a triangle strip by planar unfolding.

    The strip lists triangles sharing consecutive edges; a closed walk
    starts and ends with the same triangle. The result is the rotation
    mapping start-frame components to end-frame components: a closed
    strip once CCW around a cone vertex of deficit d gives R(d).
    """
    strip = [int(t) for t in strip]
    if len(strip) < 2:
        return np.eye(2)
    tris = cone.triangles
    t0 = strip[0]
    a, b, c = tris[t0]
    place = {
        int(a): np.zeros(2),
        int(b): np.array([cone.pair_length(a, b), 0.0]),
    }
    place[int(c)] = _place_third(place[int(a)], place[int(b)],
                                 cone.pair_length(a, c), cone.pair_length(b, c))
    init_a, init_b = place[int(a)].copy(), place[int(b)].copy()

    for prev, cur in zip(strip[:-1], strip[1:]):
        shared = set(map(int, tris[prev])) & set(map(int, tris[cur]))
        if len(shared) != 2:
            raise StripError(f"strip triangles {prev} and {cur} share no edge")
        # oriented shared edge as it appears in `cur` (opposite traversal
        # from `prev` for a consistently oriented surface)
        corners = [int(v) for v in tris[cur]]
        for j in range(3):
            s0, s1 = corners[j], corners[(j + 1) % 3]
            if {s0, s1} == shared:
                third = corners[(j + 2) % 3]
                break
        new_place = {
            s0: place[s0],
            s1: place[s1],
            third: _place_third(place[s0], place[s1],
                                cone.pair_length(s0, third),
                                cone.pair_length(s1, third)),
        }
        place = new_place

    if strip[-1] != strip[0]:
        raise StripError("closed transport needs a strip ending at its start triangle")
    fin_a, fin_b = place[int(a)], place[int(b)]
    theta = float(
        np.arctan2(*(fin_b - fin_a)[::-1]) - np.arctan2(*(init_b - init_a)[::-1])
    )
    return rotation(-theta)


# ---------------------------------------------------------------------------
# loop routing


def route_loop(mt: MetricTriangulation, curve: Curve, interior=None) -> list:
    """Snap a closed chart polyline to a closed triangle strip.

    Samples the polyline densely, perturbs samples slightly toward the
    loop's interior (tie-breaking at vertices), walks the sampled
    triangle sequence, and repairs vertex-jumps through the vertex fan.
    """
    if not curve.closed:
        raise RoutingError("routing needs a closed curve")
    rect, n = mt.rect, mt.n
    hx = (rect.x1 - rect.x0) / n
    hy = (rect.y1 - rect.y0) / n
    hmin = min(hx, hy)
    if interior is None:
        interior = curve.vertices[:-1].mean(axis=0)
    interior = np.asarray(interior, dtype=float)

    samples = []
    v = curve.vertices
    for a, b in zip(v[:-1], v[1:]):
        steps = max(int(np.ceil(np.linalg.norm(b - a) / (hmin / 8.0))), 1)
        t = np.arange(steps) / steps
        samples.append(a + t[:, None] * (b - a))
    samples.append(v[-1:])
    pts = np.concatenate(samples)
    if not np.all(rect.contains(pts)):
        raise DomainError("loop exits the triangulated domain")
    off = interior - pts
    nrm = np.linalg.norm(off, axis=1, keepdims=True)
    nrm[nrm == 0.0] = 1.0
    pts = pts + (1e-6 * hmin) * off / nrm

    ix = np.clip(((pts[:, 0] - rect.x0) / hx).astype(int), 0, n - 1)
    iy = np.clip(((pts[:, 1] - rect.y0) / hy).astype(int), 0, n - 1)
    u = (pts[:, 0] - rect.x0) / hx - ix
    w = (pts[:, 1] - rect.y0) / hy - iy
    tri_ids = 2 * (ix * n + iy) + (w > u)

    seq = [int(tri_ids[0])]
    for t in tri_ids[1:]:
        if int(t) != seq[-1]:
            seq.append(int(t))
    if seq[-1] != seq[0]:
        seq.append(seq[0])

    return _repair_strip(mt, seq)


def _repair_strip(mt: MetricTriangulation, seq: list) -> list:
    tris = mt.triangles
    incident = {}
    for t in range(tris.shape[0]):
        for vtx in tris[t]:
            incident.setdefault(int(vtx), []).append(t)
    out = [seq[0]]
    for nxt in seq[1:]:
        cur = out[-1]
        shared = set(map(int, tris[cur])) & set(map(int, tris[nxt]))
        if len(shared) == 2:
            out.append(nxt)
            continue
        if len(shared) == 1:
            vtx = shared.pop()
            path = _fan_path(mt, incident[vtx], cur, nxt)
            out.extend(path[1:])
            continue
        raise RoutingError(
            f"sampled triangles {cur} and {nxt} are not adjacent; refine sampling"
        )
    return out


def _fan_path(mt: MetricTriangulation, fan: list, start: int, goal: int) -> list:
    """Shortest edge-adjacent path between two triangles of a vertex fan."""
    fan_set = set(fan)
    prev = {start: None}
    dq = deque([start])
    while dq:
        cur = dq.popleft()
        if cur == goal:
            path = [cur]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return path[::-1]
        for nb in mt.topology.neighbors[cur]:
            if nb >= 0 and nb in fan_set and nb not in prev:
                prev[nb] = cur
                dq.append(nb)
    raise RoutingError("could not connect strip triangles around a vertex")


# ---------------------------------------------------------------------------
# implants


@dataclass(frozen=True)
class ConeImplant:
    """Cone manifold dressed with compatible implant frames.

    Per-triangle frames come from a spanning-tree unfolding of the dual
    graph, so transitions across tree edges are exactly the identity and
    every remaining transition is the rotation by the enclosed deficits;
    all transitions lie in the symmetry group exactly when every deficit
    does (the executable obstruction).
    """

    cone: ConeManifold
    archetype: Archetype
    group: SymmetryGroup
    frames: Optional[np.ndarray]       # (M, 2, 2), None for abstract cones
    tri_metrics: Optional[np.ndarray]  # (M, 2, 2) constant metric per triangle
    alphas: np.ndarray                 # per-vertex deficit / 2*pi
    report: dict

    def vertex_body(self, v: int, r1: float = 1.0) -> Body:
        """The standard single-disclination body of this vertex's deficit."""
        alpha = float(self.alphas[v])
        if not (0.0 < alpha < 1.0):
            raise ConfigError(f"vertex {v} has deficit outside (0, 2*pi)")
        return build_disclination_body(0.0, r1, alpha, self.archetype)


def deficit_group_report(cone: ConeManifold, group: SymmetryGroup) -> dict:
    """Distance of every interior deficit rotation from the symmetry group."""
    idx = np.flatnonzero(cone.interior)
    if group.continuous:
        dist = np.zeros(idx.size)
    else:
        els = group.elements()
        R = rotation(cone.deficits[idx])
        dist = frobenius(R[:, None, :, :] - els[None, :, :, :]).min(axis=1)
    return {
        "n_interior": int(idx.size),
        "max_distance": float(dist.max()) if idx.size else 0.0,
        "min_distance": float(dist.min()) if idx.size else 0.0,
        "max_deficit": float(np.abs(cone.deficits[idx]).max()) if idx.size else 0.0,
        "distances": dist,
        "vertex_ids": idx,
    }


def implant_cone_body(cone: ConeManifold, archetype: Archetype,
                      tol: float = 1e-8) -> ConeImplant:
    """Pull the single-disclination implants back onto a cone manifold.

    Requires an isotropic archetype, or every interior deficit within
    ``tol`` of a discrete-group rotation; otherwise raises the
    incompatible-disclination obstruction with the distance report.
    """
    grp = group_of(archetype)
    rep = deficit_group_report(cone, grp)
    n_failing = int(np.sum(rep["distances"] >= tol))
    report = {
        "passed": n_failing == 0,
        "n_failing": n_failing,
        "max_distance": rep["max_distance"],
        "min_distance": rep["min_distance"],
        "max_deficit": rep["max_deficit"],
        "n_interior": rep["n_interior"],
    }
    if n_failing > 0:
        raise IncompatibleDisclinationError(
            f"{n_failing} of {rep['n_interior']} deficits are not symmetry-group "
            f"rotations of {archetype.label} (max distance {rep['max_distance']:.4g})",
            distance=rep["max_distance"],
            report=report,
        )
    frames = tri_metrics = None
    if cone.vertices is not None:
        tri_metrics = _triangle_metrics(cone)
        frames = _tree_aligned_frames(cone, tri_metrics)
    alphas = cone.deficits / TWO_PI
    return ConeImplant(cone, archetype, grp, frames, tri_metrics, alphas, report)


def _triangle_metrics(cone: ConeManifold):
    """Constant per-triangle metric reproducing the metric edge lengths."""
    v = cone.vertices[cone.triangles]  # (M, 3, 2)
    L = cone.lengths[cone.topology.tri_edges]  # (M, 3)
    rows = np.empty((v.shape[0], 3, 3))
    rhs = np.empty((v.shape[0], 3))
    for j in range(3):
        e = v[:, (j + 1) % 3] - v[:, j]
        rows[:, j, 0] = e[:, 0] ** 2
        rows[:, j, 1] = 2.0 * e[:, 0] * e[:, 1]
        rows[:, j, 2] = e[:, 1] ** 2
        rhs[:, j] = L[:, j] ** 2
    sol = np.linalg.solve(rows, rhs[..., None])[..., 0]
    G = np.empty((v.shape[0], 2, 2))
    G[:, 0, 0] = sol[:, 0]
    G[:, 0, 1] = sol[:, 1]
    G[:, 1, 0] = sol[:, 1]
    G[:, 1, 1] = sol[:, 2]
    if np.any(sol[:, 0] <= 0.0) or np.any(det2(G) <= 0.0):
        raise MetricDegeneracyError("per-triangle metric is not positive-definite")
    return G


def _tree_aligned_frames(cone: ConeManifold, tri_metrics):
    """Unfold all triangles through a dual BFS tree; frames are the linear parts."""
    tris = cone.triangles
    verts = cone.vertices
    m = tris.shape[0]
    placements = np.empty((m, 3, 2))
    placed = np.zeros(m, dtype=bool)

    a, b, c = (int(x) for x in tris[0])
    pa = np.zeros(2)
    pb = np.array([cone.pair_length(a, b), 0.0])
    pc = _place_third(pa, pb, cone.pair_length(a, c), cone.pair_length(b, c))
    placements[0] = [pa, pb, pc]
    placed[0] = True

    dq = deque([0])
    while dq:
        t = dq.popleft()
        pos = {int(tris[t, k]): placements[t, k] for k in range(3)}
        for nb in cone.topology.neighbors[t]:
            if nb < 0 or placed[nb]:
                continue
            corners = [int(x) for x in tris[nb]]
            shared = set(corners) & set(int(x) for x in tris[t])
            for j in range(3):
                s0, s1 = corners[j], corners[(j + 1) % 3]
                if {s0, s1} == shared:
                    third = corners[(j + 2) % 3]
                    break
            p3 = _place_third(pos[s0], pos[s1],
                              cone.pair_length(s0, third),
                              cone.pair_length(s1, third))
            lookup = {s0: pos[s0], s1: pos[s1], third: p3}
            placements[nb] = [lookup[k] for k in corners]
            placed[nb] = True
            dq.append(nb)
    if not placed.all():
        raise MeshError("triangulation is not edge-connected")

    xv = verts[tris]
    D = np.stack([xv[:, 1] - xv[:, 0], xv[:, 2] - xv[:, 0]], axis=-1)
    Pd = np.stack([placements[:, 1] - placements[:, 0],
                   placements[:, 2] - placements[:, 0]], axis=-1)
    return Pd @ inv2(D)


def implant_energy(implant: ConeImplant, positions) -> float:
    """Energy of a piecewise-affine map over the implanted cone body."""
    if implant.frames is None:
        raise ConfigError("implant has no chart embedding")
    cone = implant.cone
    xv = cone.vertices[cone.triangles]
    yv = np.asarray(positions, dtype=float)[cone.triangles]
    D = np.stack([xv[:, 1] - xv[:, 0], xv[:, 2] - xv[:, 0]], axis=-1)
    A = np.stack([yv[:, 1] - yv[:, 0], yv[:, 2] - yv[:, 0]], axis=-1) @ inv2(D)
    B = A @ inv2(implant.frames)
    return float(np.sum(implant.archetype(B) * cone.areas))


# ---------------------------------------------------------------------------
# convergence experiments


@dataclass(frozen=True)
class ConvergenceReport:
    quantity: str
    ns: tuple
    errors: tuple
    observed_order: float
    details: dict = field(default_factory=dict)

    def rows(self):
        return [
            {"n": n, "quantity": self.quantity, "error": e,
             "observed_order": self.observed_order}
            for n, e in zip(self.ns, self.errors)
        ]


def observed_order(ns, errors) -> float:
    """Least-squares slope of log error against log(1/n)."""
    ns = np.asarray(ns, dtype=float)
    errors = np.maximum(np.asarray(errors, dtype=float), 1e-16)
    slope = np.polyfit(np.log(1.0 / ns), np.log(errors), 1)[0]
    return float(slope)


def transport_convergence(fld: MetricField, loop: Curve, ns,
                          rect: Rect, theta_min: float = 0.2,
                          ode_steps: int = 2000) -> ConvergenceReport:
    """Cone transport around the loop vs smooth parallel transport.

    Both holonomies are expressed in the orthonormal frame at the base
    point (the cone side is a rotation by construction) and compared in
    Frobenius norm.
    """
    Pi = transport_ode(fld, loop, n_steps=ode_steps)
    E0 = sqrtm_spd(fld(loop.base_point))
    S = E0 @ Pi @ inv2(E0)
    ref_angle = rotation_angle(S)
    errors, angles = [], []
    for n in ns:
        mt = triangulate_metric(fld, rect, int(n), theta_min=theta_min)
        cone = flatten(mt)
        strip = route_loop(mt, loop)
        Rn = cone_transport(cone, strip)
        errors.append(float(frobenius(Rn - S)))
        angles.append(rotation_angle(Rn))
    return ConvergenceReport(
        "transport", tuple(int(n) for n in ns), tuple(errors),
        observed_order(ns, errors),
        {"reference_angle": ref_angle, "cone_angles": angles},
    )


def _relaxed_polyline_lengths(fld: MetricField, a, b, nodes: int = 10,
                              iters: int = 48):
    """Two-piece polyline through an optimized midpoint displacement.

    Minimizes len(a, m) + len(m, b) over displacements of the chord
    midpoint along the chord normal (vectorized golden-section search).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    L = np.linalg.norm(d, axis=-1, keepdims=True)
    nrm = np.stack([-d[..., 1], d[..., 0]], axis=-1) / L
    mid = 0.5 * (a + b)

    def f(s):
        m = mid + s[..., None] * nrm
        return (_segment_lengths(fld, a, m - a, nodes)
                + _segment_lengths(fld, m, b - m, nodes))

    lo = -0.3 * L[..., 0]
    hi = 0.3 * L[..., 0]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    for _ in range(iters):
        c = hi - invphi * (hi - lo)
        e = lo + invphi * (hi - lo)
        right = f(c) > f(e)  # minimum sits in [c, hi]
        lo = np.where(right, c, lo)
        hi = np.where(right, hi, e)
    return f(0.5 * (lo + hi))


def metric_convergence(fld: MetricField, ns, rect: Rect,
                       theta_min: float = 0.2) -> ConvergenceReport:
    """Edge-length gap between chart chords and refined geodesic proxies.

    Per edge the gap is the larger of the 5- vs 20-node quadrature
    mismatch and the chord-vs-relaxed-midpoint-polyline length drop,
    relative to the edge length; reports the max gap per n.
    """
    errors = []
    for n in ns:
        mt = triangulate_metric(fld, rect, int(n), theta_min=theta_min)
        ea = mt.vertices[mt.topology.edges[:, 0]]
        eb = mt.vertices[mt.topology.edges[:, 1]]
        L5 = mt.lengths
        L20 = _segment_lengths(fld, ea, eb - ea, nodes=20)
        Lrelax = _relaxed_polyline_lengths(fld, ea, eb)
        gap = np.maximum(np.abs(L5 - L20), np.abs(L5 - Lrelax)) / L20
        errors.append(float(gap.max()))
    return ConvergenceReport("metric", tuple(int(n) for n in ns), tuple(errors),
                             observed_order(ns, errors))


@dataclass(frozen=True)
class TestMap:
    """Smooth configuration with analytic derivative, for energy oracles."""

    f: Callable
    df: Callable
    name: str = "map"


def identity_map() -> TestMap:
    def f(p):
        return np.asarray(p, dtype=float).copy()

    def df(p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.eye(2), p.shape[:-1] + (2, 2)).copy()

    return TestMap(f, df, "identity")


def upper_frame(G):
    """Upper-triangular frame U with U^T U = G (a non-rotation gauge)."""
    G = np.asarray(G, dtype=float)
    g11 = G[..., 0, 0]
    d = det2(G)
    U = np.zeros_like(G)
    U[..., 0, 0] = np.sqrt(g11)
    U[..., 0, 1] = G[..., 0, 1] / np.sqrt(g11)
    U[..., 1, 1] = np.sqrt(d / g11)
    return U


def smooth_energy(fld: MetricField, archetype: Archetype, test_map: TestMap,
                  rect: Rect, nodes: int = 48) -> float:
    """High-order tensor quadrature of the smooth-body energy (the oracle)."""
    t, w = _gauss(nodes)
    xs = rect.x0 + (rect.x1 - rect.x0) * t
    ys = rect.y0 + (rect.y1 - rect.y0) * t
    wx = w * (rect.x1 - rect.x0)
    wy = w * (rect.y1 - rect.y0)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    W2 = np.outer(wx, wy).ravel()
    G = fld(pts)
    P = sqrtm_spd(G)
    B = test_map.df(pts) @ inv2(P)
    dens = archetype(B) * np.sqrt(det2(G))
    return float(np.sum(W2 * dens))


def energy_convergence(fld: MetricField, archetype: Archetype, ns, rect: Rect,
                       test_map: Optional[TestMap] = None,
                       theta_min: float = 0.2,
                       oracle_nodes: int = 48) -> ConvergenceReport:
    """Cone-implant energies of a fixed smooth map vs the smooth energy.

    Also assembles a torsion-carrying single-chart realization of the
    same metric (upper-triangular frames, P^T P = G) on the same meshes;
    both must converge to the same smooth value. Isotropic archetypes
    only: discrete groups are excluded by the obstruction.
    """
    grp = group_of(archetype)
    if not grp.continuous:
        raise IncompatibleDisclinationError(
            "energy homogenization requires an isotropic archetype "
            f"({archetype.label} has a discrete group)",
            distance=float("nan"),
        )
    if test_map is None:
        test_map = identity_map()
    E = smooth_energy(fld, archetype, test_map, rect, nodes=oracle_nodes)
    errors, cone_vals, torsion_vals, torsion_errors = [], [], [], []
    for n in ns:
        mt = triangulate_metric(fld, rect, int(n), theta_min=theta_min)
        cone = flatten(mt)
        implant = implant_cone_body(cone, archetype)
        En = implant_energy(implant, test_map.f(mt.vertices))
        cone_vals.append(En)
        errors.append(abs(En - E) / abs(E))

        bary = mt.vertices[mt.triangles].mean(axis=1)
        U = upper_frame(fld(bary))
        xv = mt.vertices[mt.triangles]
        D = np.stack([xv[:, 1] - xv[:, 0], xv[:, 2] - xv[:, 0]], axis=-1)
        yv = test_map.f(mt.vertices)[mt.triangles]
        A = np.stack([yv[:, 1] - yv[:, 0], yv[:, 2] - yv[:, 0]], axis=-1) @ inv2(D)
        areas = 0.5 * np.abs(det2(D))
        Et = float(np.sum(archetype(A @ inv2(U)) * np.abs(det2(U)) * areas))
        torsion_vals.append(Et)
        torsion_errors.append(abs(Et - E) / abs(E))
    return ConvergenceReport(
        "energy", tuple(int(n) for n in ns), tuple(errors),
        observed_order(ns, errors),
        {
            "smooth_energy": E,
            "cone_energies": cone_vals,
            "torsion_energies": torsion_vals,
            "torsion_errors": torsion_errors,
            "map": test_map.name,
        },
    )


# ---------------------------------------------------------------------------
# curvature comparisons


def _require_curvature(fld: MetricField):
    if fld.curvature is None:
        raise ConfigError("metric field carries no curvature function")


def deficit_curvature_report(fld: MetricField, cone: ConeManifold) -> dict:
    """Per-vertex deficit vs curvature integral over the barycentric dual cell."""
    _require_curvature(fld)
    if cone.vertices is None:
        raise ConfigError("cone manifold has no chart embedding")
    verts = cone.vertices
    tris = cone.triangles
    nv = verts.shape[0]
    integral = np.zeros(nv)
    pv = verts[tris]  # (M, 3, 2)
    ctr = pv.mean(axis=1)
    for c in range(3):
        p0 = pv[:, c]
        m1 = 0.5 * (p0 + pv[:, (c + 1) % 3])
        m2 = 0.5 * (p0 + pv[:, (c + 2) % 3])
        contrib = _tri_curvature_integral(fld, p0, m1, ctr) + \
            _tri_curvature_integral(fld, p0, ctr, m2)
        np.add.at(integral, tris[:, c], contrib)
    idx = np.flatnonzero(cone.interior)
    d = cone.deficits[idx]
    I = integral[idx]
    denom = np.maximum(np.abs(I), 1e-14)
    rel = np.abs(d - I) / denom
    flat_scale = max(float(np.abs(I).max()), 1e-14)
    return {
        "max_rel_error": float(rel.max()) if idx.size else 0.0,
        "sum_deficits": float(d.sum()),
        "sum_curvature": float(I.sum()),
        "interior_curvature_gap": float(abs(d.sum() - I.sum())),
        "n_interior": int(idx.size),
        "max_abs_integral": flat_scale,
    }


def _tri_curvature_integral(fld: MetricField, p, q, r):
    """Edge-midpoint rule (degree 2) for K dA over chart triangles."""
    _require_curvature(fld)
    mids = np.stack([0.5 * (p + q), 0.5 * (q + r), 0.5 * (r + p)], axis=-2)
    dens = fld.curvature(mids) * np.sqrt(det2(fld(mids)))
    area = 0.5 * np.abs(
        (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
        - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])
    )
    return area * dens.mean(axis=-1)


def gauss_bonnet_report(fld: MetricField, cone: ConeManifold, rect: Rect,
                        nodes: int = 48) -> dict:
    """Discrete vs smooth Gauss-Bonnet on the triangulated rectangle.

    LHS: interior deficits plus boundary turning of the cone manifold.
    RHS: curvature integral + geodesic-curvature integral of the
    chart-straight boundary + metric corner angles, by quadrature.
    Conformal metrics only (the boundary term is d_n log(lambda) there).
    """
    _require_curvature(fld)
    probe = fld(rect.sample_grid(5))
    if (np.abs(probe[..., 0, 1]).max() > 1e-10
            or np.abs(probe[..., 0, 0] - probe[..., 1, 1]).max() > 1e-10):
        raise ConfigError("Gauss-Bonnet check supports conformal metrics only")

    idx = np.flatnonzero(cone.interior)
    sum_deficits = float(cone.deficits[idx].sum())
    bidx = np.flatnonzero(cone.boundary_vertex)
    turning = float(np.sum(np.pi - cone.total_angle[bidx]))

    t, w = _gauss(nodes)
    xs = rect.x0 + (rect.x1 - rect.x0) * t
    ys = rect.y0 + (rect.y1 - rect.y0) * t
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    W2 = np.outer(w * (rect.x1 - rect.x0), w * (rect.y1 - rect.y0)).ravel()
    curv_int = float(np.sum(W2 * fld.curvature(pts) * det2(fld(pts)) ** 0.5))

    kg_int = 0.0
    sides = [
        (np.stack([xs, np.full_like(xs, rect.y0)], axis=-1), np.array([0.0, -1.0]),
         w * (rect.x1 - rect.x0)),
        (np.stack([np.full_like(ys, rect.x1), ys], axis=-1), np.array([1.0, 0.0]),
         w * (rect.y1 - rect.y0)),
        (np.stack([xs, np.full_like(xs, rect.y1)], axis=-1), np.array([0.0, 1.0]),
         w * (rect.x1 - rect.x0)),
        (np.stack([np.full_like(ys, rect.x0), ys], axis=-1), np.array([-1.0, 0.0]),
         w * (rect.y1 - rect.y0)),
    ]
    for bpts, nrm, bw in sides:
        du = _log_factor_gradient(fld, bpts)
        kg_int += float(np.sum(bw * (du @ nrm)))

    corner_sum = 4 * (np.pi / 2.0)  # conformal metrics preserve chart angles
    lhs = sum_deficits + turning
    rhs = curv_int + kg_int + corner_sum
    return {
        "sum_interior_deficits": sum_deficits,
        "boundary_turning": turning,
        "lhs": lhs,
        "curvature_integral": curv_int,
        "kg_integral": kg_int,
        "corner_angles": corner_sum,
        "rhs": rhs,
        "residual": abs(lhs - rhs),
    }


def _log_factor_gradient(fld: MetricField, pts, h: float = 1e-6):
    """grad of u = log(lambda) for conformal metrics, via hook or FD."""
    pts = np.asarray(pts, dtype=float)
    if fld.grad is not None:
        dG = fld.grad(pts)
        g11 = fld(pts)[..., 0, 0]
        return dG[..., :, 0, 0] / (2.0 * g11[..., None])
    out = np.empty_like(pts)
    for k, e in enumerate((np.array([h, 0.0]), np.array([0.0, h]))):
        gp = fld(pts + e)[..., 0, 0]
        gm = fld(pts - e)[..., 0, 0]
        out[..., k] = (np.log(gp) - np.log(gm)) / (4.0 * h)
    return out
