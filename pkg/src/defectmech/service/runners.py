"""Translate validated requests into core-library calls and JSON-able reports."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..archetypes import detect_group, make_archetype
from ..bodies import (
    Body,
    build_disclination_body,
    build_dislocation_body,
    build_trivial_body,
    induced_metric,
    validate_body,
)
from ..defects import burgers_vector, disclination_content, verify_content_in_group
from ..domains import Rect
from ..elasticity import (
    MinimizeOptions,
    bc_affine,
    bc_identity,
    bc_none,
    mesh_for_body,
    minimize,
)
from ..errors import ConfigError, DomainError
from ..geometry import (
    Curve,
    MetricField,
    circle,
    conformal_metric,
    flat_metric,
    inv2,
    rotation_angle,
    sphere_cap_metric,
    transport_ode,
)
from ..homogenization import (
    deficit_curvature_report,
    energy_convergence,
    flatten,
    gauss_bonnet_report,
    implant_cone_body,
    metric_convergence,
    transport_convergence,
    triangulate_metric,
)
from ..tolerances import DEFAULT_TOLERANCES, Tolerances
from . import schemas as S

# default experiment domains: loop runs need room for the radius-0.8
# circle, obstruction runs keep deficits small at n = 8
LOOP_DOMAIN = Rect(-1.1, 1.1, -1.1, 1.1)
OBSTRUCTION_DOMAIN = Rect(-0.75, 0.75, -0.75, 0.75)


def tolerances_from(overrides: dict) -> Tolerances:
    try:
        return DEFAULT_TOLERANCES.with_overrides(**overrides)
    except (KeyError, ValueError) as ex:
        raise ConfigError(str(ex)) from ex


def body_from_spec(spec, tol: Tolerances) -> Body:
    arch = make_archetype(spec.archetype.kind, spec.archetype.n)
    if spec.body == "disclination":
        return build_disclination_body(spec.r0, spec.r1, spec.alpha, arch, tol)
    if spec.body == "dislocation":
        return build_dislocation_body(spec.eps, spec.r1, arch, tol)
    return build_trivial_body(arch, Rect(spec.x0, spec.x1, spec.y0, spec.y1), tol)


def loop_from_spec(spec, body: Body) -> Curve:
    region = body.region
    if spec == "core":
        if not hasattr(region, "r0"):
            raise ConfigError("'core' loops need an annular body")
        return circle(radius=0.5 * (region.r0 + region.r1), segments=256)
    if isinstance(spec, S.CircleLoopSpec):
        radius = spec.radius
        if radius is None:
            if not hasattr(region, "r0"):
                raise ConfigError("default loop radius needs an annular body")
            radius = 0.5 * (region.r0 + region.r1)
        return circle(center=spec.center, radius=radius, segments=spec.segments,
                      base_angle=spec.base_angle, ccw=spec.ccw)
    pts = np.asarray(spec.vertices, dtype=float)
    if not np.allclose(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[:1]])
    return Curve(pts)


def metric_from_spec(spec, domain: Rect) -> MetricField:
    if spec == "flat":
        return flat_metric(domain)
    if spec == "sphere-cap":
        return sphere_cap_metric(domain)
    return conformal_metric(domain, c=spec.c, b=spec.b)


def _mat(a):
    return np.asarray(a, dtype=float).tolist()


def run_validate(req: S.ValidateRequest) -> dict:
    tol = tolerances_from(req.tolerances)
    body = body_from_spec(req.body, tol)
    rep = validate_body(body)
    grp = body.group
    return {
        "valid": rep.valid,
        "covered": rep.covered,
        "closed": [
            {"chart": c.name, "max_residual": r.max_residual, "pass": r.passed}
            for c, r in zip(body.charts, rep.closedness)
        ],
        "compatible": [
            {
                "max_distance": r.max_distance,
                "pass": r.passed,
                "n_components": r.n_components,
                "locally_constant": r.locally_constant,
                "max_det_mismatch": r.max_det_mismatch,
            }
            for r in rep.compatibility
        ],
        "group": _group_dict(grp),
    }


def _group_dict(grp) -> dict:
    out = {"kind": grp.kind}
    if not grp.continuous:
        out["order"] = grp.order
        out["angles"] = grp.angles.tolist()
    return out


def run_holonomy(req: S.HolonomyRequest) -> dict:
    tol = tolerances_from(req.tolerances)
    body = body_from_spec(req.body, tol)
    loop = loop_from_spec(req.loop, body)
    rep = verify_content_in_group(body, loop)
    content = rep.content
    out = {
        "matrix": _mat(content.matrix),
        "conjugated": _mat(content.conjugated),
        "angle": rotation_angle(content.conjugated),
        "nearest_element": _mat(rep.nearest),
        "distance": rep.distance,
        "identity_distance": content.identity_distance,
        "passes": rep.passed,
        "ode": None,
    }
    if req.method in ("ode", "both"):
        fld = induced_metric(body)
        Pi = transport_ode(fld, loop, n_steps=req.ode_steps)
        Pb = body.charts[content.base_chart].frames(loop.base_point)
        conj = Pb @ Pi @ inv2(Pb)
        out["ode"] = {
            "matrix": _mat(Pi),
            "conjugated": _mat(conj),
            "angle": rotation_angle(conj),
            "chart_ode_gap": float(np.linalg.norm(conj - content.conjugated)),
        }
    return out


def run_burgers(req: S.BurgersRequest) -> dict:
    tol = tolerances_from(req.tolerances)
    body = body_from_spec(req.body, tol)
    loop = loop_from_spec(req.loop, body)
    b = burgers_vector(body, loop, allow_circuit_dependent=req.allow_circuit_dependent)
    return {
        "vector": b.vector.tolist(),
        "base_point": b.base_point.tolist(),
        "content_distance": b.content_distance,
        "circuit_dependent": bool(b.content_distance >= tol.identity),
    }


def run_symmetry(req: S.SymmetryRequest) -> dict:
    arch = make_archetype(req.archetype.kind, req.archetype.n)
    grp = detect_group(arch, resolution=req.resolution, tol=req.tol, seed=req.seed)
    return _group_dict(grp)


def run_minimize(req: S.MinimizeRequest) -> dict:
    tol = tolerances_from(req.tolerances)
    body = body_from_spec(req.body, tol)
    mesh = mesh_for_body(body, req.resolution)
    if req.bc.kind == "none":
        bc = bc_none()
    elif req.bc.kind == "identity":
        bc = bc_identity(mesh)
    else:
        bc = bc_affine(mesh, np.diag([req.bc.sx, req.bc.sy]))
    res = minimize(body, mesh, bc, MinimizeOptions(gtol=req.gtol, max_iter=req.max_iter))
    out = {
        "energy": res.energy,
        "iterations": res.iterations,
        "grad_norm": res.grad_norm,
        "converged": res.converged,
        "vertices": None,
        "triangles": None,
        "positions": None,
    }
    if req.include_mesh:
        out["vertices"] = mesh.vertices.tolist()
        out["triangles"] = mesh.triangles.tolist()
        out["positions"] = res.positions.tolist()
    return out


def run_homogenize(req: S.HomogenizeRequest) -> dict:
    tol = tolerances_from(req.tolerances)
    arch = make_archetype(req.archetype.kind, req.archetype.n)
    if req.domain is not None:
        rect = Rect(req.domain.x0, req.domain.x1, req.domain.y0, req.domain.y1)
    else:
        rect = LOOP_DOMAIN if req.loop is not None else OBSTRUCTION_DOMAIN
    fld = metric_from_spec(req.metric, rect)
    ns = sorted(set(int(n) for n in req.n))

    quantities = req.quantities
    if quantities is None:
        quantities = ["metric", "deficit", "gauss-bonnet"]
        if req.loop is not None:
            quantities.append("transport")
        quantities.append("energy")

    # the obstruction gate runs first at every n; a discrete archetype on
    # a non-flat metric raises here (HTTP 409 / CLI exit 3)
    cones = {}
    obstruction = {"passed": True, "per_n": []}
    for n in ns:
        mt = triangulate_metric(fld, rect, n, theta_min=req.theta_min)
        cone = flatten(mt)
        implant = implant_cone_body(cone, arch, tol=tol.group)
        cones[n] = (mt, cone, implant)
        obstruction["per_n"].append({"n": n, **implant.report})

    reports = []
    rows = []
    if "transport" in quantities:
        if req.loop is None:
            raise ConfigError("transport convergence needs a loop")
        loop = _homogenize_loop(req.loop)
        rep = transport_convergence(fld, loop, ns, rect, theta_min=req.theta_min)
        reports.append(_report_dict(rep))
        rows.extend(rep.rows())
    if "metric" in quantities:
        rep = metric_convergence(fld, ns, rect, theta_min=req.theta_min)
        reports.append(_report_dict(rep))
        rows.extend(rep.rows())
    if "energy" in quantities:
        rep = energy_convergence(fld, arch, ns, rect, theta_min=req.theta_min)
        reports.append(_report_dict(rep))
        rows.extend(rep.rows())
    if "deficit" in quantities:
        for n in ns:
            _, cone, _ = cones[n]
            d = deficit_curvature_report(fld, cone)
            rows.append({"n": n, "quantity": "deficit", "error": d["max_rel_error"],
                         "observed_order": None})
            reports.append({"quantity": "deficit", "n": n, **d})
    if "gauss-bonnet" in quantities:
        for n in ns:
            _, cone, _ = cones[n]
            g = gauss_bonnet_report(fld, cone, rect)
            rows.append({"n": n, "quantity": "gauss-bonnet", "error": g["residual"],
                         "observed_order": None})
            reports.append({"quantity": "gauss-bonnet", "n": n, **g})

    return {
        "metric": req.metric if isinstance(req.metric, str) else "conformal",
        "archetype": arch.label,
        "domain": {"x0": rect.x0, "x1": rect.x1, "y0": rect.y0, "y1": rect.y1},
        "n": ns,
        "obstruction": obstruction,
        "reports": reports,
        "rows": rows,
    }


def _homogenize_loop(spec) -> Curve:
    if spec == "core":
        return circle(radius=0.8, segments=256)
    if isinstance(spec, S.CircleLoopSpec):
        radius = spec.radius if spec.radius is not None else 0.8
        return circle(center=spec.center, radius=radius, segments=spec.segments,
                      base_angle=spec.base_angle, ccw=spec.ccw)
    pts = np.asarray(spec.vertices, dtype=float)
    if not np.allclose(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[:1]])
    return Curve(pts)


def _report_dict(rep) -> dict:
    return {
        "quantity": rep.quantity,
        "ns": list(rep.ns),
        "errors": list(rep.errors),
        "observed_order": rep.observed_order,
        "details": _jsonable(rep.details),
    }


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x
