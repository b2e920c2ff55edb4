"""Pydantic request/response models for the compute service.

Unknown keys are rejected everywhere (extra="forbid"); validation
errors surface with JSON-pointer paths so configs are debuggable from
the CLI.
"""
from __future__ import annotations

import math
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ArchetypeSpec(StrictModel):
    kind: Literal["isotropic-neo-hookean", "isotropic-distance", "n-fold-discrete"]
    n: Optional[int] = Field(None, ge=1, le=360)

    @model_validator(mode="after")
    def _n_required_for_discrete(self):
        if self.kind == "n-fold-discrete" and self.n is None:
            raise ValueError("n-fold-discrete archetype requires 'n'")
        if self.kind != "n-fold-discrete" and self.n is not None:
            raise ValueError("'n' is only meaningful for n-fold-discrete")
        return self


class DisclinationBodySpec(StrictModel):
    body: Literal["disclination"]
    alpha: float = Field(..., gt=0.0, lt=1.0)
    r0: float = Field(..., ge=0.0)
    r1: float = Field(..., gt=0.0)
    archetype: ArchetypeSpec

    @model_validator(mode="after")
    def _radii(self):
        if not self.r0 < self.r1:
            raise ValueError("need r0 < r1")
        return self


class DislocationBodySpec(StrictModel):
    body: Literal["dislocation"]
    eps: float = Field(..., gt=0.0)
    r1: float = Field(..., gt=0.0)
    archetype: ArchetypeSpec

    @model_validator(mode="after")
    def _radii(self):
        if not self.eps < self.r1:
            raise ValueError("need eps < r1")
        return self


class TrivialBodySpec(StrictModel):
    body: Literal["trivial"]
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0
    archetype: ArchetypeSpec

    @model_validator(mode="after")
    def _rect(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("degenerate rectangle")
        return self


BodySpec = Union[DisclinationBodySpec, DislocationBodySpec, TrivialBodySpec]


class CircleLoopSpec(StrictModel):
    kind: Literal["circle"] = "circle"
    radius: Optional[float] = Field(None, gt=0.0)
    center: Tuple[float, float] = (0.0, 0.0)
    segments: int = Field(256, ge=8, le=65536)
    base_angle: float = math.pi / 2
    ccw: bool = True


class PolygonLoopSpec(StrictModel):
    kind: Literal["polygon"]
    vertices: List[Tuple[float, float]] = Field(..., min_length=3)


LoopSpec = Union[Literal["core"], CircleLoopSpec, PolygonLoopSpec]


class DomainSpec(StrictModel):
    x0: float
    x1: float
    y0: float
    y1: float

    @model_validator(mode="after")
    def _rect(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("degenerate rectangle")
        return self


class ConformalMetricSpec(StrictModel):
    kind: Literal["conformal"]
    c: float = Field(..., gt=0.0)
    b: float = Field(..., ge=0.0)


MetricSpec = Union[Literal["flat", "sphere-cap"], ConformalMetricSpec]


Tols = Dict[str, float]


class ValidateRequest(StrictModel):
    body: BodySpec = Field(..., discriminator="body")
    tolerances: Tols = Field(default_factory=dict)


class HolonomyRequest(StrictModel):
    body: BodySpec = Field(..., discriminator="body")
    loop: LoopSpec = "core"
    method: Literal["chart", "ode", "both"] = "chart"
    ode_steps: int = Field(2000, ge=10, le=200000)
    tolerances: Tols = Field(default_factory=dict)


class BurgersRequest(StrictModel):
    body: BodySpec = Field(..., discriminator="body")
    loop: LoopSpec = "core"
    allow_circuit_dependent: bool = False
    tolerances: Tols = Field(default_factory=dict)


class SymmetryRequest(StrictModel):
    archetype: ArchetypeSpec
    resolution: int = Field(720, ge=360, le=100000)
    tol: float = Field(1e-8, gt=0.0)
    seed: int = 0


class BCSpec(StrictModel):
    kind: Literal["none", "identity", "stretch"] = "identity"
    sx: float = 1.0
    sy: float = 1.0


class MinimizeRequest(StrictModel):
    body: BodySpec = Field(..., discriminator="body")
    resolution: int = Field(8, ge=2, le=256)
    bc: BCSpec = Field(default_factory=BCSpec)
    gtol: float = Field(1e-8, gt=0.0)
    max_iter: int = Field(5000, ge=1, le=200000)
    include_mesh: bool = True
    tolerances: Tols = Field(default_factory=dict)


HOMOGENIZE_QUANTITIES = ("transport", "metric", "energy", "deficit", "gauss-bonnet")


class HomogenizeRequest(StrictModel):
    metric: MetricSpec = "sphere-cap"
    n: List[int] = Field(default=[8, 16, 32], min_length=1)
    archetype: ArchetypeSpec = Field(
        default_factory=lambda: ArchetypeSpec(kind="isotropic-neo-hookean")
    )
    domain: Optional[DomainSpec] = None
    loop: Optional[LoopSpec] = None
    quantities: Optional[
        List[Literal["transport", "metric", "energy", "deficit", "gauss-bonnet"]]
    ] = None
    theta_min: float = Field(0.2, gt=0.0, lt=1.5)
    tolerances: Tols = Field(default_factory=dict)

    @model_validator(mode="after")
    def _ns(self):
        if any(n < 2 for n in self.n):
            raise ValueError("all n must be >= 2")
        return self


# --------------------------------------------------------------------------
# responses


class HealthResponse(BaseModel):
    status: str
    version: str


class ValidateResponse(BaseModel):
    valid: bool
    covered: bool
    closed: List[Dict[str, Any]]
    compatible: List[Dict[str, Any]]
    group: Dict[str, Any]


class HolonomyResponse(BaseModel):
    matrix: List[List[float]]
    conjugated: List[List[float]]
    angle: float
    nearest_element: List[List[float]]
    distance: float
    identity_distance: float
    passes: bool
    ode: Optional[Dict[str, Any]] = None


class BurgersResponse(BaseModel):
    vector: List[float]
    base_point: List[float]
    content_distance: float
    circuit_dependent: bool


class SymmetryResponse(BaseModel):
    kind: str
    order: Optional[int] = None
    angles: Optional[List[float]] = None


class MinimizeResponse(BaseModel):
    energy: float
    iterations: int
    grad_norm: float
    converged: bool
    vertices: Optional[List[List[float]]] = None
    triangles: Optional[List[List[int]]] = None
    positions: Optional[List[List[float]]] = None


class HomogenizeResponse(BaseModel):
    metric: str
    archetype: str
    domain: Dict[str, float]
    n: List[int]
    obstruction: Dict[str, Any]
    reports: List[Dict[str, Any]]
    rows: List[Dict[str, Any]]


class ErrorPayload(BaseModel):
    kind: Literal["validation", "obstruction", "numerical", "internal"]
    message: str
    details: Optional[Any] = None
