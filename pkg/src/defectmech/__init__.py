"""Material-uniform hyperelastic bodies with discrete disclinations and dislocations."""

from .tolerances import DEFAULT_TOLERANCES, Tolerances
from .domains import Annulus, AnnulusSector, Rect
from .geometry import (
    Curve,
    MetricField,
    christoffel,
    circle,
    conformal_metric,
    flat_metric,
    metric_from_reference,
    rotation,
    sphere_cap_metric,
    transport_chart,
    transport_concat,
    transport_ode,
)
from .archetypes import (
    Archetype,
    SymmetryGroup,
    detect_group,
    distance_squared,
    eval_archetype,
    grad_archetype,
    group_of,
    make_archetype,
    n_fold,
    nearest_element,
    neo_hookean,
    symmetry_distance,
)
from .bodies import (
    Body,
    ReferenceChart,
    build_disclination_body,
    build_dislocation_body,
    build_trivial_body,
    check_closed,
    check_overlap_compatibility,
    energy_density_at,
    induced_metric,
    validate_body,
)
from .defects import burgers_vector, disclination_content, verify_content_in_group
from .elasticity import (
    BoundaryCondition,
    MinimizeOptions,
    TriMesh,
    assemble_energy,
    assemble_gradient,
    bc_affine,
    bc_identity,
    bc_none,
    build_mesh,
    mesh_for_body,
    minimize,
)
from .homogenization import (
    ConeManifold,
    ConvergenceReport,
    cone_transport,
    deficit_curvature_report,
    energy_convergence,
    flatten,
    gauss_bonnet_report,
    implant_cone_body,
    metric_convergence,
    route_loop,
    transport_convergence,
    triangulate_metric,
)

__version__ = "0.1.0"
