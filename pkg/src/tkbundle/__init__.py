"""Computations on higher-order tangent bundles T^kM over coordinate charts.

The main entry points are re-exported here; see the submodules for the
full surface.
"""
from .connections import (
    Christoffel,
    ConnectionComponents,
    ConnectionMapValue,
    apply_connection_map,
    convex_combine,
    lift_connection,
    pullback_christoffel,
    transport_christoffel,
    vertical_shift,
)
from .expr import (
    DerivativeTower,
    MapSpec,
    derivative_tensor,
    derivative_tower,
    eval_map,
    parse_expr,
    taylor_push,
)
from .jets import (
    NaturalJet,
    Partition,
    TangentOfTk,
    compose_jet,
    faa_di_bruno_coefficient,
    partitions_of_order,
    truncate,
)
from .metrics import (
    ImmersionSpec,
    MetricField,
    gauss_residual,
    levi_civita,
    lifted_metric_residual,
    pullback_metric,
)
from .morphisms import (
    MorphismScenario,
    check_fibre_linearity,
    check_g_related_global,
    check_g_related_local,
    check_projective_consistency,
    pushforward_lifted,
    pushforward_natural,
    verify_lifted_relatedness,
)
from .report import CheckRecord, Report
from .trivialization import (
    CurveMu,
    LiftedCoordinates,
    build_mu,
    detrivialize,
    transition_check,
    trivialize,
)

__version__ = "0.1.0"
