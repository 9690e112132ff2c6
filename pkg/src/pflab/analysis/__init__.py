"""Spectral computations and the verification harness."""

from .bounds import (
    RelativeBoundFrontier,
    boundary_normal_components,
    covariant_link_values,
    diamagnetic_check,
    diamagnetic_sweep,
    form_norm_equivalence,
    frontier_monotone,
    graph_norm_constants,
    graph_norm_equivalence,
    integration_by_parts_defect,
    neumann_certificate,
    relative_bound_estimate,
    relative_bound_sweep,
)
from .lanczos import LanczosResult, lanczos_extremal

__all__ = [
    "LanczosResult",
    "RelativeBoundFrontier",
    "boundary_normal_components",
    "covariant_link_values",
    "diamagnetic_check",
    "diamagnetic_sweep",
    "form_norm_equivalence",
    "frontier_monotone",
    "graph_norm_constants",
    "graph_norm_equivalence",
    "integration_by_parts_defect",
    "lanczos_extremal",
    "neumann_certificate",
    "relative_bound_estimate",
    "relative_bound_sweep",
]
