"""Construction and numerical verification of optimal Hardy weights for
second-order elliptic operators with mixed Robin/Dirichlet boundary data."""

__version__ = "0.1.0"

from .construct import (  # noqa: E402
    HardyFamilyParams,
    HardyWeightResult,
    OneDimWeight,
    construct_weight,
    construct_weight_general,
    f_1,
    f_w,
    u_xi,
    u_xi_checks,
    verify_ermakov_pinney,
)
from .discrete import (  # noqa: E402
    CartesianGridSpec,
    RadialGrid,
    discrete_green,
    discretize,
    hardy_form_value,
    max_principle_probe,
    principal_eigenvalue,
)
from .domain import DomainSpec, OperatorSpec, ScalarField, decompose_boundary, exhaustion_member  # noqa: E402
from .green import Density, GreenPotential, canonical_density, green_mixed, images_kernel  # noqa: E402
from .probes import (  # noqa: E402
    VerificationReport,
    flux_constancy_check,
    khasminskii_probe,
    null_criticality_probe,
    optimality_at_infinity_probe,
)
from .sturm import classify_divergence, is_optimal_1d  # noqa: E402

__all__ = [
    "CartesianGridSpec",
    "Density",
    "DomainSpec",
    "GreenPotential",
    "HardyFamilyParams",
    "HardyWeightResult",
    "OneDimWeight",
    "OperatorSpec",
    "RadialGrid",
    "ScalarField",
    "VerificationReport",
    "canonical_density",
    "classify_divergence",
    "construct_weight",
    "construct_weight_general",
    "decompose_boundary",
    "discrete_green",
    "discretize",
    "exhaustion_member",
    "f_1",
    "f_w",
    "flux_constancy_check",
    "green_mixed",
    "hardy_form_value",
    "images_kernel",
    "is_optimal_1d",
    "khasminskii_probe",
    "max_principle_probe",
    "null_criticality_probe",
    "optimality_at_infinity_probe",
    "principal_eigenvalue",
    "u_xi",
    "u_xi_checks",
    "verify_ermakov_pinney",
]
