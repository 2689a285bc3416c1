"""Small-time local attainability certification toolkit.

Decides, from jet data at a single point, whether a smooth target is
small-time locally attainable for a nonlinear control system; builds
reaching trajectories from the certificate and validates the resulting
Holder bound on the minimum time function empirically.
"""

__version__ = "0.1.0"

from .engine import (ControlSystem, GroupSpec, Structure, TargetDef,
                     VectorFieldDef, certify_fat, certify_manifold,
                     certify_point, check_group, estimate_bounds,
                     search_groups)
from .expr import eval_point, parse, symbolic_partial
from .hamiltonian import (ad_power, boxplus_power, boxplus_sequence,
                          boxplus_vector, ham_power, lie_bracket,
                          lie_derivative, trajectory_coeffs)
from .jets import ScalarGerm, TruncatedPoly, VectorGerm, lift, lift_vector
from .petrov import PetrovProblem, PetrovSolution, solve, solve_boundary
from .posbasis import SpanCertificate, check_boundary, eccentricity, \
    is_positive_basis
from .trajectories import (MinTimeEstimate, SwitchSchedule, holder_fit,
                           integrate_switched, reach_target)

__all__ = [
    "ControlSystem", "GroupSpec", "Structure", "TargetDef", "VectorFieldDef",
    "certify_fat", "certify_manifold", "certify_point", "check_group",
    "estimate_bounds", "search_groups", "eval_point", "parse",
    "symbolic_partial", "ad_power", "boxplus_power", "boxplus_sequence",
    "boxplus_vector", "ham_power", "lie_bracket", "lie_derivative",
    "trajectory_coeffs", "ScalarGerm", "TruncatedPoly", "VectorGerm", "lift",
    "lift_vector", "PetrovProblem", "PetrovSolution", "solve",
    "solve_boundary", "SpanCertificate", "check_boundary", "eccentricity",
    "is_positive_basis", "MinTimeEstimate", "SwitchSchedule", "holder_fit",
    "integrate_switched", "reach_target",
]
