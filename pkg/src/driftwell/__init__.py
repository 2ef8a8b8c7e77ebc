"""driftwell: constrained Fokker-Planck dynamics in a double well.

Full finite-volume solver for the nonlocally constrained drift-diffusion
law plus the reduced models valid in its small-parameter regimes: two-peaks
transport, deterministic peak widening, the mass-splitting problem, the
event-driven slow-reaction limit and the Kramers fast-reaction limit.
"""

from .backend import USE_NUMBA, backend_name
from .constraint import ConstraintPath, linear_path, piecewise_linear_path
from .potential import (
    AssumptionReport,
    Branch,
    BranchDomainError,
    Landmarks,
    NotDoubleWellError,
    Potential,
    arctan_potential,
    barrier_heights,
    branch_inverse,
    curvatures,
    landmarks,
    make_potential,
    quartic_potential,
    verify_assumptions,
)

__version__ = "0.1.0"
