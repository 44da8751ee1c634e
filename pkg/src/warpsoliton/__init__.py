"""Numerical toolkit for warped-product Ricci solitons over radial model bases."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .geometry import (  # noqa: F401
    ModelBase,
    RadialGrid,
    ScalarProfile,
    bakry_emery_lower_bound,
    build_radial_base,
    drift_laplacian,
    qian_comparison_check,
)
from .warpfield import (  # noqa: F401
    SolitonInstance,
    SolveConfig,
    hyperbolic_decomposition,
    solve_warp_ode,
    spherical_decomposition,
    theta_profile,
)
from .bounds import EstimateParams, compute_constants, global_estimate, local_estimate, optimize_rhs  # noqa: F401
from .nonexist import Scenario, example_sphere_product, nonexistence_probe, numeric_blowup_witness  # noqa: F401
