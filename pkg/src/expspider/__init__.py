"""Realize post-singularly finite exponential maps by the pullback iteration.

Modules: ``exp_family`` (the maps and their inverse branches), ``portrait``
(combinatorial input), ``pullback`` (the iteration), ``diagnostics``
(geometry, winding number, bounds on lambda), ``qd_transfer`` (quadratic
differentials and the transfer operator), ``oracle`` (independent checks)
and ``cli`` (the ``expspider`` command).
"""
from .diagnostics import (
    check_eta_invariance,
    check_lambda_bounds,
    compute_winding,
    min_spherical_gap,
    spherical_distance,
)
from .errors import SpiderError
from .exp_family import (
    ExpParams,
    alpha_from_lambda,
    critical_points,
    evaluate,
    forward_orbit,
    inverse_branch,
    log_derivative,
)
from .oracle import newton_direct_solve, verify_orbit
from .portrait import BranchAddress, OrbitPortrait, parse_config, parse_portrait, validate_portrait
from .pullback import (
    IterationOptions,
    MarkedConfiguration,
    address_from_params,
    initial_configuration,
    iterate,
    pullback_step,
    run,
    solve_lambda,
)
from .qd_transfer import QuadDifferential, QuadratureConfig, basis, contraction_estimate, norm, pushforward_values

__version__ = "0.1.0"

__all__ = [
    "BranchAddress", "ExpParams", "IterationOptions", "MarkedConfiguration", "OrbitPortrait",
    "QuadDifferential", "QuadratureConfig", "SpiderError", "address_from_params", "alpha_from_lambda",
    "basis", "check_eta_invariance", "check_lambda_bounds", "compute_winding", "contraction_estimate",
    "critical_points", "evaluate", "forward_orbit", "initial_configuration", "inverse_branch", "iterate",
    "log_derivative", "min_spherical_gap", "newton_direct_solve", "norm", "parse_config", "parse_portrait",
    "pullback_step", "pushforward_values", "run", "solve_lambda", "spherical_distance", "validate_portrait",
    "verify_orbit",
]
