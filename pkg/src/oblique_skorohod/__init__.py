"""Reflected paths with oblique constraint directions.

Solves the generalized reflection problem

    x(t) + int_0^t H(x) dk = x0 + int_0^t f(s, x(s)) ds + m(t),

with dk drawn from the subgradient of a convex constraint phi at x, by a
smoothed-penalty scheme with delayed coefficients, plus the stochastic
variant driven by a window-averaged Ito integral.  The public surface is
re-exported here; the CLI lives in oblique_skorohod.cli.
"""

from .coeffs import (
    DiffusionSpec,
    DriftSpec,
    TimeProfile,
    affine_diffusion,
    affine_drift,
    constant_diffusion,
    constant_drift,
    time_modulated_drift,
    zero_diffusion,
    zero_drift,
)
from .convex import (
    ConvexFunction,
    DomainGeometry,
    ProjectionError,
    Set,
    ball,
    box,
    contains,
    domain_geometry,
    eval_fn,
    halfspace_intersection,
    indicator,
    interior_witness,
    lipschitz_affine_plus_indicator,
    make_resolvent,
    moreau_envelope,
    probe_h0,
    project_set,
    quadratic_plus_indicator,
    resolvent,
    set_distance,
    whole_space,
    yosida_gradient,
)
from .diagnostics import (
    annexB_bound,
    apriori_monitor,
    convergence_slope,
    monotonicity_gap,
    vi_residual,
)
from .field import (
    FieldValidationReport,
    ObliqueField,
    constant_field,
    diagonal_affine_field,
    direction_matrix,
    eval_field,
    eval_inverse,
    make_field_eval,
    rotation_blend_field,
    validate_field,
)
from .paths import (
    SampledPath,
    derivative,
    mollify,
    modulus_of_continuity,
    snapped_width,
    total_variation,
)
from .scenario import Scenario, ScenarioError, build_scenario, load_scenario
from .sde import (
    GENERATOR_ID,
    BrownianDriver,
    SviProblem,
    brownian_path,
    build_Mn,
    monte_carlo,
    solve_svi_path,
    standard_normals,
)
from .solver import (
    GridMismatch,
    NoConvergence,
    PenalizedConfig,
    SkorohodSolution,
    StabilityBreach,
    oracle_halfline,
    solve_penalized,
    solve_skorohod,
    stability_gap,
    system_id,
)

__version__ = "0.1.0"

__all__ = [
    "GENERATOR_ID",
    "BrownianDriver",
    "ConvexFunction",
    "DiffusionSpec",
    "DomainGeometry",
    "DriftSpec",
    "FieldValidationReport",
    "GridMismatch",
    "NoConvergence",
    "ObliqueField",
    "PenalizedConfig",
    "ProjectionError",
    "SampledPath",
    "Scenario",
    "ScenarioError",
    "Set",
    "SkorohodSolution",
    "StabilityBreach",
    "SviProblem",
    "TimeProfile",
    "affine_diffusion",
    "affine_drift",
    "annexB_bound",
    "apriori_monitor",
    "ball",
    "box",
    "brownian_path",
    "build_Mn",
    "build_scenario",
    "constant_diffusion",
    "constant_drift",
    "constant_field",
    "contains",
    "convergence_slope",
    "derivative",
    "diagonal_affine_field",
    "direction_matrix",
    "domain_geometry",
    "eval_field",
    "eval_fn",
    "eval_inverse",
    "halfspace_intersection",
    "indicator",
    "interior_witness",
    "lipschitz_affine_plus_indicator",
    "load_scenario",
    "make_field_eval",
    "make_resolvent",
    "modulus_of_continuity",
    "mollify",
    "monotonicity_gap",
    "monte_carlo",
    "moreau_envelope",
    "oracle_halfline",
    "probe_h0",
    "project_set",
    "quadratic_plus_indicator",
    "resolvent",
    "rotation_blend_field",
    "set_distance",
    "snapped_width",
    "solve_penalized",
    "solve_skorohod",
    "solve_svi_path",
    "stability_gap",
    "standard_normals",
    "system_id",
    "time_modulated_drift",
    "total_variation",
    "validate_field",
    "vi_residual",
    "whole_space",
    "yosida_gradient",
    "zero_diffusion",
    "zero_drift",
    "__version__",
]
