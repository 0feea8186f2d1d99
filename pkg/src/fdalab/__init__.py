"""fdalab: a numerical laboratory for radial fast diffusion with critical absorption.

Solves du/dt = Lap(u^m) - u^q for radially symmetric data in the fast
diffusion range (N-2)_+/N < m < 1, q > 1, and turns the quantitative
estimates available at the critical exponent q = m + 2/N (decay bounds,
gradient bounds, universal lower bound, comparison profiles, long-time
attractor) into pass/fail numerical checks.
"""

from .profiles import (
    Constants,
    ParameterError,
    Params,
    ProfileSpec,
    barenblatt,
    compute_a_star,
    derive_constants,
    flat_decay_bound,
    lower_bound_amplitude,
    positivity_transform,
    subsolution,
    supersolution,
)
from .rescale import (
    RescaledProfile,
    autonomous_residual,
    from_selfsimilar,
    nonautonomous_residual,
    to_selfsimilar,
)
from .solver import (
    BarenblattIC,
    Field,
    IndicatorIC,
    NewtonDivergence,
    PowerTailIC,
    RadialGrid,
    Snapshot,
    SolverConfig,
    SolverFailure,
    TableIC,
    build_grid,
    init_field,
    make_snapshot,
    observables,
    solve,
    step,
)
from .verifier import (
    BoundReport,
    CheckAborted,
    boundary_influence,
    check_gradient_estimate,
    check_lower_bound,
    check_positivity_transform,
    check_quadratic_envelope,
    check_residual_sign,
    check_sandwich,
    check_upper_bound,
    convergence_metric,
    discretization_tolerance,
    estimate_amplitude,
    fit_tail_exponent,
    search_sandwich,
)

__version__ = "0.1.0"
