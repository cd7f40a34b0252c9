"""Differentially private zeroth-order descent with hidden-state accounting."""

from .accountant import (
    AccountResult,
    Schedule,
    account_curve,
    closed_form_strongly_convex,
    composition_baseline,
    minibatch_hidden_state,
    optimize_hidden_state,
    output_perturbation,
    rho_for_schedule,
    saturation_step_count,
    winf_bound,
)
from .concentration import TailBoundInputs, beta_tail, delta_f, min_K, xi_max
from .params import (
    ConvexityClass,
    DerivedConstants,
    ProblemParams,
    cbar1,
    derived_constants,
    lipschitz_c,
    theta_star,
)
from .rdp import (
    RdpCurve,
    compose,
    default_alpha_grid,
    gaussian_rdp,
    rdp_to_dp,
    sgm_rdp,
    sgm_rdp_grid,
)
from .zogd import (
    DirectionFrame,
    LogisticLoss,
    QuadraticLoss,
    Trajectory,
    make_quadratic_problem,
    noisy_zogd_step,
    run,
    run_adjacent_pair,
    sample_frame,
    zo_gradient,
)

__version__ = "0.1.0"
