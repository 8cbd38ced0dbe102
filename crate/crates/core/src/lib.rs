//! θ-expansions: continued fractions `[a_1θ, a_2θ, ...]` with `θ² = 1/m`.
//!
//! The crate covers the map `T(x) = 1/x - θ⌊1/(xθ)⌋` and its digits, the
//! invariant measure `γ` with density proportional to `1/(1+θx)`, the
//! transfer operator, the natural extension and the Gauss-Kuzmin error
//! analysis with its explicit rate bounds.

pub mod cylinder;
pub mod error;
pub mod expansion;
pub mod gauss_kuzmin;
pub mod measures;
pub mod natural_extension;
pub mod transfer;

pub use error::{Result, ThetaError};
pub use expansion::{
    cf_eval, convergents, cylinder_interval, digit_index, expand_digits, expand_with_remainder,
    gauss_map, new_params, Convergent, CylinderInterval, DigitIndex, DigitSequence, ThetaParams,
};
pub use gauss_kuzmin::{
    bounds_table, decay_estimate, error_surface, fn_oracle, gk1d_iterate, gk1d_series, gk1d_step,
    joint_dist, p_mn, p_mn_closed, q_closed_form, q_recurrence, rate_limits, sandwich_check,
    BoundsRow, DecayReport, ErrorSurface, Gk1dStep, OracleValue, PmnClosed, SandwichReport,
    SandwichRow,
};
pub use measures::{
    conditional_tn_cdf, gamma_a_cdf, gamma_bar, gamma_bar_box, gamma_cdf, s_chain, transition_prob,
    transition_product, transition_tail, Rect, SChainState,
};
pub use natural_extension::{
    extended_digit, fbar_exact, fbar_mc, gk2d_fixed_point_residual, nat_ext_inverse,
    nat_ext_iterate, nat_ext_step, Fbar2DMethod, Fbar2DResult, FixedPointResidual, PlanePoint,
};
pub use transfer::{
    apply_u, contraction_report, u_infinity, variation, ContractionReport, GridFunction,
};
