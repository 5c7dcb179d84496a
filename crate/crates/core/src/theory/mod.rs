//! Moment analysis of the ATC variants: Gaussian attractor moments, the
//! mean and mean-square recursions, step-size bounds and the closed-form
//! steady state.

pub mod fourth_moment;
pub mod linalg;
pub mod moments;
pub mod operators;
pub mod recursion;
pub mod stability;
pub mod steady_state;

pub use fourth_moment::{gaussian_fourth_moment, sampled_fourth_moment};
pub use linalg::trace_via_vec;
pub use moments::{attractor_moments, expected_abs, expected_sign, AttractorMoments};
pub use operators::StackedOperators;
pub use recursion::{
    advance, expected_attractor, mean_square_step, mean_square_step_raw, mean_step, transient, GlobalMoments,
    TheoryTrace,
};
pub use stability::{error_spectral_radius, is_mean_square_stable, stability_bounds, FourthMomentSource, StabilityBounds};
pub use steady_state::{steady_state_general, steady_state_leaky, steady_state_msd, SteadyState};
