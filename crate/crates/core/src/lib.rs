//! Simulation and mean-square analysis of leaky zero-attracting diffusion
//! LMS over adaptive networks.
//!
//! The crate is organized bottom-up:
//!
//! * [`network`]: topologies and column-stochastic combination matrices,
//! * [`signal`]: white or AR(1)-colored regressors and the linear data model,
//! * [`algorithms`]: the ATC / CTA diffusion update with optional leak and
//!   zero attractor, plus single-trial runs,
//! * [`theory`]: mean and mean-square moment recursions, step-size bounds and
//!   the closed-form steady-state network MSD for ATC variants,
//! * [`experiments`]: seeded Monte Carlo harness, reference scenarios and
//!   theory-versus-simulation reports.
//!
//! The guide in `book/` walks through each part; its code listings are
//! compiled and run as doc tests of this crate.

pub mod algorithms;
pub mod error;
pub mod experiments;
pub mod network;
pub mod rng;
pub mod signal;
pub mod system;
pub mod theory;

pub use error::{Error, Result};

/// The guide in `book/src` and the README, compiled here so their listings
/// run as doc tests.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    pub mod network {}
    #[doc = include_str!("../../../book/src/signals.md")]
    pub mod signals {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    pub mod algorithms {}
    #[doc = include_str!("../../../book/src/theory.md")]
    pub mod theory {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
}
