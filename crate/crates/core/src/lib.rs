//! Social power evolution in influence networks with stubborn individuals.
//!
//! The crate simulates how self-appraisals (social power) evolve when
//! individuals repeatedly discuss issues under Friedkin-Johnsen opinion
//! dynamics with reflected appraisal, and analyzes the resulting equilibria.
//!
//! * [`network`]: influence matrices, susceptibility profiles, simplex points
//!   and graph structure.
//! * [`dynamics`]: opinion updates, the issue-sequence power map, the local
//!   perceived-power process and the single-issue coupled model.
//! * [`equilibrium`]: fixed-point solving, closed forms for star networks,
//!   Jacobians, contraction certificates and property checks.
//! * [`montecarlo`]: Chernoff sample sizing and seeded randomized uniqueness
//!   experiments.
//! * [`io`]: configuration files, trajectory CSV and report JSON.
//!
//! Indices are zero-based throughout the library.

pub mod cli;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod io;
mod linalg;
pub mod montecarlo;
pub mod network;

pub use error::{Error, Result};
pub use linalg::norm_l1_operator;
pub use network::{InfluenceNetwork, PowerVector, StubbornnessProfile};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/equilibria.md")]
    mod equilibria {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
