//! Joint rate control and power allocation for downlink NOMA under a
//! drift-plus-penalty controller.
//!
//! The per-slot power problem is solved globally by a dynamic program over a
//! finite candidate set of prefix power sums ([`dppa`]). Brute-force oracles
//! ([`oracle`]), orthogonal and heuristic baselines ([`baselines`]), a slotted
//! simulator ([`sim`]) and scenario sweeps ([`experiments`]) sit around it.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod dppa;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod phy;
pub mod rate_control;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
