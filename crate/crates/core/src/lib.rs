//! Marked SINR random graphs on Poisson point processes.
//!
//! The crate samples marked Poisson configurations, connects them under the
//! two-sided SINR threshold rule, bins the resulting empirical measures, and
//! evaluates the analytic objects attached to the model: the connection
//! kernel, its large-intensity limit, the graph entropy, the likelihood
//! functional and the rate functions. The [`montecarlo`] module replicates
//! experiments that check the analytic side against simulation.

pub mod error;
pub mod geometry;
pub mod io;
pub mod measures;
pub mod montecarlo;
pub mod pointprocess;
pub mod quadrature;
pub mod sinr;
pub mod theory;

pub use error::{Error, Result};
