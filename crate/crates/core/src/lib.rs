//! Set-up based merged multicast (SMMC): analytic delivery-time bounds,
//! rate and set-up time optimisation, and a slot-level Monte Carlo
//! simulator of the mechanism.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod error;
pub mod optimizer;
pub mod simulator;

pub use error::{Error, Result};
