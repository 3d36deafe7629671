//! Extreme-value learning of worst-case transmission delay and URLLC-aware
//! UAV placement for vehicular video streaming.

pub mod channel;
pub mod error;
pub mod evt;
pub mod gpr;
pub mod harness;
pub mod placement;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
