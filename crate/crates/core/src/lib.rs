//! Numerical laboratory for joint eigenfunctions of quantum completely
//! integrable systems in two dimensions.

pub mod action;
pub mod asymptotics;
pub mod classical;
pub mod error;
pub mod fbi;
pub mod models;
pub mod spectral;

pub use error::{QciError, Result};
