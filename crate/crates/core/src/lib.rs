//! Simulation-based tests of whether a learning procedure is calibrated.

pub mod calib;
pub mod dist;
pub mod error;
pub mod gof;
pub mod procedures;
pub mod report;
pub mod rng;
pub mod special;
pub mod testfn;
pub mod types;
pub mod vignettes;
