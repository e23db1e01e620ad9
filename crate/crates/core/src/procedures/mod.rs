//! Learning procedures and the data-generating models they are checked
//! against.

pub mod abc;
pub mod conjugate;
pub mod gandk;
pub mod gp;
pub mod laplace;
pub mod richardson;

pub use abc::{abc_infer, unit_ball_point, AbcConfig, GkAbc};
pub use conjugate::{
    bayes_gaussian_location, data_agnostic, fractional_posterior, mirror_bayes, Bayes,
    ContaminatedGaussianModel, DataAgnostic, Fractional, GaussianLocationModel, MirrorBayes,
};
pub use gandk::{gk_simulate, quartile_summary, GKParams, GkModel};
pub use gp::{
    gp_fit_stationary, gp_prior, gp_simulate_truth, GpConfig, GpFit, GpObservationModel, GpTruth,
    StationaryGp,
};
pub use laplace::{laplace_student_t, LaplaceStudentT, StudentTLocationModel};
pub use richardson::{richardson_step, LinearSystemModel, Richardson};
