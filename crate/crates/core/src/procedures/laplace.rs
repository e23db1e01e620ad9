//! Laplace approximation for a Student-t location model with a normal
//! belief.

use rand::Rng;
use rand_distr::StudentT;

use crate::dist::{Belief, ScalarDistribution};
use crate::error::{CalibError, Result};
use crate::rng::RngStream;
use crate::types::{DataGeneratingModel, Dataset, LearningProcedure, ParamPoint, PosteriorOutput};

const MAX_ITERATIONS: usize = 200;
const GRADIENT_TOLERANCE: f64 = 1e-10;

/// Log posterior (up to a constant) of `θ` with belief `N(m0, v0)` and
/// `y_n - θ ~ t_ν`.
#[derive(Debug, Clone, Copy)]
pub struct StudentTLogPosterior<'a> {
    pub prior_mean: f64,
    pub prior_var: f64,
    pub dof: f64,
    pub data: &'a [f64],
}

impl StudentTLogPosterior<'_> {
    pub fn value(&self, theta: f64) -> f64 {
        let nu = self.dof;
        let prior = -0.5 * (theta - self.prior_mean).powi(2) / self.prior_var;
        prior
            - 0.5
                * (nu + 1.0)
                * self
                    .data
                    .iter()
                    .map(|y| ((y - theta).powi(2) / nu).ln_1p())
                    .sum::<f64>()
    }

    pub fn gradient(&self, theta: f64) -> f64 {
        let nu = self.dof;
        let prior = -(theta - self.prior_mean) / self.prior_var;
        prior
            + self
                .data
                .iter()
                .map(|y| {
                    let r = y - theta;
                    (nu + 1.0) * r / (nu + r * r)
                })
                .sum::<f64>()
    }

    /// Second derivative of the log posterior.
    pub fn hessian(&self, theta: f64) -> f64 {
        let nu = self.dof;
        -1.0 / self.prior_var
            + self
                .data
                .iter()
                .map(|y| {
                    let r2 = (y - theta).powi(2);
                    (nu + 1.0) * (r2 - nu) / (nu + r2).powi(2)
                })
                .sum::<f64>()
    }

    /// Damped Newton ascent from `start`.
    fn newton(&self, start: f64) -> Option<f64> {
        let mut theta = start;
        let mut value = self.value(theta);
        for _ in 0..MAX_ITERATIONS {
            let g = self.gradient(theta);
            if g.abs() < GRADIENT_TOLERANCE {
                return Some(theta);
            }
            let h = self.hessian(theta);
            let step = if h < 0.0 { -g / h } else { g * self.prior_var };
            let mut alpha = 1.0;
            loop {
                let cand = theta + alpha * step;
                let v = self.value(cand);
                if v >= value - 1e-13 * value.abs().max(1.0) {
                    theta = cand;
                    value = v;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    return None;
                }
            }
        }
        None
    }
}

/// `N(θ̂, -1 / ℓ''(θ̂))` at the posterior mode `θ̂`.
pub fn laplace_student_t(belief: &Belief, dof: f64, y: &Dataset) -> Result<PosteriorOutput> {
    if !(dof.is_finite() && dof > 0.0) {
        return Err(CalibError::invalid("degrees of freedom must be positive"));
    }
    if y.is_empty() {
        return Err(CalibError::EmptyInput("dataset"));
    }
    let (m0, v0) = belief
        .as_normal()
        .ok_or_else(|| CalibError::invalid("the Laplace procedure needs a normal belief"))?;
    let target = StudentTLogPosterior {
        prior_mean: m0,
        prior_var: v0,
        dof,
        data: y,
    };

    let obs_var = if dof > 2.0 { dof / (dof - 2.0) } else { 1.0 };
    let n = y.len() as f64;
    let start = (m0 / v0 + y.iter().sum::<f64>() / obs_var) / (1.0 / v0 + n / obs_var);

    let mode = match target.newton(start) {
        Some(m) => m,
        None => {
            let mut sorted = y.to_vec();
            sorted.sort_unstable_by(f64::total_cmp);
            let k = sorted.len();
            let median = if k % 2 == 1 {
                sorted[k / 2]
            } else {
                0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
            };
            target.newton(median).ok_or(CalibError::NonConvergence {
                iterations: MAX_ITERATIONS,
            })?
        }
    };
    let curvature = -target.hessian(mode);
    if curvature.is_nan() || curvature <= 0.0 {
        return Err(CalibError::NonConvergence {
            iterations: MAX_ITERATIONS,
        });
    }
    Ok(PosteriorOutput::scalar(ScalarDistribution::normal(
        mode,
        1.0 / curvature,
    )?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceStudentT {
    pub dof: f64,
}

impl LearningProcedure for LaplaceStudentT {
    fn infer(
        &self,
        belief: &Belief,
        data: &Dataset,
        _rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        laplace_student_t(belief, self.dof, data)
    }
}

/// `y_n = θ + t_ν` iid with unit scale.
#[derive(Debug, Clone)]
pub struct StudentTLocationModel {
    dof: f64,
    n_obs: usize,
    noise: StudentT<f64>,
}

impl StudentTLocationModel {
    pub fn new(dof: f64, n_obs: usize) -> Result<Self> {
        if n_obs == 0 {
            return Err(CalibError::invalid("need at least one observation"));
        }
        let noise = StudentT::new(dof)
            .map_err(|_| CalibError::invalid("degrees of freedom must be positive"))?;
        Ok(StudentTLocationModel { dof, n_obs, noise })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }
}

impl DataGeneratingModel for StudentTLocationModel {
    fn sample(&self, theta: &ParamPoint, rng: &mut RngStream) -> Result<Dataset> {
        Ok(Dataset::new_unchecked(
            (0..self.n_obs)
                .map(|_| theta[0] + rng.sample(self.noise))
                .collect(),
        ))
    }
}
