//! Parameters, datasets, procedure outputs and the two function abstractions
//! the calibration harness is written against.

use std::ops::Deref;

use crate::dist::{Belief, GaussianVector, ScalarDistribution};
use crate::error::{CalibError, Result};
use crate::rng::RngStream;

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CalibError::EmptyInput("parameter point"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::invalid("parameter entries must be finite"));
        }
        Ok(ParamPoint(values))
    }

    pub(crate) fn new_unchecked(values: Vec<f64>) -> Self {
        ParamPoint(values)
    }

    pub fn scalar(value: f64) -> Self {
        ParamPoint(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An observed or simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset(Vec<f64>);

impl Dataset {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CalibError::EmptyInput("dataset"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::invalid("dataset entries must be finite"));
        }
        Ok(Dataset(values))
    }

    pub(crate) fn new_unchecked(values: Vec<f64>) -> Self {
        Dataset(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Dataset {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Distributional output of a learning procedure.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorOutput {
    Analytic(Belief),
    Empirical(Vec<ParamPoint>),
}

impl PosteriorOutput {
    pub fn empirical(samples: Vec<ParamPoint>) -> Result<Self> {
        if samples.is_empty() {
            return Err(CalibError::EmptyInput("empirical output"));
        }
        Ok(PosteriorOutput::Empirical(samples))
    }

    pub fn scalar(d: ScalarDistribution) -> Self {
        PosteriorOutput::Analytic(Belief::Scalar(d))
    }

    pub fn gaussian(g: GaussianVector) -> Self {
        PosteriorOutput::Analytic(Belief::Gaussian(g))
    }

    pub fn dim(&self) -> usize {
        match self {
            PosteriorOutput::Analytic(b) => b.dim(),
            PosteriorOutput::Empirical(s) => s[0].dim(),
        }
    }

    pub fn as_analytic(&self) -> Option<&Belief> {
        match self {
            PosteriorOutput::Analytic(b) => Some(b),
            PosteriorOutput::Empirical(_) => None,
        }
    }

    /// One draw: exact for analytic output, a uniformly chosen member for
    /// empirical output.
    pub fn sample_one(&self, rng: &mut RngStream) -> ParamPoint {
        match self {
            PosteriorOutput::Analytic(b) => b.sample(rng),
            PosteriorOutput::Empirical(s) => {
                if s.len() == 1 {
                    s[0].clone()
                } else {
                    s[rng.below(s.len() as u64) as usize].clone()
                }
            }
        }
    }
}

/// `θ ↦ P_θ`: simulates a dataset given a parameter.
pub trait DataGeneratingModel: Send + Sync {
    fn sample(&self, theta: &ParamPoint, rng: &mut RngStream) -> Result<Dataset>;
}

/// `(μ0, y) ↦ μ(μ0, y)`.
pub trait LearningProcedure: Send + Sync {
    fn infer(
        &self,
        belief: &Belief,
        data: &Dataset,
        rng: &mut RngStream,
    ) -> Result<PosteriorOutput>;
}

/// Anything that can produce parameter draws, e.g. a belief distribution
/// known only through simulation.
pub trait ParamSampler: Send + Sync {
    fn draw(&self, rng: &mut RngStream) -> ParamPoint;
}

impl ParamSampler for Belief {
    fn draw(&self, rng: &mut RngStream) -> ParamPoint {
        self.sample(rng)
    }
}

impl<F> ParamSampler for F
where
    F: Fn(&mut RngStream) -> ParamPoint + Send + Sync,
{
    fn draw(&self, rng: &mut RngStream) -> ParamPoint {
        self(rng)
    }
}
