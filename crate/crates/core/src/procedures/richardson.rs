//! Probabilistic Richardson iteration for `A θ = y`.

use nalgebra::{DMatrix, DVector};

use crate::dist::{Belief, GaussianVector};
use crate::error::{CalibError, Result};
use crate::rng::RngStream;
use crate::types::{DataGeneratingModel, Dataset, LearningProcedure, ParamPoint, PosteriorOutput};

/// Pushforward of `g` through `θ ↦ (I - εA) θ + ε y`.
pub fn richardson_step(
    g: &GaussianVector,
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    step: f64,
) -> Result<GaussianVector> {
    let d = g.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(CalibError::DimensionMismatch {
            expected: d,
            got: a.nrows(),
        });
    }
    if y.len() != d {
        return Err(CalibError::DimensionMismatch {
            expected: d,
            got: y.len(),
        });
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(CalibError::invalid("Richardson step size must be positive"));
    }
    let iteration = DMatrix::identity(d, d) - a * step;
    g.affine(&iteration, &(y * step))
}

/// `y = A θ` with no noise.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystemModel {
    pub matrix: DMatrix<f64>,
}

impl DataGeneratingModel for LinearSystemModel {
    fn sample(&self, theta: &ParamPoint, _rng: &mut RngStream) -> Result<Dataset> {
        if theta.dim() != self.matrix.ncols() {
            return Err(CalibError::DimensionMismatch {
                expected: self.matrix.ncols(),
                got: theta.dim(),
            });
        }
        let y = &self.matrix * DVector::from_column_slice(theta);
        Ok(Dataset::new_unchecked(y.as_slice().to_vec()))
    }
}

/// `iterations` Richardson steps applied to a Gaussian belief.
#[derive(Debug, Clone, PartialEq)]
pub struct Richardson {
    matrix: DMatrix<f64>,
    step: f64,
    iterations: usize,
}

impl Richardson {
    pub fn new(matrix: DMatrix<f64>, step: f64, iterations: usize) -> Result<Self> {
        if !matrix.is_square() {
            return Err(CalibError::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if !matrix.clone().lu().is_invertible() {
            return Err(CalibError::SingularMatrix);
        }
        if iterations == 0 {
            return Err(CalibError::invalid("need at least one iteration"));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(CalibError::invalid("Richardson step size must be positive"));
        }
        Ok(Richardson {
            matrix,
            step,
            iterations,
        })
    }
}

impl LearningProcedure for Richardson {
    fn infer(
        &self,
        belief: &Belief,
        data: &Dataset,
        _rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        let Belief::Gaussian(g) = belief else {
            return Err(CalibError::invalid(
                "Richardson iteration needs a Gaussian vector belief",
            ));
        };
        let y = DVector::from_column_slice(data);
        let mut current = g.clone();
        for _ in 0..self.iterations {
            current = richardson_step(&current, &self.matrix, &y, self.step)?;
        }
        Ok(PosteriorOutput::gaussian(current))
    }
}
