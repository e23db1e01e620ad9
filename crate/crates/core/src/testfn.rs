//! Test functions that reduce a parameter to a scalar summary.

use crate::dist::Belief;
use crate::error::{CalibError, Result};
use crate::types::{ParamPoint, PosteriorOutput};

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `θ ↦ θ` on a one-dimensional parameter space.
    Identity,
    /// `θ ↦ θ_i`.
    Coordinate(usize),
    /// `θ ↦ Π_i 1 / (1 + exp(2c (θ_i - x*_i)))`, a smooth approximation of the
    /// indicator of the orthant `(-∞, x*]`.
    SigmoidProduct { center: Vec<f64>, sharpness: f64 },
    /// `θ ↦ θ(x_j)` for a function-valued parameter stored on a grid.
    Evaluation(usize),
}

/// `1 / (1 + exp(z))` without overflow.
#[inline]
fn logistic_complement(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

impl TestFunction {
    pub fn sigmoid_product(center: Vec<f64>, sharpness: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(CalibError::EmptyInput("sigmoid centre"));
        }
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return Err(CalibError::invalid("sigmoid sharpness must be positive"));
        }
        Ok(TestFunction::SigmoidProduct { center, sharpness })
    }

    /// Open codomain interval `(a, b)`.
    pub fn codomain(&self) -> (f64, f64) {
        match self {
            TestFunction::SigmoidProduct { .. } => (0.0, 1.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// True when `f` is monotone increasing in the single coordinate it reads.
    pub fn is_monotone(&self) -> bool {
        !matches!(self, TestFunction::SigmoidProduct { .. })
    }

    pub fn apply(&self, theta: &ParamPoint) -> Result<f64> {
        match self {
            TestFunction::Identity => {
                if theta.dim() != 1 {
                    return Err(CalibError::DimensionMismatch {
                        expected: 1,
                        got: theta.dim(),
                    });
                }
                Ok(theta[0])
            }
            TestFunction::Coordinate(i) | TestFunction::Evaluation(i) => {
                theta.get(*i).copied().ok_or(CalibError::IndexOutOfRange {
                    index: *i,
                    dim: theta.dim(),
                })
            }
            TestFunction::SigmoidProduct { center, sharpness } => {
                if center.len() != theta.dim() {
                    return Err(CalibError::DimensionMismatch {
                        expected: center.len(),
                        got: theta.dim(),
                    });
                }
                Ok(theta
                    .iter()
                    .zip(center)
                    .map(|(x, c)| logistic_complement(2.0 * sharpness * (x - c)))
                    .product())
            }
        }
    }

    fn coordinate(&self) -> Option<usize> {
        match self {
            TestFunction::Identity => Some(0),
            TestFunction::Coordinate(i) | TestFunction::Evaluation(i) => Some(*i),
            TestFunction::SigmoidProduct { .. } => None,
        }
    }

    fn describe(&self) -> String {
        match self {
            TestFunction::Identity => "identity".into(),
            TestFunction::Coordinate(i) => format!("coordinate {i}"),
            TestFunction::SigmoidProduct { .. } => "sigmoid product".into(),
            TestFunction::Evaluation(i) => format!("evaluation at grid index {i}"),
        }
    }
}

/// cdf of the pushforward of an analytic belief under `f`, evaluated at `t`.
pub fn pushforward_cdf_belief(belief: &Belief, f: &TestFunction, t: f64) -> Result<f64> {
    let i = f
        .coordinate()
        .ok_or_else(|| CalibError::NoClosedFormPushforward(f.describe()))?;
    match belief {
        Belief::Scalar(d) => {
            if i != 0 {
                return Err(CalibError::IndexOutOfRange { index: i, dim: 1 });
            }
            Ok(d.cdf(t))
        }
        Belief::Gaussian(g) => {
            if matches!(f, TestFunction::Identity) && g.dim() != 1 {
                return Err(CalibError::DimensionMismatch {
                    expected: 1,
                    got: g.dim(),
                });
            }
            Ok(g.marginal(i)?.cdf(t))
        }
    }
}

/// cdf of `f#μ` at `t` for analytic output `μ`; empirical output has no
/// closed form and must go through the rank test.
pub fn pushforward_cdf(post: &PosteriorOutput, f: &TestFunction, t: f64) -> Result<f64> {
    match post {
        PosteriorOutput::Analytic(b) => pushforward_cdf_belief(b, f, t),
        PosteriorOutput::Empirical(_) => Err(CalibError::NoClosedFormPushforward(format!(
            "{} of empirical output",
            f.describe()
        ))),
    }
}
