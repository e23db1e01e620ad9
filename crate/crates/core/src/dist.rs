//! Univariate laws with closed-form cdfs, and Gaussian vectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{CalibError, Result};
use crate::rng::RngStream;
use crate::special::{
    ln_gamma, norm_cdf, norm_pdf, norm_quantile, student_t_cdf, student_t_ln_pdf,
};
use crate::types::ParamPoint;

/// A regular univariate distribution.
///
/// Construct through the checked constructors; the variants are public so
/// callers can match on them.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarDistribution {
    Normal {
        mean: f64,
        var: f64,
    },
    StudentT {
        loc: f64,
        scale: f64,
        dof: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    LogNormal {
        log_mean: f64,
        log_sd: f64,
    },
    /// `(1 - weight) * N(first) + weight * N(second)`, components given as
    /// `(mean, variance)`.
    NormalMixture {
        weight: f64,
        first: (f64, f64),
        second: (f64, f64),
    },
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(CalibError::invalid(msg))
    }
}

impl ScalarDistribution {
    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        check(mean.is_finite(), "normal mean must be finite")?;
        check(
            var.is_finite() && var > 0.0,
            "normal variance must be positive",
        )?;
        Ok(ScalarDistribution::Normal { mean, var })
    }

    pub fn standard_normal() -> Self {
        ScalarDistribution::Normal {
            mean: 0.0,
            var: 1.0,
        }
    }

    pub fn student_t(loc: f64, scale: f64, dof: f64) -> Result<Self> {
        check(loc.is_finite(), "student-t location must be finite")?;
        check(
            scale.is_finite() && scale > 0.0,
            "student-t scale must be positive",
        )?;
        check(
            dof.is_finite() && dof > 0.0,
            "student-t dof must be positive",
        )?;
        Ok(ScalarDistribution::StudentT { loc, scale, dof })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        check(
            lo.is_finite() && hi.is_finite() && lo < hi,
            "uniform needs lo < hi",
        )?;
        Ok(ScalarDistribution::Uniform { lo, hi })
    }

    pub fn log_normal(log_mean: f64, log_sd: f64) -> Result<Self> {
        check(log_mean.is_finite(), "log-normal log-mean must be finite")?;
        check(
            log_sd.is_finite() && log_sd > 0.0,
            "log-normal log-sd must be positive",
        )?;
        Ok(ScalarDistribution::LogNormal { log_mean, log_sd })
    }

    pub fn normal_mixture(weight: f64, first: (f64, f64), second: (f64, f64)) -> Result<Self> {
        check(
            (0.0..=1.0).contains(&weight),
            "mixture weight must lie in [0, 1]",
        )?;
        for (m, v) in [first, second] {
            check(m.is_finite(), "mixture component mean must be finite")?;
            check(
                v.is_finite() && v > 0.0,
                "mixture component variance must be positive",
            )?;
        }
        Ok(ScalarDistribution::NormalMixture {
            weight,
            first,
            second,
        })
    }

    /// Open support interval `(a, b)`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ScalarDistribution::Uniform { lo, hi } => (lo, hi),
            ScalarDistribution::LogNormal { .. } => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ScalarDistribution::Normal { mean, var } => norm_cdf((x - mean) / var.sqrt()),
            ScalarDistribution::StudentT { loc, scale, dof } => {
                student_t_cdf((x - loc) / scale, dof)
            }
            ScalarDistribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            ScalarDistribution::LogNormal { log_mean, log_sd } => {
                if x <= 0.0 {
                    0.0
                } else {
                    norm_cdf((x.ln() - log_mean) / log_sd)
                }
            }
            ScalarDistribution::NormalMixture {
                weight,
                first,
                second,
            } => {
                (1.0 - weight) * norm_cdf((x - first.0) / first.1.sqrt())
                    + weight * norm_cdf((x - second.0) / second.1.sqrt())
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            ScalarDistribution::Normal { mean, var } => {
                let sd = var.sqrt();
                norm_pdf((x - mean) / sd) / sd
            }
            ScalarDistribution::StudentT { loc, scale, dof } => {
                student_t_ln_pdf((x - loc) / scale, dof).exp() / scale
            }
            ScalarDistribution::Uniform { lo, hi } => {
                if x > lo && x < hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            ScalarDistribution::LogNormal { log_mean, log_sd } => {
                if x <= 0.0 {
                    0.0
                } else {
                    norm_pdf((x.ln() - log_mean) / log_sd) / (x * log_sd)
                }
            }
            ScalarDistribution::NormalMixture {
                weight,
                first,
                second,
            } => {
                let (s1, s2) = (first.1.sqrt(), second.1.sqrt());
                (1.0 - weight) * norm_pdf((x - first.0) / s1) / s1
                    + weight * norm_pdf((x - second.0) / s2) / s2
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(CalibError::ProbabilityOutOfRange(p));
        }
        Ok(self.quantile_unchecked(p))
    }

    fn quantile_unchecked(&self, p: f64) -> f64 {
        match *self {
            ScalarDistribution::Normal { mean, var } => mean + var.sqrt() * norm_quantile(p),
            ScalarDistribution::StudentT { loc, scale, dof } => {
                loc + scale * student_t_quantile(p, dof)
            }
            ScalarDistribution::Uniform { lo, hi } => lo + p * (hi - lo),
            ScalarDistribution::LogNormal { log_mean, log_sd } => {
                (log_mean + log_sd * norm_quantile(p)).exp()
            }
            ScalarDistribution::NormalMixture { first, second, .. } => {
                let z = norm_quantile(p);
                let lo = (first.0 + first.1.sqrt() * z).min(second.0 + second.1.sqrt() * z);
                let hi = (first.0 + first.1.sqrt() * z).max(second.0 + second.1.sqrt() * z);
                bisect_cdf(|x| self.cdf(x), p, lo, hi)
            }
        }
    }

    /// Inverse-cdf draw.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.quantile_unchecked(rng.uniform_open())
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            ScalarDistribution::Normal { mean, .. } => Some(mean),
            ScalarDistribution::StudentT { loc, dof, .. } => (dof > 1.0).then_some(loc),
            ScalarDistribution::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            ScalarDistribution::LogNormal { log_mean, log_sd } => {
                Some((log_mean + 0.5 * log_sd * log_sd).exp())
            }
            ScalarDistribution::NormalMixture {
                weight,
                first,
                second,
            } => Some((1.0 - weight) * first.0 + weight * second.0),
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match *self {
            ScalarDistribution::Normal { var, .. } => Some(var),
            ScalarDistribution::StudentT { scale, dof, .. } => {
                (dof > 2.0).then(|| scale * scale * dof / (dof - 2.0))
            }
            ScalarDistribution::Uniform { lo, hi } => Some((hi - lo).powi(2) / 12.0),
            ScalarDistribution::LogNormal { log_mean, log_sd } => {
                let s2 = log_sd * log_sd;
                Some((s2.exp() - 1.0) * (2.0 * log_mean + s2).exp())
            }
            ScalarDistribution::NormalMixture {
                weight,
                first,
                second,
            } => {
                let m = (1.0 - weight) * first.0 + weight * second.0;
                let second_moment = (1.0 - weight) * (first.1 + first.0 * first.0)
                    + weight * (second.1 + second.0 * second.0);
                Some(second_moment - m * m)
            }
        }
    }
}

/// Bisection on a continuous increasing cdf; `lo`/`hi` are initial guesses
/// and are widened until they bracket `p`.
pub(crate) fn bisect_cdf(cdf: impl Fn(f64) -> f64, p: f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let mut step = (hi - lo).abs().max(1.0);
    while cdf(lo) > p {
        lo -= step;
        step *= 2.0;
    }
    step = (hi - lo).abs().max(1.0);
    while cdf(hi) < p {
        hi += step;
        step *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard Student-t quantile.
fn student_t_quantile(p: f64, dof: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    if dof == 1.0 {
        return (std::f64::consts::PI * (p - 0.5)).tan();
    }
    if dof == 2.0 {
        let a = 4.0 * p * (1.0 - p);
        return 2.0 * (p - 0.5) * (2.0 / a).sqrt();
    }
    // Safeguarded Newton on the cdf, solved in the lower tail for accuracy.
    let (target, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let ln_norm = ln_gamma(0.5 * (dof + 1.0)) - ln_gamma(0.5 * dof);
    let pdf = |t: f64| {
        (ln_norm
            - 0.5 * (dof * std::f64::consts::PI).ln()
            - 0.5 * (dof + 1.0) * (t * t / dof).ln_1p())
        .exp()
    };
    // bracket [lo, 0] with cdf(lo) <= target
    let mut lo = norm_quantile(target).min(-1.0);
    while student_t_cdf(lo, dof) > target {
        lo *= 2.0;
    }
    let mut hi = 0.0;
    let mut x = lo;
    for _ in 0..200 {
        let f = student_t_cdf(x, dof) - target;
        if f.abs() <= 1e-15 * target {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - f / pdf(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    sign * x.abs()
}

/// Multivariate normal with a cached lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVector {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl GaussianVector {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(CalibError::EmptyInput("gaussian mean"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(CalibError::DimensionMismatch {
                expected: d,
                got: cov.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::invalid("gaussian parameters must be finite"));
        }
        let scale = cov.diagonal().amax().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 * scale {
                    return Err(CalibError::NotPositiveDefinite);
                }
            }
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        let chol = sym
            .clone()
            .cholesky()
            .ok_or(CalibError::NotPositiveDefinite)?
            .l();
        Ok(GaussianVector {
            mean,
            cov: sym,
            chol,
        })
    }

    pub fn from_slices(mean: &[f64], cov: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(CalibError::DimensionMismatch {
                expected: d * d,
                got: cov.len(),
            });
        }
        GaussianVector::new(
            DVector::from_column_slice(mean),
            DMatrix::from_row_slice(d, d, cov),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Univariate marginal of coordinate `i`.
    pub fn marginal(&self, i: usize) -> Result<ScalarDistribution> {
        if i >= self.dim() {
            return Err(CalibError::IndexOutOfRange {
                index: i,
                dim: self.dim(),
            });
        }
        ScalarDistribution::normal(self.mean[i], self.cov[(i, i)])
    }

    /// Law of `m * x + shift` for `x` distributed as `self`.
    pub fn affine(&self, m: &DMatrix<f64>, shift: &DVector<f64>) -> Result<GaussianVector> {
        if m.ncols() != self.dim() {
            return Err(CalibError::DimensionMismatch {
                expected: self.dim(),
                got: m.ncols(),
            });
        }
        if shift.len() != m.nrows() {
            return Err(CalibError::DimensionMismatch {
                expected: m.nrows(),
                got: shift.len(),
            });
        }
        GaussianVector::new(m * &self.mean + shift, m * &self.cov * m.transpose())
    }

    /// `mean + L z` with `z` drawn coordinate-wise by inverse cdf.
    pub fn sample(&self, rng: &mut RngStream) -> ParamPoint {
        let z = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| norm_quantile(rng.uniform_open())),
        );
        let x = &self.mean + &self.chol * z;
        ParamPoint::new_unchecked(x.as_slice().to_vec())
    }
}

/// Checked sampler entry point matching the Cholesky contract.
pub fn sample_gaussian_vector(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut RngStream,
) -> Result<ParamPoint> {
    Ok(GaussianVector::new(mean.clone(), cov.clone())?.sample(rng))
}

/// A belief distribution over parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Belief {
    Scalar(ScalarDistribution),
    Gaussian(GaussianVector),
}

impl Belief {
    pub fn dim(&self) -> usize {
        match self {
            Belief::Scalar(_) => 1,
            Belief::Gaussian(g) => g.dim(),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> ParamPoint {
        match self {
            Belief::Scalar(d) => ParamPoint::scalar(d.sample(rng)),
            Belief::Gaussian(g) => g.sample(rng),
        }
    }

    pub fn as_scalar(&self) -> Option<&ScalarDistribution> {
        match self {
            Belief::Scalar(d) => Some(d),
            Belief::Gaussian(_) => None,
        }
    }

    /// Normal belief parameters `(mean, variance)`, if this is a univariate normal.
    pub fn as_normal(&self) -> Option<(f64, f64)> {
        match self {
            Belief::Scalar(ScalarDistribution::Normal { mean, var }) => Some((*mean, *var)),
            Belief::Gaussian(g) if g.dim() == 1 => Some((g.mean()[0], g.cov()[(0, 0)])),
            _ => None,
        }
    }
}

impl From<ScalarDistribution> for Belief {
    fn from(d: ScalarDistribution) -> Self {
        Belief::Scalar(d)
    }
}

impl From<GaussianVector> for Belief {
    fn from(g: GaussianVector) -> Self {
        Belief::Gaussian(g)
    }
}
