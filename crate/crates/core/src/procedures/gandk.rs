//! The g-and-k distribution as a location model, and its quartile summary.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CalibError, Result};
use crate::rng::RngStream;
use crate::types::{DataGeneratingModel, Dataset, ParamPoint};

/// Shape parameters; the location is supplied separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GKParams {
    pub b: f64,
    pub g: f64,
    pub k: f64,
}

impl GKParams {
    pub fn new(b: f64, g: f64, k: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(CalibError::invalid("g-and-k scale b must be positive"));
        }
        if !g.is_finite() {
            return Err(CalibError::invalid("g-and-k skewness g must be finite"));
        }
        if !(k.is_finite() && k > -0.5) {
            return Err(CalibError::invalid("g-and-k kurtosis k must exceed -1/2"));
        }
        Ok(GKParams { b, g, k })
    }

    /// `b (1 + 0.8 (1 - e^{-g u}) / (1 + e^{-g u})) u (1 + u^2)^k`.
    #[inline]
    pub fn transform(&self, u: f64) -> f64 {
        // (1 - e^{-x}) / (1 + e^{-x}) = tanh(x / 2)
        self.b * (1.0 + 0.8 * (0.5 * self.g * u).tanh()) * u * (1.0 + u * u).powf(self.k)
    }
}

impl Default for GKParams {
    fn default() -> Self {
        GKParams {
            b: 1.0,
            g: 2.0,
            k: 0.5,
        }
    }
}

/// `y_n = θ + transform(u_n)` for the supplied standard-normal inputs.
pub fn gk_from_normals(theta: f64, p: &GKParams, u: &[f64]) -> Dataset {
    Dataset::new_unchecked(u.iter().map(|&u| theta + p.transform(u)).collect())
}

/// `n` draws with location `theta`.
pub fn gk_simulate(theta: f64, p: &GKParams, n: usize, rng: &mut RngStream) -> Result<Dataset> {
    if n == 0 {
        return Err(CalibError::invalid("need at least one draw"));
    }
    let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(gk_from_normals(theta, p, &u))
}

/// Linear interpolation between order statistics at position `(n - 1) q`.
#[inline]
pub fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub const QUARTILE_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Minimum, lower quartile, median, upper quartile and maximum.
pub fn quartile_summary(y: &[f64]) -> Result<[f64; 5]> {
    if y.len() < 5 {
        return Err(CalibError::InsufficientData {
            needed: 5,
            got: y.len(),
        });
    }
    let mut sorted = y.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(QUARTILE_LEVELS.map(|q| interpolated_quantile(&sorted, q)))
}

/// g-and-k location model with `n_obs` observations per dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkModel {
    pub params: GKParams,
    pub n_obs: usize,
}

impl DataGeneratingModel for GkModel {
    fn sample(&self, theta: &ParamPoint, rng: &mut RngStream) -> Result<Dataset> {
        gk_simulate(theta[0], &self.params, self.n_obs, rng)
    }
}
