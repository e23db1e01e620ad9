//! Noiseless Gaussian-process regression on `[0, 1]`: a non-stationary
//! truth `θ(x) = (1 + x) g(x)` and a stationary fit `θ(x) = σ0 g(x)` with
//! `σ0` estimated by maximum likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::dist::{Belief, GaussianVector, ScalarDistribution};
use crate::error::{CalibError, Result};
use crate::rng::RngStream;
use crate::types::{DataGeneratingModel, Dataset, LearningProcedure, ParamPoint, PosteriorOutput};

const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpConfig {
    pub length_scale: f64,
    /// Number of equally spaced evaluation points on `[0, 1]`.
    pub grid_size: usize,
    pub n_obs: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            length_scale: 0.1,
            grid_size: 101,
            n_obs: 10,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return Err(CalibError::invalid("length scale must be positive"));
        }
        if self.grid_size < 2 {
            return Err(CalibError::invalid("grid needs at least two points"));
        }
        if self.n_obs == 0 || self.grid_size < self.n_obs {
            return Err(CalibError::invalid(
                "need between one and grid-size observation sites",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let m = (self.grid_size - 1) as f64;
        (0..self.grid_size).map(|i| i as f64 / m).collect()
    }

    /// Index of the grid point nearest to `x`.
    pub fn grid_index(&self, x: f64) -> usize {
        ((x.clamp(0.0, 1.0) * (self.grid_size - 1) as f64).round()) as usize
    }

    #[inline]
    pub fn kernel(&self, a: f64, b: f64) -> f64 {
        (-(a - b).powi(2) / (self.length_scale * self.length_scale)).exp()
    }

    /// The scale function of the truth, `σ(x) = 1 + x`.
    #[inline]
    pub fn scale(&self, x: f64) -> f64 {
        1.0 + x
    }
}

/// Gaussian with the smallest diagonal jitter, from `1e-10` relative upward,
/// that makes `cov` numerically positive definite.
pub fn gaussian_with_jitter(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<GaussianVector> {
    let scale = cov.diagonal().amax().max(f64::MIN_POSITIVE);
    let n = cov.nrows();
    let mut jitter = JITTER * scale;
    for _ in 0..8 {
        let attempt = &cov + DMatrix::identity(n, n) * jitter;
        match GaussianVector::new(mean.clone(), attempt) {
            Ok(g) => return Ok(g),
            Err(CalibError::NotPositiveDefinite) => jitter *= 10.0,
            Err(e) => return Err(e),
        }
    }
    Err(CalibError::SingularMatrix)
}

/// `g ~ GP(0, k)` on the grid.
pub fn stationary_grid_prior(cfg: &GpConfig) -> Result<GaussianVector> {
    cfg.validate()?;
    let x = cfg.grid();
    let n = x.len();
    gaussian_with_jitter(
        DVector::zeros(n),
        DMatrix::from_fn(n, n, |i, j| cfg.kernel(x[i], x[j])),
    )
}

/// `θ(x) = (1 + x) g(x)` on the grid.
pub fn gp_prior(cfg: &GpConfig) -> Result<GaussianVector> {
    cfg.validate()?;
    let x = cfg.grid();
    let n = x.len();
    gaussian_with_jitter(
        DVector::zeros(n),
        DMatrix::from_fn(n, n, |i, j| {
            cfg.scale(x[i]) * cfg.scale(x[j]) * cfg.kernel(x[i], x[j])
        }),
    )
}

/// Packs observation sites and values as `[x_1..x_N, y_1..y_N]`.
pub fn encode_observations(x: &[f64], y: &[f64]) -> Result<Dataset> {
    if x.len() != y.len() {
        return Err(CalibError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Dataset::new(x.iter().chain(y).copied().collect())
}

pub fn decode_observations(data: &Dataset) -> Result<(&[f64], &[f64])> {
    if !data.len().is_multiple_of(2) {
        return Err(CalibError::invalid(
            "GP datasets hold sites followed by values and must have even length",
        ));
    }
    Ok(data.split_at(data.len() / 2))
}

/// Draws `n_obs` distinct grid indices uniformly.
fn distinct_sites(cfg: &GpConfig, rng: &mut RngStream) -> Vec<usize> {
    let mut sites: Vec<usize> = Vec::with_capacity(cfg.n_obs);
    while sites.len() < cfg.n_obs {
        let i = rng.below(cfg.grid_size as u64) as usize;
        if !sites.contains(&i) {
            sites.push(i);
        }
    }
    sites
}

/// Observes the function-valued parameter at random distinct grid sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpObservationModel {
    pub config: GpConfig,
}

impl DataGeneratingModel for GpObservationModel {
    fn sample(&self, theta: &ParamPoint, rng: &mut RngStream) -> Result<Dataset> {
        if theta.dim() != self.config.grid_size {
            return Err(CalibError::DimensionMismatch {
                expected: self.config.grid_size,
                got: theta.dim(),
            });
        }
        let grid = self.config.grid();
        let sites = distinct_sites(&self.config, rng);
        let x: Vec<f64> = sites.iter().map(|&i| grid[i]).collect();
        let y: Vec<f64> = sites.iter().map(|&i| theta[i]).collect();
        encode_observations(&x, &y)
    }
}

/// A truth drawn from [`gp_prior`] together with its observations.
#[derive(Debug, Clone, PartialEq)]
pub struct GpTruth {
    pub theta: ParamPoint,
    pub x_obs: Vec<f64>,
    pub y_obs: Vec<f64>,
}

pub fn gp_simulate_truth(
    cfg: &GpConfig,
    prior: &GaussianVector,
    rng: &mut RngStream,
) -> Result<GpTruth> {
    if prior.dim() != cfg.grid_size {
        return Err(CalibError::DimensionMismatch {
            expected: cfg.grid_size,
            got: prior.dim(),
        });
    }
    let theta = prior.sample(rng);
    let data = GpObservationModel { config: *cfg }.sample(&theta, rng)?;
    let (x, y) = decode_observations(&data)?;
    Ok(GpTruth {
        x_obs: x.to_vec(),
        y_obs: y.to_vec(),
        theta,
    })
}

/// A fitted stationary GP.
#[derive(Debug, Clone)]
pub struct GpFit {
    config: GpConfig,
    x_obs: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
    sigma0_sq: f64,
}

pub fn gp_fit_stationary(cfg: &GpConfig, x_obs: &[f64], y_obs: &[f64]) -> Result<GpFit> {
    cfg.validate()?;
    let n = x_obs.len();
    if n == 0 {
        return Err(CalibError::EmptyInput("GP observations"));
    }
    if y_obs.len() != n {
        return Err(CalibError::DimensionMismatch {
            expected: n,
            got: y_obs.len(),
        });
    }
    if x_obs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(CalibError::invalid("GP sites must lie in [0, 1]"));
    }
    let k = DMatrix::from_fn(n, n, |i, j| {
        cfg.kernel(x_obs[i], x_obs[j]) + if i == j { JITTER } else { 0.0 }
    });
    let chol = k.cholesky().ok_or(CalibError::SingularMatrix)?;
    let y = DVector::from_column_slice(y_obs);
    let weights = chol.solve(&y);
    let sigma0_sq = (y.dot(&weights) / n as f64).max(JITTER);
    Ok(GpFit {
        config: *cfg,
        x_obs: x_obs.to_vec(),
        chol,
        weights,
        sigma0_sq,
    })
}

impl GpFit {
    /// Maximum-likelihood amplitude `σ0²`.
    pub fn sigma0_sq(&self) -> f64 {
        self.sigma0_sq
    }

    fn cross(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.x_obs.len(),
            self.x_obs.iter().map(|&xi| self.config.kernel(x, xi)),
        )
    }

    /// Predictive marginal at `x`.
    pub fn predict(&self, x: f64) -> Result<ScalarDistribution> {
        let k = self.cross(x);
        let mean = k.dot(&self.weights);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&k)
            .ok_or(CalibError::SingularMatrix)?;
        let var = self.sigma0_sq * (1.0 - v.norm_squared()).max(1e-12);
        ScalarDistribution::normal(mean, var)
    }

    /// Joint predictive law at the points `xs`.
    pub fn joint(&self, xs: &[f64]) -> Result<GaussianVector> {
        let m = xs.len();
        let cross = DMatrix::from_fn(self.x_obs.len(), m, |i, j| {
            self.config.kernel(self.x_obs[i], xs[j])
        });
        let mean = cross.transpose() * &self.weights;
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&cross)
            .ok_or(CalibError::SingularMatrix)?;
        let prior = DMatrix::from_fn(m, m, |i, j| self.config.kernel(xs[i], xs[j]));
        let cov = (prior - v.transpose() * v) * self.sigma0_sq;
        gaussian_with_jitter(mean, cov)
    }
}

/// The stationary fit as a procedure returning the joint law on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryGp {
    pub config: GpConfig,
}

impl LearningProcedure for StationaryGp {
    fn infer(
        &self,
        _belief: &Belief,
        data: &Dataset,
        _rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        let (x, y) = decode_observations(data)?;
        let fit = gp_fit_stationary(&self.config, x, y)?;
        Ok(PosteriorOutput::gaussian(fit.joint(&self.config.grid())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_training_points() {
        let cfg = GpConfig::default();
        let x = [0.1, 0.35, 0.6, 0.9];
        let y = [1.0, -0.5, 0.3, 2.0];
        let fit = gp_fit_stationary(&cfg, &x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let p = fit.predict(*xi).unwrap();
            assert!(p.variance().unwrap() <= 1e-8);
            assert!((p.mean().unwrap() - yi).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_data_floors_amplitude() {
        let cfg = GpConfig::default();
        let fit = gp_fit_stationary(&cfg, &[0.2, 0.7], &[0.0, 0.0]).unwrap();
        assert_eq!(fit.sigma0_sq(), JITTER);
        assert_eq!(fit.predict(0.4).unwrap().mean().unwrap(), 0.0);
    }

    #[test]
    fn amplitude_maximises_likelihood() {
        let cfg = GpConfig::default();
        let x = [0.3, 0.38];
        let y = [0.8, -0.4];
        let fit = gp_fit_stationary(&cfg, &x, &y).unwrap();
        // profile log-likelihood in σ² with K fixed
        let k = DMatrix::from_fn(2, 2, |i, j| {
            cfg.kernel(x[i], x[j]) + if i == j { JITTER } else { 0.0 }
        });
        let yv = DVector::from_column_slice(&y);
        let quad = yv.dot(&k.clone().lu().solve(&yv).unwrap());
        let loglik = |s2: f64| -(2.0 / 2.0) * s2.ln() - quad / (2.0 * s2);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 1..=200_000 {
            let s2 = i as f64 * 1e-4;
            if loglik(s2) > best.0 {
                best = (loglik(s2), s2);
            }
        }
        assert!((fit.sigma0_sq() - best.1).abs() <= 1e-4);
    }

    #[test]
    fn rejects_bad_sites() {
        let cfg = GpConfig::default();
        assert!(gp_fit_stationary(&cfg, &[1.5], &[0.0]).is_err());
        assert!(gp_fit_stationary(&cfg, &[0.5, 0.2], &[0.0]).is_err());
        assert!(gp_fit_stationary(&cfg, &[], &[]).is_err());
        assert!(GpConfig { n_obs: 200, ..cfg }.validate().is_err());
    }

    #[test]
    fn truth_observations_are_exact() {
        let cfg = GpConfig::default();
        let prior = gp_prior(&cfg).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..50 {
            let t = gp_simulate_truth(&cfg, &prior, &mut rng).unwrap();
            assert_eq!(t.x_obs.len(), 10);
            for (x, y) in t.x_obs.iter().zip(&t.y_obs) {
                assert_eq!(t.theta[cfg.grid_index(*x)], *y);
            }
            let mut idx: Vec<usize> = t.x_obs.iter().map(|&x| cfg.grid_index(x)).collect();
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 10);
        }
    }

    #[test]
    fn grid_covariances_match_kernel() {
        let cfg = GpConfig::default();
        let prior = gp_prior(&cfg).unwrap();
        let grid = cfg.grid();
        let mut rng = RngStream::new(2, 0);
        let reps = 10_000;
        let probe = [0usize, 10, 25, 50, 100];
        let mut acc = vec![0.0; probe.len() * probe.len()];
        let mut sd_end = [0.0; 2];
        for _ in 0..reps {
            let theta = prior.sample(&mut rng);
            let g: Vec<f64> = probe
                .iter()
                .map(|&i| theta[i] / cfg.scale(grid[i]))
                .collect();
            for a in 0..probe.len() {
                for b in 0..probe.len() {
                    acc[a * probe.len() + b] += g[a] * g[b];
                }
            }
            sd_end[0] += theta[0] * theta[0];
            sd_end[1] += theta[100] * theta[100];
        }
        for a in 0..probe.len() {
            for b in 0..probe.len() {
                let mc = acc[a * probe.len() + b] / reps as f64;
                let exact = cfg.kernel(grid[probe[a]], grid[probe[b]]);
                assert!((mc - exact).abs() < 0.05, "({a},{b}) {mc} vs {exact}");
            }
        }
        let ratio = (sd_end[1] / sd_end[0]).sqrt();
        assert!((ratio - 2.0).abs() < 0.1, "ratio={ratio}");
    }

    #[test]
    fn joint_law_agrees_with_pointwise_prediction() {
        let cfg = GpConfig::default();
        let fit = gp_fit_stationary(&cfg, &[0.05, 0.5, 0.77], &[0.3, -1.0, 0.4]).unwrap();
        let xs = [0.0, 0.21, 0.5, 0.9];
        let joint = fit.joint(&xs).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            let p = fit.predict(x).unwrap();
            let m = joint.marginal(i).unwrap();
            assert!((p.mean().unwrap() - m.mean().unwrap()).abs() < 1e-10);
            assert!((p.variance().unwrap() - m.variance().unwrap()).abs() < 1e-6);
        }
    }
}
