//! Rejection ABC, plain and noisy.

use rand::Rng;
use rand_distr::Exp1;

use crate::dist::Belief;
use crate::error::{CalibError, Result};
use crate::procedures::gandk::{quartile_summary, GKParams, QUARTILE_LEVELS};
use crate::rng::RngStream;
use crate::special::norm_quantile;
use crate::types::{
    DataGeneratingModel, Dataset, LearningProcedure, ParamPoint, ParamSampler, PosteriorOutput,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcConfig {
    /// Acceptance radius; `f64::INFINITY` accepts everything and `0` accepts
    /// only exact summary matches.
    pub tolerance: f64,
    /// Number of accepted draws returned.
    pub ensemble_size: usize,
    pub max_proposals: u64,
    pub noisy: bool,
}

impl AbcConfig {
    pub fn new(
        tolerance: f64,
        ensemble_size: usize,
        max_proposals: u64,
        noisy: bool,
    ) -> Result<Self> {
        let cfg = AbcConfig {
            tolerance,
            ensemble_size,
            max_proposals,
            noisy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(CalibError::invalid("ABC tolerance must be non-negative"));
        }
        if self.noisy && !self.tolerance.is_finite() {
            return Err(CalibError::invalid("noisy ABC needs a finite tolerance"));
        }
        if self.ensemble_size == 0 {
            return Err(CalibError::invalid("ABC ensemble size must be at least 1"));
        }
        if self.max_proposals < self.ensemble_size as u64 {
            return Err(CalibError::invalid(
                "proposal budget must be at least the ensemble size",
            ));
        }
        Ok(())
    }
}

/// Uniform point in the unit ball of `R^dim`: a normalised Gaussian
/// direction scaled by `U^{1/dim}`.
pub fn unit_ball_point(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..dim)
            .map(|_| norm_quantile(rng.uniform_open()))
            .collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let r = rng.uniform_open().powf(1.0 / dim as f64);
            return z.into_iter().map(|v| v / norm * r).collect();
        }
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += (x - y) * (x - y);
    }
    s
}

/// The acceptance predicate `d < ε`, with `ε = 0` meaning `d = 0`.
#[inline]
pub fn within_tolerance(squared_distance: f64, tolerance: f64) -> bool {
    squared_distance.sqrt() < tolerance || (tolerance == 0.0 && squared_distance == 0.0)
}

fn noisy_target(observed: Vec<f64>, cfg: &AbcConfig, rng: &mut RngStream) -> Vec<f64> {
    if !cfg.noisy {
        return observed;
    }
    let x = unit_ball_point(observed.len(), rng);
    observed
        .iter()
        .zip(x)
        .map(|(s, x)| s + cfg.tolerance * x)
        .collect()
}

fn exhausted(proposals: u64, accepted: usize) -> CalibError {
    CalibError::ProposalsExhausted {
        proposals,
        accepted,
        rate: accepted as f64 / proposals.max(1) as f64,
    }
}

/// Rejection sampler: propose `θ* ~ prior`, `y* ~ model(θ*)`, keep `θ*` when
/// `‖summary(y*) - target‖` is within tolerance.
pub fn abc_infer<S>(
    prior: &dyn ParamSampler,
    model: &dyn DataGeneratingModel,
    summary: S,
    cfg: &AbcConfig,
    y_obs: &Dataset,
    rng: &mut RngStream,
) -> Result<PosteriorOutput>
where
    S: Fn(&Dataset) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let target = noisy_target(summary(y_obs)?, cfg, rng);
    abc_with_target(prior, model, summary, cfg, &target, rng)
}

fn abc_with_target<S>(
    prior: &dyn ParamSampler,
    model: &dyn DataGeneratingModel,
    summary: S,
    cfg: &AbcConfig,
    target: &[f64],
    rng: &mut RngStream,
) -> Result<PosteriorOutput>
where
    S: Fn(&Dataset) -> Result<Vec<f64>>,
{
    let mut accepted = Vec::with_capacity(cfg.ensemble_size);
    let mut proposals = 0u64;
    while accepted.len() < cfg.ensemble_size {
        if proposals == cfg.max_proposals {
            return Err(exhausted(proposals, accepted.len()));
        }
        proposals += 1;
        let theta = prior.draw(rng);
        let y = model.sample(&theta, rng)?;
        let s = summary(&y)?;
        if s.len() != target.len() {
            return Err(CalibError::DimensionMismatch {
                expected: target.len(),
                got: s.len(),
            });
        }
        if within_tolerance(squared_distance(&s, target), cfg.tolerance) {
            accepted.push(theta);
        }
    }
    PosteriorOutput::empirical(accepted)
}

/// ABC for the g-and-k location model with the quartile summary.
///
/// Targets the same posterior as [`abc_infer`] with a [`GkModel`] and
/// [`quartile_summary`], but simulates each proposal through its order
/// statistics. For `k >= 0` the transform is increasing, so the sample
/// maximum is the transformed maximum of the normal inputs. That maximum is
/// drawn first, directly from its distribution, and most proposals are
/// rejected on it alone. The minimum follows given the maximum, and the
/// interior points are only drawn for proposals that survive both checks.
///
/// [`GkModel`]: crate::procedures::gandk::GkModel
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkAbc {
    pub params: GKParams,
    pub n_obs: usize,
    pub config: AbcConfig,
}

impl GkAbc {
    fn infer_fast(
        &self,
        prior: &crate::dist::ScalarDistribution,
        y_obs: &Dataset,
        rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        let target = noisy_target(quartile_summary(y_obs)?.to_vec(), &self.config, rng);
        self.infer_with_target(prior, &target, rng)
    }

    fn infer_with_target(
        &self,
        prior: &crate::dist::ScalarDistribution,
        target: &[f64],
        rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        let cfg = &self.config;
        let p = &self.params;
        let eps = cfg.tolerance;
        let accept_all = eps == f64::INFINITY;
        let n = self.n_obs;
        let mut z = vec![0.0f64; n];
        let mut accepted = Vec::with_capacity(cfg.ensemble_size);
        let mut proposals = 0u64;
        let mut summary = [0.0f64; 5];
        while accepted.len() < cfg.ensemble_size {
            if proposals == cfg.max_proposals {
                return Err(exhausted(proposals, accepted.len()));
            }
            proposals += 1;
            let theta = prior.sample(rng);
            if accept_all {
                accepted.push(ParamPoint::scalar(theta));
                continue;
            }
            // 1 - U_(n) for the largest of n uniforms, kept small for accuracy.
            let e: f64 = rng.sample(Exp1);
            let upper_gap = -(-e / n as f64).exp_m1();
            let z_hi = -norm_quantile(upper_gap);
            let d_hi = theta + p.transform(z_hi) - target[4];
            if !within_tolerance(d_hi * d_hi, eps) {
                continue;
            }
            // The other n - 1 uniforms are iid on (0, U_(n)).
            let u_hi = 1.0 - upper_gap;
            let e: f64 = rng.sample(Exp1);
            let u_lo = u_hi * -(-e / (n - 1) as f64).exp_m1();
            let z_lo = norm_quantile(u_lo);
            let d_lo = theta + p.transform(z_lo) - target[0];
            if !within_tolerance(d_lo * d_lo + d_hi * d_hi, eps) {
                continue;
            }
            z[0] = z_lo;
            z[n - 1] = z_hi;
            for v in &mut z[1..n - 1] {
                *v = norm_quantile(u_lo + (u_hi - u_lo) * rng.uniform_open());
            }
            z[1..n - 1].sort_unstable_by(f64::total_cmp);
            for (s, &q) in summary.iter_mut().zip(&QUARTILE_LEVELS) {
                let pos = (n - 1) as f64 * q;
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                let yi = theta + p.transform(z[i]);
                *s = if frac == 0.0 || i + 1 >= n {
                    yi
                } else {
                    let yj = theta + p.transform(z[i + 1]);
                    yi + frac * (yj - yi)
                };
            }
            if within_tolerance(squared_distance(&summary, target), eps) {
                accepted.push(ParamPoint::scalar(theta));
            }
        }
        PosteriorOutput::empirical(accepted)
    }
}

impl LearningProcedure for GkAbc {
    fn infer(
        &self,
        belief: &Belief,
        data: &Dataset,
        rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        self.config.validate()?;
        if self.n_obs < 5 {
            return Err(CalibError::InsufficientData {
                needed: 5,
                got: self.n_obs,
            });
        }
        match belief.as_scalar() {
            Some(prior) if self.params.k >= 0.0 => self.infer_fast(prior, data, rng),
            _ => {
                let model = crate::procedures::gandk::GkModel {
                    params: self.params,
                    n_obs: self.n_obs,
                };
                abc_infer(
                    belief,
                    &model,
                    |y: &Dataset| Ok(quartile_summary(y)?.to_vec()),
                    &self.config,
                    data,
                    rng,
                )
            }
        }
    }
}
