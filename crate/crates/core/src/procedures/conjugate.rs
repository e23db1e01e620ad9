//! Gaussian location models with a normal belief, and the closed-form
//! procedures built on them.

use crate::dist::{Belief, ScalarDistribution};
use crate::error::{CalibError, Result};
use crate::rng::RngStream;
use crate::special::norm_quantile;
use crate::types::{DataGeneratingModel, Dataset, LearningProcedure, ParamPoint, PosteriorOutput};

fn normal_belief(belief: &Belief) -> Result<(f64, f64)> {
    belief
        .as_normal()
        .ok_or_else(|| CalibError::invalid("this procedure needs a univariate normal belief"))
}

fn check_obs_var(obs_var: f64) -> Result<()> {
    if obs_var.is_finite() && obs_var > 0.0 {
        Ok(())
    } else {
        Err(CalibError::invalid("observation variance must be positive"))
    }
}

fn tempered_posterior(
    belief: &Belief,
    obs_var: f64,
    power: f64,
    y: &[f64],
) -> Result<PosteriorOutput> {
    check_obs_var(obs_var)?;
    if y.is_empty() {
        return Err(CalibError::EmptyInput("dataset"));
    }
    let (m0, v0) = normal_belief(belief)?;
    if power == 0.0 {
        return Ok(PosteriorOutput::scalar(ScalarDistribution::normal(m0, v0)?));
    }
    let sum: f64 = y.iter().sum();
    let precision = 1.0 / v0 + power * y.len() as f64 / obs_var;
    let mean = (m0 / v0 + power * sum / obs_var) / precision;
    Ok(PosteriorOutput::scalar(ScalarDistribution::normal(
        mean,
        1.0 / precision,
    )?))
}

/// Conjugate posterior for `y_n ~ N(θ, obs_var)` under a normal belief.
pub fn bayes_gaussian_location(
    belief: &Belief,
    obs_var: f64,
    y: &Dataset,
) -> Result<PosteriorOutput> {
    tempered_posterior(belief, obs_var, 1.0, y)
}

/// Bayes applied to the sign-flipped data.
pub fn mirror_bayes(belief: &Belief, obs_var: f64, y: &Dataset) -> Result<PosteriorOutput> {
    let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
    tempered_posterior(belief, obs_var, 1.0, &flipped)
}

/// Posterior with the likelihood raised to `power` in `[0, 1]`.
pub fn fractional_posterior(
    belief: &Belief,
    obs_var: f64,
    power: f64,
    y: &Dataset,
) -> Result<PosteriorOutput> {
    if !(0.0..=1.0).contains(&power) {
        return Err(CalibError::invalid(format!(
            "fractional power {power} is outside [0, 1]"
        )));
    }
    tempered_posterior(belief, obs_var, power, y)
}

/// Ignores the data and returns the belief unchanged.
pub fn data_agnostic(belief: &Belief, _y: &Dataset) -> PosteriorOutput {
    PosteriorOutput::Analytic(belief.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bayes {
    pub obs_var: f64,
}

impl LearningProcedure for Bayes {
    fn infer(
        &self,
        belief: &Belief,
        data: &Dataset,
        _rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        bayes_gaussian_location(belief, self.obs_var, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorBayes {
    pub obs_var: f64,
}

impl LearningProcedure for MirrorBayes {
    fn infer(
        &self,
        belief: &Belief,
        data: &Dataset,
        _rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        mirror_bayes(belief, self.obs_var, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractional {
    pub obs_var: f64,
    pub power: f64,
}

impl LearningProcedure for Fractional {
    fn infer(
        &self,
        belief: &Belief,
        data: &Dataset,
        _rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        fractional_posterior(belief, self.obs_var, self.power, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DataAgnostic;

impl LearningProcedure for DataAgnostic {
    fn infer(
        &self,
        belief: &Belief,
        data: &Dataset,
        _rng: &mut RngStream,
    ) -> Result<PosteriorOutput> {
        Ok(data_agnostic(belief, data))
    }
}

/// `y_n ~ N(θ, obs_var)` iid, `n = 1..=n_obs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLocationModel {
    pub obs_var: f64,
    pub n_obs: usize,
}

impl GaussianLocationModel {
    pub fn new(obs_var: f64, n_obs: usize) -> Result<Self> {
        check_obs_var(obs_var)?;
        if n_obs == 0 {
            return Err(CalibError::invalid("need at least one observation"));
        }
        Ok(GaussianLocationModel { obs_var, n_obs })
    }
}

impl DataGeneratingModel for GaussianLocationModel {
    fn sample(&self, theta: &ParamPoint, rng: &mut RngStream) -> Result<Dataset> {
        let sd = self.obs_var.sqrt();
        let t = theta[0];
        Ok(Dataset::new_unchecked(
            (0..self.n_obs)
                .map(|_| t + sd * norm_quantile(rng.uniform_open()))
                .collect(),
        ))
    }
}

/// Each observation is `N(θ, obs_var)` with probability `1 - contamination`
/// and `N(outlier_mean, obs_var)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContaminatedGaussianModel {
    pub contamination: f64,
    pub outlier_mean: f64,
    pub obs_var: f64,
    pub n_obs: usize,
}

impl ContaminatedGaussianModel {
    pub fn new(contamination: f64, outlier_mean: f64, obs_var: f64, n_obs: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&contamination) {
            return Err(CalibError::invalid("contamination must lie in [0, 1]"));
        }
        check_obs_var(obs_var)?;
        if n_obs == 0 {
            return Err(CalibError::invalid("need at least one observation"));
        }
        Ok(ContaminatedGaussianModel {
            contamination,
            outlier_mean,
            obs_var,
            n_obs,
        })
    }

    /// Marginal law of one observation given `θ`.
    pub fn observation_law(&self, theta: f64) -> Result<ScalarDistribution> {
        if self.contamination == 0.0 {
            return ScalarDistribution::normal(theta, self.obs_var);
        }
        ScalarDistribution::normal_mixture(
            self.contamination,
            (theta, self.obs_var),
            (self.outlier_mean, self.obs_var),
        )
    }
}

impl DataGeneratingModel for ContaminatedGaussianModel {
    fn sample(&self, theta: &ParamPoint, rng: &mut RngStream) -> Result<Dataset> {
        let sd = self.obs_var.sqrt();
        Ok(Dataset::new_unchecked(
            (0..self.n_obs)
                .map(|_| {
                    let centre = if rng.uniform_open() < self.contamination {
                        self.outlier_mean
                    } else {
                        theta[0]
                    };
                    centre + sd * norm_quantile(rng.uniform_open())
                })
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal() -> Belief {
        Belief::Scalar(ScalarDistribution::standard_normal())
    }

    fn normal_params(p: &PosteriorOutput) -> (f64, f64) {
        p.as_analytic().unwrap().as_normal().unwrap()
    }

    fn close(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-14 && (a.1 - b.1).abs() < 1e-14
    }

    #[test]
    fn bayes_examples() {
        let y = Dataset::new(vec![2.0]).unwrap();
        assert!(close(
            normal_params(&bayes_gaussian_location(&std_normal(), 1.0, &y).unwrap()),
            (1.0, 0.5)
        ));
        let y = Dataset::new(vec![0.0]).unwrap();
        assert!(close(
            normal_params(&bayes_gaussian_location(&std_normal(), 1.0, &y).unwrap()),
            (0.0, 0.5)
        ));
        // precision 1 + 2 = 3, mean (1 + 3) / 3
        let y = Dataset::new(vec![1.0, 3.0]).unwrap();
        assert!(close(
            normal_params(&bayes_gaussian_location(&std_normal(), 1.0, &y).unwrap()),
            (4.0 / 3.0, 1.0 / 3.0)
        ));
    }

    #[test]
    fn bayes_rejects_bad_inputs() {
        let y = Dataset::new(vec![1.0]).unwrap();
        assert!(bayes_gaussian_location(&std_normal(), 0.0, &y).is_err());
        let t = Belief::Scalar(ScalarDistribution::student_t(0.0, 1.0, 3.0).unwrap());
        assert!(bayes_gaussian_location(&t, 1.0, &y).is_err());
        assert!(tempered_posterior(&std_normal(), 1.0, 1.0, &[]).is_err());
    }

    #[test]
    fn mirror_examples() {
        let y = Dataset::new(vec![2.0]).unwrap();
        assert!(close(
            normal_params(&mirror_bayes(&std_normal(), 1.0, &y).unwrap()),
            (-1.0, 0.5)
        ));
        let y = Dataset::new(vec![0.0]).unwrap();
        assert!(close(
            normal_params(&mirror_bayes(&std_normal(), 1.0, &y).unwrap()),
            (0.0, 0.5)
        ));
    }

    #[test]
    fn mirror_is_an_involution() {
        let mut rng = RngStream::new(8, 0);
        for _ in 0..100 {
            let v = norm_quantile(rng.uniform_open()) * 3.0;
            let y = Dataset::new(vec![v]).unwrap();
            let flipped = Dataset::new(vec![-v]).unwrap();
            assert_eq!(
                mirror_bayes(&std_normal(), 1.0, &flipped).unwrap(),
                bayes_gaussian_location(&std_normal(), 1.0, &y).unwrap()
            );
        }
    }

    #[test]
    fn fractional_examples() {
        let y = Dataset::new(vec![2.0]).unwrap();
        let b = std_normal();
        assert_eq!(
            fractional_posterior(&b, 1.0, 1.0, &y).unwrap(),
            bayes_gaussian_location(&b, 1.0, &y).unwrap()
        );
        assert_eq!(
            fractional_posterior(&b, 1.0, 0.0, &y).unwrap(),
            PosteriorOutput::Analytic(b.clone())
        );
        // completing the square with likelihood exponent 1/2
        let p = normal_params(&fractional_posterior(&b, 1.0, 0.5, &y).unwrap());
        assert!((p.0 - 2.0 / 3.0).abs() < 1e-14 && (p.1 - 2.0 / 3.0).abs() < 1e-14);
        assert!(fractional_posterior(&b, 1.0, 1.5, &y).is_err());
        assert!(fractional_posterior(&b, 1.0, -0.1, &y).is_err());
    }

    #[test]
    fn data_agnostic_returns_belief() {
        let b = Belief::Scalar(ScalarDistribution::normal(0.3, 2.0).unwrap());
        let y1 = Dataset::new(vec![1.0]).unwrap();
        let y2 = Dataset::new(vec![-7.0, 2.0]).unwrap();
        let out = data_agnostic(&b, &y1);
        assert_eq!(out, PosteriorOutput::Analytic(b.clone()));
        assert_eq!(out, data_agnostic(&b, &y2));
        let again = data_agnostic(out.as_analytic().unwrap(), &y1);
        assert_eq!(again, out);
    }

    #[test]
    fn fractional_data_averaged_variance() {
        // Var(ϑ) = E[Var(ϑ|y)] + Var(E[ϑ|y]) for θ ~ N(0,1), y = θ + σ ε.
        let mut rng = RngStream::new(77, 0);
        for &(t, s2) in &[(0.5, 1.0), (0.25, 4.0), (1.0, 0.25)] {
            let model = GaussianLocationModel::new(s2, 1).unwrap();
            let proc_ = Fractional {
                obs_var: s2,
                power: t,
            };
            let b = std_normal();
            let n = 100_000;
            let draws: Vec<f64> = (0..n)
                .map(|_| {
                    let theta = b.sample(&mut rng);
                    let y = model.sample(&theta, &mut rng).unwrap();
                    proc_.infer(&b, &y, &mut rng).unwrap().sample_one(&mut rng)[0]
                })
                .collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let post_var = s2 / (t + s2);
            let mean_var = (t / (t + s2)).powi(2) * (1.0 + s2);
            let expected = post_var + mean_var;
            let formula = (t * t * (s2 + 1.0) + s2 * (t + s2)) / (t + s2).powi(2);
            assert!((expected - formula).abs() < 1e-12);
            let se = expected * (2.0 / (n - 1) as f64).sqrt();
            assert!(
                (var - expected).abs() < 3.0 * se,
                "t={t} s2={s2} var={var} expected={expected}"
            );
        }
    }

    #[test]
    fn contaminated_model_mixture_fraction() {
        let m = ContaminatedGaussianModel::new(0.2, 5.0, 1.0, 50_000).unwrap();
        let mut rng = RngStream::new(5, 0);
        let y = m.sample(&ParamPoint::scalar(-5.0), &mut rng).unwrap();
        let frac = y.iter().filter(|&&v| v > 0.0).count() as f64 / y.len() as f64;
        assert!((frac - 0.2).abs() < 0.01);
        assert!(ContaminatedGaussianModel::new(1.2, 5.0, 1.0, 1).is_err());
        let law = m.observation_law(0.0).unwrap();
        assert!(
            (law.cdf(2.5) - (0.8 * 0.9937903346742238 + 0.2 * 0.006209665325776132)).abs() < 1e-12
        );
    }
}
