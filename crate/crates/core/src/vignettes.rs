//! Desk-scale reproductions of the calibration studies: Laplace on
//! Student-t data, ABC on g-and-k data, fractional posteriors, robustness to
//! contamination, and data-driven test-function selection for GP regression.
//!
//! Each study sweeps one parameter and produces [`ReportRow`]s. Every
//! parameter point runs on its own master seed derived from the configured
//! seed and a label naming the point, so rows do not depend on which other
//! points were requested.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::calib::{
    clamped_pits, infer_all, select_from_outputs, simulate_hierarchical, strong_rank_test,
    strong_test, weak_test, CalibrationReport, HarnessOptions,
};
use crate::dist::{Belief, ScalarDistribution};
use crate::error::{CalibError, Result};
use crate::gof::{chi2_pit_test, unit_histogram};
use crate::procedures::{
    gp_prior, AbcConfig, Bayes, ContaminatedGaussianModel, Fractional, GKParams,
    GaussianLocationModel, GkAbc, GkModel, GpConfig, GpObservationModel, LaplaceStudentT,
    StationaryGp, StudentTLocationModel,
};
use crate::report::{ReportRow, RowHistogram};
use crate::rng::{derive_seed, RngStream};
use crate::special::norm_cdf;
use crate::testfn::TestFunction;
use crate::types::LearningProcedure;

pub const LAPLACE_DEFAULT_N_OBS: usize = 5;
pub const LAPLACE_DEFAULT_DOF: f64 = 3.0;
pub const ABC_N_OBS: usize = 20;
/// Accepted draws per ABC output in the rank test; 99 keeps `M + 1`
/// divisible by the 20 rank bins.
pub const ABC_ENSEMBLE_SIZE: usize = 99;
pub const ABC_RANK_BINS: usize = 20;
/// Proposal budget per requested ABC draw.
pub const ABC_PROPOSALS_PER_DRAW: u64 = 1_000_000;
/// Share of ABC replicates allowed to exhaust their proposal budget.
pub const ABC_MAX_FAILURE_FRACTION: f64 = 0.01;
pub const ROBUST_PRIOR_VAR: f64 = 3.0;
pub const ROBUST_OUTLIER_MEAN: f64 = 5.0;
/// Grid location of the user-specified test function in the GP study.
pub const GP_BASELINE_X: f64 = 0.5;
const LOG_P_FLOOR: f64 = 1e-300;

/// `lo, lo + step, ...` up to and including `hi`, with each value rounded to
/// 12 significant digits so decimal steps print cleanly.
pub fn inclusive_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo) {
        return Err(CalibError::invalid(format!(
            "bad range {lo}:{hi}:{step}; need lo <= hi and a positive step"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(CalibError::invalid("range has too many points"));
    }
    Ok((0..count)
        .map(|i| round_significant(lo + i as f64 * step))
        .collect())
}

fn round_significant(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let digits = 12 - v.abs().log10().ceil() as i32;
    let scale = 10f64.powi(digits);
    (v * scale).round() / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vignette {
    Laplace,
    Abc,
    Fractional,
    GpSplit,
    Robust,
}

impl Vignette {
    pub const ALL: [Vignette; 5] = [
        Vignette::Laplace,
        Vignette::Abc,
        Vignette::Fractional,
        Vignette::GpSplit,
        Vignette::Robust,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Vignette::Laplace => "laplace",
            Vignette::Abc => "abc",
            Vignette::Fractional => "fractional",
            Vignette::GpSplit => "gp-split",
            Vignette::Robust => "robust",
        }
    }
}

impl fmt::Display for Vignette {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Vignette {
    type Err = CalibError;

    fn from_str(s: &str) -> Result<Self> {
        Vignette::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| CalibError::invalid(format!("unknown vignette {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VignetteConfig {
    pub vignette: Vignette,
    /// Replicates per test; realizations per split size for `gp-split`.
    pub n: usize,
    /// Replicates for the ABC rank test.
    pub n_strong: usize,
    pub seed: u64,
    pub nu_range: Vec<f64>,
    pub n_obs_range: Vec<usize>,
    pub eps_range: Vec<f64>,
    /// Fractional exponents: the swept values for `fractional`, the
    /// procedures compared against Bayes for `robust`.
    pub t_set: Vec<f64>,
    pub contam_range: Vec<f64>,
    /// Total simulation counts `S`, split evenly into selection and test sets.
    pub split_sizes: Vec<usize>,
    /// Observations per dataset in the contamination study.
    pub robust_n_obs: usize,
    /// ABC proposals allowed per accepted draw before a replicate is
    /// abandoned.
    pub abc_budget: u64,
    /// Record wall-clock time per row. Off by default so that reports are
    /// byte-identical across runs.
    pub timing: bool,
}

impl VignetteConfig {
    /// Desk-scale defaults.
    pub fn new(vignette: Vignette) -> Self {
        let (n, t_set) = match vignette {
            Vignette::GpSplit => (100, vec![]),
            Vignette::Robust => (100_000, vec![0.1, 0.2, 0.3]),
            _ => (100_000, vec![0.0, 0.25, 0.5, 0.75, 1.0]),
        };
        VignetteConfig {
            vignette,
            n,
            n_strong: 2000,
            seed: 1,
            nu_range: (1..=20).map(f64::from).collect(),
            n_obs_range: (1..=20).collect(),
            eps_range: (1..=10).map(f64::from).collect(),
            t_set,
            contam_range: inclusive_range(0.0, 0.3, 0.05).expect("valid default range"),
            split_sizes: (0..8).map(|i| 10 + 20 * i).collect(),
            robust_n_obs: 1,
            abc_budget: ABC_PROPOSALS_PER_DRAW,
            timing: false,
        }
    }

    /// Restores the replicate counts of the original study.
    pub fn full_scale(mut self) -> Self {
        match self.vignette {
            Vignette::Laplace | Vignette::Fractional => self.n = 1_000_000,
            Vignette::Abc => {
                self.n = 1_000_000;
                self.n_strong = 10_000;
            }
            Vignette::Robust => self.n = 100_000,
            Vignette::GpSplit => self.n = 100,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(CalibError::invalid("need at least 100 replicates"));
        }
        let nonempty = |len: usize, what: &str| {
            if len == 0 {
                Err(CalibError::invalid(format!("{what} must not be empty")))
            } else {
                Ok(())
            }
        };
        match self.vignette {
            Vignette::Laplace => {
                nonempty(self.nu_range.len(), "nu range")?;
                nonempty(self.n_obs_range.len(), "n-obs range")?;
                if self.nu_range.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(CalibError::invalid("degrees of freedom must be positive"));
                }
                if self.n_obs_range.contains(&0) {
                    return Err(CalibError::invalid("observation counts must be positive"));
                }
            }
            Vignette::Abc => {
                nonempty(self.eps_range.len(), "eps range")?;
                if self.eps_range.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(CalibError::invalid(
                        "ABC tolerances must be positive and finite",
                    ));
                }
                if self.abc_budget == 0 {
                    return Err(CalibError::invalid("ABC proposal budget must be positive"));
                }
                if self.n_strong < 5 * ABC_RANK_BINS {
                    return Err(CalibError::invalid(format!(
                        "rank test needs at least {} replicates",
                        5 * ABC_RANK_BINS
                    )));
                }
            }
            Vignette::Fractional | Vignette::Robust => {
                if self.vignette == Vignette::Fractional {
                    nonempty(self.t_set.len(), "t set")?;
                } else {
                    nonempty(self.contam_range.len(), "contamination range")?;
                    if self.robust_n_obs == 0 {
                        return Err(CalibError::invalid("observation count must be positive"));
                    }
                }
                if self.t_set.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(CalibError::invalid(
                        "fractional exponents must lie in [0, 1]",
                    ));
                }
                if self.contam_range.iter().any(|c| !(0.0..=1.0).contains(c)) {
                    return Err(CalibError::invalid("contamination must lie in [0, 1]"));
                }
            }
            Vignette::GpSplit => {
                nonempty(self.split_sizes.len(), "split sizes")?;
                if self.split_sizes.iter().any(|&s| s < 4 || s % 2 != 0) {
                    return Err(CalibError::invalid(
                        "split sizes must be even and at least 4",
                    ));
                }
            }
        }
        Ok(())
    }

    fn point_stream(&self, label: &str) -> RngStream {
        RngStream::new(derive_seed(self.seed, label), 0)
    }

    fn elapsed_ms(&self, start: Instant) -> u64 {
        if self.timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        }
    }
}

pub fn run_vignette(cfg: &VignetteConfig) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    match cfg.vignette {
        Vignette::Laplace => run_laplace_vignette(cfg),
        Vignette::Abc => run_abc_vignette(cfg),
        Vignette::Fractional => run_fractional_vignette(cfg),
        Vignette::GpSplit => run_gp_split_vignette(cfg),
        Vignette::Robust => run_robust_vignette(cfg),
    }
}

fn row_from_report(
    cfg: &VignetteConfig,
    param_name: &str,
    param_value: f64,
    mode: String,
    report: &CalibrationReport,
    start: Instant,
) -> ReportRow {
    ReportRow {
        vignette: cfg.vignette.to_string(),
        param_name: param_name.into(),
        param_value,
        mode,
        statistic: report.gof.statistic,
        p_value: report.gof.p_value,
        n: report.n_replicates,
        seed: cfg.seed,
        wall_ms: cfg.elapsed_ms(start),
        histogram: Some(RowHistogram {
            edges: report.bin_edges.clone(),
            counts: report.histogram.clone(),
        }),
    }
}

fn standard_normal_prior() -> Belief {
    Belief::Scalar(ScalarDistribution::standard_normal())
}

fn laplace_point(
    cfg: &VignetteConfig,
    param_name: &str,
    param_value: f64,
    dof: f64,
    n_obs: usize,
) -> Result<Vec<ReportRow>> {
    let prior = standard_normal_prior();
    let model = StudentTLocationModel::new(dof, n_obs)?;
    let procedure = LaplaceStudentT { dof };
    let opts = HarnessOptions::default();
    let label = format!("laplace/{param_name}={param_value}");
    let mut rows = Vec::with_capacity(2);
    let start = Instant::now();
    let strong = strong_test(
        &procedure,
        &prior,
        &model,
        &TestFunction::Identity,
        cfg.n,
        &cfg.point_stream(&format!("{label}/strong")),
        &opts,
    )?;
    rows.push(row_from_report(
        cfg,
        param_name,
        param_value,
        "strong".into(),
        &strong,
        start,
    ));
    let start = Instant::now();
    let weak = weak_test(
        &procedure,
        &prior,
        &model,
        &TestFunction::Identity,
        cfg.n,
        &cfg.point_stream(&format!("{label}/weak")),
        &opts,
    )?;
    rows.push(row_from_report(
        cfg,
        param_name,
        param_value,
        "weak".into(),
        &weak,
        start,
    ));
    Ok(rows)
}

/// Laplace approximation under a Student-t likelihood with a `N(0, 1)`
/// prior: a sweep over degrees of freedom at `N = 5` and a sweep over `N` at
/// three degrees of freedom, each with a strong and a weak KS row.
pub fn run_laplace_vignette(cfg: &VignetteConfig) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for &nu in &cfg.nu_range {
        rows.extend(laplace_point(cfg, "nu", nu, nu, LAPLACE_DEFAULT_N_OBS)?);
    }
    for &n_obs in &cfg.n_obs_range {
        rows.extend(laplace_point(
            cfg,
            "n_obs",
            n_obs as f64,
            LAPLACE_DEFAULT_DOF,
            n_obs,
        )?);
    }
    Ok(rows)
}

/// Plain and noisy rejection ABC for the g-and-k location with the quartile
/// summary and `N(0, 1)` prior. Per tolerance: rank tests on ensembles of
/// [`ABC_ENSEMBLE_SIZE`] draws and weak KS tests on single draws.
pub fn run_abc_vignette(cfg: &VignetteConfig) -> Result<Vec<ReportRow>> {
    let prior = standard_normal_prior();
    let params = GKParams::default();
    let model = GkModel {
        params,
        n_obs: ABC_N_OBS,
    };
    let opts = HarnessOptions {
        max_failure_fraction: ABC_MAX_FAILURE_FRACTION,
        ..HarnessOptions::default()
    };
    let procedure = |eps: f64, m: usize, noisy: bool| -> Result<GkAbc> {
        Ok(GkAbc {
            params,
            n_obs: ABC_N_OBS,
            config: AbcConfig::new(eps, m, cfg.abc_budget.saturating_mul(m as u64), noisy)?,
        })
    };
    let mut rows = Vec::new();
    for &eps in &cfg.eps_range {
        for noisy in [false, true] {
            let kind = if noisy { "noisy" } else { "plain" };
            let start = Instant::now();
            let report = strong_rank_test(
                &procedure(eps, ABC_ENSEMBLE_SIZE, noisy)?,
                &prior,
                &model,
                &TestFunction::Identity,
                cfg.n_strong,
                ABC_ENSEMBLE_SIZE,
                ABC_RANK_BINS,
                &cfg.point_stream(&format!("abc/epsilon={eps}/strong-rank/{kind}")),
                &opts,
            )?;
            rows.push(row_from_report(
                cfg,
                "epsilon",
                eps,
                format!("strong-rank:{kind}"),
                &report,
                start,
            ));
        }
        for noisy in [false, true] {
            let kind = if noisy { "noisy" } else { "plain" };
            let start = Instant::now();
            let report = weak_test(
                &procedure(eps, 1, noisy)?,
                &prior,
                &model,
                &TestFunction::Identity,
                cfg.n,
                &cfg.point_stream(&format!("abc/epsilon={eps}/weak/{kind}")),
                &opts,
            )?;
            rows.push(row_from_report(
                cfg,
                "epsilon",
                eps,
                format!("weak:{kind}"),
                &report,
                start,
            ));
        }
    }
    Ok(rows)
}

/// Fractional posteriors for a single `N(θ, 1)` observation and `N(0, 1)`
/// prior, strong and weak KS rows per exponent.
pub fn run_fractional_vignette(cfg: &VignetteConfig) -> Result<Vec<ReportRow>> {
    let prior = standard_normal_prior();
    let model = GaussianLocationModel::new(1.0, 1)?;
    let opts = HarnessOptions::default();
    let mut rows = Vec::new();
    for &t in &cfg.t_set {
        let procedure = Fractional {
            obs_var: 1.0,
            power: t,
        };
        let start = Instant::now();
        let strong = strong_test(
            &procedure,
            &prior,
            &model,
            &TestFunction::Identity,
            cfg.n,
            &cfg.point_stream(&format!("fractional/t={t}/strong")),
            &opts,
        )?;
        rows.push(row_from_report(
            cfg,
            "t",
            t,
            "strong".into(),
            &strong,
            start,
        ));
        let start = Instant::now();
        let weak = weak_test(
            &procedure,
            &prior,
            &model,
            &TestFunction::Identity,
            cfg.n,
            &cfg.point_stream(&format!("fractional/t={t}/weak")),
            &opts,
        )?;
        rows.push(row_from_report(cfg, "t", t, "weak".into(), &weak, start));
    }
    Ok(rows)
}

/// Strong KS tests of Bayes and fractional posteriors, built for a
/// `N(θ, 1)` likelihood and `N(0, 3)` prior, against data in which each
/// observation comes from `N(5, 1)` with the given contamination
/// probability. Modes are `strong:bayes` and `strong:fractional-t<t>`.
pub fn run_robust_vignette(cfg: &VignetteConfig) -> Result<Vec<ReportRow>> {
    let prior = Belief::Scalar(ScalarDistribution::normal(0.0, ROBUST_PRIOR_VAR)?);
    let opts = HarnessOptions::default();
    let mut procedures: Vec<(String, Box<dyn LearningProcedure>)> =
        vec![("bayes".into(), Box::new(Bayes { obs_var: 1.0 }))];
    for &t in &cfg.t_set {
        procedures.push((
            format!("fractional-t{t}"),
            Box::new(Fractional {
                obs_var: 1.0,
                power: t,
            }),
        ));
    }
    let mut rows = Vec::new();
    for &eps in &cfg.contam_range {
        let model =
            ContaminatedGaussianModel::new(eps, ROBUST_OUTLIER_MEAN, 1.0, cfg.robust_n_obs)?;
        for (name, procedure) in &procedures {
            let start = Instant::now();
            let report = strong_test(
                procedure.as_ref(),
                &prior,
                &model,
                &TestFunction::Identity,
                cfg.n,
                &cfg.point_stream(&format!("robust/contamination={eps}/{name}")),
                &opts,
            )?;
            rows.push(row_from_report(
                cfg,
                "contamination",
                eps,
                format!("strong:{name}"),
                &report,
                start,
            ));
        }
    }
    Ok(rows)
}

/// Outcome of the GP data-splitting study at one split size.
#[derive(Debug, Clone, PartialEq)]
pub struct GpSplitSummary {
    pub split_size: usize,
    pub realizations: usize,
    /// Selected location per realization.
    pub chosen_x: Vec<f64>,
    /// Held-out log p-values for the selected location and the baseline.
    pub log_p_chosen: Vec<f64>,
    pub log_p_baseline: Vec<f64>,
    /// Mean over realizations of the selection-set log p-value at each grid
    /// point.
    pub selection_profile: Vec<f64>,
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl GpSplitSummary {
    /// Mean and standard error of the held-out log p-value at the selected
    /// locations.
    pub fn chosen(&self) -> (f64, f64) {
        mean_and_se(&self.log_p_chosen)
    }

    pub fn baseline(&self) -> (f64, f64) {
        mean_and_se(&self.log_p_baseline)
    }

    /// Mean and standard error of the paired difference, selected minus
    /// baseline; negative when selection gives the more powerful test.
    pub fn difference(&self) -> (f64, f64) {
        let d: Vec<f64> = self
            .log_p_chosen
            .iter()
            .zip(&self.log_p_baseline)
            .map(|(a, b)| a - b)
            .collect();
        mean_and_se(&d)
    }

    /// Sample variance of the selected locations.
    pub fn selection_variance(&self) -> f64 {
        let n = self.chosen_x.len() as f64;
        let mean = self.chosen_x.iter().sum::<f64>() / n;
        self.chosen_x
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / (n - 1.0).max(1.0)
    }
}

/// Runs `realizations` independent splits of `split_size` simulations from
/// the non-stationary GP model. The first half picks the grid location whose
/// evaluation test function gives the smallest two-sided χ² p-value; both
/// the selected location and [`GP_BASELINE_X`] are then tested on the second
/// half.
pub fn gp_split_study(
    gp: &GpConfig,
    split_size: usize,
    realizations: usize,
    seed: u64,
) -> Result<GpSplitSummary> {
    if split_size < 4 || !split_size.is_multiple_of(2) {
        return Err(CalibError::invalid(
            "split size must be even and at least 4",
        ));
    }
    if realizations == 0 {
        return Err(CalibError::invalid("need at least one realization"));
    }
    gp.validate()?;
    let prior = Belief::Gaussian(gp_prior(gp)?);
    let model = GpObservationModel { config: *gp };
    let procedure = StationaryGp { config: *gp };
    let grid = gp.grid();
    let candidates: Vec<TestFunction> = (0..grid.len()).map(TestFunction::Evaluation).collect();
    let baseline = TestFunction::Evaluation(gp.grid_index(GP_BASELINE_X));
    let half = split_size / 2;

    let per_realization: Vec<(f64, f64, f64, Vec<f64>)> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let stream = RngStream::new(derive_seed(seed, &format!("realization-{r}")), 0);
            let samples = simulate_hierarchical(&prior, &model, split_size, &stream)?;
            let outputs = infer_all(&samples, &procedure, &prior, &stream.fork("inference", 0))?;
            let (s1, s2) = samples.split_at(half);
            let (o1, o2) = outputs.split_at(half);
            let selection = select_from_outputs(&candidates, s1, o1)?;
            let held_out = |f: &TestFunction| -> Result<f64> {
                let (pits, _) = clamped_pits(s2, o2, f)?;
                Ok(chi2_pit_test(&pits)?.p_value.max(LOG_P_FLOOR).ln())
            };
            let profile = selection
                .p_values
                .iter()
                .map(|p| p.max(LOG_P_FLOOR).ln())
                .collect();
            Ok((
                grid[selection.chosen_index],
                held_out(&selection.chosen)?,
                held_out(&baseline)?,
                profile,
            ))
        })
        .collect::<Result<_>>()?;

    let mut selection_profile = vec![0.0; grid.len()];
    for (_, _, _, profile) in &per_realization {
        for (acc, v) in selection_profile.iter_mut().zip(profile) {
            *acc += v / realizations as f64;
        }
    }
    Ok(GpSplitSummary {
        split_size,
        realizations,
        chosen_x: per_realization.iter().map(|t| t.0).collect(),
        log_p_chosen: per_realization.iter().map(|t| t.1).collect(),
        log_p_baseline: per_realization.iter().map(|t| t.2).collect(),
        selection_profile,
    })
}

/// Per split size three rows: `x_star` and `x_baseline` carry the mean
/// held-out log p-value as statistic and its exponential as p-value;
/// `x_star_vs_baseline` carries the mean paired difference and the one-sided
/// p-value `Φ(mean / se)` for the selected location being more powerful.
/// The `x_star` row's histogram counts selected locations over `[0, 1]`.
pub fn run_gp_split_vignette(cfg: &VignetteConfig) -> Result<Vec<ReportRow>> {
    let gp = GpConfig::default();
    let mut rows = Vec::new();
    for &s in &cfg.split_sizes {
        let start = Instant::now();
        let summary = gp_split_study(
            &gp,
            s,
            cfg.n,
            derive_seed(cfg.seed, &format!("gp-split/S={s}")),
        )?;
        let wall_ms = cfg.elapsed_ms(start);
        let row = |mode: &str, statistic: f64, p_value: f64, histogram| ReportRow {
            vignette: cfg.vignette.to_string(),
            param_name: "split_size".into(),
            param_value: s as f64,
            mode: mode.into(),
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            n: cfg.n,
            seed: cfg.seed,
            wall_ms,
            histogram,
        };
        let bins = 20;
        let hist = RowHistogram {
            edges: (0..=bins).map(|b| b as f64 / bins as f64).collect(),
            counts: unit_histogram(&summary.chosen_x, bins),
        };
        let (chosen, _) = summary.chosen();
        let (base, _) = summary.baseline();
        let (diff, se) = summary.difference();
        let one_sided = if se > 0.0 {
            norm_cdf(diff / se)
        } else if diff < 0.0 {
            0.0
        } else {
            1.0
        };
        rows.push(row("x_star", chosen, chosen.exp(), Some(hist)));
        rows.push(row("x_baseline", base, base.exp(), None));
        rows.push(row("x_star_vs_baseline", diff, one_sided, None));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(v: Vignette) -> VignetteConfig {
        let mut cfg = VignetteConfig::new(v);
        cfg.n = 200;
        cfg.n_strong = 100;
        cfg.nu_range = vec![3.0];
        cfg.n_obs_range = vec![2];
        cfg.eps_range = vec![5.0];
        cfg.t_set = vec![0.5];
        cfg.contam_range = vec![0.1];
        cfg.split_sizes = vec![10];
        cfg
    }

    #[test]
    fn ranges_are_inclusive_and_clean() {
        assert_eq!(inclusive_range(1.0, 3.0, 1.0).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(inclusive_range(2.0, 2.0, 0.5).unwrap(), vec![2.0]);
        assert_eq!(inclusive_range(0.0, 1.0, 0.3).unwrap().len(), 4);
        assert!(inclusive_range(1.0, 0.0, 1.0).is_err());
        assert!(inclusive_range(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn names_round_trip() {
        for v in Vignette::ALL {
            assert_eq!(v.as_str().parse::<Vignette>().unwrap(), v);
        }
        assert!("ode".parse::<Vignette>().is_err());
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = VignetteConfig::new(Vignette::Laplace);
        cfg.n = 99;
        assert!(cfg.validate().is_err());
        let mut cfg = VignetteConfig::new(Vignette::Laplace);
        cfg.nu_range.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = VignetteConfig::new(Vignette::Abc);
        cfg.eps_range = vec![-1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = VignetteConfig::new(Vignette::Fractional);
        cfg.t_set = vec![1.5];
        assert!(cfg.validate().is_err());
        let mut cfg = VignetteConfig::new(Vignette::GpSplit);
        cfg.split_sizes = vec![7];
        assert!(cfg.validate().is_err());
        for v in Vignette::ALL {
            VignetteConfig::new(v).validate().unwrap();
            VignetteConfig::new(v).full_scale().validate().unwrap();
        }
    }

    #[test]
    fn defaults_cover_the_published_sweeps() {
        let cfg = VignetteConfig::new(Vignette::Abc);
        assert_eq!(cfg.eps_range, (1..=10).map(f64::from).collect::<Vec<_>>());
        let cfg = VignetteConfig::new(Vignette::GpSplit);
        assert_eq!(cfg.split_sizes.first(), Some(&10));
        assert_eq!(cfg.split_sizes.last(), Some(&150));
        assert_eq!(cfg.n, 100);
        let cfg = VignetteConfig::new(Vignette::Robust);
        assert_eq!(cfg.t_set, vec![0.1, 0.2, 0.3]);
        assert_eq!(cfg.contam_range.len(), 7);
        assert_eq!(cfg.contam_range, vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3]);
    }

    #[test]
    fn rows_have_expected_shape() {
        let expect = [
            (Vignette::Laplace, vec!["strong", "weak", "strong", "weak"]),
            (
                Vignette::Abc,
                vec![
                    "strong-rank:plain",
                    "strong-rank:noisy",
                    "weak:plain",
                    "weak:noisy",
                ],
            ),
            (Vignette::Fractional, vec!["strong", "weak"]),
            (
                Vignette::Robust,
                vec!["strong:bayes", "strong:fractional-t0.5"],
            ),
            (
                Vignette::GpSplit,
                vec!["x_star", "x_baseline", "x_star_vs_baseline"],
            ),
        ];
        for (v, modes) in expect {
            let cfg = small(v);
            let rows = run_vignette(&cfg).unwrap();
            let got: Vec<&str> = rows.iter().map(|r| r.mode.as_str()).collect();
            assert_eq!(got, modes, "{v}");
            for r in &rows {
                assert_eq!(r.vignette, v.as_str());
                assert!((0.0..=1.0).contains(&r.p_value));
                assert!(r.statistic.is_finite());
                assert_eq!(r.wall_ms, 0);
                if let Some(h) = &r.histogram {
                    assert_eq!(h.edges.len(), h.counts.len() + 1);
                    assert_eq!(h.counts.iter().sum::<usize>(), r.n);
                }
            }
        }
    }

    #[test]
    fn reruns_are_identical_and_points_independent() {
        let cfg = small(Vignette::Fractional);
        let a = run_vignette(&cfg).unwrap();
        assert_eq!(a, run_vignette(&cfg).unwrap());
        let mut wider = cfg.clone();
        wider.t_set = vec![0.0, 0.5];
        let b = run_vignette(&wider).unwrap();
        assert_eq!(&b[2..], &a[..]);
    }

    #[test]
    fn robust_bayes_without_contamination_matches_plain_bayes_law() {
        let mut cfg = small(Vignette::Robust);
        cfg.contam_range = vec![0.0];
        cfg.n = 20_000;
        let rows = run_vignette(&cfg).unwrap();
        assert!(rows[0].p_value > 0.001, "{rows:?}");
        assert!(rows[1].p_value < 1e-6, "{rows:?}");
    }

    #[test]
    fn gp_summary_statistics() {
        let s = GpSplitSummary {
            split_size: 10,
            realizations: 3,
            chosen_x: vec![0.0, 0.5, 1.0],
            log_p_chosen: vec![-3.0, -2.0, -1.0],
            log_p_baseline: vec![-1.0, -1.0, -1.0],
            selection_profile: vec![],
        };
        assert_eq!(s.chosen(), (-2.0, (1.0f64 / 3.0).sqrt()));
        assert_eq!(s.difference().0, -1.0);
        assert!((s.selection_variance() - 0.25).abs() < 1e-15);
    }
}
