//! The calibration harness.
//!
//! Every test draws `(θ_i, y_i)` from the hierarchical model `θ_i ~ μ0`,
//! `y_i ~ P_{θ_i}` on its own random stream (stream id `i` under the
//! caller's master seed), applies the procedure, and reduces the outputs to
//! PIT values, ranks or samples that a goodness-of-fit test then checks.
//! Replicates run in parallel and are collected in index order, so reports
//! do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Belief;
use crate::error::{CalibError, Result};
use crate::gof::{
    chi2_pit_test, ks_uniform_test, mmd_permutation_test, rank_statistic, rank_uniformity_test,
    unit_histogram, GofResult,
};
use crate::rng::RngStream;
use crate::testfn::{pushforward_cdf, pushforward_cdf_belief, TestFunction};
use crate::types::{
    DataGeneratingModel, Dataset, LearningProcedure, ParamPoint, ParamSampler, PosteriorOutput,
};

pub const DEFAULT_BINS: usize = 20;
const PIT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalSample {
    pub theta: ParamPoint,
    pub data: Dataset,
    pub replicate_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMode {
    Strong,
    StrongRank,
    Weak,
    WeakMmd,
}

impl CalibrationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CalibrationMode::Strong => "strong",
            CalibrationMode::StrongRank => "strong-rank",
            CalibrationMode::Weak => "weak",
            CalibrationMode::WeakMmd => "weak-mmd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportValues {
    Pit(Vec<f64>),
    Ranks(Vec<usize>),
    Samples(Vec<ParamPoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub mode: CalibrationMode,
    pub gof: GofResult,
    pub values: ReportValues,
    pub histogram: Vec<usize>,
    /// `histogram.len() + 1` bin boundaries.
    pub bin_edges: Vec<f64>,
    /// Replicates that contributed, i.e. requested minus failed.
    pub n_replicates: usize,
    pub failed_replicates: Vec<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessOptions {
    pub bins: usize,
    /// Largest fraction of replicates allowed to fail recoverably (optimizer
    /// non-convergence, exhausted proposal budgets) before the whole run is
    /// treated as failed.
    pub max_failure_fraction: f64,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions {
            bins: DEFAULT_BINS,
            max_failure_fraction: 0.001,
        }
    }
}

struct Collected<T> {
    values: Vec<T>,
    failed: Vec<u64>,
}

fn run_replicates<T, F>(
    n: usize,
    rng: &RngStream,
    opts: &HarnessOptions,
    work: F,
) -> Result<Collected<T>>
where
    T: Send,
    F: Fn(u64, &mut RngStream) -> Result<T> + Sync,
{
    if n == 0 {
        return Err(CalibError::invalid("need at least one replicate"));
    }
    let results: Vec<Result<T>> = (0..n as u64)
        .into_par_iter()
        .map(|i| work(i, &mut rng.substream(i)))
        .collect();
    let mut values = Vec::with_capacity(n);
    let mut failed = Vec::new();
    let mut first_failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(e) if e.is_recoverable() => {
                failed.push(i as u64);
                if first_failure.is_none() {
                    first_failure = Some(e.in_replicate(i as u64));
                }
            }
            Err(e) => return Err(e.in_replicate(i as u64)),
        }
    }
    let allowed = (opts.max_failure_fraction * n as f64).floor() as usize;
    if failed.len() > allowed || values.is_empty() {
        return Err(CalibError::FailureThreshold {
            failed: failed.len(),
            total: n,
            first: Box::new(first_failure.expect("at least one failure")),
        });
    }
    Ok(Collected { values, failed })
}

fn draw_pair(
    prior: &dyn ParamSampler,
    model: &dyn DataGeneratingModel,
    rng: &mut RngStream,
) -> Result<(ParamPoint, Dataset)> {
    let theta = prior.draw(rng);
    let y = model.sample(&theta, rng)?;
    Ok((theta, y))
}

/// `n` independent pairs `θ_i ~ prior`, `y_i ~ model(θ_i)`.
pub fn simulate_hierarchical(
    prior: &dyn ParamSampler,
    model: &dyn DataGeneratingModel,
    n: usize,
    rng: &RngStream,
) -> Result<Vec<HierarchicalSample>> {
    let opts = HarnessOptions {
        max_failure_fraction: 0.0,
        ..HarnessOptions::default()
    };
    Ok(run_replicates(n, rng, &opts, |i, r| {
        let (theta, data) = draw_pair(prior, model, r)?;
        Ok(HierarchicalSample {
            theta,
            data,
            replicate_id: i,
        })
    })?
    .values)
}

fn pit_report(
    mode: CalibrationMode,
    pits: Vec<f64>,
    failed: Vec<u64>,
    rng: &RngStream,
    opts: &HarnessOptions,
) -> Result<CalibrationReport> {
    let gof = ks_uniform_test(&pits)?;
    let bins = opts.bins.max(1);
    Ok(CalibrationReport {
        mode,
        gof,
        histogram: unit_histogram(&pits, bins),
        bin_edges: (0..=bins).map(|b| b as f64 / bins as f64).collect(),
        n_replicates: pits.len(),
        values: ReportValues::Pit(pits),
        failed_replicates: failed,
        seed: rng.master_seed(),
    })
}

/// KS test that `F_{f#μ(μ0, y_i)}(f(θ_i))` is uniform.
pub fn strong_test(
    procedure: &dyn LearningProcedure,
    prior: &Belief,
    model: &dyn DataGeneratingModel,
    f: &TestFunction,
    n: usize,
    rng: &RngStream,
    opts: &HarnessOptions,
) -> Result<CalibrationReport> {
    let c = run_replicates(n, rng, opts, |_, r| {
        let (theta, y) = draw_pair(prior, model, r)?;
        let post = procedure.infer(prior, &y, r)?;
        pushforward_cdf(&post, f, f.apply(&theta)?)
    })?;
    pit_report(CalibrationMode::Strong, c.values, c.failed, rng, opts)
}

/// Strong tests for several test functions on shared replicates, optionally
/// with a Bonferroni adjustment of the p-values.
#[allow(clippy::too_many_arguments)]
pub fn strong_test_multi(
    procedure: &dyn LearningProcedure,
    prior: &Belief,
    model: &dyn DataGeneratingModel,
    fs: &[TestFunction],
    n: usize,
    rng: &RngStream,
    opts: &HarnessOptions,
    bonferroni: bool,
) -> Result<Vec<CalibrationReport>> {
    if fs.is_empty() {
        return Err(CalibError::EmptyInput("test functions"));
    }
    let c = run_replicates(n, rng, opts, |_, r| {
        let (theta, y) = draw_pair(prior, model, r)?;
        let post = procedure.infer(prior, &y, r)?;
        fs.iter()
            .map(|f| pushforward_cdf(&post, f, f.apply(&theta)?))
            .collect::<Result<Vec<f64>>>()
    })?;
    let m = fs.len() as f64;
    (0..fs.len())
        .map(|j| {
            let pits: Vec<f64> = c.values.iter().map(|row| row[j]).collect();
            let mut rep = pit_report(CalibrationMode::Strong, pits, c.failed.clone(), rng, opts)?;
            if bonferroni {
                rep.gof.p_value = bonferroni_adjust(rep.gof.p_value, m);
            }
            Ok(rep)
        })
        .collect()
}

pub fn bonferroni_adjust(p: f64, tests: f64) -> f64 {
    (p * tests).min(1.0)
}

/// Rank of `f(θ_i)` among `f` applied to `ensemble_size` draws from the
/// procedure's output, tested for discrete uniformity with `bins` groups.
///
/// Empirical output must hold exactly `ensemble_size` draws; analytic output
/// is sampled `ensemble_size` times.
#[allow(clippy::too_many_arguments)]
pub fn strong_rank_test(
    procedure: &dyn LearningProcedure,
    prior: &Belief,
    model: &dyn DataGeneratingModel,
    f: &TestFunction,
    n: usize,
    ensemble_size: usize,
    bins: usize,
    rng: &RngStream,
    opts: &HarnessOptions,
) -> Result<CalibrationReport> {
    if ensemble_size == 0 || !(ensemble_size + 1).is_multiple_of(bins.max(1)) {
        return Err(CalibError::invalid(format!(
            "bin count {bins} must divide ensemble size + 1 = {}",
            ensemble_size + 1
        )));
    }
    let c = run_replicates(n, rng, opts, |_, r| {
        let (theta, y) = draw_pair(prior, model, r)?;
        let post = procedure.infer(prior, &y, r)?;
        let ensemble: Vec<f64> = match &post {
            PosteriorOutput::Empirical(s) => {
                if s.len() != ensemble_size {
                    return Err(CalibError::invalid(format!(
                        "procedure returned {} draws, expected {ensemble_size}",
                        s.len()
                    )));
                }
                s.iter().map(|p| f.apply(p)).collect::<Result<_>>()?
            }
            PosteriorOutput::Analytic(b) => (0..ensemble_size)
                .map(|_| f.apply(&b.sample(r)))
                .collect::<Result<_>>()?,
        };
        Ok(rank_statistic(&ensemble, f.apply(&theta)?))
    })?;
    let (hist, gof) = rank_uniformity_test(&c.values, ensemble_size, bins)?;
    let width = (ensemble_size + 1) as f64 / bins as f64;
    Ok(CalibrationReport {
        mode: CalibrationMode::StrongRank,
        gof,
        bin_edges: (0..=bins).map(|b| b as f64 * width).collect(),
        histogram: hist.counts,
        n_replicates: c.values.len(),
        values: ReportValues::Ranks(c.values),
        failed_replicates: c.failed,
        seed: rng.master_seed(),
    })
}

/// KS test that `F_{f#μ0}(f(ϑ_i))` is uniform for one draw `ϑ_i` from each
/// output.
pub fn weak_test(
    procedure: &dyn LearningProcedure,
    prior: &Belief,
    model: &dyn DataGeneratingModel,
    f: &TestFunction,
    n: usize,
    rng: &RngStream,
    opts: &HarnessOptions,
) -> Result<CalibrationReport> {
    let c = run_replicates(n, rng, opts, |_, r| {
        let (_, y) = draw_pair(prior, model, r)?;
        let post = procedure.infer(prior, &y, r)?;
        let draw = post.sample_one(r);
        pushforward_cdf_belief(prior, f, f.apply(&draw)?)
    })?;
    pit_report(CalibrationMode::Weak, c.values, c.failed, rng, opts)
}

/// Kernel two-sample test between one output draw per replicate and `n`
/// fresh draws from `sampler`, for beliefs known only through simulation.
///
/// `bandwidth == 0` selects the median heuristic.
#[allow(clippy::too_many_arguments)]
pub fn weak_mmd_test(
    procedure: &dyn LearningProcedure,
    belief: &Belief,
    sampler: &dyn ParamSampler,
    model: &dyn DataGeneratingModel,
    n: usize,
    n_perm: usize,
    bandwidth: f64,
    rng: &RngStream,
    opts: &HarnessOptions,
) -> Result<CalibrationReport> {
    let c = run_replicates(n, rng, opts, |_, r| {
        let (_, y) = draw_pair(sampler, model, r)?;
        let post = procedure.infer(belief, &y, r)?;
        Ok(post.sample_one(r))
    })?;
    let reference_stream = rng.fork("reference", 0);
    let reference: Vec<ParamPoint> = (0..c.values.len() as u64)
        .into_par_iter()
        .map(|i| sampler.draw(&mut reference_stream.substream(i)))
        .collect();
    let mut perm_rng = rng.fork("permutation", 0);
    let gof = mmd_permutation_test(&c.values, &reference, bandwidth, n_perm, &mut perm_rng)?;

    let first: Vec<f64> = c.values.iter().map(|p| p[0]).collect();
    let lo = first.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = first.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = opts.bins.max(1);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let scaled: Vec<f64> = first.iter().map(|v| (v - lo) / span).collect();
    Ok(CalibrationReport {
        mode: CalibrationMode::WeakMmd,
        gof,
        histogram: unit_histogram(&scaled, bins),
        bin_edges: (0..=bins)
            .map(|b| lo + span * b as f64 / bins as f64)
            .collect(),
        n_replicates: c.values.len(),
        values: ReportValues::Samples(c.values),
        failed_replicates: c.failed,
        seed: rng.master_seed(),
    })
}

/// Applies the procedure to every sample, each on the stream of its
/// replicate id under `rng`'s master seed.
pub fn infer_all(
    samples: &[HierarchicalSample],
    procedure: &dyn LearningProcedure,
    prior: &Belief,
    rng: &RngStream,
) -> Result<Vec<PosteriorOutput>> {
    samples
        .par_iter()
        .map(|s| {
            procedure
                .infer(prior, &s.data, &mut rng.substream(s.replicate_id))
                .map_err(|e| e.in_replicate(s.replicate_id))
        })
        .collect()
}

/// PIT values of `f` for paired samples and outputs, clamped to
/// `[1e-12, 1 - 1e-12]`; also returns how many were clamped.
pub fn clamped_pits(
    samples: &[HierarchicalSample],
    outputs: &[PosteriorOutput],
    f: &TestFunction,
) -> Result<(Vec<f64>, usize)> {
    if samples.len() != outputs.len() {
        return Err(CalibError::DimensionMismatch {
            expected: samples.len(),
            got: outputs.len(),
        });
    }
    let mut clamped = 0;
    let pits = samples
        .iter()
        .zip(outputs)
        .map(|(s, post)| {
            let p = pushforward_cdf(post, f, f.apply(&s.theta)?)?;
            let c = p.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP);
            if c != p {
                clamped += 1;
            }
            Ok(c)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((pits, clamped))
}

/// Two-sided χ² test of strong calibration for `f` on the given samples.
pub fn chi2_strong_test(
    samples: &[HierarchicalSample],
    outputs: &[PosteriorOutput],
    f: &TestFunction,
) -> Result<GofResult> {
    let (pits, _) = clamped_pits(samples, outputs, f)?;
    chi2_pit_test(&pits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionSelection {
    pub chosen_index: usize,
    pub chosen: TestFunction,
    pub p_values: Vec<f64>,
    /// PIT values pushed back into `(0, 1)` across all candidates; nonzero
    /// counts mean some outputs were degenerate at the truth.
    pub clamped_pits: usize,
}

/// Picks the candidate whose two-sided χ² test on `selection_set` gives the
/// smallest p-value (first index on ties). Only `selection_set` is seen
/// here, so a test of the chosen function on a disjoint set stays valid.
pub fn select_test_function(
    candidates: &[TestFunction],
    selection_set: &[HierarchicalSample],
    procedure: &dyn LearningProcedure,
    prior: &Belief,
    rng: &RngStream,
) -> Result<TestFunctionSelection> {
    if candidates.is_empty() {
        return Err(CalibError::EmptyInput("candidate test functions"));
    }
    if selection_set.len() < 2 {
        return Err(CalibError::InsufficientData {
            needed: 2,
            got: selection_set.len(),
        });
    }
    let outputs = infer_all(selection_set, procedure, prior, rng)?;
    select_from_outputs(candidates, selection_set, &outputs)
}

/// [`select_test_function`] with the procedure outputs already computed.
pub fn select_from_outputs(
    candidates: &[TestFunction],
    selection_set: &[HierarchicalSample],
    outputs: &[PosteriorOutput],
) -> Result<TestFunctionSelection> {
    if candidates.is_empty() {
        return Err(CalibError::EmptyInput("candidate test functions"));
    }
    let mut p_values = Vec::with_capacity(candidates.len());
    let mut clamped_total = 0;
    for f in candidates {
        let (pits, clamped) = clamped_pits(selection_set, outputs, f)?;
        clamped_total += clamped;
        p_values.push(chi2_pit_test(&pits)?.p_value);
    }
    let mut chosen_index = 0;
    for (i, &p) in p_values.iter().enumerate() {
        if p < p_values[chosen_index] {
            chosen_index = i;
        }
    }
    Ok(TestFunctionSelection {
        chosen_index,
        chosen: candidates[chosen_index].clone(),
        p_values,
        clamped_pits: clamped_total,
    })
}
