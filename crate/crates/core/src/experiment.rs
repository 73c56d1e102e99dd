//! Monte-Carlo harness.
//!
//! For every `q` the profile is drawn once and held fixed; each trial then
//! redraws the dataset through the contamination channel and scores every
//! estimator against the scenario's truth. Trials run in parallel, but each
//! trial's stream is derived from `(root_seed, q index, trial index)` and the
//! reduction runs serially in trial order, so reports are bit-identical
//! however many threads run them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{contaminate, CleanSpec, ProfileSource, Scenario};
use crate::error::{Error, Result};
use crate::estimators::{
    self, sigma_norm_sq, weighted_mean, weighted_regression_coefficient, weighted_tukey_median, Dataset, Mode,
    SearchBudget,
};
use crate::numeric::{compensated_sum, dot, quantile_sorted};
use crate::profile::{CorruptionProfile, RateValue, ThresholdMap};
use crate::seed::{self, tag};
use crate::weights::{solve_optimal_weights, threshold_weights, WeightVector, DEFAULT_PENALTY};

pub const SCHEMA_VERSION: u32 = 1;

fn default_penalty() -> f64 {
    DEFAULT_PENALTY
}

/// A threshold given as a number, or `"auto"` for the minimizer of
/// `t² + k / N(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdChoice {
    Fixed(f64),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

impl ThresholdChoice {
    pub const AUTO: Self = ThresholdChoice::Auto(AutoKeyword::Auto);

    fn label(&self) -> String {
        match self {
            ThresholdChoice::Fixed(t) => format!("t={t}"),
            ThresholdChoice::Auto(_) => "auto".into(),
        }
    }
}

/// Sample weights handed to a depth estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Uniform,
    OptimalLinear {
        #[serde(default = "default_penalty")]
        c: f64,
    },
    Threshold {
        t: ThresholdChoice,
    },
}

impl WeightSpec {
    fn label(&self) -> String {
        match self {
            WeightSpec::Uniform => "uniform".into(),
            WeightSpec::OptimalLinear { c } => format!("optimal_linear(c={c})"),
            WeightSpec::Threshold { t } => format!("threshold({})", t.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    SampleMean,
    CoordinateMedian,
    Ols,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Weighted mean with the optimal linear weights.
    OptimalLinear {
        #[serde(default = "default_penalty")]
        c: f64,
    },
    /// Weighted mean over the samples with `λ_i <= t`.
    Threshold {
        t: ThresholdChoice,
    },
    Tukey {
        weights: WeightSpec,
    },
    RegressionDepth {
        weights: WeightSpec,
    },
    Baseline {
        name: Baseline,
    },
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::OptimalLinear { c } => format!("optimal_linear(c={c})"),
            EstimatorSpec::Threshold { t } => format!("threshold({})", t.label()),
            EstimatorSpec::Tukey { weights } => format!("tukey({})", weights.label()),
            EstimatorSpec::RegressionDepth { weights } => format!("regression_depth({})", weights.label()),
            EstimatorSpec::Baseline { name } => match name {
                Baseline::SampleMean => "sample_mean".into(),
                Baseline::CoordinateMedian => "coordinate_median".into(),
                Baseline::Ols => "ols".into(),
            },
        }
    }

    fn mode(&self) -> Mode {
        match self {
            EstimatorSpec::RegressionDepth { .. } | EstimatorSpec::Baseline { name: Baseline::Ols } => Mode::Regression,
            _ => Mode::Mean,
        }
    }

    fn weight_spec(&self) -> Option<WeightSpec> {
        match *self {
            EstimatorSpec::OptimalLinear { c } => Some(WeightSpec::OptimalLinear { c }),
            EstimatorSpec::Threshold { t } => Some(WeightSpec::Threshold { t }),
            EstimatorSpec::Tukey { weights } | EstimatorSpec::RegressionDepth { weights } => Some(weights),
            EstimatorSpec::Baseline { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    /// Mean squared error (in the `Σ` norm for regression).
    Mse,
    /// Empirical `p`-quantile of the squared error.
    Quantile { p: f64 },
    /// Norm of the mean error vector.
    Bias,
}

impl MetricSpec {
    pub fn label(&self) -> String {
        match self {
            MetricSpec::Mse => "mse".into(),
            MetricSpec::Quantile { p } => format!("quantile({p})"),
            MetricSpec::Bias => "bias".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    /// Power-law exponents to sweep; each replaces the scenario's `q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_grid: Option<Vec<f64>>,
    pub trials: usize,
    pub estimators: Vec<EstimatorSpec>,
    pub metrics: Vec<MetricSpec>,
    pub root_seed: u64,
    /// Row-major `Σ` for the regression error norm; defaults to the
    /// scenario's covariance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_norm: Option<Vec<f64>>,
    #[serde(default)]
    pub search: SearchBudget,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema {
                pointer: "/schema_version".into(),
                message: format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema_version),
            });
        }
        self.scenario.validate().map_err(|e| Error::Schema { pointer: "/scenario".into(), message: e.to_string() })?;
        let schema = |pointer: String, message: String| Err(Error::Schema { pointer, message });
        if self.trials == 0 {
            return schema("/trials".into(), "trials must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return schema("/estimators".into(), "at least one estimator is required".into());
        }
        if self.metrics.is_empty() {
            return schema("/metrics".into(), "at least one metric is required".into());
        }
        if let Some(grid) = &self.q_grid {
            if grid.is_empty() {
                return schema("/q_grid".into(), "the q grid is empty".into());
            }
            if let Some(i) = grid.iter().position(|q| !(*q > 0.0 && q.is_finite())) {
                return schema(format!("/q_grid/{i}"), format!("q must be positive, got {}", grid[i]));
            }
            if !matches!(self.scenario.profile, ProfileSource::PowerLaw { .. }) {
                return schema("/q_grid".into(), "a q grid needs a power_law profile".into());
            }
        }
        let mode = self.scenario.mode();
        for (i, e) in self.estimators.iter().enumerate() {
            if e.mode() != mode {
                return schema(
                    format!("/estimators/{i}"),
                    format!("{} does not apply to {mode:?} scenarios", e.label()),
                );
            }
            let c = match e.weight_spec() {
                Some(WeightSpec::OptimalLinear { c }) => c,
                _ => 0.0,
            };
            if !(c >= 0.0 && c.is_finite()) {
                return schema(format!("/estimators/{i}"), format!("penalty must be nonnegative, got {c}"));
            }
        }
        for (i, m) in self.metrics.iter().enumerate() {
            if let MetricSpec::Quantile { p } = m {
                if !(*p > 0.0 && *p < 1.0) {
                    return schema(format!("/metrics/{i}/p"), format!("p must lie in (0, 1), got {p}"));
                }
            }
        }
        if let Some(s) = &self.sigma_norm {
            let d = self.scenario.dim();
            if s.len() != d * d {
                return schema("/sigma_norm".into(), format!("expected {} entries, got {}", d * d, s.len()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the config's JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn error_metric(&self) -> Option<Vec<f64>> {
        if let Some(s) = &self.sigma_norm {
            return Some(s.clone());
        }
        match &self.scenario.clean {
            CleanSpec::Regression { sigma, .. } => sigma.clone(),
            _ => None,
        }
    }

    /// `k` in `t² + k / N(t)` for `threshold(auto)`: 1 for bounded
    /// distributions, the dimension otherwise.
    fn auto_k(&self) -> f64 {
        match self.scenario.clean {
            CleanSpec::PointMass { .. } | CleanSpec::TwoPoint { .. } => 1.0,
            _ => self.scenario.dim() as f64,
        }
    }
}

/// Diagnostics of the weights an estimator used at one `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    /// `‖w‖²`.
    pub norm_sq: f64,
    /// `wᵀλ`.
    pub bias_proxy: f64,
    pub support: usize,
    /// Threshold used by threshold weights.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
}

/// Results for one `(q, estimator)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub q: Option<f64>,
    pub estimator: String,
    pub n: usize,
    pub trials: usize,
    /// Trials in which the estimator returned an error; metrics use the rest.
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSummary>,
    pub metrics: Vec<MetricValue>,
}

impl EstimatorRow {
    pub fn metric(&self, label: &str) -> Option<&MetricValue> {
        self.metrics.iter().find(|m| m.metric == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub root_seed: u64,
    pub rows: Vec<EstimatorRow>,
}

pub const CSV_COLUMNS: [&str; 8] = ["q", "estimator", "metric", "value", "stderr", "n", "trials", "seed"];

impl TrialReport {
    pub fn row(&self, q: Option<f64>, estimator: &str) -> Option<&EstimatorRow> {
        self.rows.iter().find(|r| r.q == q && r.estimator == estimator)
    }

    /// Long-form CSV, one line per `(q, estimator, metric)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(CSV_COLUMNS)?;
        for row in &self.rows {
            let q = row.q.map(|q| q.to_string()).unwrap_or_default();
            for m in &row.metrics {
                wtr.write_record([
                    q.clone(),
                    row.estimator.clone(),
                    m.metric.clone(),
                    m.value.to_string(),
                    m.stderr.to_string(),
                    row.n.to_string(),
                    row.trials.to_string(),
                    self.root_seed.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(std::io::Error::from)?;
        Ok(())
    }
}

/// Resolve a weight spec against a fixed profile.
pub fn resolve_weights(
    spec: &WeightSpec,
    profile: &CorruptionProfile,
    auto_k: f64,
) -> Result<(WeightVector, Option<f64>)> {
    match *spec {
        WeightSpec::Uniform => Ok((WeightVector::uniform(profile)?, None)),
        WeightSpec::OptimalLinear { c } => Ok((solve_optimal_weights(profile, c)?, None)),
        WeightSpec::Threshold { t } => {
            let t = match t {
                ThresholdChoice::Fixed(t) => t,
                ThresholdChoice::Auto(_) => profile.rate_functional(auto_k)?.argmin_threshold,
            };
            Ok((threshold_weights(profile, t)?, Some(t)))
        }
    }
}

fn summarize(w: &WeightVector, profile: &CorruptionProfile, threshold: Option<f64>) -> WeightSummary {
    WeightSummary {
        norm_sq: w.norm_sq(),
        bias_proxy: dot(w.sorted(), profile.sorted()),
        support: w.support(),
        threshold,
    }
}

fn apply(spec: &EstimatorSpec, data: &Dataset, w: Option<&WeightVector>, budget: &SearchBudget) -> Result<Vec<f64>> {
    let r = match spec {
        EstimatorSpec::OptimalLinear { .. } | EstimatorSpec::Threshold { .. } => {
            weighted_mean(data, w.expect("weighted estimator"))?
        }
        EstimatorSpec::Tukey { .. } => weighted_tukey_median(data, w.expect("weighted estimator"), budget)?,
        EstimatorSpec::RegressionDepth { .. } => {
            weighted_regression_coefficient(data, w.expect("weighted estimator"), budget)?
        }
        EstimatorSpec::Baseline { name } => match name {
            Baseline::SampleMean => estimators::sample_mean(data)?,
            Baseline::CoordinateMedian => estimators::coordinate_median(data)?,
            Baseline::Ols => estimators::ordinary_least_squares(data)?,
        },
    };
    Ok(r.estimate)
}

fn aggregate(errors: &[Vec<f64>], metric: &MetricSpec, sigma: Option<&[f64]>) -> MetricValue {
    let m = errors.len();
    let label = metric.label();
    if m == 0 {
        return MetricValue { metric: label, value: f64::NAN, stderr: f64::NAN };
    }
    let sq_norm = |e: &[f64]| sigma.map_or_else(|| dot(e, e), |s| sigma_norm_sq(e, s));
    let sq: Vec<f64> = errors.iter().map(|e| sq_norm(e)).collect();
    let mean_sd = |xs: &[f64]| -> (f64, f64) {
        let mean = compensated_sum(xs.iter().copied()) / xs.len() as f64;
        let sd = if xs.len() > 1 {
            (compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (xs.len() - 1) as f64).sqrt()
        } else {
            f64::NAN
        };
        (mean, sd / (xs.len() as f64).sqrt())
    };
    let (value, stderr) = match *metric {
        MetricSpec::Mse => mean_sd(&sq),
        MetricSpec::Quantile { p } => {
            let mut sorted = sq;
            sorted.sort_by(f64::total_cmp);
            let value = quantile_sorted(&sorted, p);
            // Half-width of the order-statistic band p ± sqrt(p(1-p)/m).
            let s = (p * (1.0 - p) / m as f64).sqrt();
            let hi = quantile_sorted(&sorted, (p + s).min(1.0));
            let lo = quantile_sorted(&sorted, (p - s).max(0.0));
            (value, (hi - lo) / 2.0)
        }
        MetricSpec::Bias => {
            let d = errors[0].len();
            let mean: Vec<f64> = (0..d).map(|k| compensated_sum(errors.iter().map(|e| e[k])) / m as f64).collect();
            let b = sq_norm(&mean).sqrt();
            // Delta method along the mean error direction.
            let proj: Vec<f64> = if b > 0.0 {
                let g: Vec<f64> = match sigma {
                    Some(s) => (0..d).map(|i| dot(&s[i * d..(i + 1) * d], &mean) / b).collect(),
                    None => mean.iter().map(|x| x / b).collect(),
                };
                errors.iter().map(|e| dot(&g, e)).collect()
            } else {
                sq.iter().map(|x| x.sqrt()).collect()
            };
            (b, mean_sd(&proj).1)
        }
    };
    MetricValue { metric: label, value, stderr }
}

/// Run the configured experiment: a sweep when `q_grid` is set, a single
/// profile otherwise.
pub fn run_experiment(config: &ExperimentConfig) -> Result<TrialReport> {
    config.validate()?;
    match &config.q_grid {
        Some(grid) => sweep_q(config, grid),
        None => {
            let q = match config.scenario.profile {
                ProfileSource::PowerLaw { q, .. } => Some(q),
                _ => None,
            };
            run_points(config, &[q])
        }
    }
}

/// Run `config` once per `q` in `grid`, overriding the power-law exponent.
pub fn sweep_q(config: &ExperimentConfig, grid: &[f64]) -> Result<TrialReport> {
    if grid.is_empty() {
        return Err(Error::domain("the q grid is empty"));
    }
    let mut cfg = config.clone();
    cfg.q_grid = Some(grid.to_vec());
    cfg.validate()?;
    let points: Vec<Option<f64>> = grid.iter().map(|&q| Some(q)).collect();
    run_points(&cfg, &points)
}

fn run_points(config: &ExperimentConfig, points: &[Option<f64>]) -> Result<TrialReport> {
    let sigma = config.error_metric();
    let auto_k = config.auto_k();
    let truth = &config.scenario.truth;
    let mut rows = Vec::new();
    for (qi, &q) in points.iter().enumerate() {
        let mut scenario = config.scenario.clone();
        if let (Some(q), ProfileSource::PowerLaw { q: sq, .. }) = (q, &mut scenario.profile) {
            *sq = q;
        }
        let qi = qi as u64;
        let profile = scenario.profile.resolve(seed::derive(config.root_seed, &[tag::PROFILE, qi]))?;

        let prepared: Vec<Option<std::result::Result<(WeightVector, WeightSummary), String>>> = config
            .estimators
            .iter()
            .map(|e| {
                e.weight_spec().map(|ws| {
                    resolve_weights(&ws, &profile, auto_k)
                        .map(|(w, t)| {
                            let s = summarize(&w, &profile, t);
                            (w, s)
                        })
                        .map_err(|e| e.to_string())
                })
            })
            .collect();

        let outcomes: Vec<Vec<std::result::Result<Vec<f64>, String>>> = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| {
                let data = contaminate(&scenario, &profile, seed::derive(config.root_seed, &[tag::TRIAL, qi, t]));
                let budget = config.search.with_seed(seed::derive(config.root_seed, &[tag::ESTIMATOR, qi, t]));
                config
                    .estimators
                    .iter()
                    .zip(&prepared)
                    .map(|(spec, prep)| {
                        let data = data.as_ref().map_err(|e| e.to_string())?;
                        let w = match prep {
                            Some(Ok((w, _))) => Some(w),
                            Some(Err(msg)) => return Err(msg.clone()),
                            None => None,
                        };
                        let est = apply(spec, data, w, &budget).map_err(|e| e.to_string())?;
                        Ok(est.iter().zip(truth).map(|(a, b)| a - b).collect())
                    })
                    .collect()
            })
            .collect();

        for (ei, spec) in config.estimators.iter().enumerate() {
            let mut errors = Vec::with_capacity(outcomes.len());
            let mut failures = 0;
            let mut first_failure = None;
            for trial in &outcomes {
                match &trial[ei] {
                    Ok(e) => errors.push(e.clone()),
                    Err(msg) => {
                        failures += 1;
                        first_failure.get_or_insert_with(|| msg.clone());
                    }
                }
            }
            rows.push(EstimatorRow {
                q,
                estimator: spec.label(),
                n: profile.len(),
                trials: config.trials,
                failures,
                first_failure,
                weights: prepared[ei].as_ref().and_then(|p| p.as_ref().ok()).map(|(_, s)| *s),
                metrics: config.metrics.iter().map(|m| aggregate(&errors, m, sigma.as_deref())).collect(),
            });
        }
    }
    Ok(TrialReport { schema_version: SCHEMA_VERSION, config_hash: config.hash(), root_seed: config.root_seed, rows })
}

/// One point of the two-point lower-bound curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundPoint {
    pub delta: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaStarSummary {
    pub delta_star: f64,
    /// `1 / (12 δ*²)`.
    pub bound: f64,
    pub count_below: usize,
    pub count_at_most: usize,
    pub degenerate: bool,
}

/// Theoretical curves for one profile, for plotting against empirical error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOverlay {
    pub n: usize,
    pub k: f64,
    pub r: f64,
    /// `f(λ, k)`.
    pub rate: RateValue,
    /// `r² f(λ, 1)`.
    pub upper: f64,
    pub lower_bound_curve: Vec<LowerBoundPoint>,
    pub lower_bound_max: f64,
    pub delta_star: DeltaStarSummary,
}

/// Number of grid intervals on `δ ∈ [0, 1/4]` for the lower-bound curve.
pub const LOWER_BOUND_GRID: usize = 100;

pub fn rate_overlay(profile: &CorruptionProfile, k: f64, r: f64) -> Result<RateOverlay> {
    let rate = profile.rate_functional(k)?;
    let unit = profile.rate_functional(1.0)?;
    let curve = (0..=LOWER_BOUND_GRID)
        .map(|i| {
            let delta = 0.25 * i as f64 / LOWER_BOUND_GRID as f64;
            profile.lecam_lower_bound(r, delta).map(|bound| LowerBoundPoint { delta, bound })
        })
        .collect::<Result<Vec<_>>>()?;
    let max = curve.iter().map(|p| p.bound).fold(f64::NEG_INFINITY, f64::max);
    let cert = profile.delta_star(ThresholdMap::Bounded)?;
    Ok(RateOverlay {
        n: profile.len(),
        k,
        r,
        rate,
        upper: r * r * unit.value,
        lower_bound_curve: curve,
        lower_bound_max: max,
        delta_star: DeltaStarSummary {
            delta_star: cert.delta_star,
            bound: cert.bound(),
            count_below: cert.count_below,
            count_at_most: cert.count_at_most,
            degenerate: cert.degenerate,
        },
    })
}

impl RateOverlay {
    /// `delta,lower_bound` rows of the curve.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["delta", "lower_bound"])?;
        for p in &self.lower_bound_curve {
            wtr.write_record([p.delta.to_string(), p.bound.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
