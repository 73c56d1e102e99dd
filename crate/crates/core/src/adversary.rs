//! Contamination scenarios.
//!
//! A [`Scenario`] names a clean distribution, an adversary strategy, the true
//! parameter and where the corruption profile comes from. [`contaminate`]
//! runs the channel `Z_i = (1 - B_i) X_i + B_i X̃_i` with
//! `B_i ~ Bern(λ_i)`. Every shipped strategy draws `X̃_i` independently of
//! the clean draws.

use std::path::PathBuf;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{cholesky, Dataset, Mode};
use crate::numeric::{std_normal_cdf, std_normal_pdf};
use crate::profile::CorruptionProfile;
use crate::seed::{self, Rng};

/// Distribution of the uncorrupted samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CleanSpec {
    /// Every sample equals `value`.
    PointMass { value: Vec<f64> },
    /// `r e_1 (2 Ber(1/2 - h δ) - 1)` in `R^dim`, the hypothesis pair of the
    /// bounded lower bound.
    TwoPoint { r: f64, delta: f64, dim: usize, hypothesis: i8 },
    /// `N(mean, I)`.
    Gaussian { mean: Vec<f64> },
    /// `W ~ N(0, Σ)`, `y = βᵀW + N(0, noise_var)`. `sigma` is row-major and
    /// defaults to the identity.
    Regression {
        beta: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<f64>>,
        noise_var: f64,
    },
}

impl CleanSpec {
    pub fn mode(&self) -> Mode {
        match self {
            CleanSpec::Regression { .. } => Mode::Regression,
            _ => Mode::Mean,
        }
    }

    /// Dimension of the parameter (points in mean mode, covariates in regression).
    pub fn dim(&self) -> usize {
        match self {
            CleanSpec::PointMass { value } => value.len(),
            CleanSpec::TwoPoint { dim, .. } => *dim,
            CleanSpec::Gaussian { mean } => mean.len(),
            CleanSpec::Regression { beta, .. } => beta.len(),
        }
    }

    /// Width of one observation row.
    pub fn row_width(&self) -> usize {
        match self.mode() {
            Mode::Mean => self.dim(),
            Mode::Regression => self.dim() + 1,
        }
    }

    /// The true mean or coefficient.
    pub fn parameter(&self) -> Vec<f64> {
        match self {
            CleanSpec::PointMass { value } => value.clone(),
            CleanSpec::TwoPoint { r, delta, dim, hypothesis } => {
                let mut m = vec![0.0; *dim];
                m[0] = -2.0 * f64::from(*hypothesis) * delta * r;
                m
            }
            CleanSpec::Gaussian { mean } => mean.clone(),
            CleanSpec::Regression { beta, .. } => beta.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::domain("clean distribution has dimension 0"));
        }
        match self {
            CleanSpec::TwoPoint { r, delta, hypothesis, .. } => {
                check_delta(*delta)?;
                check_hypothesis(*hypothesis)?;
                if !(r.is_finite() && *r >= 0.0) {
                    return Err(Error::domain(format!("radius must be nonnegative, got {r}")));
                }
            }
            CleanSpec::Regression { sigma, noise_var, .. } => {
                if !(noise_var.is_finite() && *noise_var >= 0.0) {
                    return Err(Error::domain(format!("noise variance must be nonnegative, got {noise_var}")));
                }
                if let Some(s) = sigma {
                    if s.len() != d * d {
                        return Err(Error::domain(format!("sigma must have {} entries, got {}", d * d, s.len())));
                    }
                    if cholesky(s, d).is_none() {
                        return Err(Error::domain("sigma is not positive definite"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn sample(&self, rng: &mut Rng, chol: Option<&[f64]>, out: &mut Vec<f64>) {
        match self {
            CleanSpec::PointMass { value } => out.extend_from_slice(value),
            CleanSpec::TwoPoint { r, delta, dim, hypothesis } => {
                let p = 0.5 - f64::from(*hypothesis) * delta;
                out.push(signed_radius(*r, p, rng));
                out.extend(std::iter::repeat_n(0.0, dim - 1));
            }
            CleanSpec::Gaussian { mean } => {
                out.extend(mean.iter().map(|m| m + gauss(rng)));
            }
            CleanSpec::Regression { beta, noise_var, .. } => {
                let d = beta.len();
                let g: Vec<f64> = (0..d).map(|_| gauss(rng)).collect();
                let start = out.len();
                match chol {
                    Some(l) => {
                        for i in 0..d {
                            out.push((0..=i).map(|j| l[i * d + j] * g[j]).sum());
                        }
                    }
                    None => out.extend_from_slice(&g),
                }
                let w = &out[start..];
                let y = w.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + noise_var.sqrt() * gauss(rng);
                out.push(y);
            }
        }
    }
}

/// Distribution of independent outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutlierDistribution {
    /// `N(mean, std² I)`.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// Independent uniform coordinates on `[low_k, high_k]`.
    Uniform { low: Vec<f64>, high: Vec<f64> },
}

impl OutlierDistribution {
    fn width(&self) -> usize {
        match self {
            OutlierDistribution::Gaussian { mean, .. } => mean.len(),
            OutlierDistribution::Uniform { low, .. } => low.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            OutlierDistribution::Gaussian { std, .. } if !(std.is_finite() && *std >= 0.0) => {
                Err(Error::domain(format!("outlier std must be nonnegative, got {std}")))
            }
            OutlierDistribution::Uniform { low, high }
                if low.len() != high.len() || low.iter().zip(high).any(|(a, b)| !(a <= b)) =>
            {
                Err(Error::domain("uniform outlier bounds must satisfy low <= high coordinate-wise"))
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut Rng, out: &mut Vec<f64>) {
        match self {
            OutlierDistribution::Gaussian { mean, std } => {
                out.extend(mean.iter().map(|m| m + std * gauss(rng)));
            }
            OutlierDistribution::Uniform { low, high } => {
                out.extend(low.iter().zip(high).map(|(a, b)| a + (b - a) * rng.random::<f64>()));
            }
        }
    }
}

/// How flagged samples are replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    /// Flags are drawn but values are left clean.
    None,
    /// Every flagged row becomes `value` (a full row, so `(w₀, y₀)` in regression).
    FixedOutlier {
        value: Vec<f64>,
    },
    OutlierDistribution {
        distribution: OutlierDistribution,
    },
    /// The bounded two-point lower-bound adversary. Needs a `two_point` clean
    /// distribution with the same `delta` and `r`.
    BoundedLecam {
        delta: f64,
        r: f64,
    },
    /// The Gaussian max-density adversary for the hypothesis `N(δ(τ, 0), I)`.
    /// Needs a `gaussian` clean distribution with that mean.
    GaussianMax {
        delta: f64,
        tau: Vec<i8>,
    },
}

/// Where the corruption profile comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSource {
    Explicit {
        lambdas: Vec<f64>,
    },
    /// `n` draws from `F(t) = 1 - (1 - t)^q`.
    PowerLaw {
        q: f64,
        n: usize,
    },
    /// A profile file (CSV with a `lambda` column, or a JSON array).
    File {
        path: PathBuf,
    },
}

impl ProfileSource {
    pub fn resolve(&self, seed: u64) -> Result<CorruptionProfile> {
        match self {
            ProfileSource::Explicit { lambdas } => CorruptionProfile::new(lambdas.clone()),
            ProfileSource::PowerLaw { q, n } => sample_profile_powerlaw(*n, *q, seed),
            ProfileSource::File { path } => crate::io::read_profile(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub clean: CleanSpec,
    pub adversary: AdversarySpec,
    /// Ground truth the estimators are scored against.
    pub truth: Vec<f64>,
    pub profile: ProfileSource,
}

/// One channel output.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedSample {
    pub value: Vec<f64>,
    /// The realized `B_i`. Diagnostics only.
    pub corrupted: bool,
    pub index: usize,
}

impl Scenario {
    pub fn mode(&self) -> Mode {
        self.clean.mode()
    }

    pub fn dim(&self) -> usize {
        self.clean.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.clean.validate()?;
        let d = self.dim();
        if self.truth.len() != d {
            return Err(Error::domain(format!("truth has dimension {}, clean distribution has {d}", self.truth.len())));
        }
        let width = self.clean.row_width();
        match &self.adversary {
            AdversarySpec::None => {}
            AdversarySpec::FixedOutlier { value } => {
                if value.len() != width {
                    return Err(Error::domain(format!("outlier has {} coordinates, rows have {width}", value.len())));
                }
            }
            AdversarySpec::OutlierDistribution { distribution } => {
                distribution.validate()?;
                if distribution.width() != width {
                    return Err(Error::domain(format!(
                        "outlier distribution has {} coordinates, rows have {width}",
                        distribution.width()
                    )));
                }
            }
            AdversarySpec::BoundedLecam { delta, r } => {
                check_delta(*delta)?;
                match &self.clean {
                    CleanSpec::TwoPoint { r: r0, delta: d0, .. } if r0 == r && d0 == delta => {}
                    _ => {
                        return Err(Error::domain(
                            "bounded_lecam needs a two_point clean distribution with the same delta and r",
                        ))
                    }
                }
            }
            AdversarySpec::GaussianMax { delta, tau } => {
                if !(delta.is_finite() && *delta >= 0.0) {
                    return Err(Error::domain(format!("delta must be nonnegative, got {delta}")));
                }
                let root = perfect_sqrt(d)
                    .ok_or_else(|| Error::domain(format!("gaussian_max needs a perfect-square dimension, got {d}")))?;
                if tau.len() != root {
                    return Err(Error::domain(format!("tau must have {root} entries, got {}", tau.len())));
                }
                for &t in tau {
                    check_hypothesis(t)?;
                }
                let expected = hypothesis_mean(*delta, tau, d);
                match &self.clean {
                    CleanSpec::Gaussian { mean } if mean.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-12) => {
                    }
                    _ => {
                        return Err(Error::domain(format!(
                            "gaussian_max needs a gaussian clean distribution with mean {expected:?}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Run the channel once over `profile`, in the profile's input order.
    pub fn sample(&self, profile: &CorruptionProfile, seed: u64) -> Result<Vec<ContaminatedSample>> {
        self.validate()?;
        let chol = match &self.clean {
            CleanSpec::Regression { sigma: Some(s), beta, .. } => Some(cholesky(s, beta.len()).expect("validated")),
            _ => None,
        };
        let mut rng = seed::rng(seed);
        let lambdas = profile.in_input_order();
        let mut out = Vec::with_capacity(lambdas.len());
        let mut clean = Vec::with_capacity(self.clean.row_width());
        for (index, &lambda) in lambdas.iter().enumerate() {
            clean.clear();
            self.clean.sample(&mut rng, chol.as_deref(), &mut clean);
            let corrupted = rng.random::<f64>() < lambda;
            let value = if corrupted { self.outlier(lambda, &mut rng)? } else { clean.clone() };
            out.push(ContaminatedSample { value, corrupted, index });
        }
        Ok(out)
    }

    fn outlier(&self, lambda: f64, rng: &mut Rng) -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(self.clean.row_width());
        match &self.adversary {
            AdversarySpec::None => self.clean.sample(rng, None, &mut v),
            AdversarySpec::FixedOutlier { value } => v.extend_from_slice(value),
            AdversarySpec::OutlierDistribution { distribution } => distribution.sample(rng, &mut v),
            AdversarySpec::BoundedLecam { delta, r } => {
                let CleanSpec::TwoPoint { hypothesis, dim, .. } = &self.clean else { unreachable!("validated") };
                v.push(bounded_lecam_outlier(lambda, *delta, *r, *hypothesis, rng)?);
                v.extend(std::iter::repeat_n(0.0, dim - 1));
            }
            AdversarySpec::GaussianMax { delta, tau } => {
                v = gaussian_max_outlier(lambda, *delta, self.dim(), tau, rng)?;
            }
        }
        Ok(v)
    }
}

/// Run the channel and package the result as a dataset carrying the
/// realized flags.
pub fn contaminate(scenario: &Scenario, profile: &CorruptionProfile, seed: u64) -> Result<Dataset> {
    let samples = scenario.sample(profile, seed)?;
    let flags = samples.iter().map(|s| s.corrupted).collect();
    let rows = samples.into_iter().flat_map(|s| s.value).collect();
    let data = match scenario.mode() {
        Mode::Mean => Dataset::mean(scenario.dim(), rows, profile.clone())?,
        Mode::Regression => Dataset::regression(scenario.dim(), rows, profile.clone())?,
    };
    data.with_corruption_flags(flags)
}

/// `n` i.i.d. rates with cdf `1 - (1 - t)^q`, by inversion.
pub fn sample_profile_powerlaw(n: usize, q: f64, seed: u64) -> Result<CorruptionProfile> {
    if n == 0 {
        return Err(Error::domain("power-law profile needs n >= 1"));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::domain(format!("power-law exponent must be positive, got {q}")));
    }
    let mut rng = seed::rng(seed);
    let inv = 1.0 / q;
    let lambdas = (0..n).map(|_| 1.0 - (1.0 - rng.random::<f64>()).powf(inv)).collect();
    CorruptionProfile::new(lambdas)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=0.25).contains(&delta) {
        return Err(Error::domain(format!("delta must lie in [0, 1/4], got {delta}")));
    }
    Ok(())
}

fn check_hypothesis(h: i8) -> Result<()> {
    if h != 1 && h != -1 {
        return Err(Error::domain(format!("hypothesis must be +1 or -1, got {h}")));
    }
    Ok(())
}

fn perfect_sqrt(d: usize) -> Option<usize> {
    let r = (d as f64).sqrt().round() as usize;
    (r * r == d).then_some(r)
}

fn hypothesis_mean(delta: f64, tau: &[i8], dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for (mk, &t) in m.iter_mut().zip(tau) {
        *mk = delta * f64::from(t);
    }
    m
}

fn gauss(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn signed_radius(r: f64, p: f64, rng: &mut Rng) -> f64 {
    if rng.random::<f64>() < p {
        r
    } else {
        -r
    }
}

/// Smallest rate at which the bounded adversary can fully mask the hypothesis.
pub fn lecam_masking_threshold(delta: f64) -> f64 {
    2.0 * delta / (1.0 + 2.0 * delta)
}

/// `γ = 1/2 - hδ + hδ/λ`, the success probability of the outlier sign.
pub fn lecam_gamma(lambda: f64, delta: f64, hypothesis: i8) -> f64 {
    let h = f64::from(hypothesis);
    0.5 - h * delta + h * delta / lambda
}

/// First coordinate of one corrupted draw under hypothesis `h`.
///
/// At rates `λ >= 2δ/(1+2δ)` the outlier is `r(2 Ber(γ) - 1)`, which makes the
/// corrupted sign exactly `Ber(1/2)` under both hypotheses. Below that rate
/// the adversary leaves the clean distribution alone.
pub fn bounded_lecam_outlier(lambda: f64, delta: f64, r: f64, hypothesis: i8, rng: &mut Rng) -> Result<f64> {
    check_delta(delta)?;
    check_hypothesis(hypothesis)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::domain(format!("corruption rate must lie in [0, 1], got {lambda}")));
    }
    let p = if lambda > 0.0 && lambda >= lecam_masking_threshold(delta) {
        let gamma = lecam_gamma(lambda, delta, hypothesis);
        assert!((-1e-12..=1.0 + 1e-12).contains(&gamma), "gamma {gamma} outside [0, 1]");
        gamma
    } else {
        0.5 - f64::from(hypothesis) * delta
    };
    Ok(signed_radius(r, p, rng))
}

/// `T = (2Φ(δ))^√d`, the mass of `max_τ P_δ(τ)`.
pub fn gaussian_max_normalizer(delta: f64, dim: usize) -> f64 {
    (2.0 * std_normal_cdf(delta)).powf((dim as f64).sqrt())
}

/// `1 - 1/T`: the smallest rate at which the max-density construction exists.
pub fn gaussian_max_feasibility(delta: f64, dim: usize) -> f64 {
    1.0 - 1.0 / gaussian_max_normalizer(delta, dim)
}

/// Density of one signed coordinate of `max_τ P_δ(τ) / T`: `φ(|x| - δ) / (2Φ(δ))`.
pub fn gaussian_max_marginal_density(x: f64, delta: f64) -> f64 {
    std_normal_pdf(x.abs() - delta) / (2.0 * std_normal_cdf(delta))
}

/// Cdf of the density above.
pub fn gaussian_max_marginal_cdf(x: f64, delta: f64) -> f64 {
    let z = 2.0 * std_normal_cdf(delta);
    let upper = 0.5 + (std_normal_cdf(x.abs() - delta) - std_normal_cdf(-delta)) / z;
    if x >= 0.0 {
        upper
    } else {
        1.0 - upper
    }
}

/// One coordinate from `max{φ(x-δ), φ(x+δ)} / (2Φ(δ))`.
///
/// Proposal: `|N(δ,1)|` with a fair random sign, density
/// `(φ(|x|-δ) + φ(|x|+δ)) / 2`. The target is at most `1/Φ(δ)` times the
/// proposal, and the acceptance ratio simplifies to
/// `φ(|x|-δ) / (φ(|x|-δ) + φ(|x|+δ)) = 1 / (1 + e^{-2δ|x|})`.
fn sample_max_coordinate(delta: f64, rng: &mut Rng) -> f64 {
    let proposal = Normal::new(delta, 1.0).expect("unit variance");
    loop {
        let y: f64 = proposal.sample(rng);
        let m = y.abs();
        let accept = 1.0 / (1.0 + (-2.0 * delta * m).exp());
        if rng.random::<f64>() < accept {
            return if rng.random::<bool>() { m } else { -m };
        }
    }
}

/// One draw from `max_τ P_δ(τ) / T` in `R^dim`.
fn sample_max_density(delta: f64, dim: usize, root: usize, rng: &mut Rng) -> Vec<f64> {
    (0..dim).map(|k| if k < root { sample_max_coordinate(delta, rng) } else { StandardNormal.sample(rng) }).collect()
}

/// Outlier for the Gaussian max-density adversary at hypothesis `τ`.
///
/// With `M = max_τ' P_δ(τ')` and `T = ∫M`, the outlier is drawn from
/// `(M - P_τ)/(T - 1)` with probability `β = (T-1)(1-λ)/λ` and from `M/T`
/// otherwise, which makes every corrupted sample exactly `M/T`-distributed.
/// `(M - P_τ)/(T - 1)` is sampled by drawing from `M/T` and accepting with
/// probability `1 - P_τ(x)/M(x) = 1 - Π_j φ(x_j - δτ_j) / max(φ(x_j - δ), φ(x_j + δ))`.
pub fn gaussian_max_outlier(lambda: f64, delta: f64, dim: usize, tau: &[i8], rng: &mut Rng) -> Result<Vec<f64>> {
    let root = perfect_sqrt(dim).ok_or_else(|| Error::domain(format!("dimension {dim} is not a perfect square")))?;
    if tau.len() != root {
        return Err(Error::domain(format!("tau must have {root} entries, got {}", tau.len())));
    }
    for &t in tau {
        check_hypothesis(t)?;
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::domain(format!("delta must be nonnegative, got {delta}")));
    }
    let t_norm = gaussian_max_normalizer(delta, dim);
    let required = 1.0 - 1.0 / t_norm;
    if !(lambda <= 1.0 && lambda >= required && lambda > 0.0) {
        return Err(Error::InfeasibleCorruptionRate { lambda, required });
    }
    let beta = (t_norm - 1.0) * (1.0 - lambda) / lambda;
    assert!((-1e-12..=1.0 + 1e-12).contains(&beta), "beta {beta} outside [0, 1]");

    if rng.random::<f64>() >= beta {
        return Ok(sample_max_density(delta, dim, root, rng));
    }
    loop {
        let x = sample_max_density(delta, dim, root, rng);
        let ratio: f64 = x[..root]
            .iter()
            .zip(tau)
            .map(|(&xj, &t)| {
                let p = std_normal_pdf(xj - delta * f64::from(t));
                p / std_normal_pdf(xj - delta).max(std_normal_pdf(xj + delta))
            })
            .product();
        if rng.random::<f64>() < 1.0 - ratio {
            return Ok(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{ks_critical_two_sample, ks_one_sample, ks_two_sample};

    fn point_mass_scenario(adversary: AdversarySpec) -> Scenario {
        Scenario {
            clean: CleanSpec::PointMass { value: vec![0.0] },
            adversary,
            truth: vec![0.0],
            profile: ProfileSource::PowerLaw { q: 3.0, n: 10_000 },
        }
    }

    #[test]
    fn powerlaw_means() {
        let m = |n, q, s| {
            let p = sample_profile_powerlaw(n, q, s).unwrap();
            p.sorted().iter().sum::<f64>() / n as f64
        };
        assert!((m(10_000, 1.0, 1) - 0.5).abs() < 0.02);
        assert!((m(100_000, 3.0, 2) - 0.25).abs() < 0.01);
        assert!((m(10_000, 0.5, 3) - 2.0 / 3.0).abs() < 0.02);
        assert!(sample_profile_powerlaw(0, 1.0, 0).is_err());
        assert!(sample_profile_powerlaw(5, 0.0, 0).is_err());
        assert_eq!(sample_profile_powerlaw(50, 2.0, 9).unwrap(), sample_profile_powerlaw(50, 2.0, 9).unwrap());
    }

    #[test]
    fn channel_extremes() {
        let s = point_mass_scenario(AdversarySpec::FixedOutlier { value: vec![1.0] });
        let clean = CorruptionProfile::new(vec![0.0; 100]).unwrap();
        let out = s.sample(&clean, 4).unwrap();
        assert!(out.iter().all(|x| !x.corrupted && x.value == [0.0]));
        let dirty = CorruptionProfile::new(vec![1.0; 100]).unwrap();
        let out = s.sample(&dirty, 4).unwrap();
        assert!(out.iter().all(|x| x.corrupted && x.value == [1.0]));
    }

    #[test]
    fn corrupted_fraction_tracks_mean_rate() {
        let s = point_mass_scenario(AdversarySpec::FixedOutlier { value: vec![1.0] });
        let profile = s.profile.resolve(7).unwrap();
        let data = contaminate(&s, &profile, 8).unwrap();
        let frac = data.corruption_flags().unwrap().iter().filter(|&&b| b).count() as f64 / 10_000.0;
        assert!((frac - 0.25).abs() < 0.02, "{frac}");
    }

    #[test]
    fn per_sample_flag_rate() {
        let s = point_mass_scenario(AdversarySpec::None);
        let lambdas = [0.0, 0.1, 0.5, 0.9, 1.0];
        let profile = CorruptionProfile::new(lambdas.to_vec()).unwrap();
        let reps = 10_000;
        let mut hits = [0usize; 5];
        for rep in 0..reps {
            for x in s.sample(&profile, seed::derive(3, &[rep])).unwrap() {
                hits[x.index] += usize::from(x.corrupted);
            }
        }
        for (i, &l) in lambdas.iter().enumerate() {
            let sd = (l * (1.0 - l) / reps as f64).sqrt();
            let rate = hits[i] as f64 / reps as f64;
            assert!((rate - l).abs() <= 3.0 * sd, "sample {i}: {rate} vs {l}");
        }
    }

    #[test]
    fn validation() {
        let mut s = point_mass_scenario(AdversarySpec::FixedOutlier { value: vec![1.0, 2.0] });
        assert!(s.validate().is_err());
        s.adversary = AdversarySpec::None;
        s.truth = vec![0.0, 0.0];
        assert!(s.validate().is_err());
        let lecam = Scenario {
            clean: CleanSpec::TwoPoint { r: 1.0, delta: 0.3, dim: 1, hypothesis: 1 },
            adversary: AdversarySpec::BoundedLecam { delta: 0.3, r: 1.0 },
            truth: vec![-0.6],
            profile: ProfileSource::Explicit { lambdas: vec![0.5] },
        };
        assert!(lecam.validate().is_err());
        let gmax = Scenario {
            clean: CleanSpec::Gaussian { mean: vec![0.5, 0.0, 0.0, 0.0] },
            adversary: AdversarySpec::GaussianMax { delta: 0.5, tau: vec![1, -1] },
            truth: vec![0.5, 0.0, 0.0, 0.0],
            profile: ProfileSource::Explicit { lambdas: vec![0.9] },
        };
        assert!(gmax.validate().is_err());
    }

    #[test]
    fn scenario_json_round_trip() {
        let doc = r#"{"clean":{"kind":"regression","beta":[1.0,-1.0],"noise_var":0.01},"adversary":{"kind":"fixed_outlier","value":[10.0,10.0,-50.0]},"truth":[1.0,-1.0],"profile":{"kind":"power_law","q":2.0,"n":500}}"#;
        let s: Scenario = serde_json::from_str(doc).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), doc);
        s.validate().unwrap();
        let bad = doc.replace("fixed_outlier", "fixed_outliers");
        assert!(serde_json::from_str::<Scenario>(&bad).is_err());
    }

    #[test]
    fn lecam_examples() {
        let delta = 0.1;
        let boundary = lecam_masking_threshold(delta);
        assert!((lecam_gamma(boundary, delta, 1) - 1.0).abs() < 1e-15);
        let (l, g) = (0.4, lecam_gamma(0.4, 0.1, 1));
        assert!(((1.0 - l) * (0.5 - delta) + l * g - 0.5).abs() < 1e-15);
        for h in [1i8, -1] {
            for lambda in [0.34, 0.5, 1.0] {
                let g = lecam_gamma(lambda, 0.25, h);
                assert!((0.0..=1.0).contains(&g));
            }
        }
        assert!(bounded_lecam_outlier(0.5, 0.3, 1.0, 1, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn lecam_low_rate_leaves_clean_distribution() {
        let mut rng = seed::rng(5);
        let m = 100_000;
        let plus = (0..m).filter(|_| bounded_lecam_outlier(0.1, 0.2, 1.0, 1, &mut rng).unwrap() > 0.0).count() as f64
            / m as f64;
        assert!((plus - 0.3).abs() < 3.0 * (0.21f64 / m as f64).sqrt() * 1.5);
    }

    #[test]
    fn lecam_mixture_is_fair_coin() {
        let (delta, lambda, m) = (0.2, 0.6, 100_000);
        for h in [1i8, -1] {
            let s = Scenario {
                clean: CleanSpec::TwoPoint { r: 1.0, delta, dim: 1, hypothesis: h },
                adversary: AdversarySpec::BoundedLecam { delta, r: 1.0 },
                truth: vec![-2.0 * f64::from(h) * delta],
                profile: ProfileSource::Explicit { lambdas: vec![lambda; m] },
            };
            let profile = s.profile.resolve(0).unwrap();
            let mean = s.sample(&profile, 11).unwrap().iter().map(|x| x.value[0]).sum::<f64>() / m as f64;
            assert!(mean.abs() <= 3.0 / (m as f64).sqrt(), "h={h}: {mean}");
        }
    }

    #[test]
    fn gaussian_max_constants() {
        assert_eq!(gaussian_max_normalizer(0.0, 4), 1.0);
        let t = gaussian_max_normalizer(0.5, 1);
        assert!((t - 1.382_924_922_548_026).abs() < 1e-12);
        assert!(t <= 0.5f64.exp());
        assert!(matches!(
            gaussian_max_outlier(0.1, 0.5, 1, &[1], &mut seed::rng(0)),
            Err(Error::InfeasibleCorruptionRate { .. })
        ));
        assert!(gaussian_max_outlier(0.9, 0.5, 2, &[1], &mut seed::rng(0)).is_err());
    }

    #[test]
    fn gaussian_max_zero_delta_is_standard_normal() {
        let mut rng = seed::rng(1);
        let mut xs: Vec<f64> =
            (0..20_000).map(|_| gaussian_max_outlier(0.5, 0.0, 1, &[1], &mut rng).unwrap()[0]).collect();
        let ks = ks_one_sample(&mut xs, std_normal_cdf);
        assert!(ks < 1.63 / (20_000f64).sqrt(), "{ks}");
    }

    #[test]
    fn gaussian_max_hypotheses_match() {
        let (delta, lambda, m) = (0.5, 0.9, 20_000);
        let draw = |tau: i8, seed: u64| -> Vec<f64> {
            let s = Scenario {
                clean: CleanSpec::Gaussian { mean: vec![delta * f64::from(tau)] },
                adversary: AdversarySpec::GaussianMax { delta, tau: vec![tau] },
                truth: vec![delta * f64::from(tau)],
                profile: ProfileSource::Explicit { lambdas: vec![lambda; m] },
            };
            let p = s.profile.resolve(0).unwrap();
            s.sample(&p, seed).unwrap().into_iter().map(|x| x.value[0]).collect()
        };
        let mut a = draw(1, 1);
        let mut b = draw(-1, 2);
        assert!(ks_two_sample(&mut a, &mut b) < ks_critical_two_sample(m, m, 0.01));
        let ks = ks_one_sample(&mut a, |x| gaussian_max_marginal_cdf(x, delta));
        assert!(ks < 0.015, "{ks}");
    }

    #[test]
    fn marginal_cdf_matches_density() {
        // Trapezoid integration of the density from far left.
        let delta = 0.5;
        let h = 1e-4;
        let mut acc = 0.0;
        let mut x = -12.0;
        for probe in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            while x < probe - h / 2.0 {
                acc +=
                    0.5 * h * (gaussian_max_marginal_density(x, delta) + gaussian_max_marginal_density(x + h, delta));
                x += h;
            }
            assert!((acc - gaussian_max_marginal_cdf(probe, delta)).abs() < 1e-6, "{probe}");
        }
    }

    #[test]
    fn regression_clean_draws() {
        let s = Scenario {
            clean: CleanSpec::Regression { beta: vec![2.0], sigma: None, noise_var: 0.0 },
            adversary: AdversarySpec::None,
            truth: vec![2.0],
            profile: ProfileSource::Explicit { lambdas: vec![0.0; 10] },
        };
        let p = s.profile.resolve(0).unwrap();
        let d = contaminate(&s, &p, 3).unwrap();
        for r in d.rows() {
            assert_eq!(r[1], 2.0 * r[0]);
        }
    }
}
