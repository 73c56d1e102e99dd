//! Estimators for contaminated data.
//!
//! Every estimator takes a [`Dataset`] and a [`WeightVector`] built from the
//! same profile. Weights decide how much each sample may pull the estimate;
//! the estimators themselves never look at corruption flags.

mod depth;
mod linalg;
mod median;
mod search;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use depth::{
    random_directions, regression_depth, regression_depth_over, tukey_depth, tukey_depth_over, DepthQuery,
};
pub use linalg::{cholesky, sigma_norm_sq, weighted_least_squares};
pub use median::weighted_median;
pub use search::SearchBudget;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::profile::CorruptionProfile;
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Rows are points in `R^d`.
    Mean,
    /// Rows are a covariate in `R^d` followed by a scalar response.
    Regression,
}

/// Observations paired with their corruption profile.
#[derive(Debug, Clone)]
pub struct Dataset {
    mode: Mode,
    dim: usize,
    /// Row-major; `dim` values per row in mean mode, `dim + 1` in regression mode.
    rows: Vec<f64>,
    profile: CorruptionProfile,
    corruption_flags: Option<Vec<bool>>,
}

impl Dataset {
    /// `points` is row-major `n × dim`, indexed like the profile's input order.
    pub fn mean(dim: usize, points: Vec<f64>, profile: CorruptionProfile) -> Result<Self> {
        Self::build(Mode::Mean, dim, points, profile)
    }

    /// `rows` is row-major `n × (dim + 1)`: covariates first, response last.
    pub fn regression(dim: usize, rows: Vec<f64>, profile: CorruptionProfile) -> Result<Self> {
        Self::build(Mode::Regression, dim, rows, profile)
    }

    fn build(mode: Mode, dim: usize, rows: Vec<f64>, profile: CorruptionProfile) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        let stride = match mode {
            Mode::Mean => dim,
            Mode::Regression => dim + 1,
        };
        if rows.len() % stride != 0 || rows.len() / stride != profile.len() {
            return Err(Error::domain(format!(
                "{} values do not form {} rows of width {stride}",
                rows.len(),
                profile.len()
            )));
        }
        if let Some(i) = rows.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!("non-finite value in row {}", i / stride)));
        }
        Ok(Self { mode, dim, rows, profile, corruption_flags: None })
    }

    /// Attach the realized corruption indicators, for diagnostics only.
    pub fn with_corruption_flags(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.len() {
            return Err(Error::domain("corruption flags do not match the number of rows"));
        }
        self.corruption_flags = Some(flags);
        Ok(self)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.profile.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profile.is_empty()
    }

    pub fn profile(&self) -> &CorruptionProfile {
        &self.profile
    }

    pub fn corruption_flags(&self) -> Option<&[bool]> {
        self.corruption_flags.as_deref()
    }

    fn stride(&self) -> usize {
        match self.mode {
            Mode::Mean => self.dim,
            Mode::Regression => self.dim + 1,
        }
    }

    /// Raw row `i` (covariates and response in regression mode).
    pub fn row(&self, i: usize) -> &[f64] {
        let s = self.stride();
        &self.rows[i * s..(i + 1) * s]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks(self.stride())
    }

    /// Row-major points (mean mode) or covariates (regression mode).
    pub fn features(&self) -> Vec<f64> {
        match self.mode {
            Mode::Mean => self.rows.clone(),
            Mode::Regression => self.rows().flat_map(|r| r[..self.dim].iter().copied()).collect(),
        }
    }

    /// Responses in regression mode, empty in mean mode.
    pub fn responses(&self) -> Vec<f64> {
        match self.mode {
            Mode::Mean => Vec::new(),
            Mode::Regression => self.rows().map(|r| r[self.dim]).collect(),
        }
    }

    fn expect_mode(&self, mode: Mode) -> Result<()> {
        if self.mode != mode {
            return Err(Error::domain(format!("expected a {mode:?} dataset, got {:?}", self.mode)));
        }
        Ok(())
    }

    fn input_weights(&self, w: &WeightVector) -> Result<Vec<f64>> {
        if w.len() != self.len() {
            return Err(Error::domain(format!("{} weights for {} samples", w.len(), self.len())));
        }
        Ok(w.in_input_order())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    WeightedMean,
    TukeyMedian,
    RegressionDepth,
    SampleMean,
    CoordinateMedian,
    Ols,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::WeightedMean => "weighted_mean",
            Method::TukeyMedian => "tukey_median",
            Method::RegressionDepth => "regression_depth",
            Method::SampleMean => "sample_mean",
            Method::CoordinateMedian => "coordinate_median",
            Method::Ols => "ols",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub estimate: Vec<f64>,
    pub method: Method,
    pub achieved_depth: Option<f64>,
    pub weights_used: WeightVector,
}

/// `Σ w_i Z_i`, summed with compensation coordinate by coordinate.
pub fn weighted_mean(data: &Dataset, w: &WeightVector) -> Result<EstimateResult> {
    data.expect_mode(Mode::Mean)?;
    let weights = data.input_weights(w)?;
    let d = data.dim();
    let mut acc = vec![CompensatedSum::new(); d];
    for (z, &wi) in data.rows().zip(&weights) {
        if wi == 0.0 {
            continue;
        }
        for k in 0..d {
            acc[k].add(wi * z[k]);
        }
    }
    Ok(EstimateResult {
        estimate: acc.iter().map(CompensatedSum::value).collect(),
        method: Method::WeightedMean,
        achieved_depth: None,
        weights_used: w.clone(),
    })
}

pub fn weighted_tukey_depth(data: &Dataset, w: &WeightVector, query: &DepthQuery) -> Result<f64> {
    data.expect_mode(Mode::Mean)?;
    if query.dim() != data.dim() {
        return Err(Error::domain("query dimension does not match the data"));
    }
    let weights = data.input_weights(w)?;
    Ok(tukey_depth(&data.rows, &weights, query))
}

pub fn weighted_regression_depth(data: &Dataset, w: &WeightVector, query: &DepthQuery) -> Result<f64> {
    data.expect_mode(Mode::Regression)?;
    if query.dim() != data.dim() {
        return Err(Error::domain("query dimension does not match the data"));
    }
    let weights = data.input_weights(w)?;
    Ok(regression_depth(&data.features(), &data.responses(), &weights, query))
}

fn coordinate_medians(points: &[f64], weights: &[f64], dim: usize) -> Option<Vec<f64>> {
    (0..dim)
        .map(|k| {
            let column: Vec<f64> = points.chunks(dim).map(|z| z[k]).collect();
            weighted_median(&column, weights)
        })
        .collect()
}

/// Indices with positive weight, heaviest first; ties go to the sample
/// closest to `anchor`, then to the lower index.
fn heaviest_near(points: &[f64], weights: &[f64], dim: usize, anchor: &[f64]) -> Vec<usize> {
    let dist =
        |i: usize| -> f64 { points[i * dim..(i + 1) * dim].iter().zip(anchor).map(|(a, b)| (a - b) * (a - b)).sum() };
    let mut idx: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(dist(a).total_cmp(&dist(b))).then(a.cmp(&b)));
    idx
}

/// Weighted Tukey median: exact weighted median in one dimension,
/// multi-start search on direction-sampled depth otherwise.
pub fn weighted_tukey_median(data: &Dataset, w: &WeightVector, budget: &SearchBudget) -> Result<EstimateResult> {
    data.expect_mode(Mode::Mean)?;
    let weights = data.input_weights(w)?;
    if !weights.iter().any(|&x| x > 0.0) {
        return Err(Error::domain("all weights are zero"));
    }
    let d = data.dim();
    let points = &data.rows;

    let estimate = if d == 1 {
        vec![weighted_median(points, &weights).expect("positive weight exists")]
    } else {
        // Search in coordinates centred at the coordinate-wise median.
        let centre = coordinate_medians(points, &weights, d).expect("positive weight exists");
        let centred: Vec<f64> = points.chunks(d).flat_map(|z| z.iter().zip(&centre).map(|(a, c)| a - c)).collect();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for (z, &wi) in centred.chunks(d).zip(&weights) {
            if wi > 0.0 {
                for k in 0..d {
                    lo[k] = lo[k].min(z[k]);
                    hi[k] = hi[k].max(z[k]);
                }
            }
        }
        let step: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / 4.0).collect();

        let origin = vec![0.0; d];
        let mut starts = vec![origin.clone()];
        for i in heaviest_near(&centred, &weights, d, &origin).into_iter().take(budget.starts.saturating_sub(1)) {
            starts.push(centred[i * d..(i + 1) * d].to_vec());
        }
        let dirs = random_directions(d, budget.directions.max(1), budget.seed);
        let outcome = search::maximize(
            |eta| tukey_depth_over(&centred, &weights, eta, &dirs),
            &starts,
            &step,
            budget.rounds,
            Some((&lo, &hi)),
        );
        outcome.iter().zip(&centre).map(|(a, c)| a + c).collect()
    };
    let query = DepthQuery::new(estimate.clone(), budget.directions, budget.seed);
    let achieved = tukey_depth(points, &weights, &query);
    Ok(EstimateResult {
        estimate,
        method: Method::TukeyMedian,
        achieved_depth: Some(achieved),
        weights_used: w.clone(),
    })
}

/// Weighted regression-depth coefficient.
///
/// With one covariate, `(y - ηx) x >= 0` exactly when `η <= y / x`, so the
/// depth is maximized by the weighted median of the per-sample slopes
/// (samples with `x = 0` count in every direction). With more covariates
/// the estimate comes from a multi-start search seeded by weighted least
/// squares and exact fits through the heaviest samples.
pub fn weighted_regression_coefficient(
    data: &Dataset,
    w: &WeightVector,
    budget: &SearchBudget,
) -> Result<EstimateResult> {
    data.expect_mode(Mode::Regression)?;
    let weights = data.input_weights(w)?;
    let d = data.dim();
    let x = data.features();
    let y = data.responses();
    if !linalg::has_full_rank(&x, &weights, d) {
        return Err(Error::domain("degenerate covariates"));
    }

    let estimate = if d == 1 {
        let (slopes, slope_w): (Vec<f64>, Vec<f64>) = x
            .iter()
            .zip(&y)
            .zip(&weights)
            .filter(|((xi, _), wi)| **xi != 0.0 && **wi > 0.0)
            .map(|((xi, yi), wi)| (yi / xi, *wi))
            .unzip();
        vec![weighted_median(&slopes, &slope_w).expect("full rank implies a nonzero covariate")]
    } else {
        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Ok(beta) = weighted_least_squares(&x, &y, &weights, d) {
            starts.push(beta);
        }
        let anchor = vec![0.0; d];
        let order = heaviest_near(&x, &weights, d, &anchor);
        for group in order.chunks_exact(d) {
            if starts.len() >= budget.starts.max(1) {
                break;
            }
            let rows: Vec<f64> = group.iter().flat_map(|&i| x[i * d..(i + 1) * d].iter().copied()).collect();
            let ys: Vec<f64> = group.iter().map(|&i| y[i]).collect();
            if let Ok(beta) = weighted_least_squares(&rows, &ys, &vec![1.0; d], d) {
                starts.push(beta);
            }
        }
        if starts.is_empty() {
            starts.push(vec![0.0; d]);
        }
        let step: Vec<f64> = (0..d)
            .map(|k| {
                let spread = starts.iter().map(|s| (s[k] - starts[0][k]).abs()).fold(0.0, f64::max);
                spread.max(1e-3 * starts[0][k].abs().max(1.0))
            })
            .collect();
        let dirs = random_directions(d, budget.directions.max(1), budget.seed);
        let mut augmented = dirs.clone();
        for row in order.iter().take(budget.directions) {
            depth::push_with_normals(&mut augmented, &x[row * d..(row + 1) * d]);
        }
        search::maximize(
            |eta| regression_depth_over(&x, &y, &weights, eta, &augmented),
            &starts,
            &step,
            budget.rounds,
            None,
        )
    };
    let query = DepthQuery::new(estimate.clone(), budget.directions, budget.seed);
    let achieved = regression_depth(&x, &y, &weights, &query);
    Ok(EstimateResult {
        estimate,
        method: Method::RegressionDepth,
        achieved_depth: Some(achieved),
        weights_used: w.clone(),
    })
}

/// Classical estimates that ignore the profile: sample mean and
/// coordinate-wise median in mean mode, least squares in regression mode.
pub fn baselines(data: &Dataset) -> Result<BTreeMap<Method, Result<EstimateResult>>> {
    if data.is_empty() {
        return Err(Error::domain("baselines of an empty dataset"));
    }
    let mut out = BTreeMap::new();
    match data.mode() {
        Mode::Mean => {
            out.insert(Method::SampleMean, sample_mean(data));
            out.insert(Method::CoordinateMedian, coordinate_median(data));
        }
        Mode::Regression => {
            out.insert(Method::Ols, ordinary_least_squares(data));
        }
    }
    Ok(out)
}

pub fn sample_mean(data: &Dataset) -> Result<EstimateResult> {
    let uniform = WeightVector::uniform(data.profile())?;
    let mut r = weighted_mean(data, &uniform)?;
    r.method = Method::SampleMean;
    Ok(r)
}

pub fn coordinate_median(data: &Dataset) -> Result<EstimateResult> {
    data.expect_mode(Mode::Mean)?;
    let uniform = WeightVector::uniform(data.profile())?;
    let ones = vec![1.0; data.len()];
    let estimate = coordinate_medians(&data.rows, &ones, data.dim()).ok_or_else(|| Error::domain("empty dataset"))?;
    Ok(EstimateResult { estimate, method: Method::CoordinateMedian, achieved_depth: None, weights_used: uniform })
}

pub fn ordinary_least_squares(data: &Dataset) -> Result<EstimateResult> {
    data.expect_mode(Mode::Regression)?;
    let uniform = WeightVector::uniform(data.profile())?;
    let estimate = weighted_least_squares(&data.features(), &data.responses(), &vec![1.0; data.len()], data.dim())?;
    Ok(EstimateResult { estimate, method: Method::Ols, achieved_depth: None, weights_used: uniform })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{solve_optimal_weights, threshold_weights};

    fn prof(v: &[f64]) -> CorruptionProfile {
        CorruptionProfile::new(v.to_vec()).unwrap()
    }

    fn mean1(z: &[f64]) -> Dataset {
        Dataset::mean(1, z.to_vec(), prof(&vec![0.0; z.len()])).unwrap()
    }

    fn weights_for(data: &Dataset, w: &[f64]) -> WeightVector {
        WeightVector::from_input_order(data.profile(), w).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::mean(0, vec![], prof(&[])).is_err());
        assert!(Dataset::mean(2, vec![1.0, 2.0, 3.0], prof(&[0.0, 0.0])).is_err());
        assert!(Dataset::mean(1, vec![f64::NAN], prof(&[0.0])).is_err());
        let r = Dataset::regression(1, vec![1.0, 2.0, 3.0, 4.0], prof(&[0.1, 0.2])).unwrap();
        assert_eq!(r.features(), vec![1.0, 3.0]);
        assert_eq!(r.responses(), vec![2.0, 4.0]);
    }

    #[test]
    fn weighted_mean_examples() {
        let data = mean1(&[1.0, 3.0]);
        let w = weights_for(&data, &[0.5, 0.5]);
        assert_eq!(weighted_mean(&data, &w).unwrap().estimate, vec![2.0]);
        let w = weights_for(&data, &[1.0, 0.0]);
        assert_eq!(weighted_mean(&data, &w).unwrap().estimate, vec![1.0]);

        let data = Dataset::mean(1, vec![0.0, 1.0], prof(&[0.0, 1.0])).unwrap();
        let w = solve_optimal_weights(data.profile(), 3.0).unwrap();
        let est = weighted_mean(&data, &w).unwrap().estimate[0];
        assert!((est - 0.2).abs() < 1e-15);
    }

    #[test]
    fn weighted_mean_length_mismatch() {
        let data = mean1(&[1.0, 3.0]);
        let w = WeightVector::uniform(&prof(&[0.0; 3])).unwrap();
        assert!(weighted_mean(&data, &w).is_err());
    }

    #[test]
    fn tukey_median_one_dimensional() {
        let budget = SearchBudget::default();
        let data = mean1(&[1.0, 2.0, 3.0]);
        let u = WeightVector::uniform(data.profile()).unwrap();
        let r = weighted_tukey_median(&data, &u, &budget).unwrap();
        assert_eq!(r.estimate, vec![2.0]);
        assert!((r.achieved_depth.unwrap() - 2.0 / 3.0).abs() < 1e-15);

        let data = mean1(&[1.0, 2.0, 3.0, 100.0]);
        let w = weights_for(&data, &[0.3, 0.3, 0.3, 0.1]);
        assert_eq!(weighted_tukey_median(&data, &w, &budget).unwrap().estimate, vec![2.0]);
    }

    #[test]
    fn tukey_median_symmetric_cloud() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::seed::rng(11);
        let pts: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let data = Dataset::mean(2, pts, prof(&[0.0; 500])).unwrap();
        let u = WeightVector::uniform(data.profile()).unwrap();
        let r = weighted_tukey_median(&data, &u, &SearchBudget::default()).unwrap();
        let norm = (r.estimate[0].powi(2) + r.estimate[1].powi(2)).sqrt();
        assert!(norm <= 0.2, "estimate {:?}", r.estimate);
        assert!(r.achieved_depth.unwrap() > 0.4);
    }

    #[test]
    fn regression_coefficient_one_dimensional() {
        let data = Dataset::regression(1, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0, -1.0, -2.0], prof(&[0.1, 0.2, 0.3, 0.4]))
            .unwrap();
        let w = threshold_weights(data.profile(), 0.35).unwrap();
        let r = weighted_regression_coefficient(&data, &w, &SearchBudget::default()).unwrap();
        assert!((r.estimate[0] - 2.0).abs() < 1e-6);
        assert_eq!(r.achieved_depth, Some(1.0));
    }

    #[test]
    fn regression_coefficient_degenerate() {
        let data = Dataset::regression(1, vec![0.0, 1.0, 0.0, 2.0], prof(&[0.0, 0.0])).unwrap();
        let u = WeightVector::uniform(data.profile()).unwrap();
        assert!(weighted_regression_coefficient(&data, &u, &SearchBudget::default()).is_err());
        let data = Dataset::regression(2, vec![1.0, 1.0, 1.0, 1.0, 1.0, 2.0], prof(&[0.0, 0.0])).unwrap();
        let u = WeightVector::uniform(data.profile()).unwrap();
        assert!(weighted_regression_coefficient(&data, &u, &SearchBudget::default()).is_err());
    }

    #[test]
    fn baseline_examples() {
        let b = baselines(&mean1(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(b[&Method::SampleMean].as_ref().unwrap().estimate, vec![2.0]);
        assert_eq!(b[&Method::CoordinateMedian].as_ref().unwrap().estimate, vec![2.0]);
        let b = baselines(&mean1(&[1.0, 2.0, 100.0])).unwrap();
        assert!((b[&Method::SampleMean].as_ref().unwrap().estimate[0] - 103.0 / 3.0).abs() < 1e-12);
        assert_eq!(b[&Method::CoordinateMedian].as_ref().unwrap().estimate, vec![2.0]);

        let reg = Dataset::regression(1, vec![1.0, 1.0, 2.0, 2.0], prof(&[0.0, 0.0])).unwrap();
        let b = baselines(&reg).unwrap();
        assert!((b[&Method::Ols].as_ref().unwrap().estimate[0] - 1.0).abs() < 1e-12);

        let singular = Dataset::regression(1, vec![0.0, 1.0, 0.0, 2.0], prof(&[0.0, 0.0])).unwrap();
        let b = baselines(&singular).unwrap();
        assert!(matches!(b[&Method::Ols], Err(Error::SingularDesign)));
    }
}
