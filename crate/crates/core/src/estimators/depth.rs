//! Weighted halfspace depth and weighted regression depth.
//!
//! Both depths are a minimum over unit directions `v` of a weighted count.
//! In one dimension the only directions are `±1` and the minimum is exact.
//! In higher dimension the minimum is taken over a finite direction set,
//! which can only overestimate the true depth; more directions never raise it.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::seed;

const UNIT_TOLERANCE: f64 = 1e-12;

/// A candidate point and the directions used to evaluate its depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthQuery {
    candidate: Vec<f64>,
    /// Row-major `m × dim`.
    directions: Vec<f64>,
    exact: bool,
}

impl DepthQuery {
    /// Query with `count` random directions drawn from `seed`. In one
    /// dimension the direction set is `{+1, -1}` regardless of `count`.
    pub fn new(candidate: Vec<f64>, count: usize, seed: u64) -> Self {
        let dim = candidate.len();
        let directions = if dim == 1 { vec![1.0, -1.0] } else { random_directions(dim, count, seed) };
        Self { candidate, directions, exact: dim == 1 }
    }

    /// Query with caller-supplied unit directions, row-major.
    pub fn with_directions(candidate: Vec<f64>, directions: Vec<f64>) -> Result<Self> {
        let dim = candidate.len();
        if dim == 0 || directions.len() % dim != 0 {
            return Err(Error::domain("direction matrix does not match the candidate dimension"));
        }
        for v in directions.chunks(dim) {
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::domain(format!("direction has norm {norm}, expected 1")));
            }
        }
        let exact = dim == 1 && {
            let mut signs: Vec<f64> = directions.clone();
            signs.sort_by(f64::total_cmp);
            signs.dedup();
            signs == [-1.0, 1.0]
        };
        Ok(Self { candidate, directions, exact })
    }

    pub fn candidate(&self) -> &[f64] {
        &self.candidate
    }

    pub fn dim(&self) -> usize {
        self.candidate.len()
    }

    pub fn directions(&self) -> impl Iterator<Item = &[f64]> {
        self.directions.chunks(self.candidate.len())
    }

    pub fn direction_count(&self) -> usize {
        self.directions.len() / self.candidate.len()
    }

    /// True when the direction set makes the depth exact (one dimension).
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Same candidate, the first `count` directions only.
    pub fn truncated(&self, count: usize) -> Self {
        let d = self.dim();
        let keep = count.min(self.direction_count()) * d;
        Self {
            candidate: self.candidate.clone(),
            directions: self.directions[..keep].to_vec(),
            exact: self.exact && keep == self.directions.len(),
        }
    }
}

/// `count` independent uniform directions on the unit sphere, row-major.
pub fn random_directions(dim: usize, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(dim * count);
    while out.len() < dim * count {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.extend(v.iter().map(|x| x / norm));
        }
    }
    out
}

/// Push `v / ‖v‖` and, in the plane, its two normals. Zero vectors are skipped.
pub(crate) fn push_with_normals(out: &mut Vec<f64>, v: &[f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return;
    }
    out.extend(v.iter().map(|x| x / norm));
    if v.len() == 2 {
        let (a, b) = (v[0] / norm, v[1] / norm);
        out.extend_from_slice(&[-b, a, b, -a]);
    }
}

/// Weighted count `Σ w_i 1{score_i(v) >= 0}` minimized over `directions`.
pub(crate) fn min_weighted_count<F>(weights: &[f64], directions: &[f64], dim: usize, mut score: F) -> f64
where
    F: FnMut(usize, &[f64]) -> f64,
{
    let mut best = f64::INFINITY;
    for v in directions.chunks(dim) {
        let mut acc = CompensatedSum::new();
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 && score(i, v) >= 0.0 {
                acc.add(w);
            }
        }
        best = best.min(acc.value());
        if best <= 0.0 {
            break;
        }
    }
    best.clamp(0.0, 1.0)
}

/// `min_v Σ w_i 1{vᵀ(Z_i - η) >= 0}` over the query directions, augmented
/// with every normalized offset `Z_i - η` (and its normals in the plane).
/// `points` is row-major `n × dim`; `weights` is in the same order.
pub fn tukey_depth(points: &[f64], weights: &[f64], query: &DepthQuery) -> f64 {
    let d = query.dim();
    let eta = query.candidate();
    let mut dirs = query.directions.clone();
    if !query.exact {
        let mut offset = vec![0.0; d];
        for z in points.chunks(d) {
            for k in 0..d {
                offset[k] = z[k] - eta[k];
            }
            push_with_normals(&mut dirs, &offset);
        }
    }
    tukey_depth_over(points, weights, eta, &dirs)
}

/// Tukey depth over an explicit direction set, no augmentation.
pub fn tukey_depth_over(points: &[f64], weights: &[f64], eta: &[f64], directions: &[f64]) -> f64 {
    let d = eta.len();
    min_weighted_count(weights, directions, d, |i, v| {
        let z = &points[i * d..(i + 1) * d];
        (0..d).map(|k| v[k] * (z[k] - eta[k])).sum::<f64>()
    })
}

/// `min_v Σ w_i 1{(y_i - ηᵀx_i)(vᵀx_i) >= 0}` over the query directions,
/// augmented with every normalized covariate (and its normals in the plane).
pub fn regression_depth(covariates: &[f64], responses: &[f64], weights: &[f64], query: &DepthQuery) -> f64 {
    let d = query.dim();
    let mut dirs = query.directions.clone();
    if !query.exact {
        for x in covariates.chunks(d) {
            push_with_normals(&mut dirs, x);
        }
    }
    regression_depth_over(covariates, responses, weights, query.candidate(), &dirs)
}

/// Regression depth over an explicit direction set, no augmentation.
pub fn regression_depth_over(
    covariates: &[f64],
    responses: &[f64],
    weights: &[f64],
    eta: &[f64],
    directions: &[f64],
) -> f64 {
    let d = eta.len();
    let residuals: Vec<f64> = covariates
        .chunks(d)
        .zip(responses)
        .map(|(x, y)| y - x.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    min_weighted_count(weights, directions, d, |i, v| {
        let x = &covariates[i * d..(i + 1) * d];
        residuals[i] * x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_query_is_exact() {
        let q = DepthQuery::new(vec![0.5], 64, 1);
        assert!(q.is_exact());
        assert_eq!(q.direction_count(), 2);
        let q = DepthQuery::new(vec![0.5, 0.1], 64, 1);
        assert!(!q.is_exact());
        for v in q.directions() {
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_unit_directions() {
        assert!(DepthQuery::with_directions(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(DepthQuery::with_directions(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(DepthQuery::with_directions(vec![0.0], vec![1.0, -1.0]).unwrap().is_exact());
    }

    #[test]
    fn tukey_examples() {
        let z = [1.0, 2.0, 3.0];
        let u = [1.0 / 3.0; 3];
        let d = tukey_depth(&z, &u, &DepthQuery::new(vec![2.0], 0, 0));
        assert!((d - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(tukey_depth(&z, &u, &DepthQuery::new(vec![0.0], 0, 0)), 0.0);
        let d = tukey_depth(&z, &[0.5, 0.25, 0.25], &DepthQuery::new(vec![2.0], 0, 0));
        assert_eq!(d, 0.5);
    }

    #[test]
    fn regression_examples() {
        let u3 = [1.0 / 3.0; 3];
        let q = DepthQuery::new(vec![2.0], 0, 0);
        assert_eq!(regression_depth(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &u3, &q), 1.0);
        let q0 = DepthQuery::new(vec![0.0], 0, 0);
        assert_eq!(regression_depth(&[1.0, -1.0], &[0.0, 0.0], &[0.5, 0.5], &q0), 1.0);
        let q1 = DepthQuery::new(vec![1.0], 0, 0);
        let d = regression_depth(&[1.0, 2.0, 3.0], &[1.0, 2.0, 30.0], &u3, &q1);
        assert!((d - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn square_corners() {
        let z = [1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let w = [0.25; 4];
        let centre = tukey_depth(&z, &w, &DepthQuery::new(vec![0.0, 0.0], 16, 3));
        assert_eq!(centre, 0.5);
        let outside = tukey_depth(&z, &w, &DepthQuery::new(vec![2.0, 0.0], 16, 3));
        assert_eq!(outside, 0.0);
    }
}
