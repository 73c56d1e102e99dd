use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a design counts as singular.
const RANK_TOLERANCE: f64 = 1e-10;

/// Weighted least squares `argmin Σ w_i (y_i - βᵀx_i)²` over rows with
/// positive weight. `rows` is row-major `n × dim`.
pub fn weighted_least_squares(rows: &[f64], responses: &[f64], weights: &[f64], dim: usize) -> Result<Vec<f64>> {
    let active: Vec<usize> = (0..responses.len()).filter(|&i| weights[i] > 0.0).collect();
    if active.len() < dim {
        return Err(Error::SingularDesign);
    }
    let design = DMatrix::from_fn(active.len(), dim, |r, c| weights[active[r]].sqrt() * rows[active[r] * dim + c]);
    let target = DVector::from_iterator(active.len(), active.iter().map(|&i| weights[i].sqrt() * responses[i]));
    let svd = design.svd(true, true);
    let top = svd.singular_values.max();
    if top == 0.0 || svd.singular_values.min() <= RANK_TOLERANCE * top {
        return Err(Error::SingularDesign);
    }
    let beta = svd.solve(&target, 0.0).map_err(|_| Error::SingularDesign)?;
    Ok(beta.iter().copied().collect())
}

/// Whether the weighted Gram matrix `Σ w_i x_i x_iᵀ` has full rank.
pub fn has_full_rank(rows: &[f64], weights: &[f64], dim: usize) -> bool {
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let x = &rows[i * dim..(i + 1) * dim];
        for a in 0..dim {
            for b in 0..dim {
                gram[(a, b)] += w * x[a] * x[b];
            }
        }
    }
    let sv = gram.singular_values();
    let top = sv.max();
    top > 0.0 && sv.min() > RANK_TOLERANCE * RANK_TOLERANCE * top
}

/// Squared Σ-norm `eᵀ Σ e`. `sigma` is row-major `dim × dim`.
pub fn sigma_norm_sq(e: &[f64], sigma: &[f64]) -> f64 {
    let d = e.len();
    (0..d).map(|a| e[a] * (0..d).map(|b| sigma[a * d + b] * e[b]).sum::<f64>()).sum()
}

/// Lower Cholesky factor of a row-major symmetric positive definite matrix.
pub fn cholesky(sigma: &[f64], dim: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(dim, dim, sigma);
    let l = m.cholesky()?.l();
    Some((0..dim).flat_map(|r| (0..dim).map(move |c| (r, c))).map(|(r, c)| l[(r, c)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_slope() {
        let beta = weighted_least_squares(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 1.0], 1).unwrap();
        assert!((beta[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_designs() {
        assert!(matches!(weighted_least_squares(&[0.0, 0.0], &[1.0, 2.0], &[1.0, 1.0], 1), Err(Error::SingularDesign)));
        let rows = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        assert!(weighted_least_squares(&rows, &[1.0, 2.0, 3.0], &[1.0; 3], 2).is_err());
        assert!(!has_full_rank(&rows, &[1.0; 3], 2));
        assert!(has_full_rank(&[1.0, 0.0, 0.0, 1.0], &[0.5, 0.5], 2));
    }

    #[test]
    fn sigma_norm_and_cholesky() {
        assert_eq!(sigma_norm_sq(&[1.0, 2.0], &[2.0, 0.0, 0.0, 1.0]), 6.0);
        let l = cholesky(&[4.0, 2.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(l, vec![2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}
