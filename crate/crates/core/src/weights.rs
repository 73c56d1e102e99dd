//! Sample weightings on the probability simplex.
//!
//! [`solve_optimal_weights`] returns the exact minimizer of
//! `‖w‖² + c (wᵀλ)²` over the simplex. The KKT conditions force
//! `w_i = (β - c (wᵀλ) λ_i)_+`, so the support is a prefix of the sorted
//! rates and the problem reduces to finding where the prefix ends.
//! [`oracle_solve`] solves the same problem by spectral projected gradient
//! and shares no code with the closed form.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::profile::CorruptionProfile;

/// Penalty coefficient in front of the bias term. Three is what the
/// bias-variance bound for bounded distributions produces.
pub const DEFAULT_PENALTY: f64 = 3.0;

/// Tolerance on the fixed-point residual checked before returning weights.
pub const KKT_TOLERANCE: f64 = 1e-10;

/// A point on the simplex, aligned with a profile's sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    original_order: Arc<[usize]>,
}

impl WeightVector {
    fn from_sorted(weights: Vec<f64>, profile: &CorruptionProfile) -> Self {
        Self { weights, original_order: profile.original_order().into() }
    }

    /// Uniform weights over all samples.
    pub fn uniform(profile: &CorruptionProfile) -> Result<Self> {
        let n = profile.len();
        if n == 0 {
            return Err(Error::domain("uniform weights over zero samples"));
        }
        Ok(Self::from_sorted(vec![1.0 / n as f64; n], profile))
    }

    /// Weights given in the caller's sample order. They must be finite,
    /// nonnegative and sum to one within `1e-9`.
    pub fn from_input_order(profile: &CorruptionProfile, weights: &[f64]) -> Result<Self> {
        if weights.len() != profile.len() {
            return Err(Error::domain(format!("{} weights for {} samples", weights.len(), profile.len())));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain(format!("weight {i} is negative or not finite")));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("weights sum to {total}, expected 1")));
        }
        let sorted = profile.original_order().iter().map(|&i| weights[i]).collect();
        Ok(Self::from_sorted(sorted, profile))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weights aligned with the profile's ascending rates.
    pub fn sorted(&self) -> &[f64] {
        &self.weights
    }

    /// Weights indexed like the caller's samples.
    pub fn in_input_order(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.weights.len()];
        for (k, &i) in self.original_order.iter().enumerate() {
            out[i] = self.weights[k];
        }
        out
    }

    pub fn norm_sq(&self) -> f64 {
        compensated_sum(self.weights.iter().map(|w| w * w))
    }

    /// `1 / ‖w‖²`.
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.norm_sq()
    }

    /// Number of samples carrying positive weight.
    pub fn support(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Write `index,lambda,weight` rows in input order.
    pub fn write_csv<W: Write>(&self, profile: &CorruptionProfile, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["index", "lambda", "weight"])?;
        let lambdas = profile.in_input_order();
        for (i, (l, w)) in lambdas.iter().zip(self.in_input_order()).enumerate() {
            wtr.write_record([i.to_string(), l.to_string(), w.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `‖w‖² + c (wᵀλ)²`, with `w` and `λ` in the same order.
pub fn objective(weights: &[f64], lambdas: &[f64], c: f64) -> f64 {
    let mut bias = CompensatedSum::new();
    let mut acc = CompensatedSum::new();
    for (w, l) in weights.iter().zip(lambdas) {
        bias.add_product(*w, *l);
        acc.add_product(*w, *w);
    }
    let b = bias.value();
    let sq = b * b;
    acc.add_product(c, sq);
    acc.add(c * b.mul_add(b, -sq));
    acc.value()
}

/// Objective of a weight vector against its own profile.
pub fn objective_of(w: &WeightVector, profile: &CorruptionProfile, c: f64) -> f64 {
    objective(w.sorted(), profile.sorted(), c)
}

/// Largest coordinate violation of `w_i = (β - c (wᵀλ) λ_i)_+`, with `β`
/// recovered from the largest weight.
pub fn kkt_residual(weights: &[f64], lambdas: &[f64], c: f64) -> f64 {
    let bias = compensated_sum(weights.iter().zip(lambdas).map(|(w, l)| w * l));
    let slope = c * bias;
    // On the support w_i + slope λ_i is constant; average it for β.
    let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if support.is_empty() {
        return f64::INFINITY;
    }
    let beta = compensated_sum(support.iter().map(|&i| weights[i] + slope * lambdas[i])) / support.len() as f64;
    weights.iter().zip(lambdas).map(|(w, l)| (w - (beta - slope * l).max(0.0)).abs()).fold(0.0, f64::max)
}

/// Exact minimizer of `‖w‖² + c (wᵀλ)²` over the simplex.
pub fn solve_optimal_weights(profile: &CorruptionProfile, c: f64) -> Result<WeightVector> {
    if profile.is_empty() {
        return Err(Error::domain("optimal weights of an empty profile"));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("penalty must be nonnegative, got {c}")));
    }
    let lambdas = profile.sorted();
    let n = lambdas.len();

    let mut l1 = CompensatedSum::new();
    let mut l2 = CompensatedSum::new();
    l1.add(lambdas[0]);
    l2.add(lambdas[0] * lambdas[0]);
    let mut k = 1;
    // Grow the support while the next rate is below the cutoff
    // (1 + c‖λ_1^k‖²) / (c‖λ_1^k‖₁). Past the end the next rate is +∞;
    // a zero denominator means every rate so far is 0 and the cutoff is +∞.
    while k < n {
        let s1 = l1.value();
        let denom = c * s1;
        let cutoff = if denom == 0.0 { f64::INFINITY } else { (1.0 + c * l2.value()) / denom };
        if lambdas[k] < cutoff {
            l1.add(lambdas[k]);
            l2.add(lambdas[k] * lambdas[k]);
            k += 1;
        } else {
            break;
        }
    }

    let s1 = l1.value();
    let s2 = l2.value();
    let head = 1.0 + c * s2;
    // w_i = β - αλ_i with β = head / denom and α = c s1 / denom.
    let denom = k as f64 * head - c * s1 * s1;
    let mut weights: Vec<f64> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| if i < k { ((head - c * s1 * l) / denom).max(0.0) } else { 0.0 })
        .collect();
    let total = compensated_sum(weights.iter().copied());
    for w in &mut weights {
        *w /= total;
    }

    let residual = kkt_residual(&weights, lambdas, c);
    if residual > KKT_TOLERANCE {
        return Err(Error::KktViolation { residual });
    }
    Ok(WeightVector::from_sorted(weights, profile))
}

/// `w_i = 1{λ_i <= t} / N(t)`.
pub fn threshold_weights(profile: &CorruptionProfile, t: f64) -> Result<WeightVector> {
    let included = profile.count_at_most(t);
    if included == 0 {
        return Err(Error::EmptySelection { threshold: t });
    }
    let share = 1.0 / included as f64;
    let weights = (0..profile.len()).map(|i| if i < included { share } else { 0.0 }).collect();
    Ok(WeightVector::from_sorted(weights, profile))
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_to_simplex(y: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend_from_slice(y);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    for (o, &v) in out.iter_mut().zip(y) {
        *o = (v - tau).max(0.0);
    }
}

/// Independent check on [`solve_optimal_weights`]: spectral projected
/// gradient. Each step projects `x - α∇f(x)` onto the simplex with the
/// Barzilai–Borwein step `α = sᵀs / sᵀy`, then moves to the exact minimizer
/// of the quadratic along the segment towards the projection. Stops when a
/// step no longer lowers the objective or after `max_iters` steps.
pub fn oracle_solve(profile: &CorruptionProfile, c: f64, max_iters: usize) -> WeightVector {
    let lambdas = profile.sorted();
    let n = lambdas.len();
    if n == 0 {
        return WeightVector::from_sorted(Vec::new(), profile);
    }
    let lip = 2.0 * (1.0 + c * lambdas.iter().map(|l| l * l).sum::<f64>());
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    let mut x = vec![1.0 / n as f64; n];
    let mut grad = vec![0.0; n];
    let gradient = |x: &[f64], out: &mut [f64]| {
        let bias = dot(x, lambdas);
        for i in 0..n {
            out[i] = 2.0 * x[i] + 2.0 * c * bias * lambdas[i];
        }
    };
    gradient(&x, &mut grad);
    let mut f = objective(&x, lambdas, c);
    let mut alpha = 1.0 / lip;
    let mut trial = vec![0.0; n];
    let mut proj = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut next_grad = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);

    for _ in 0..max_iters {
        for i in 0..n {
            trial[i] = x[i] - alpha * grad[i];
        }
        project_to_simplex(&trial, &mut proj, &mut scratch);
        for i in 0..n {
            dir[i] = proj[i] - x[i];
        }
        let slope = dot(&grad, &dir);
        // dᵀ∇²f d with ∇²f = 2(I + c λλᵀ).
        let curvature = 2.0 * dot(&dir, &dir) + 2.0 * c * dot(&dir, lambdas).powi(2);
        if !(slope < 0.0 && curvature > 0.0) {
            break;
        }
        let t = (-slope / curvature).min(1.0);
        for i in 0..n {
            next[i] = x[i] + t * dir[i];
        }
        let f_next = objective(&next, lambdas, c);
        if !(f_next < f) {
            break;
        }
        gradient(&next, &mut next_grad);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = next[i] - x[i];
            ss += s * s;
            sy += s * (next_grad[i] - grad[i]);
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(1.0 / lip, 1e12) } else { 1.0 / lip };
        std::mem::swap(&mut x, &mut next);
        std::mem::swap(&mut grad, &mut next_grad);
        f = f_next;
    }
    WeightVector::from_sorted(x, profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: &[f64]) -> CorruptionProfile {
        CorruptionProfile::new(v.to_vec()).unwrap()
    }

    #[test]
    fn all_clean_is_uniform() {
        for c in [0.0, 1.0, 3.0, 100.0] {
            let w = solve_optimal_weights(&p(&[0.0; 4]), c).unwrap();
            assert_eq!(w.sorted(), &[0.25; 4]);
        }
    }

    #[test]
    fn two_point_hand_solution() {
        // k = 2: ‖λ‖₁ = 1, ‖λ‖² = 1, β = 4 / (2·4 - 3) = 4/5, α = 3·(4/5)/4 = 3/5.
        let prof = p(&[0.0, 1.0]);
        let w = solve_optimal_weights(&prof, 3.0).unwrap();
        assert!((w.sorted()[0] - 0.8).abs() < 1e-15);
        assert!((w.sorted()[1] - 0.2).abs() < 1e-15);
        assert!((objective_of(&w, &prof, 3.0) - 0.8).abs() < 1e-15);
        assert!(kkt_residual(w.sorted(), prof.sorted(), 3.0) < 1e-15);
    }

    #[test]
    fn homogeneous_is_uniform() {
        let w = solve_optimal_weights(&p(&[0.3; 7]), 3.0).unwrap();
        for &x in w.sorted() {
            assert!((x - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn heavy_tail_is_dropped() {
        let prof = p(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let w = solve_optimal_weights(&prof, 3.0).unwrap();
        // cutoff after ten zeros is +∞, so λ = 1 enters; with c = 3 its weight is tiny but positive
        assert!(w.sorted()[10] >= 0.0);
        assert!(kkt_residual(w.sorted(), prof.sorted(), 3.0) < 1e-12);

        let prof = p(&[0.01, 0.02, 0.03, 0.99, 1.0]);
        let w = solve_optimal_weights(&prof, 1000.0).unwrap();
        assert_eq!(w.sorted()[4], 0.0);
        assert_eq!(w.support(), 3);
    }

    #[test]
    fn errors() {
        assert!(solve_optimal_weights(&p(&[]), 3.0).is_err());
        assert!(solve_optimal_weights(&p(&[0.1]), -1.0).is_err());
        assert!(matches!(threshold_weights(&p(&[0.1, 0.2, 0.9]), 0.05), Err(Error::EmptySelection { .. })));
    }

    #[test]
    fn threshold_examples() {
        let prof = p(&[0.1, 0.2, 0.9]);
        assert_eq!(threshold_weights(&prof, 0.5).unwrap().sorted(), &[0.5, 0.5, 0.0]);
        assert_eq!(threshold_weights(&prof, 1.0).unwrap().sorted(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn oracle_examples() {
        let w = oracle_solve(&p(&[0.0, 1.0]), 3.0, 1000);
        assert!((objective_of(&w, &p(&[0.0, 1.0]), 3.0) - 0.8).abs() < 1e-12);
        assert_eq!(oracle_solve(&p(&[0.0, 0.0]), 3.0, 10).sorted(), &[0.5, 0.5]);
        let w = oracle_solve(&p(&[0.3, 0.3, 0.3]), 0.0, 10);
        for &x in w.sorted() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_lands_on_simplex() {
        let mut out = [0.0; 4];
        project_to_simplex(&[0.5, 2.0, -1.0, 0.1], &mut out, &mut Vec::new());
        assert_eq!(out, [0.0, 1.0, 0.0, 0.0]);
        project_to_simplex(&[0.25; 4], &mut out, &mut Vec::new());
        assert_eq!(out, [0.25; 4]);
    }

    #[test]
    fn weights_csv() {
        let prof = p(&[0.9, 0.1]);
        let w = threshold_weights(&prof, 0.5).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&prof, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,lambda,weight\n0,0.9,0\n1,0.1,1\n");
    }

    fn arb_profile() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![4 => 0.0..=1.0f64, 1 => prop::sample::select(vec![0.0, 0.5, 1.0])], 1..120)
    }

    proptest! {
        #[test]
        fn fixed_point_and_simplex(v in arb_profile(), c in 0.0..20.0f64) {
            let prof = p(&v);
            let w = solve_optimal_weights(&prof, c).unwrap();
            prop_assert!(kkt_residual(w.sorted(), prof.sorted(), c) <= KKT_TOLERANCE);
            prop_assert!((compensated_sum(w.sorted().iter().copied()) - 1.0).abs() <= 1e-12);
            prop_assert!(w.sorted().iter().all(|&x| x >= 0.0));
            prop_assert!(w.sorted().windows(2).all(|p| p[0] >= p[1]));
        }

        #[test]
        fn dominates_every_threshold(v in arb_profile(), c in 0.0..20.0f64) {
            let prof = p(&v);
            let w = solve_optimal_weights(&prof, c).unwrap();
            let best = objective_of(&w, &prof, c);
            for &t in prof.sorted() {
                let tw = threshold_weights(&prof, t).unwrap();
                prop_assert!(best <= objective_of(&tw, &prof, c) * (1.0 + 1e-12));
            }
        }

        #[test]
        fn permutation_equivariant(v in arb_profile(), c in 0.0..20.0f64, seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled: Vec<(usize, f64)> = v.iter().copied().enumerate().collect();
            shuffled.shuffle(&mut crate::seed::rng(seed));
            let a = solve_optimal_weights(&p(&v), c).unwrap().in_input_order();
            let b = solve_optimal_weights(&p(&shuffled.iter().map(|x| x.1).collect::<Vec<_>>()), c)
                .unwrap()
                .in_input_order();
            for (j, &(orig, _)) in shuffled.iter().enumerate() {
                prop_assert_eq!(b[j], a[orig]);
            }
        }
    }
}
