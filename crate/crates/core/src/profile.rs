//! Corruption profiles and the quantities derived from them.
//!
//! A [`CorruptionProfile`] holds the per-sample corruption probabilities
//! sorted ascending, together with the permutation back to the caller's
//! order. Everything here is a function of the sorted vector:
//!
//! * the counting functions `N(t) = |{i : λ_i <= t}|` and `n(t) = |{i : λ_i < t}|`,
//! * the rate functional `f(λ, k) = min_t k / N(t) + t²`,
//! * the crossing point `δ*` of `h(δ) = N(map(δ)) - 1 / (C δ²)`,
//! * the two-point lower bound `r² δ² (1 - sqrt(6 δ² n(2δ)))`.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-sample corruption probabilities, stored sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionProfile {
    lambdas: Vec<f64>,
    /// `original_order[k]` is the caller's index of the k-th smallest rate.
    original_order: Vec<usize>,
}

impl CorruptionProfile {
    /// Build a profile from rates in the caller's order.
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if let Some((i, &l)) = lambdas.iter().enumerate().find(|(_, l)| !(0.0..=1.0).contains(*l)) {
            return Err(Error::domain(format!("lambda out of range at index {i}: {l}")));
        }
        let mut order: Vec<usize> = (0..lambdas.len()).collect();
        // Stable, so equal rates keep their input order.
        order.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
        let sorted = order.iter().map(|&i| lambdas[i]).collect();
        Ok(Self { lambdas: sorted, original_order: order })
    }

    /// Build a profile from approximate rates known only up to a factor `c >= 1`
    /// (`λ_i <= c λ̂_i`). Every rate is multiplied by `c` and clamped at 1.
    pub fn with_inflation(lambdas: Vec<f64>, c: f64) -> Result<Self> {
        if !(c >= 1.0 && c.is_finite()) {
            return Err(Error::domain(format!("inflation factor must be >= 1, got {c}")));
        }
        let profile = Self::new(lambdas)?;
        Ok(Self {
            lambdas: profile.lambdas.iter().map(|l| (l * c).min(1.0)).collect(),
            original_order: profile.original_order,
        })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Rates sorted ascending.
    pub fn sorted(&self) -> &[f64] {
        &self.lambdas
    }

    /// Permutation from sorted position to input index.
    pub fn original_order(&self) -> &[usize] {
        &self.original_order
    }

    /// Rates in the caller's original order.
    pub fn in_input_order(&self) -> Vec<f64> {
        self.to_input_order(&self.lambdas)
    }

    /// Scatter a vector aligned with the sorted order back to input order.
    pub fn to_input_order<T: Copy + Default>(&self, sorted_aligned: &[T]) -> Vec<T> {
        assert_eq!(sorted_aligned.len(), self.len());
        let mut out = vec![T::default(); self.len()];
        for (k, &i) in self.original_order.iter().enumerate() {
            out[i] = sorted_aligned[k];
        }
        out
    }

    /// `N(t) = |{i : λ_i <= t}|`.
    pub fn count_at_most(&self, t: f64) -> usize {
        self.lambdas.partition_point(|&l| l <= t)
    }

    /// `n(t) = |{i : λ_i < t}|`.
    pub fn count_strictly_below(&self, t: f64) -> usize {
        self.lambdas.partition_point(|&l| l < t)
    }

    /// Exact minimum of `k / N(t) + t²` over `t ∈ [0, 1]`.
    ///
    /// `N` only jumps at the distinct rates and `t²` increases, so on every
    /// constant piece of `N` the minimum sits at the left end, which is a
    /// rate. Thresholds with `N(t) = 0` are infeasible and skipped. Ties go
    /// to the smallest threshold.
    pub fn rate_functional(&self, k: f64) -> Result<RateValue> {
        if self.is_empty() {
            return Err(Error::domain("rate functional of an empty profile"));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::domain(format!("k must be positive, got {k}")));
        }
        let mut best: Option<RateValue> = None;
        let n = self.len();
        for (idx, &t) in self.lambdas.iter().enumerate() {
            // Only the last occurrence of each distinct value is a candidate.
            if idx + 1 < n && self.lambdas[idx + 1] == t {
                continue;
            }
            let included = idx + 1;
            let value = k / included as f64 + t * t;
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(RateValue { value, argmin_threshold: t, included_count: included });
            }
        }
        Ok(best.expect("non-empty profile has a candidate"))
    }

    /// Crossing point of `h(δ) = N(map(δ)) - 1 / (C δ²)` on `(0, 1/4]`.
    ///
    /// Works in squared space `s = δ²` with exact rational arithmetic: sample
    /// `i` enters `N` once `s >= key_i` (for the bounded map, `key_i = (λ_i/2)²`),
    /// and on a piece of constant count `m` the root of `h` is `s = 1/(C m)`.
    /// The result is the smallest `δ` with `h(δ) >= 0`; by right-continuity of
    /// `N` its left limit is `<= 0`, so both certificate inequalities hold
    /// exactly.
    pub fn delta_star(&self, map: ThresholdMap) -> Result<DeltaStarCertificate> {
        if self.is_empty() {
            return Err(Error::domain("delta star of an empty profile"));
        }
        let keys: Vec<Option<BigRational>> = self.lambdas.iter().map(|&l| map.entry_key(l)).collect();
        let c = BigRational::from_integer(BigInt::from(map.constant()));
        let cap = BigRational::new(BigInt::one(), BigInt::from(16));
        let count_le = |s: &BigRational| keys.partition_point(|k| k.as_ref().is_some_and(|k| k <= s));
        let count_lt = |s: &BigRational| keys.partition_point(|k| k.as_ref().is_some_and(|k| k < s));
        let feasible = |s: &BigRational, count: usize| &c * s * BigInt::from(count) >= BigRational::one();

        let count_cap = count_le(&cap);
        if !feasible(&cap, count_cap) {
            return Ok(DeltaStarCertificate {
                delta_star: 0.25,
                delta_star_sq: cap.clone(),
                count_below: count_lt(&cap),
                count_at_most: count_cap,
                degenerate: true,
                map,
            });
        }

        // Piece boundaries: distinct positive keys inside (0, 1/16].
        let mut starts: Vec<BigRational> = vec![BigRational::zero()];
        for k in keys.iter().flatten() {
            if !k.is_zero() && k <= &cap && starts.last() != Some(k) {
                starts.push(k.clone());
            }
        }
        let mut chosen = None;
        for (p, start) in starts.iter().enumerate() {
            let m = count_le(start);
            if m == 0 {
                continue;
            }
            let root = BigRational::new(BigInt::one(), BigInt::from(map.constant()) * BigInt::from(m));
            let candidate = if &root <= start { start.clone() } else { root };
            let end = starts.get(p + 1).unwrap_or(&cap);
            let inside = if p + 1 < starts.len() { &candidate < end } else { &candidate <= end };
            if inside {
                chosen = Some(candidate);
                break;
            }
        }
        let s = chosen.expect("h(1/4) >= 0 guarantees a crossing");
        let delta = s.to_f64().expect("finite rational").sqrt();
        Ok(DeltaStarCertificate {
            delta_star: delta,
            count_below: count_lt(&s),
            count_at_most: count_le(&s),
            delta_star_sq: s,
            degenerate: false,
            map,
        })
    }

    /// Two-point lower bound `r² δ² (1 - sqrt(6 δ² n(2δ)))`. May be negative.
    pub fn lecam_lower_bound(&self, r: f64, delta: f64) -> Result<f64> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("radius must be positive, got {r}")));
        }
        if !(0.0..=0.25).contains(&delta) {
            return Err(Error::domain(format!("delta must lie in [0, 1/4], got {delta}")));
        }
        let below = self.count_strictly_below(2.0 * delta) as f64;
        let d2 = delta * delta;
        Ok(r * r * d2 * (1.0 - (6.0 * d2 * below).sqrt()))
    }
}

/// `f(λ, k)` together with its minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateValue {
    pub value: f64,
    pub argmin_threshold: f64,
    /// `N(t*)`.
    pub included_count: usize,
}

/// How a lower-bound parameter `δ` translates into a corruption threshold,
/// plus the constant `C` in `1 / (C δ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdMap {
    /// `δ ↦ 2δ`, `C = 12`.
    Bounded,
    /// `δ ↦ 1 - exp(-δ sqrt(d))`, `C = 64`.
    Gaussian { dim: usize },
}

impl ThresholdMap {
    pub fn constant(&self) -> u32 {
        match self {
            ThresholdMap::Bounded => 12,
            ThresholdMap::Gaussian { .. } => 64,
        }
    }

    pub fn threshold(&self, delta: f64) -> f64 {
        match *self {
            ThresholdMap::Bounded => 2.0 * delta,
            ThresholdMap::Gaussian { dim } => -(-delta * (dim as f64).sqrt()).exp_m1(),
        }
    }

    /// Smallest `δ²` at which a sample with rate `λ` is counted, or `None`
    /// if it never is. Exact for the bounded map; the Gaussian map rounds
    /// the inverse once and is then treated as exact.
    fn entry_key(&self, lambda: f64) -> Option<BigRational> {
        match *self {
            ThresholdMap::Bounded => {
                let half = BigRational::from_float(lambda)? / BigInt::from(2);
                Some(&half * &half)
            }
            ThresholdMap::Gaussian { dim } => {
                if lambda >= 1.0 {
                    return None;
                }
                let d = -(-lambda).ln_1p() / (dim as f64).sqrt();
                let d = BigRational::from_float(d)?;
                Some(&d * &d)
            }
        }
    }
}

/// The certified crossing point `δ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaStarCertificate {
    /// Nearest double to `δ*`.
    pub delta_star: f64,
    /// `δ*²`, exactly.
    pub delta_star_sq: BigRational,
    /// `n(map(δ*))`.
    pub count_below: usize,
    /// `N(map(δ*))`.
    pub count_at_most: usize,
    /// `h(1/4) < 0`: at most a handful of samples are usable at all.
    pub degenerate: bool,
    pub map: ThresholdMap,
}

impl DeltaStarCertificate {
    /// `1 / (C δ*²)` rounded to a double, for reporting.
    pub fn bound(&self) -> f64 {
        let denom = &self.delta_star_sq * BigInt::from(self.map.constant());
        denom.recip().to_f64().unwrap_or(f64::INFINITY)
    }

    /// Compare `count` against `1 / (C δ*²)` exactly.
    pub fn compare_to_bound(&self, count: usize) -> Ordering {
        let lhs = &self.delta_star_sq * BigInt::from(self.map.constant()) * BigInt::from(count);
        lhs.cmp(&BigRational::one())
    }

    /// Re-derive both counts from the profile and check the crossing
    /// inequalities (or the degenerate condition) exactly.
    pub fn holds_for(&self, profile: &CorruptionProfile) -> bool {
        let keys: Vec<Option<BigRational>> = profile.sorted().iter().map(|&l| self.map.entry_key(l)).collect();
        let s = &self.delta_star_sq;
        let le = keys.iter().filter(|k| k.as_ref().is_some_and(|k| k <= s)).count();
        let lt = keys.iter().filter(|k| k.as_ref().is_some_and(|k| k < s)).count();
        if le != self.count_at_most || lt != self.count_below {
            return false;
        }
        if self.degenerate {
            self.compare_to_bound(le) == Ordering::Less
        } else {
            self.compare_to_bound(le) != Ordering::Less && self.compare_to_bound(lt) != Ordering::Greater
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: &[f64]) -> CorruptionProfile {
        CorruptionProfile::new(v.to_vec()).unwrap()
    }

    #[test]
    fn counting_examples() {
        let a = p(&[0.1, 0.2, 0.9]);
        assert_eq!(a.count_at_most(0.2), 2);
        assert_eq!(a.count_at_most(0.05), 0);
        assert_eq!(a.count_strictly_below(0.2), 1);
        let b = p(&[0.5; 4]);
        assert_eq!(b.count_at_most(0.5), 4);
        assert_eq!(b.count_strictly_below(0.5), 0);
        assert_eq!(p(&[]).count_strictly_below(0.3), 0);
        assert_eq!(a.count_at_most(-1.0), 0);
        assert_eq!(a.count_at_most(2.0), 3);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(CorruptionProfile::new(vec![0.1, 1.2]).is_err());
        assert!(CorruptionProfile::new(vec![f64::NAN]).is_err());
        assert!(CorruptionProfile::new(vec![-0.0, 1.0]).is_ok());
    }

    #[test]
    fn original_order_roundtrips() {
        let v = vec![0.7, 0.1, 0.5, 0.1, 0.0];
        let prof = p(&v);
        assert_eq!(prof.sorted(), &[0.0, 0.1, 0.1, 0.5, 0.7]);
        assert_eq!(prof.in_input_order(), v);
        assert_eq!(prof.original_order(), &[4, 1, 3, 2, 0]);
    }

    #[test]
    fn inflation_clamps() {
        let prof = CorruptionProfile::with_inflation(vec![0.1, 0.4, 0.6], 2.0).unwrap();
        assert_eq!(prof.sorted(), &[0.2, 0.8, 1.0]);
        assert!(CorruptionProfile::with_inflation(vec![0.1], 0.5).is_err());
    }

    #[test]
    fn rate_functional_examples() {
        let r = p(&[0.0; 4]).rate_functional(1.0).unwrap();
        assert_eq!((r.value, r.argmin_threshold, r.included_count), (0.25, 0.0, 4));

        // t = 0 gives 1/1 + 0 = 1.0; t = 0.5 gives 1/2 + 0.25 = 0.75.
        let r = p(&[0.0, 0.5]).rate_functional(1.0).unwrap();
        assert_eq!((r.value, r.argmin_threshold, r.included_count), (0.75, 0.5, 2));

        let eps = 0.07;
        let r = p(&[eps; 50]).rate_functional(3.0).unwrap();
        assert_eq!(r.value, 3.0 / 50.0 + eps * eps);
        assert_eq!(r.argmin_threshold, eps);
    }

    #[test]
    fn rate_functional_errors() {
        assert!(p(&[]).rate_functional(1.0).is_err());
        assert!(p(&[0.1]).rate_functional(0.0).is_err());
        assert!(p(&[0.1]).rate_functional(-1.0).is_err());
    }

    #[test]
    fn rate_functional_matches_dense_grid() {
        let mut v = vec![0.01; 100];
        v.extend(std::iter::repeat_n(0.9, 900));
        let prof = p(&v);
        let exact = prof.rate_functional(1.0).unwrap();
        let steps = 1_000_000;
        let grid = (0..=steps)
            .map(|j| j as f64 / steps as f64)
            .filter_map(|t| {
                let n = v.iter().filter(|&&l| l <= t).count();
                (n > 0).then(|| 1.0 / n as f64 + t * t)
            })
            .fold(f64::INFINITY, f64::min);
        // The grid can only overshoot, by at most one grid step in t.
        assert!(exact.value <= grid);
        assert!(grid - exact.value <= 2.0 / steps as f64 + 1e-12);
        assert_eq!(exact.argmin_threshold, 0.01);
    }

    #[test]
    fn delta_star_all_clean() {
        let prof = p(&[0.0; 1000]);
        let cert = prof.delta_star(ThresholdMap::Bounded).unwrap();
        assert!(!cert.degenerate);
        assert_eq!(cert.delta_star_sq, BigRational::new(1.into(), 12000.into()));
        assert!((cert.delta_star - 1.0 / 12000f64.sqrt()).abs() < 1e-15);
        // Every rate is 0 < 2δ*, so n(2δ*) = 1000 = 1/(12 δ*²): equality.
        assert_eq!(cert.count_below, 1000);
        assert_eq!(cert.count_at_most, 1000);
        assert!(cert.holds_for(&prof));
    }

    #[test]
    fn delta_star_degenerate() {
        let cert = p(&[0.9, 0.95]).delta_star(ThresholdMap::Bounded).unwrap();
        assert!(cert.degenerate);
        let cert = p(&[0.2, 0.95]).delta_star(ThresholdMap::Bounded).unwrap();
        assert!(cert.degenerate);
        let cert = p(&[0.2, 0.5, 0.95]).delta_star(ThresholdMap::Bounded).unwrap();
        assert!(!cert.degenerate);
        assert!(p(&[]).delta_star(ThresholdMap::Bounded).is_err());
    }

    #[test]
    fn delta_star_uniform_grid() {
        let prof = p(&(0..100).map(|i| i as f64 / 99.0).collect::<Vec<_>>());
        let cert = prof.delta_star(ThresholdMap::Bounded).unwrap();
        assert!(!cert.degenerate);
        assert!(cert.holds_for(&prof));
        let d = cert.delta_star;
        let bound = 1.0 / (12.0 * d * d);
        assert!(prof.count_at_most(2.0 * d) as f64 >= bound * (1.0 - 1e-12));
        assert!(prof.count_strictly_below(2.0 * d) as f64 <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn delta_star_at_breakpoint() {
        // Two samples at 0.3: h jumps from negative to positive at δ = 0.15.
        let prof = p(&[0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3]);
        let cert = prof.delta_star(ThresholdMap::Bounded).unwrap();
        assert_eq!(cert.delta_star, 0.15);
        assert_eq!(cert.count_below, 0);
        assert_eq!(cert.count_at_most, 8);
        assert!(cert.holds_for(&prof));
    }

    #[test]
    fn delta_star_gaussian_map() {
        let prof = p(&(0..200).map(|i| (i as f64 / 200.0).powi(2)).collect::<Vec<_>>());
        for dim in [1, 4, 9] {
            let cert = prof.delta_star(ThresholdMap::Gaussian { dim }).unwrap();
            assert!(cert.holds_for(&prof));
            assert!(cert.delta_star > 0.0 && cert.delta_star <= 0.25);
        }
    }

    #[test]
    fn lecam_examples() {
        let prof = p(&[0.3, 0.6]);
        assert_eq!(prof.lecam_lower_bound(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(p(&[0.9, 0.9]).lecam_lower_bound(1.0, 0.25).unwrap(), 0.0625);
        let v = prof_zeros(10_000).lecam_lower_bound(1.0, 0.01).unwrap();
        assert!(v < 0.0);
        assert!((v - 1e-4 * (1.0 - (6e-4f64 * 1e4).sqrt())).abs() < 1e-15);
        assert!(prof.lecam_lower_bound(1.0, 0.3).is_err());
        assert!(prof.lecam_lower_bound(0.0, 0.1).is_err());
    }

    fn prof_zeros(n: usize) -> CorruptionProfile {
        p(&vec![0.0; n])
    }

    fn arb_profile() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(
            prop_oneof![
                3 => 0.0..=1.0f64,
                1 => prop::sample::select(vec![0.0, 0.1, 0.25, 0.5, 1.0]),
            ],
            1..200,
        )
    }

    proptest! {
        #[test]
        fn counts_agree_with_scans(v in arb_profile(), t in -0.1..1.1f64) {
            let prof = p(&v);
            prop_assert_eq!(prof.count_at_most(t), v.iter().filter(|&&l| l <= t).count());
            prop_assert_eq!(prof.count_strictly_below(t), v.iter().filter(|&&l| l < t).count());
            prop_assert!(prof.count_strictly_below(t) <= prof.count_at_most(t));
        }

        #[test]
        fn rate_functional_is_minimal(v in arb_profile(), k in 0.1..5.0f64, ts in prop::collection::vec(0.0..=1.0f64, 50)) {
            let prof = p(&v);
            let r = prof.rate_functional(k).unwrap();
            prop_assert_eq!(r.value, k / r.included_count as f64 + r.argmin_threshold * r.argmin_threshold);
            prop_assert_eq!(r.included_count, prof.count_at_most(r.argmin_threshold));
            for t in ts {
                let n = prof.count_at_most(t);
                if n > 0 {
                    prop_assert!(r.value <= k / n as f64 + t * t);
                }
            }
        }

        #[test]
        fn appending_samples_never_hurts(v in arb_profile(), k in 0.1..5.0f64) {
            let base = p(&v).rate_functional(k).unwrap();
            let mut w = v.clone();
            w.push(1.0);
            prop_assert!(p(&w).rate_functional(k).unwrap().value <= base.value);
            let mut z = v.clone();
            z.push(0.0);
            let zr = p(&z).rate_functional(k).unwrap();
            prop_assert!(zr.value <= base.value);
            if base.argmin_threshold == 0.0 {
                prop_assert!(zr.value < base.value);
            }
        }

        #[test]
        fn delta_star_certificate_holds(v in arb_profile()) {
            let prof = p(&v);
            let cert = prof.delta_star(ThresholdMap::Bounded).unwrap();
            prop_assert!(cert.holds_for(&prof));
            let usable = v.iter().filter(|&&l| l <= 0.5).count();
            prop_assert_eq!(cert.degenerate, usable <= 1);
            if !cert.degenerate {
                prop_assert!(cert.delta_star > 0.0 && cert.delta_star <= 0.25);
            }
        }
    }
}
