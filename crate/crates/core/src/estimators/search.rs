//! Multi-start pattern search for maximizing a piecewise-constant depth.

use serde::{Deserialize, Serialize};

/// Effort spent maximizing approximate depth in two or more dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    /// Random directions used by the depth approximation during the search.
    pub directions: usize,
    /// Maximum number of starting points.
    pub starts: usize,
    /// Pattern-search rounds per start; the step halves after a round without progress.
    pub rounds: usize,
    /// Seed for the random directions.
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { directions: 64, starts: 16, rounds: 40, seed: 0 }
    }
}

impl SearchBudget {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Coordinate pattern search from every start; a move is taken only when it
/// strictly improves the objective. Candidates are clamped to `bounds` when
/// given. Returns the centroid of the best end points when it is at least as
/// good as each of them, otherwise the first best end point.
pub(crate) fn maximize<F>(
    mut objective: F,
    starts: &[Vec<f64>],
    initial_step: &[f64],
    rounds: usize,
    bounds: Option<(&[f64], &[f64])>,
) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = initial_step.len();
    let clamp = |x: &mut [f64]| {
        if let Some((lo, hi)) = bounds {
            for k in 0..dim {
                x[k] = x[k].clamp(lo[k], hi[k]);
            }
        }
    };

    let mut ends: Vec<(Vec<f64>, f64)> = Vec::with_capacity(starts.len());
    for start in starts {
        let mut x = start.clone();
        clamp(&mut x);
        let mut fx = objective(&x);
        let mut step = initial_step.to_vec();
        for _ in 0..rounds {
            let mut improved = false;
            for k in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[k] += sign * step[k];
                    clamp(&mut y);
                    let fy = objective(&y);
                    if fy > fx {
                        x = y;
                        fx = fy;
                        improved = true;
                    }
                }
            }
            if !improved {
                for s in &mut step {
                    *s *= 0.5;
                }
            }
        }
        ends.push((x, fx));
    }

    let best = ends.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<&Vec<f64>> = ends.iter().filter(|e| e.1 == best).map(|e| &e.0).collect();
    let first = winners[0].clone();
    if winners.len() > 1 {
        let mut centroid = vec![0.0; dim];
        for w in &winners {
            for k in 0..dim {
                centroid[k] += w[k];
            }
        }
        for c in &mut centroid {
            *c /= winners.len() as f64;
        }
        let fc = objective(&centroid);
        if fc >= best {
            return centroid;
        }
    }
    first
}
