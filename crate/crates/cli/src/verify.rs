use std::io::{self, Write};

use hetrob::adversary::{lecam_gamma, lecam_masking_threshold, AdversarySpec, CleanSpec};
use hetrob::numeric::std_normal_cdf;
use hetrob::seed::{self, derive};
use hetrob::weights::{kkt_residual, objective_of, oracle_solve, KKT_TOLERANCE};
use hetrob::{solve_optimal_weights, CorruptionProfile, ProfileSource, Scenario};
use rand::Rng;

use crate::args::VerifyArgs;
use crate::{seed_or_entropy, Style};

const GAP_TOLERANCE: f64 = 1e-9;
const ORACLE_ITERS: usize = 100_000;
const PENALTIES: [f64; 3] = [0.5, 3.0, 10.0];
/// Family-wise false alarm rate of the sampled mixture check.
const FAMILY_ALPHA: f64 = 1e-3;
/// `|P(sign = +1) - 1/2|` allowed in the closed-form mixture check.
const EXACT_TOLERANCE: f64 = 1e-12;

struct Suite {
    name: &'static str,
    cases: usize,
    max: f64,
    limit: f64,
}

impl Suite {
    fn passed(&self) -> bool {
        self.max <= self.limit
    }
}

/// Two-sided normal critical value with tail mass `alpha`, by bisection.
fn normal_critical(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 2.0 * (1.0 - std_normal_cdf(mid)) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn solver_suites(n: usize, cases: usize, root: u64) -> [Suite; 2] {
    let mut gap = 0.0f64;
    let mut kkt = 0.0f64;
    for case in 0..cases {
        let mut rng = seed::rng_from(root, &[1, case as u64]);
        let lambdas: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let profile = CorruptionProfile::new(lambdas).expect("rates lie in [0, 1)");
        let c = PENALTIES[case % PENALTIES.len()];
        let w = solve_optimal_weights(&profile, c).expect("nonempty profile");
        let oracle = oracle_solve(&profile, c, ORACLE_ITERS);
        let (fw, fo) = (objective_of(&w, &profile, c), objective_of(&oracle, &profile, c));
        gap = gap.max((fw - fo).abs() / fo.abs().max(f64::MIN_POSITIVE));
        kkt = kkt.max(kkt_residual(w.sorted(), profile.sorted(), c));
    }
    [
        Suite { name: "solver_vs_oracle", cases, max: gap, limit: GAP_TOLERANCE },
        Suite { name: "kkt_residual", cases, max: kkt, limit: KKT_TOLERANCE },
    ]
}

fn mixture_suites(cases: usize, draws: usize, root: u64) -> [Suite; 2] {
    let mut exact = 0.0f64;
    let mut zmax = 0.0f64;
    let checks = 2 * cases;
    for case in 0..cases {
        let mut rng = seed::rng_from(root, &[2, case as u64]);
        let delta = 0.25 * (1.0 - rng.random::<f64>());
        let lo = lecam_masking_threshold(delta);
        let lambda = lo + (1.0 - lo) * rng.random::<f64>();
        for h in [1i8, -1] {
            let clean_plus = 0.5 - f64::from(h) * delta;
            let p = (1.0 - lambda) * clean_plus + lambda * lecam_gamma(lambda, delta, h);
            exact = exact.max((p - 0.5).abs());

            let scenario = Scenario {
                clean: CleanSpec::TwoPoint { r: 1.0, delta, dim: 1, hypothesis: h },
                adversary: AdversarySpec::BoundedLecam { delta, r: 1.0 },
                truth: vec![-2.0 * f64::from(h) * delta],
                profile: ProfileSource::Explicit { lambdas: vec![lambda; draws] },
            };
            let profile = scenario.profile.resolve(0).expect("explicit rates are valid");
            let samples = scenario
                .sample(&profile, derive(root, &[3, case as u64, (h + 1) as u64]))
                .expect("scenario is consistent");
            let mean = samples.iter().map(|s| s.value[0]).sum::<f64>() / draws as f64;
            zmax = zmax.max(mean.abs() * (draws as f64).sqrt());
        }
    }
    [
        Suite { name: "mixture_exact", cases: checks, max: exact, limit: EXACT_TOLERANCE },
        Suite {
            name: "mixture_sampled",
            cases: checks,
            max: zmax,
            limit: normal_critical(FAMILY_ALPHA / checks as f64),
        },
    ]
}

pub fn run(a: &VerifyArgs, style: Style) -> Result<(), crate::Failure> {
    if a.n < 2 {
        return Err(crate::Failure::Input(format!("--n must be at least 2, got {}", a.n)));
    }
    if a.cases == 0 {
        return Err(crate::Failure::Input("--cases must be at least 1".into()));
    }
    if a.draws == 0 {
        return Err(crate::Failure::Input("--draws must be at least 1".into()));
    }
    let root = seed_or_entropy(a.seed);
    let suites =
        solver_suites(a.n, a.cases, root).into_iter().chain(mixture_suites(a.cases, a.draws, root)).collect::<Vec<_>>();

    let mut out = io::stdout().lock();
    let mut table = || -> io::Result<()> {
        writeln!(out, "{:<18}{:>7}{:>14}{:>14}  status", "suite", "cases", "max", "limit")?;
        for s in &suites {
            let status = if s.passed() { style.pass("PASS") } else { style.fail("FAIL") };
            writeln!(out, "{:<18}{:>7}{:>14.3e}{:>14.3e}  {status}", s.name, s.cases, s.max, s.limit)?;
        }
        writeln!(out, "max KKT residual: {:e}", suites[1].max)
    };
    table().map_err(crate::Failure::input)?;

    let failed: Vec<&str> = suites.iter().filter(|s| !s.passed()).map(|s| s.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(crate::Failure::Verify(format!("failed suites: {}", failed.join(", "))))
    }
}
