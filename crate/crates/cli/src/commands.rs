use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use hetrob::adversary::{contaminate, sample_profile_powerlaw};
use hetrob::estimators::{self, Mode};
use hetrob::experiment::{self, resolve_weights, WeightSpec};
use hetrob::seed::{derive, tag};
use hetrob::{
    io as formats, Dataset, EstimateResult, ExperimentConfig, ProfileSource, Scenario, SearchBudget, WeightVector,
};

use clap::ValueEnum;

use crate::args::{BenchArgs, EstimateArgs, MethodArg, RatesArgs, SimulateArgs, WeightsArg};
use crate::{seed_or_entropy, Failure};

fn with_path(path: &Path) -> impl Fn(hetrob::Error) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Profile files named in a JSON document are resolved against its directory.
fn anchor_profile(source: &mut ProfileSource, document: &Path) {
    if let ProfileSource::File { path } = source {
        if path.is_relative() {
            if let Some(dir) = document.parent() {
                *path = dir.join(&*path);
            }
        }
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn method_mode(m: MethodArg) -> Mode {
    match m {
        MethodArg::RegressionDepth | MethodArg::Ols => Mode::Regression,
        _ => Mode::Mean,
    }
}

pub fn estimate(a: &EstimateArgs) -> Result<(), Failure> {
    let data = formats::read_dataset(&a.data).map_err(with_path(&a.data))?;
    let mode = method_mode(a.method);
    if mode != data.mode() {
        return Err(Failure::Input(format!(
            "method {} needs a {mode:?} dataset, {} holds a {:?} dataset",
            a.method.to_possible_value().expect("no skipped variants").get_name(),
            a.data.display(),
            data.mode()
        )));
    }
    if !(a.c >= 0.0 && a.c.is_finite()) {
        return Err(Failure::Input(format!("--c must be nonnegative, got {}", a.c)));
    }
    let k = a.k.unwrap_or(data.dim() as f64);
    if !(k > 0.0 && k.is_finite()) {
        return Err(Failure::Input(format!("--k must be positive, got {k}")));
    }
    let profile = data.profile();

    let weight_spec = match a.method {
        MethodArg::MeanOptimal => Some(WeightSpec::OptimalLinear { c: a.c }),
        MethodArg::MeanThreshold => Some(WeightSpec::Threshold { t: a.t }),
        MethodArg::Tukey | MethodArg::RegressionDepth => Some(match a.weights {
            WeightsArg::Optimal => WeightSpec::OptimalLinear { c: a.c },
            WeightsArg::Threshold => WeightSpec::Threshold { t: a.t },
            WeightsArg::Uniform => WeightSpec::Uniform,
        }),
        _ => None,
    };
    let (weights, threshold) = match &weight_spec {
        Some(spec) => resolve_weights(spec, profile, k).map_err(Failure::runtime)?,
        None => (WeightVector::uniform(profile).map_err(Failure::runtime)?, None),
    };

    let searched = matches!(a.method, MethodArg::Tukey | MethodArg::RegressionDepth) && data.dim() >= 2;
    let seed = searched.then(|| seed_or_entropy(a.seed));
    let mut budget = SearchBudget::default().with_seed(seed.unwrap_or(0));
    if let Some(d) = a.directions {
        budget.directions = d;
    }

    let result = run_method(a.method, &data, &weights, &budget).map_err(Failure::runtime)?;

    let mut out = io::stdout().lock();
    let mut line = |key: &str, value: String| writeln!(out, "{key:<12}{value}");
    line("method", result.method.to_string()).map_err(Failure::input)?;
    if let Some(spec) = &weight_spec {
        let label = match spec {
            WeightSpec::Threshold { .. } => format!("threshold(t={})", threshold.unwrap_or(f64::NAN)),
            WeightSpec::OptimalLinear { c } => format!("optimal_linear(c={c})"),
            WeightSpec::Uniform => "uniform".into(),
        };
        line("weights", label).map_err(Failure::input)?;
    }
    line("estimate", join(&result.estimate)).map_err(Failure::input)?;
    line("n", data.len().to_string()).map_err(Failure::input)?;
    line("included", result.weights_used.support().to_string()).map_err(Failure::input)?;
    line("ess", result.weights_used.effective_sample_size().to_string()).map_err(Failure::input)?;
    if let Some(depth) = result.achieved_depth {
        line("depth", depth.to_string()).map_err(Failure::input)?;
    }
    if let Some(s) = seed {
        line("seed", s.to_string()).map_err(Failure::input)?;
    }

    if let Some(path) = &a.out {
        let mut w = create(path)?;
        let mut write = || -> io::Result<()> {
            writeln!(w, "component,estimate")?;
            for (i, v) in result.estimate.iter().enumerate() {
                writeln!(w, "{},{v}", i + 1)?;
            }
            w.flush()
        };
        write().map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &a.weights_out {
        result.weights_used.write_csv(profile, create(path)?).map_err(with_path(path))?;
    }
    Ok(())
}

fn run_method(
    method: MethodArg,
    data: &Dataset,
    weights: &WeightVector,
    budget: &SearchBudget,
) -> hetrob::Result<EstimateResult> {
    match method {
        MethodArg::MeanOptimal | MethodArg::MeanThreshold => estimators::weighted_mean(data, weights),
        MethodArg::Tukey => estimators::weighted_tukey_median(data, weights, budget),
        MethodArg::RegressionDepth => estimators::weighted_regression_coefficient(data, weights, budget),
        MethodArg::SampleMean => estimators::sample_mean(data),
        MethodArg::CoordinateMedian => estimators::coordinate_median(data),
        MethodArg::Ols => estimators::ordinary_least_squares(data),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let mut scenario: Scenario = formats::read_json(&a.scenario).map_err(with_path(&a.scenario))?;
    anchor_profile(&mut scenario.profile, &a.scenario);
    scenario.validate().map_err(with_path(&a.scenario))?;
    let seed = seed_or_entropy(a.seed);
    let profile = scenario.profile.resolve(derive(seed, &[tag::PROFILE, 0])).map_err(with_path(&a.scenario))?;
    let data = contaminate(&scenario, &profile, derive(seed, &[tag::TRIAL, 0, 0])).map_err(Failure::runtime)?;
    match &a.out {
        Some(path) => formats::write_dataset(&data, create(path)?, !a.no_flags).map_err(with_path(path))?,
        None => formats::write_dataset(&data, io::stdout().lock(), !a.no_flags).map_err(Failure::input)?,
    }
    let corrupted = data.corruption_flags().map_or(0, |f| f.iter().filter(|&&c| c).count());
    eprintln!("n={} corrupted={corrupted} truth={}", data.len(), join(&scenario.truth));
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<(), Failure> {
    let mut cfg: ExperimentConfig = formats::read_json(&a.config).map_err(with_path(&a.config))?;
    anchor_profile(&mut cfg.scenario.profile, &a.config);
    if let Some(s) = a.seed {
        cfg.root_seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(n) = a.n {
        match &mut cfg.scenario.profile {
            ProfileSource::PowerLaw { n: size, .. } => *size = n,
            _ => return Err(Failure::Input("--n needs a power_law profile".into())),
        }
    }
    cfg.validate().map_err(with_path(&a.config))?;
    let report = experiment::run_experiment(&cfg).map_err(Failure::runtime)?;
    report.write_csv(create(&a.out)?).map_err(with_path(&a.out))?;
    if let Some(path) = &a.json {
        report.write_json(create(path)?).map_err(with_path(path))?;
    }

    let mut out = io::stdout().lock();
    let mut summary = || -> io::Result<()> {
        for row in &report.rows {
            let q = row.q.map_or_else(|| "-".to_string(), |q| q.to_string());
            let metrics: Vec<String> =
                row.metrics.iter().map(|m| format!("{}={:.4e}±{:.1e}", m.metric, m.value, m.stderr)).collect();
            writeln!(out, "q={q} {} {} failures={}/{}", row.estimator, metrics.join(" "), row.failures, row.trials)?;
        }
        Ok(())
    };
    summary().map_err(Failure::input)
}

pub fn rates(a: &RatesArgs) -> Result<(), Failure> {
    let profile = match (&a.profile, a.power_law) {
        (Some(path), _) => formats::read_profile(path).map_err(with_path(path))?,
        (None, Some(q)) => {
            let n = a.n.expect("clap requires --n with --power-law");
            let seed = seed_or_entropy(a.seed);
            sample_profile_powerlaw(n, q, seed).map_err(Failure::input)?
        }
        (None, None) => unreachable!("clap requires a profile source"),
    };
    if !(a.k > 0.0 && a.k.is_finite()) {
        return Err(Failure::Input(format!("--k must be positive, got {}", a.k)));
    }
    if !(a.r >= 0.0 && a.r.is_finite()) {
        return Err(Failure::Input(format!("--r must be nonnegative, got {}", a.r)));
    }
    let overlay = experiment::rate_overlay(&profile, a.k, a.r).map_err(Failure::runtime)?;

    let mut out = io::stdout().lock();
    let ds = &overlay.delta_star;
    let mut report = || -> io::Result<()> {
        writeln!(out, "{:<16}{}", "n", overlay.n)?;
        writeln!(out, "{:<16}{}", "k", overlay.k)?;
        writeln!(out, "{:<16}{}", "rate", overlay.rate.value)?;
        writeln!(out, "{:<16}{}", "t_star", overlay.rate.argmin_threshold)?;
        writeln!(out, "{:<16}{}", "included", overlay.rate.included_count)?;
        writeln!(out, "{:<16}{}", "upper", overlay.upper)?;
        writeln!(out, "{:<16}{}", "lower_max", overlay.lower_bound_max)?;
        writeln!(out, "{:<16}{}", "delta_star", ds.delta_star)?;
        writeln!(out, "{:<16}{}", "delta_bound", ds.bound)?;
        writeln!(out, "{:<16}{}", "count_below", ds.count_below)?;
        writeln!(out, "{:<16}{}", "count_at_most", ds.count_at_most)?;
        writeln!(out, "{:<16}{}", "degenerate", ds.degenerate)
    };
    report().map_err(Failure::input)?;

    if let Some(path) = &a.curve_out {
        overlay.write_curve_csv(create(path)?).map_err(with_path(path))?;
    }
    if let Some(path) = &a.json {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &overlay)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        w.flush().map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
