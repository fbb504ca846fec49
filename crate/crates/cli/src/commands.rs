use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use serde::Serialize;
use unicity::dataset::load_dataset;
use unicity::estimator::homogeneity;
use unicity::model::{self, FitOptions};
use unicity::{oracle, rng, synthgen};
use unicity::{Dataset, Error, Estimator, Execution, GenSpec, InvertedIndex, KApps, Mode, SampleSpec, Sampler, SizeDistribution};

use crate::output::{print_json, sink, stdout_csv, CliResult, Failure, NOT_CONVERGED};
use crate::{Cli, Command, Input, ModeArg, Precision};

pub fn run(cli: &Cli) -> CliResult {
    let seed = cli.seed;
    match &cli.command {
        Command::Stats { input } => print_json(&read_input(input)?.stats()),
        Command::Unicity { input, k, precision, mode, sweep_k } => {
            let data = read_input(input)?;
            let mode = match mode {
                ModeArg::Uniform => Mode::Uniform,
                ModeArg::Biased => Mode::Biased,
            };
            match sweep_k {
                Some(range) => unicity_sweep(&data, parse_k_range(range)?, precision, mode, seed),
                None => {
                    let k = k.ok_or_else(|| Failure::input("missing -k"))?;
                    let spec = SampleSpec::new(precision.epsilon, precision.sigma)?;
                    let idx = InvertedIndex::build(&data);
                    let est = Estimator::new(&data, &idx).burn_in(precision.burn_in);
                    print_json(&est.unicity(k, &spec, mode, seed)?)
                }
            }
        }
        Command::Rad { input, k, depth, precision } => {
            let data = read_input(input)?;
            let spec = SampleSpec::with_depth(precision.epsilon, precision.sigma, *depth)?;
            let idx = InvertedIndex::build(&data);
            let hist = Estimator::new(&data, &idx).burn_in(precision.burn_in).rad(*k, &spec, seed)?;
            let mut w = stdout_csv();
            w.write_record(["support", "frequency"])?;
            for (i, f) in hist.h.iter().enumerate() {
                w.write_record([(i + 1).to_string(), f.to_string()])?;
            }
            w.write_record([format!(">{}", hist.depth()), hist.tail.to_string()])?;
            w.flush()?;
            Ok(())
        }
        Command::Curve { input, k, sizes, trials, precision } => {
            let data = read_input(input)?;
            let sizes = parse_sizes(sizes)?;
            let spec = SampleSpec::new(precision.epsilon, precision.sigma)?;
            let idx = InvertedIndex::build(&data);
            let est = Estimator::new(&data, &idx).burn_in(precision.burn_in);
            let rows = est.unicity_vs_size(*k, &sizes, &spec, *trials, seed)?;
            let mut w = stdout_csv();
            w.write_record(["K", "x", "y", "stderr"])?;
            for r in rows {
                let se = r.stdev / (r.trials as f64).sqrt();
                w.write_record([k.to_string(), r.size.to_string(), r.mean.to_string(), se.to_string()])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Fit { curve, x_max, split, exponent, predictions } => {
            fit(curve, *x_max, *split, *exponent, predictions.as_deref())
        }
        Command::Gen { users, items, exponent, size_mu, size_sigma, output, describe, print_spec, .. } => {
            let mut spec = match users {
                Some(n) => GenSpec::paper_shaped_scaled(*n, seed),
                None => GenSpec::paper_shaped(seed),
            };
            if let Some(n) = items {
                spec.num_items = *n;
            }
            if let Some(s) = exponent {
                spec.popularity_exponent = *s;
            }
            if let SizeDistribution::LogNormal { mu, sigma } = &mut spec.size {
                *mu = size_mu.unwrap_or(*mu);
                *sigma = size_sigma.unwrap_or(*sigma);
            }
            spec.validate()?;
            if *print_spec {
                print_json(&spec)
            } else if *describe {
                print_json(&synthgen::describe(&spec)?)
            } else {
                let data = synthgen::generate(&spec)?;
                let mut out = sink(output.as_deref())?;
                data.write_to(&mut out)?;
                out.flush()?;
                log::info!("generated {} records over {} items", data.len(), data.num_items());
                Ok(())
            }
        }
        Command::Converge { input, k, chains, check_every, max_steps } => {
            let data = read_input(input)?;
            converge(&data, *k, *chains, *check_every, *max_steps, seed)
        }
        Command::Enumerate { input, k, budget } => {
            let data = read_input(input)?;
            let omega = oracle::enumerate_omega(&data, *k, *budget)?;
            let mut out = sink(None)?;
            oracle::write_enumeration_csv(&mut out, &data, &omega)?;
            out.flush()?;
            Ok(())
        }
        Command::Homogeneity { input, items } => {
            let data = read_input(input)?;
            let x = KApps::from_tokens(&data, items.split(',').map(str::trim).filter(|t| !t.is_empty()))?;
            let idx = InvertedIndex::build(&data);
            let common: Vec<&str> = homogeneity(&idx, &data, &x)?
                .into_iter()
                .map(|i| data.token(i).unwrap_or("?"))
                .collect();
            print_json(&common)
        }
    }
}

fn read_input(input: &Input) -> CliResult<Dataset> {
    let path = &input.input;
    let file = File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let loaded = load_dataset(BufReader::new(file))?;
    if loaded.skipped_lines > 0 {
        log::warn!("skipped {} empty lines in {}", loaded.skipped_lines, path.display());
    }
    let data = loaded.dataset;
    let Some(bl) = &input.blacklist else {
        return Ok(data);
    };
    let text = fs::read_to_string(bl).map_err(|e| Failure::input(format!("{}: {e}", bl.display())))?;
    let banned: HashSet<String> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect();
    let filtered = data.filter_items(&banned)?;
    log::info!(
        "blacklist removed {} items and {} records",
        data.num_items() - filtered.num_items(),
        data.len() - filtered.len()
    );
    Ok(filtered)
}

fn unicity_sweep(
    data: &Dataset,
    ks: std::ops::RangeInclusive<usize>,
    precision: &Precision,
    mode: Mode,
    seed: u64,
) -> CliResult {
    let spec = SampleSpec::new(precision.epsilon, precision.sigma)?;
    let idx = InvertedIndex::build(data);
    let est = Estimator::new(data, &idx).burn_in(precision.burn_in);
    let mut w = stdout_csv();
    w.write_record(["K", "x", "y", "stderr"])?;
    for k in ks {
        let e = est.unicity(k, &spec, mode, rng::derive(seed, k as u64))?;
        w.write_record([k.to_string(), data.len().to_string(), e.h1_hat.to_string(), e.std_error().to_string()])?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FitReport {
    a: f64,
    b: f64,
    c: f64,
    delta: f64,
    converged: bool,
    exponent: f64,
    iterations: usize,
    residual_norm: f64,
    train_points: usize,
    test_points: usize,
}

fn fit(curve: &Path, x_max: f64, split: f64, exponent: f64, predictions: Option<&Path>) -> CliResult {
    let mut reader = csv::Reader::from_path(curve).map_err(|e| Failure::input(format!("{}: {e}", curve.display())))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Failure::input(format!("{}: no `{name}` column", curve.display())))
    };
    let (xi, yi) = (column("x")?, column("y")?);
    let mut raw = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Failure::input(format!("bad number on line {}", rec.position().map_or(0, |p| p.line()))))
        };
        raw.push((num(xi)?, num(yi)?));
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let points = model::normalize_curve(&raw, x_max)?;
    let (train, test) = model::split_at_fraction(&points, split)?;
    let opts = FitOptions { exponent, ..FitOptions::default() };
    let fit = model::fit_exponential(&train, &opts)?;
    let delta = model::mean_abs_error(&fit, &test)?;
    if let Some(path) = predictions {
        let mut w = csv::Writer::from_path(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        w.write_record(["x", "y", "predicted", "split"])?;
        for (p, set) in train.iter().map(|p| (p, "train")).chain(test.iter().map(|p| (p, "test"))) {
            w.write_record([(p.x * x_max).to_string(), p.y.to_string(), fit.predict(p.x).to_string(), set.to_string()])?;
        }
        w.flush()?;
    }
    print_json(&FitReport {
        a: fit.a,
        b: fit.b,
        c: fit.c,
        delta,
        converged: fit.converged,
        exponent: fit.exponent,
        iterations: fit.iterations,
        residual_norm: fit.residual_norm,
        train_points: train.len(),
        test_points: test.len(),
    })
}

fn converge(data: &Dataset, k: usize, chains: usize, check_every: usize, max_steps: usize, seed: u64) -> CliResult {
    if chains == 0 {
        return Err(Failure::input("need at least one chain"));
    }
    let idx = InvertedIndex::build(data);
    let sampler = Sampler::new(data, &idx, k)?;
    let runs = Execution::default().map(chains, |c| {
        match sampler.run_until_converged(rng::derive(seed, c as u64), check_every, max_steps) {
            Ok(conv) => Ok((true, conv.steps, conv.z_history)),
            Err(Error::NotConverged { steps, z_history }) => Ok((false, steps, z_history)),
            Err(e) => Err(e),
        }
    });
    let mut w = stdout_csv();
    w.write_record(["chain", "step", "zScore"])?;
    let mut failed = 0;
    let mut total = 0;
    for (c, run) in runs.into_iter().enumerate() {
        let (ok, steps, history) = run?;
        for (t, z) in history {
            w.write_record([c.to_string(), t.to_string(), z.to_string()])?;
        }
        if ok {
            total += steps;
        } else {
            failed += 1;
        }
    }
    w.flush()?;
    if failed > 0 {
        return Err(Failure {
            code: NOT_CONVERGED,
            message: format!("{failed} of {chains} chains did not converge within {max_steps} steps"),
        });
    }
    eprintln!("all {chains} chains converged, mean {:.0} steps", total as f64 / chains as f64);
    Ok(())
}

fn parse_usize(s: &str) -> CliResult<usize> {
    s.trim().replace('_', "").parse().map_err(|_| Failure::input(format!("not a count: `{s}`")))
}

/// `lo..hi`, inclusive, or a single value.
fn parse_k_range(s: &str) -> CliResult<std::ops::RangeInclusive<usize>> {
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse_usize(a)?, parse_usize(b.trim_start_matches('='))?),
        None => {
            let k = parse_usize(s)?;
            (k, k)
        }
    };
    if lo == 0 || lo > hi {
        return Err(Failure::input(format!("empty K range `{s}`")));
    }
    Ok(lo..=hi)
}

/// Comma-separated sizes, each a number or `start..end:step` with `end` included.
fn parse_sizes(s: &str) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((start, rest)) => {
                let (end, step) = match rest.split_once(':') {
                    Some((e, st)) => (parse_usize(e)?, parse_usize(st)?),
                    None => (parse_usize(rest)?, 1),
                };
                let start = parse_usize(start)?;
                if step == 0 || start > end {
                    return Err(Failure::input(format!("empty size range `{part}`")));
                }
                out.extend((start..=end).step_by(step));
            }
            None => out.push(parse_usize(part)?),
        }
    }
    if out.is_empty() {
        return Err(Failure::input("no sizes given"));
    }
    Ok(out)
}
