use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;
use serde_json::json;

use totient_core::attack::{fermat_baseline, fermat_search, predicted_sum, window_report};
use totient_core::bounds::{compare, CSV_HEADER};
use totient_core::dataset::{load_csv_file, write_csv, DatasetHeader};
use totient_core::metrics::{evaluate, histogram, render_decimal, residuals};
use totient_core::plot::{histogram_svg, scatter_svg};
use totient_core::regress::{count_violations, fit, load_model, save_model};
use totient_core::samples::generate_dataset;
use totient_core::{
    dataset, DatasetStats, FitMode, HistogramSpec, LinearModel, MetricsReport, Natural, Rational, RsaSample, SplitSpec,
};

use crate::cli::{
    AttackArgs, BoundsArgs, EvalArgs, FitArgs, GenerateArgs, PipelineArgs, PlotArgs, SplitArgs,
};

/// Invalid invocation that clap cannot detect; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    BudgetExhausted,
}

fn check_bits(bits: u64) -> Result<()> {
    if bits < 8 || !bits.is_multiple_of(2) {
        return usage(format!("--bits must be even and at least 8, got {bits}"));
    }
    Ok(())
}

/// `a/b` or a plain decimal such as `0.8`.
pub fn parse_fraction(text: &str) -> Result<Rational> {
    let bad = || UsageError(format!("invalid fraction {text:?}"));
    let value = if let Some((num, den)) = text.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad().into());
        }
        Rational::new(num, den)
    } else {
        let (int, frac) = text.trim().split_once('.').unwrap_or((text.trim(), ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad().into());
        }
        let digits = format!("{int}{frac}");
        let num = BigInt::from_str(&digits).map_err(|_| bad())?;
        Rational::new(num, num_traits::pow(BigInt::from(10), frac.len()))
    };
    Ok(value)
}

fn parse_modulus(text: &str) -> Result<Natural> {
    match Natural::from_str(text.trim()) {
        Ok(n) => Ok(n),
        Err(_) => usage(format!("invalid modulus {text:?}")),
    }
}

fn split_spec(args: &SplitArgs, seed: u64) -> Result<SplitSpec> {
    let fraction = parse_fraction(&args.train_fraction)?;
    match SplitSpec::new(fraction, seed) {
        Ok(s) => Ok(s),
        Err(e) => usage(e.to_string()),
    }
}

fn pairs(samples: &[RsaSample]) -> Vec<(Natural, Natural)> {
    samples.iter().map(|s| (s.n.clone(), s.epsilon.clone())).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn metrics_line(report: &MetricsReport) -> String {
    let (mae, mse, r2) = report.rendered();
    format!("MAE {mae}  MSE {mse}  R² {r2}")
}

pub fn generate(args: &GenerateArgs) -> Result<Status> {
    check_bits(args.bits)?;
    let count = args.scale.count();
    if count == 0 {
        return usage("--count must be at least 1");
    }
    let header = DatasetHeader::new(args.bits, count, args.seed);
    let file = fs::File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let mut stats: Option<DatasetStats> = None;
    let samples = generate_dataset(args.bits, count, args.seed)?.inspect(|s| match &mut stats {
        Some(acc) => acc.push(s),
        None => stats = Some(DatasetStats::from_sample(s)),
    });
    write_csv(&header, samples, std::io::BufWriter::new(file))?;
    let stats = stats.context("no samples generated")?;
    println!("wrote {count} samples of {} bits to {}", args.bits, args.out.display());
    println!("mean n           {}", render_decimal(&stats.mean_n(), 17));
    println!("mean p + q       {}", render_decimal(&stats.mean_prime_sum(), 17));
    println!("mean epsilon     {}", render_decimal(&stats.mean_epsilon(), 17));
    Ok(Status::Ok)
}

struct Fitted {
    model: LinearModel,
    train: Vec<RsaSample>,
    test: Vec<RsaSample>,
    train_violations: u64,
}

fn fit_split(
    samples: Vec<RsaSample>,
    split: &SplitSpec,
    mode: FitMode,
    bits: u64,
    seed: u64,
    digits: usize,
) -> Result<Fitted> {
    let (train, test) = split.split(samples);
    if train.is_empty() {
        bail!("training split is empty");
    }
    let train_pairs = pairs(&train);
    let mut model = fit(mode, &train_pairs, bits)?.with_provenance(bits, seed);
    let train_violations = count_violations(&model, train_pairs.iter().map(|(x, y)| (x, y)));
    if !test.is_empty() {
        let report = evaluate(&model, &test)?.with_digits(digits);
        model = model.with_metrics(report);
    }
    Ok(Fitted {
        model,
        train,
        test,
        train_violations,
    })
}

pub fn fit_cmd(args: &FitArgs) -> Result<Status> {
    let (header, samples) = load_csv_file(&args.data.data, !args.data.no_strict)?;
    let seed = args.seed.unwrap_or(header.master_seed);
    let split = split_spec(&args.split, seed)?;
    let f = fit_split(samples, &split, args.mode, header.modulus_bits, seed, args.precision)?;
    save_model(&f.model, &args.out)?;
    println!(
        "{} fit on {} training rows: slope {} intercept {}",
        args.mode,
        f.train.len(),
        f.model.slope,
        f.model.intercept
    );
    println!("training violations {}", f.train_violations);
    if let Some(m) = &f.model.metrics {
        println!("test ({} rows): {}", f.test.len(), metrics_line(m));
    }
    Ok(Status::Ok)
}

pub fn eval(args: &EvalArgs) -> Result<Status> {
    let (header, samples) = load_csv_file(&args.data.data, !args.data.no_strict)?;
    let model = load_model(&args.model)?;
    let seed = args.seed.unwrap_or(header.master_seed);
    let (_, test) = split_spec(&args.split, seed)?.split(samples);
    if test.is_empty() {
        bail!("test split is empty");
    }
    let report = evaluate(&model, &test)?.with_digits(args.precision);
    let value = json!({
        "split": "test",
        "count": test.len(),
        "metrics": report.to_json(),
    });
    emit(args.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&value)?))?;
    eprintln!("{}", metrics_line(&report));
    Ok(Status::Ok)
}

fn bounds_csv(samples: &[RsaSample], model: Option<&LinearModel>, precision: u32) -> Result<String> {
    let rows = samples
        .par_iter()
        .map(|s| compare(&s.n, Some((&s.p, &s.q)), model, precision).map(|r| r.csv_row()))
        .collect::<totient_core::Result<Vec<_>>>()?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

fn learned_model(model: Option<LinearModel>) -> Option<LinearModel> {
    model.filter(LinearModel::has_half_slope)
}

pub fn bounds(args: &BoundsArgs) -> Result<Status> {
    let model = args.model.as_deref().map(load_model).transpose()?;
    let model = learned_model(model);
    let text = match (&args.data, &args.modulus) {
        (Some(path), _) => {
            let (_, samples) = load_csv_file(path, !args.no_strict)?;
            bounds_csv(&samples, model.as_ref(), args.bound_precision)?
        }
        (None, Some(m)) => {
            let n = parse_modulus(m)?;
            let report = compare(&n, None, model.as_ref(), args.bound_precision)?;
            format!("{CSV_HEADER}\n{}\n", report.csv_row())
        }
        (None, None) => return usage("bounds needs --data or --modulus"),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(Status::Ok)
}

pub fn attack(args: &AttackArgs) -> Result<Status> {
    let (n, truth) = match (&args.data, &args.modulus) {
        (Some(path), _) => {
            let (_, samples) = load_csv_file(path, !args.no_strict)?;
            let sample = usize::try_from(args.index)
                .ok()
                .and_then(|i| samples.get(i))
                .with_context(|| format!("--index {} is past the end of the dataset", args.index))?;
            (sample.n.clone(), Some(sample.prime_sum()))
        }
        (None, Some(m)) => (parse_modulus(m)?, None),
        (None, None) => return usage("attack needs --data or --modulus"),
    };
    let outcome = if args.baseline {
        fermat_baseline(&n, args.budget)
    } else {
        let Some(path) = &args.model else {
            return usage("attack needs --model unless --baseline is given");
        };
        let model = load_model(path)?;
        if !model.has_half_slope() {
            return usage(format!("attack needs a slope-1/2 model, {} has slope {}", path.display(), model.slope));
        }
        let start = predicted_sum(&model, &n)?;
        fermat_search(&n, &start, args.budget)
    };
    let outcome = match &truth {
        Some(s) => outcome.with_truth(s),
        None => outcome,
    };
    let mut value = outcome.to_json();
    value["n"] = json!(n.to_string());
    value["search"] = json!(if args.baseline { "baseline" } else { "seeded" });
    value["budget"] = json!(args.budget);
    emit(args.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&value)?))?;
    Ok(if outcome.success {
        Status::Ok
    } else {
        eprintln!("budget of {} tests exhausted", args.budget);
        Status::BudgetExhausted
    })
}

fn write_plots(model: &LinearModel, test: &[RsaSample], bins: usize, dir: &Path) -> Result<()> {
    let truth: Vec<Rational> = test
        .iter()
        .map(|s| Rational::from_integer(BigInt::from(s.epsilon.clone())))
        .collect();
    let predicted: Vec<Rational> = test.iter().map(|s| model.predict(&s.n)).collect();
    scatter_svg(&truth, &predicted, &dir.join("scatter.svg"))?;
    let res = residuals(model, test);
    let hist = histogram(&res, HistogramSpec { bin_count: bins })?;
    histogram_svg(&hist, &dir.join("residual_hist.svg"))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn plot(args: &PlotArgs) -> Result<Status> {
    if args.bins == 0 {
        return usage("--bins must be at least 1");
    }
    let (header, samples) = load_csv_file(&args.data.data, !args.data.no_strict)?;
    let model = load_model(&args.model)?;
    let seed = args.seed.unwrap_or(header.master_seed);
    let (_, test) = split_spec(&args.split, seed)?.split(samples);
    if test.is_empty() {
        bail!("test split is empty");
    }
    create_dir(&args.out)?;
    write_plots(&model, &test, args.bins, &args.out)?;
    println!("wrote scatter.svg and residual_hist.svg to {}", args.out.display());
    Ok(Status::Ok)
}

pub fn pipeline(args: &PipelineArgs) -> Result<Status> {
    let target = args.modulus.as_deref().map(parse_modulus).transpose()?;
    let bits = match (args.bits, &target) {
        (Some(b), Some(n)) if b != n.bits() => {
            return usage(format!("--bits {b} disagrees with the {}-bit --modulus", n.bits()))
        }
        (Some(b), _) => b,
        (None, Some(n)) => n.bits(),
        (None, None) => return usage("pipeline needs --bits or --modulus"),
    };
    check_bits(bits)?;
    let count = args.scale.count();
    if count == 0 {
        return usage("--count must be at least 1");
    }
    let split = split_spec(&args.split, args.seed)?;
    let dir = &args.out;
    create_dir(dir)?;

    // generate
    let header = DatasetHeader::new(bits, count, args.seed);
    let samples: Vec<RsaSample> = generate_dataset(bits, count, args.seed)?.collect();
    let mut csv = Vec::new();
    write_csv(&header, samples.iter().cloned(), &mut csv)?;
    fs::write(dir.join("dataset.csv"), csv).context("cannot write dataset.csv")?;
    let stats = dataset::stats(&samples)?;

    // fit + evaluate
    let f = fit_split(samples, &split, args.mode, bits, args.seed, args.precision)?;
    save_model(&f.model, &dir.join("model.json"))?;
    let test_violations = count_violations(&f.model, f.test.iter().map(|s| (&s.n, &s.epsilon)));
    write_json(
        &dir.join("metrics.json"),
        &json!({
            "split": "test",
            "train_count": f.train.len(),
            "test_count": f.test.len(),
            "train_violations": f.train_violations,
            "test_violations": test_violations,
            "metrics": f.model.metrics.as_ref().map(MetricsReport::to_json),
            "dataset": {
                "mean_n": render_decimal(&stats.mean_n(), 17),
                "mean_prime_sum": render_decimal(&stats.mean_prime_sum(), 17),
                "mean_epsilon": render_decimal(&stats.mean_epsilon(), 17),
            },
        }),
    )?;

    let eval_set: &[RsaSample] = if f.test.is_empty() { &f.train } else { &f.test };
    let learned = learned_model(Some(f.model.clone()));

    // bounds
    write_text(
        &dir.join("bounds.csv"),
        &bounds_csv(eval_set, learned.as_ref(), args.bound_precision)?,
    )?;

    // windows
    if let Some(model) = &learned {
        let report = window_report(model, eval_set)?;
        write_text(&dir.join("window.csv"), &report.csv())?;
        let budget = Natural::from(args.budget);
        let within = report.rows.iter().filter(|r| r.search_cost <= budget).count();
        let mut summary = report.summary_json();
        summary["budget"] = json!(args.budget);
        summary["within_budget"] = json!(within);
        write_json(&dir.join("window_summary.json"), &summary)?;
    } else {
        eprintln!("window report skipped: {} model has slope {}", args.mode, f.model.slope);
    }

    // plots
    write_plots(&f.model, eval_set, HistogramSpec::default().bin_count, dir)?;

    if let Some(n) = &target {
        let mut value = json!({
            "modulus": n.to_string(),
            "bits": bits,
        });
        if let Some(model) = &learned {
            let start = predicted_sum(model, n)?;
            let bound = model.phi_lower_bound(n)?;
            let outcome = fermat_search(n, &start, args.budget);
            value["phi_lower_bound"] = json!(totient_core::plot::exact_text(&bound));
            value["attack"] = outcome.to_json();
            value["budget"] = json!(args.budget);
        }
        write_json(&dir.join("target.json"), &value)?;
    }

    println!("{} fit on {} training rows, {} test rows", args.mode, f.train.len(), f.test.len());
    if let Some(m) = &f.model.metrics {
        println!("test: {}", metrics_line(m));
    }
    println!("artifacts in {}", dir.display());
    Ok(Status::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("4/5").unwrap(), Rational::new(4.into(), 5.into()));
        assert_eq!(parse_fraction("0.8").unwrap(), Rational::new(4.into(), 5.into()));
        assert_eq!(parse_fraction("1").unwrap(), Rational::from_integer(1.into()));
        assert_eq!(parse_fraction(".25").unwrap(), Rational::new(1.into(), 4.into()));
        for bad in ["", ".", "1/0", "a/b", "0.x"] {
            assert!(parse_fraction(bad).is_err(), "{bad}");
        }
    }
}
