//! Argument definitions and config-file merging.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};
use totient_core::FitMode;

pub const DEFAULT_COUNT: u64 = 10_000;
pub const PAPER_SCALE_COUNT: u64 = 1_000_000;
pub const DEFAULT_BUDGET: u64 = 100_000;
pub const DEFAULT_BOUND_PRECISION: u32 = 128;

#[derive(Debug, Parser)]
#[command(name = "totient", version, about = "Learned totient approximation for RSA moduli")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded dataset of balanced RSA moduli.
    Generate(GenerateArgs),
    /// Fit a model on a dataset's training split.
    Fit(FitArgs),
    /// Generate, fit, evaluate, compare bounds and report windows in one go.
    Pipeline(PipelineArgs),
    /// Evaluate a model on a dataset's test split.
    Eval(EvalArgs),
    /// Compare classical totient bounds (and a learned one) per modulus.
    Bounds(BoundsArgs),
    /// Fermat search seeded by a model's predicted prime sum.
    Attack(AttackArgs),
    /// Scatter and residual histogram figures.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct Runtime {
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Flat key=value file with defaults for the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Scale {
    /// Number of samples.
    #[arg(long, conflicts_with = "paper_scale")]
    pub count: Option<u64>,
    /// One million samples.
    #[arg(long)]
    pub paper_scale: bool,
}

impl Scale {
    pub fn count(&self) -> u64 {
        match (self.count, self.paper_scale) {
            (Some(c), _) => c,
            (None, true) => PAPER_SCALE_COUNT,
            (None, false) => DEFAULT_COUNT,
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Training share as a fraction, e.g. 4/5 or 0.8.
    #[arg(long, default_value = "4/5")]
    pub train_fraction: String,
}

#[derive(Debug, Args)]
pub struct DataIn {
    /// Dataset CSV.
    #[arg(long, visible_alias = "input")]
    pub data: PathBuf,
    /// Skip primality checks when reading.
    #[arg(long)]
    pub no_strict: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub bits: u64,
    #[command(flatten)]
    pub scale: Scale,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataIn,
    #[arg(long, default_value = "half_slope")]
    pub mode: FitMode,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Split seed; defaults to the dataset's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Significant digits for rendered metrics.
    #[arg(long, default_value_t = totient_core::metrics::DEFAULT_DIGITS)]
    pub precision: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, required_unless_present = "modulus")]
    pub bits: Option<u64>,
    /// Target modulus; its bit length sets --bits.
    #[arg(long)]
    pub modulus: Option<String>,
    #[command(flatten)]
    pub scale: Scale,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value = "half_slope")]
    pub mode: FitMode,
    #[arg(long, default_value_t = totient_core::metrics::DEFAULT_DIGITS)]
    pub precision: usize,
    /// Binary precision for transcendental bounds.
    #[arg(long, default_value_t = DEFAULT_BOUND_PRECISION)]
    pub bound_precision: u32,
    /// Discriminant tests per searched modulus.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataIn,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = totient_core::metrics::DEFAULT_DIGITS)]
    pub precision: usize,
    /// Write the metrics JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, visible_alias = "input", required_unless_present = "modulus")]
    pub data: Option<PathBuf>,
    /// Single modulus instead of a dataset.
    #[arg(long, conflicts_with = "data")]
    pub modulus: Option<String>,
    #[arg(long)]
    pub no_strict: bool,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BOUND_PRECISION)]
    pub bound_precision: u32,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long, required_unless_present = "modulus")]
    pub data: Option<PathBuf>,
    /// Row of --data to attack.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    #[arg(long, conflicts_with = "data")]
    pub modulus: Option<String>,
    #[arg(long)]
    pub no_strict: bool,
    #[arg(long, required_unless_present = "baseline")]
    pub model: Option<PathBuf>,
    /// Plain Fermat from ⌈2√n⌉ instead of the model's seed.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub data: DataIn,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Histogram bins.
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: Runtime,
}

impl Command {
    pub fn runtime(&self) -> &Runtime {
        match self {
            Command::Generate(a) => &a.runtime,
            Command::Fit(a) => &a.runtime,
            Command::Pipeline(a) => &a.runtime,
            Command::Eval(a) => &a.runtime,
            Command::Bounds(a) => &a.runtime,
            Command::Attack(a) => &a.runtime,
            Command::Plot(a) => &a.runtime,
        }
    }
}

/// Location of `--config` in raw arguments.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Inserts config entries right after the subcommand so that flags given
/// on the command line win. Keys unknown to every subcommand are errors;
/// keys that only other subcommands take are ignored.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let entries = parse_config(&text)?;

    let mut command = Cli::command();
    command.build();
    let sub_pos = args
        .iter()
        .position(|a| command.find_subcommand(a.to_string_lossy().as_ref()).is_some());
    let Some(sub_pos) = sub_pos else {
        return Ok(args);
    };
    let sub_name = args[sub_pos].to_string_lossy().into_owned();
    let sub = command.find_subcommand(&sub_name).expect("found above");

    let known_anywhere = |key: &str| {
        command
            .get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key)))
    };
    let given: Vec<String> = args[sub_pos + 1..]
        .iter()
        .filter_map(|a| {
            let s = a.to_string_lossy();
            let flag = s.strip_prefix("--")?;
            Some(flag.split('=').next().unwrap_or(flag).to_string())
        })
        .collect();
    let on_command_line = |a: &clap::Arg| {
        a.get_long()
            .into_iter()
            .chain(a.get_all_aliases().unwrap_or_default())
            .any(|name| given.iter().any(|g| g == name))
    };
    let mut inserted = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            continue;
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            if known_anywhere(&key) {
                continue;
            }
            return Err(format!("unknown config key {key:?}"));
        };
        if on_command_line(arg) || sub.get_arg_conflicts_with(arg).into_iter().any(on_command_line) {
            continue;
        }
        let takes_value = arg.get_action().takes_values();
        if takes_value {
            inserted.push(OsString::from(format!("--{key}")));
            inserted.push(OsString::from(value));
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => inserted.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                _ => return Err(format!("config key {key:?} expects true or false")),
            }
        }
    }
    let mut merged = args[..=sub_pos].to_vec();
    merged.extend(inserted);
    merged.extend_from_slice(&args[sub_pos + 1..]);
    Ok(merged)
}
