//! Flags, the optional JSON config file, and the merged run configuration.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use macroent::correlation::ChshChoice;
use macroent::optimizer::OptimizerConfig;
use macroent::scaling::SweepMode;
use macroent::states::StateSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Each one may also come from the
/// `--config` file under the same name (dashes become underscores); flags win.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// State family, e.g. `cat`, `ex2`, `ex3random(4)`, `ex2prime(0.5)`.
    #[arg(long)]
    pub state: Option<String>,
    /// Pure state from a text file, one `re im` amplitude per line.
    #[arg(long, conflicts_with = "state")]
    pub state_file: Option<PathBuf>,
    /// Site count: `8`, a list `4,6,8`, or a range `start:end:step` (inclusive).
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub step_init: Option<f64>,
    #[arg(long)]
    pub step_shrink: Option<f64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON document with any of these flags as keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file (stdout if absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Sweep mode: optimized, canonical, mz or variance.
    #[arg(long)]
    pub mode: Option<String>,
    /// Worker threads for sweep points and restarts.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Measured site for `convert` (1-based).
    #[arg(long)]
    pub site: Option<usize>,
    /// Exponent `e` of the large-variance threshold `N^e` for `conditions`.
    #[arg(long)]
    pub threshold_exponent: Option<f64>,
    /// Observable choice for `chsh`: canonical or commuting.
    #[arg(long)]
    pub choice: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    state: Option<String>,
    state_file: Option<PathBuf>,
    n: Option<NValue>,
    restarts: Option<usize>,
    max_iters: Option<usize>,
    step_init: Option<f64>,
    step_shrink: Option<f64>,
    grad_tol: Option<f64>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    format: Option<Format>,
    mode: Option<String>,
    jobs: Option<usize>,
    site: Option<usize>,
    threshold_exponent: Option<f64>,
    choice: Option<String>,
}

/// `n` in a config file may be a number or the same text the flag takes.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NValue {
    Single(usize),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    Family(String),
    File(PathBuf),
}

/// Everything a run depends on, after merging file and flags. Embedded
/// verbatim in every output.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSource>,
    pub n: Vec<usize>,
    pub optimizer: OptimizerConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SweepMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    pub site: usize,
    pub threshold_exponent: f64,
    pub choice: ChshChoice,
}

impl RunConfig {
    pub fn family(&self) -> Result<Option<StateSpec>, CliError> {
        match &self.state {
            Some(StateSource::Family(s)) => Ok(Some(s.parse()?)),
            _ => Ok(None),
        }
    }
}

pub fn parse_n(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = |why: &str| CliError::Usage(format!("bad --n `{text}`: {why}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| bad(&e.to_string()));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => return Err(bad("expected start:end or start:end:step")),
        };
        if step == 0 || end < start {
            return Err(bad("need step > 0 and end >= start"));
        }
        (start..=end).step_by(step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad("no sizes"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("sizes must be strictly ascending"));
    }
    Ok(values)
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config file `{}`: {e}", path.display())))
}

fn parse_choice(s: &str) -> Result<ChshChoice, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "canonical" => Ok(ChshChoice::Canonical),
        "commuting" => Ok(ChshChoice::Commuting),
        other => Err(CliError::Usage(format!(
            "unknown CHSH choice `{other}` (canonical or commuting)"
        ))),
    }
}

pub fn resolve(command: &str, flags: Flags) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    // a state on the command line replaces any state source from the file
    let (state, state_file) = if flags.state.is_some() || flags.state_file.is_some() {
        (flags.state, flags.state_file)
    } else {
        (file.state, file.state_file)
    };
    let state = match (state, state_file) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either a state or a state file, not both".into(),
            ))
        }
        (Some(s), None) => Some(StateSource::Family(s)),
        (None, Some(p)) => Some(StateSource::File(p)),
        (None, None) => None,
    };
    let n = match (flags.n, file.n) {
        (Some(t), _) => parse_n(&t)?,
        (None, Some(NValue::Single(k))) => vec![k],
        (None, Some(NValue::Text(t))) => parse_n(&t)?,
        (None, None) => Vec::new(),
    };
    let defaults = OptimizerConfig::default();
    let optimizer = OptimizerConfig {
        restarts: flags
            .restarts
            .or(file.restarts)
            .unwrap_or(defaults.restarts),
        max_iters: flags
            .max_iters
            .or(file.max_iters)
            .unwrap_or(defaults.max_iters),
        step_init: flags
            .step_init
            .or(file.step_init)
            .unwrap_or(defaults.step_init),
        step_shrink: flags
            .step_shrink
            .or(file.step_shrink)
            .unwrap_or(defaults.step_shrink),
        grad_tol: flags
            .grad_tol
            .or(file.grad_tol)
            .unwrap_or(defaults.grad_tol),
        seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    optimizer.validate()?;
    let mode = flags
        .mode
        .or(file.mode)
        .map(|m| m.parse::<SweepMode>())
        .transpose()?;
    let default_format = if command == "sweep" {
        Format::Csv
    } else {
        Format::Json
    };
    let format = flags.format.or(file.format).unwrap_or(default_format);
    if format == Format::Csv && command != "sweep" {
        return Err(CliError::Usage(format!(
            "`{command}` writes JSON only; csv is available for `sweep`"
        )));
    }
    let jobs = flags.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    Ok(RunConfig {
        command: command.to_string(),
        state,
        n,
        optimizer,
        output: flags.output.or(file.output),
        format,
        mode,
        jobs,
        site: flags.site.or(file.site).unwrap_or(1),
        threshold_exponent: flags
            .threshold_exponent
            .or(file.threshold_exponent)
            .unwrap_or(1.5),
        choice: parse_choice(
            flags
                .choice
                .or(file.choice)
                .as_deref()
                .unwrap_or("canonical"),
        )?,
    })
}
