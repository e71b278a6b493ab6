use std::io::Write;

use macroent::correlation::{
    check_sufficient_condition, eta_optimal, macro_chsh_lambda_max, mermin_score,
    mermin_two_branch, single_site_conversion, ConditionReport, ConversionOutcome, MerminReport,
    TwoBranchState,
};
use macroent::observables::{AdditiveObservable, Coeffs};
use macroent::optimizer::{maximize_c, StartKind};
use macroent::oracle::{run_suite, OracleReport};
use macroent::scaling::{
    canonical_value, summarize, sweep, write_csv, SweepMode, SweepPoint, SweepSummary,
    SCHEMA_VERSION,
};
use macroent::states::{DensityOperator, PureState, State, StateSpec};
use serde::Serialize;

use crate::config::{Format, RunConfig, StateSource};
use crate::error::CliError;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

fn json<T: Serialize>(cfg: &RunConfig, body: T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        body,
    })
    .map_err(|e| CliError::Usage(format!("cannot serialize report: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

fn read_state_file(cfg: &RunConfig, path: &std::path::Path) -> Result<PureState, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let s = PureState::parse_amplitudes(&text)?;
    if !cfg.n.is_empty() && cfg.n != [s.n_sites()] {
        return Err(CliError::Usage(format!(
            "state file holds {} sites but --n asks for {:?}",
            s.n_sites(),
            cfg.n
        )));
    }
    Ok(s)
}

fn single_n(cfg: &RunConfig) -> Result<usize, CliError> {
    match cfg.n.as_slice() {
        [n] => Ok(*n),
        [] => Err(CliError::Usage(format!("`{}` needs --n", cfg.command))),
        _ => Err(CliError::Usage(format!(
            "`{}` takes a single size, got {:?}",
            cfg.command, cfg.n
        ))),
    }
}

fn sizes(cfg: &RunConfig) -> Result<&[usize], CliError> {
    if cfg.n.is_empty() {
        return Err(CliError::Usage(format!("`{}` needs --n", cfg.command)));
    }
    Ok(&cfg.n)
}

fn load_state(cfg: &RunConfig) -> Result<State, CliError> {
    match &cfg.state {
        Some(StateSource::File(p)) => Ok(read_state_file(cfg, p)?.into()),
        Some(StateSource::Family(_)) => {
            let family = cfg.family()?.expect("family source");
            Ok(family.build(single_n(cfg)?)?)
        }
        None => Err(CliError::Usage(format!(
            "`{}` needs --state or --state-file",
            cfg.command
        ))),
    }
}

#[derive(Serialize)]
struct OptimizerSummary {
    iterations: usize,
    restart_index: usize,
    start: StartKind,
    converged: bool,
}

#[derive(Serialize)]
struct IndexBody {
    n_sites: usize,
    /// `A = M_z`, `η` onto the ensemble components (the state itself when pure).
    value_canonical: Option<f64>,
    /// `A = M_z`, best `η`.
    value_mz: f64,
    value_optimized: f64,
    value_effective: f64,
    k_spectrum: Vec<f64>,
    eta_rank: usize,
    observable_coefficients: Vec<Coeffs>,
    optimizer: OptimizerSummary,
}

fn index(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let state = load_state(cfg)?;
    let n = state.n_sites();
    let value_canonical = canonical_value(&state).ok();
    let value_mz = eta_optimal(&AdditiveObservable::m_z(n), &state)?.value;
    let opt = maximize_c(&state, &cfg.optimizer)?;
    let at_opt = eta_optimal(&opt.observable, &state)?;
    json(
        cfg,
        IndexBody {
            n_sites: n,
            value_canonical,
            value_mz,
            value_optimized: opt.value,
            value_effective: opt.value.max(n as f64),
            k_spectrum: at_opt.k_spectrum.clone(),
            eta_rank: at_opt.optimal_eta.rank(),
            observable_coefficients: opt.observable.coeffs().to_vec(),
            optimizer: OptimizerSummary {
                iterations: opt.iterations,
                restart_index: opt.restart_index,
                start: opt.start,
                converged: opt.converged,
            },
        },
    )
}

#[derive(Serialize)]
struct SweepBody {
    points: Vec<SweepPoint>,
    summary: SweepSummary,
}

fn sweep_cmd(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let family = cfg
        .family()?
        .ok_or_else(|| CliError::Usage("`sweep` needs --state with a family name".into()))?;
    let mode = cfg.mode.unwrap_or(SweepMode::Optimized);
    let points = sweep(&family, sizes(cfg)?, mode, &cfg.optimizer)?;
    let summary = summarize(&family, mode, &cfg.optimizer, &points);
    match cfg.format {
        Format::Csv => {
            let mut out = Vec::new();
            write_csv(&mut out, &family, mode, &cfg.optimizer, &points)
                .map_err(|e| CliError::Usage(format!("cannot format csv: {e}")))?;
            let mut err = std::io::stderr().lock();
            if let Some(f) = &summary.fit {
                let _ = writeln!(
                    err,
                    "fit: slope {:.6}, terminal secant {:.6}, r^2 {:.6}",
                    f.slope, f.terminal_secant, f.r_squared
                );
            }
            for note in &summary.notes {
                let _ = writeln!(err, "note: {note}");
            }
            for p in &summary.failed_points {
                let _ = writeln!(
                    err,
                    "failed: n = {}: {}",
                    p.n,
                    p.error.as_deref().unwrap_or("unknown error")
                );
            }
            Ok(out)
        }
        Format::Json => json(cfg, SweepBody { points, summary }),
    }
}

#[derive(Serialize)]
struct MerminBody {
    reports: Vec<MerminReport>,
}

fn two_branch_family(family: &StateSpec, n: usize) -> Result<Option<TwoBranchState>, CliError> {
    Ok(match family {
        StateSpec::Cat => Some(TwoBranchState::cat(n)?),
        StateSpec::Psi1 => Some(TwoBranchState::psi1(n)?),
        _ => None,
    })
}

fn mermin(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let reports = match &cfg.state {
        Some(StateSource::File(p)) => vec![mermin_score(&read_state_file(cfg, p)?)],
        Some(StateSource::Family(_)) => {
            let family = cfg.family()?.expect("family source");
            let mut out = Vec::new();
            for &n in sizes(cfg)? {
                // two-branch families are exact at any size without state vectors
                out.push(match two_branch_family(&family, n)? {
                    Some(tb) => mermin_two_branch(&tb),
                    None => mermin_score(&family.build(n)?),
                });
            }
            out
        }
        None => {
            return Err(CliError::Usage(
                "`mermin` needs --state or --state-file".into(),
            ))
        }
    };
    json(cfg, MerminBody { reports })
}

#[derive(Serialize)]
struct ChshRow {
    n: usize,
    lambda_max: f64,
}

#[derive(Serialize)]
struct ChshBody {
    results: Vec<ChshRow>,
}

fn chsh(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let results = sizes(cfg)?
        .iter()
        .map(|&n| {
            Ok(ChshRow {
                n,
                lambda_max: macro_chsh_lambda_max(n, &cfg.choice)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    json(cfg, ChshBody { results })
}

#[derive(Serialize)]
struct ConditionsBody {
    report: ConditionReport,
    passes: bool,
}

fn conditions(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let state = load_state(cfg)?;
    let report = check_sufficient_condition(
        &state,
        &AdditiveObservable::m_z(state.n_sites()),
        cfg.threshold_exponent,
    )?;
    let passes = report.passes();
    json(cfg, ConditionsBody { report, passes })
}

#[derive(Serialize)]
struct ConvertRow {
    n: usize,
    outcome: ConversionOutcome,
}

#[derive(Serialize)]
struct ConvertBody {
    outcomes: Vec<ConvertRow>,
}

fn convert(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let states: Vec<TwoBranchState> = match &cfg.state {
        Some(StateSource::File(p)) => vec![TwoBranchState::from_pure(&read_state_file(cfg, p)?)?],
        Some(StateSource::Family(_)) => {
            let family = cfg.family()?.expect("family source");
            let mut out = Vec::new();
            for &n in sizes(cfg)? {
                out.push(match two_branch_family(&family, n)? {
                    Some(tb) => tb,
                    None => {
                        let s = family.build(n)?;
                        let pure = s.as_pure().ok_or_else(|| {
                            CliError::Usage(format!(
                                "`{family}` is mixed; conversion needs a two-branch pure state"
                            ))
                        })?;
                        TwoBranchState::from_pure(pure)?
                    }
                });
            }
            out
        }
        None => {
            return Err(CliError::Usage(
                "`convert` needs --state or --state-file".into(),
            ))
        }
    };
    let outcomes = states
        .iter()
        .map(|tb| {
            Ok(ConvertRow {
                n: tb.n_sites(),
                outcome: single_site_conversion(tb, cfg.site)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    json(cfg, ConvertBody { outcomes })
}

#[derive(Serialize)]
struct VerifyBody {
    reports: Vec<OracleReport>,
    passed: bool,
}

/// Runs the oracle suite. The report is written even when checks fail.
fn verify(cfg: &RunConfig) -> Result<(Vec<u8>, Option<CliError>), CliError> {
    let reports = run_suite();
    let failed = reports.iter().filter(|r| !r.passed).count();
    let total = reports.len();
    let out = json(
        cfg,
        VerifyBody {
            reports,
            passed: failed == 0,
        },
    )?;
    Ok((
        out,
        (failed > 0).then_some(CliError::Verify { failed, total }),
    ))
}

/// Executes one command and writes its output. Any error after the output is
/// produced (only `verify` has one) is returned after writing.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let (out, late_error) = match cfg.command.as_str() {
        "index" => (index(cfg)?, None),
        "sweep" => (sweep_cmd(cfg)?, None),
        "mermin" => (mermin(cfg)?, None),
        "chsh" => (chsh(cfg)?, None),
        "conditions" => (conditions(cfg)?, None),
        "convert" => (convert(cfg)?, None),
        "verify" => verify(cfg)?,
        other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
    };
    match &cfg.output {
        Some(path) => std::fs::write(path, &out).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&out)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Output {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    match late_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
