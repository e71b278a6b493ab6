//! Sweeps over system size and power-law fits.
//!
//! The index of a family is the exponent `q` in `max(⟨C⟩, N) = O(N^q)`. At
//! finite `N` it is estimated by a least-squares fit of `log max(value, N)`
//! against `log N`, reported together with the secant through the last two
//! points, which shows how far the fit still drifts.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{c_expectation, eta_optimal, ProjectorSpec};
use crate::error::{Error, Result};
use crate::observables::AdditiveObservable;
use crate::optimizer::{maximize_c, maximize_variance, OptimizerConfig, Optimum};
use crate::states::{Density, DensityOperator, State, StateSpec};

pub const SCHEMA_VERSION: &str = "1";

/// A stated index is called into question when the measured slope is further
/// away than this.
pub const DISCREPANCY_BAND: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Full search over `A`, exact `η`.
    Optimized,
    /// `A = M_z` and `η` the projector onto the ensemble components.
    Canonical,
    /// `A = M_z`, exact `η`.
    Mz,
    /// `max_A Var(A)` for pure states.
    Variance,
}

impl FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimized" => Ok(SweepMode::Optimized),
            "canonical" => Ok(SweepMode::Canonical),
            "mz" => Ok(SweepMode::Mz),
            "variance" => Ok(SweepMode::Variance),
            _ => Err(Error::InvalidArgument(format!(
                "unknown mode `{s}` (expected optimized, canonical, mz or variance)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepMode::Optimized => "optimized",
            SweepMode::Canonical => "canonical",
            SweepMode::Mz => "mz",
            SweepMode::Variance => "variance",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub raw_value: f64,
    /// `max(raw_value, n)`
    pub effective_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum: Option<Optimum>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepPoint {
    fn from_value(n: usize, raw: f64, optimum: Option<Optimum>, wall: f64) -> Self {
        Self {
            n,
            raw_value: raw,
            effective_value: raw.max(n as f64),
            optimum,
            wall_time_s: wall,
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Slope of the line through the last two points.
    pub terminal_secant: f64,
    pub points: Vec<SweepPoint>,
}

/// Least-squares fit of `log y = slope·log n + intercept`.
///
/// Returns `(slope, intercept, r²)`.
pub fn fit_power_law(n: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if n.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n.len(),
            found: y.len(),
        });
    }
    if n.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a fit needs at least 3 points, got {}",
            n.len()
        )));
    }
    if n.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(
            "fit values must be positive and finite".into(),
        ));
    }
    let xs: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "a fit needs at least two distinct sizes".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r_squared))
}

fn secant(n0: f64, y0: f64, n1: f64, y1: f64) -> f64 {
    (y1.ln() - y0.ln()) / (n1.ln() - n0.ln())
}

/// Fits the successful points of a sweep.
pub fn fit_index(points: &[SweepPoint]) -> Result<IndexFit> {
    let ok: Vec<&SweepPoint> = points.iter().filter(|p| p.is_ok()).collect();
    let n: Vec<f64> = ok.iter().map(|p| p.n as f64).collect();
    let y: Vec<f64> = ok.iter().map(|p| p.effective_value).collect();
    let (slope, intercept, r_squared) = fit_power_law(&n, &y)?;
    let k = n.len();
    Ok(IndexFit {
        slope,
        intercept,
        r_squared,
        terminal_secant: secant(n[k - 2], y[k - 2], n[k - 1], y[k - 1]),
        points: ok.into_iter().cloned().collect(),
    })
}

/// `⟨C⟩` at `A = M_z` with `η = Σ_λ |ψ_λ⟩⟨ψ_λ|` over the ensemble components.
pub fn canonical_value(s: &(impl DensityOperator + ?Sized)) -> Result<f64> {
    let mz = AdditiveObservable::m_z(s.n_sites());
    match s.density() {
        Density::Uniform => Ok(0.0),
        Density::Dense(_) => Err(Error::InvalidArgument(
            "the canonical projector needs an ensemble; dense states have no preferred components"
                .into(),
        )),
        Density::Ensemble { states, .. } => {
            let eta = ProjectorSpec::onto_states(states)?;
            c_expectation(&mz, &eta, s)
        }
    }
}

fn evaluate(
    state: &State,
    mode: SweepMode,
    cfg: &OptimizerConfig,
) -> Result<(f64, Option<Optimum>)> {
    match mode {
        SweepMode::Optimized => {
            let o = maximize_c(state, cfg)?;
            Ok((o.value, Some(o)))
        }
        SweepMode::Canonical => Ok((canonical_value(state)?, None)),
        SweepMode::Mz => Ok((
            eta_optimal(&AdditiveObservable::m_z(state.n_sites()), state)?.value,
            None,
        )),
        SweepMode::Variance => {
            let pure = state
                .as_pure()
                .ok_or_else(|| Error::InvalidArgument("variance mode needs a pure state".into()))?;
            let o = maximize_variance(pure, cfg)?;
            Ok((o.value, Some(o)))
        }
    }
}

/// One point per size. Failures are recorded on the point and the sweep
/// carries on.
pub fn sweep(
    family: &StateSpec,
    n_values: &[usize],
    mode: SweepMode,
    cfg: &OptimizerConfig,
) -> Result<Vec<SweepPoint>> {
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sizes must be strictly ascending".into(),
        ));
    }
    cfg.validate()?;
    Ok(n_values
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let result = family.build(n).and_then(|s| evaluate(&s, mode, cfg));
            let wall = start.elapsed().as_secs_f64();
            match result {
                Ok((raw, optimum)) => SweepPoint::from_value(n, raw, optimum, wall),
                Err(e) => SweepPoint {
                    n,
                    raw_value: f64::NAN,
                    effective_value: f64::NAN,
                    optimum: None,
                    wall_time_s: wall,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// The index the family is claimed to have, if any: `q` for correlation
/// modes, `p` for the variance mode.
pub fn stated_index(family: &StateSpec, mode: SweepMode) -> Option<f64> {
    let q = match family {
        StateSpec::Cat
        | StateSpec::Psi2
        | StateSpec::Ex2
        | StateSpec::Ex3
        | StateSpec::Ex3Random(_) => 2.0,
        StateSpec::Ex2Prime(w) | StateSpec::Ex3Prime(w) if *w > 0.0 => 2.0,
        StateSpec::Ex2Prime(_) | StateSpec::Ex3Prime(_) => 1.0,
        StateSpec::Psi1 | StateSpec::Ex1 | StateSpec::Product(_) | StateSpec::Random => 1.0,
        StateSpec::Haar(_) => return None,
    };
    match mode {
        // the stated p agrees with q for pure states
        SweepMode::Variance if family.is_pure() => Some(q),
        SweepMode::Variance => None,
        _ => Some(q),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: String,
    pub family: String,
    pub mode: SweepMode,
    pub config: OptimizerConfig,
    pub fit: Option<IndexFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    pub stated_index: Option<f64>,
    /// The measured slope lies outside the band around the stated index.
    pub discrepancy: bool,
    pub notes: Vec<String>,
    pub failed_points: Vec<SweepPoint>,
}

pub fn summarize(
    family: &StateSpec,
    mode: SweepMode,
    cfg: &OptimizerConfig,
    points: &[SweepPoint],
) -> SweepSummary {
    let (fit, fit_error) = match fit_index(points) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let stated = stated_index(family, mode);
    let mut notes = Vec::new();
    let discrepancy = match (&fit, stated) {
        (Some(f), Some(q)) if (f.slope - q).abs() > DISCREPANCY_BAND => {
            notes.push(format!(
                "measured slope {:.4} (terminal secant {:.4}) differs from the stated index {q} for `{family}`",
                f.slope, f.terminal_secant
            ));
            true
        }
        _ => false,
    };
    if *family == StateSpec::Psi1 && mode != SweepMode::Variance {
        notes.push(
            "psi1: with unrestricted projectors the exact optimum at A = M_z is 4N*sqrt(N-1), \
             which grows like N^1.5; the stated index is 1"
                .into(),
        );
    }
    if let Some(f) = &fit {
        if (f.slope - f.terminal_secant).abs() > 0.05 {
            notes.push(format!(
                "finite-size drift: global slope {:.4} vs terminal secant {:.4}",
                f.slope, f.terminal_secant
            ));
        }
    }
    SweepSummary {
        schema_version: SCHEMA_VERSION.into(),
        family: family.to_string(),
        mode,
        config: cfg.clone(),
        fit,
        fit_error,
        stated_index: stated,
        discrepancy,
        notes,
        failed_points: points.iter().filter(|p| !p.is_ok()).cloned().collect(),
    }
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        // shortest representation that parses back to the same f64
        format!("{v:?}")
    } else {
        String::new()
    }
}

/// Writes `n,raw_value,effective_value,slope_running,seed,restarts,wall_time_s`
/// preceded by `#` lines carrying the schema and configuration.
///
/// `slope_running` is the least-squares slope over the successful points up
/// to and including the row, empty until three points are available.
pub fn write_csv(
    out: &mut impl Write,
    family: &StateSpec,
    mode: SweepMode,
    cfg: &OptimizerConfig,
    points: &[SweepPoint],
) -> std::io::Result<()> {
    writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(out, "# family={family} mode={mode}")?;
    writeln!(
        out,
        "# config={}",
        serde_json::to_string(cfg).map_err(std::io::Error::other)?
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "raw_value",
        "effective_value",
        "slope_running",
        "seed",
        "restarts",
        "wall_time_s",
    ])?;
    let mut seen_n = Vec::new();
    let mut seen_y = Vec::new();
    for p in points {
        if p.is_ok() {
            seen_n.push(p.n as f64);
            seen_y.push(p.effective_value);
        }
        let running = if p.is_ok() {
            fit_power_law(&seen_n, &seen_y)
                .map(|f| f.0)
                .unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        w.write_record([
            p.n.to_string(),
            cell(p.raw_value),
            cell(p.effective_value),
            cell(running),
            cfg.seed.to_string(),
            cfg.restarts.to_string(),
            cell(p.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}
