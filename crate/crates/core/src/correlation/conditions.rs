//! Sufficient condition for an ensemble to keep the `N²` correlation.
//!
//! The components must be orthonormal, `A` must not connect different
//! components, and the components whose variance grows like `N²` must keep a
//! non-vanishing total weight. At finite `N` "grows like `N²`" is replaced by
//! `Var ≥ N^exponent` for a caller-chosen exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, ORTHONORMAL_CHECK_TOL};
use crate::observables::{expectation, variance, AdditiveObservable};
use crate::states::{Density, DensityOperator};

/// Relative tolerance on `|⟨ψ_λ|A|ψ_λ'⟩|`, in units of `‖A‖`.
const OFFDIAG_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentCheck {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
    /// `variance ≥ N^exponent`
    pub large: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n_sites: usize,
    pub threshold_exponent: f64,
    pub threshold: f64,
    pub orthonormal: bool,
    pub max_overlap_deviation: f64,
    /// Component pairs `(λ, λ')` (0-based) whose overlap deviates from `δ`.
    pub overlap_violations: Vec<(usize, usize)>,
    pub no_cross_terms: bool,
    pub max_cross_term: f64,
    pub cross_term_violations: Vec<(usize, usize)>,
    pub components: Vec<ComponentCheck>,
    /// Total weight of the components classified as large.
    pub large_weight: f64,
    /// `2 Σ ρ_λ Var_λ(A)`, the correlation reached by `η = Σ|ψ_λ⟩⟨ψ_λ|`
    /// when the first two conditions hold.
    pub projected_correlation: f64,
}

impl ConditionReport {
    pub fn passes(&self) -> bool {
        self.orthonormal && self.no_cross_terms && self.large_weight > 0.0
    }
}

pub fn check_sufficient_condition(
    s: &(impl DensityOperator + ?Sized),
    a: &AdditiveObservable,
    threshold_exponent: f64,
) -> Result<ConditionReport> {
    let (weights, states) = match s.density() {
        Density::Ensemble { weights, states } => (weights, states),
        _ => {
            return Err(Error::InvalidArgument(
                "the sufficient condition needs an ensemble; dense and uniform states have no preferred decomposition"
                    .into(),
            ))
        }
    };
    if a.n_sites() != s.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: a.n_sites(),
            found: s.n_sites(),
        });
    }
    if !threshold_exponent.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "threshold exponent {threshold_exponent}"
        )));
    }
    let n = s.n_sites();
    let threshold = (n as f64).powf(threshold_exponent);
    let cross_tol = OFFDIAG_REL_TOL * (1.0 + a.norm_bound());

    let images: Vec<Vec<_>> = states
        .iter()
        .map(|p| a.apply_slice(p.amplitudes()))
        .collect();
    let mut max_overlap_deviation = 0.0_f64;
    let mut overlap_violations = Vec::new();
    let mut max_cross_term = 0.0_f64;
    let mut cross_term_violations = Vec::new();
    for (i, pi) in states.iter().enumerate() {
        for (j, pj) in states.iter().enumerate().skip(i) {
            let overlap = inner(pi.amplitudes(), pj.amplitudes());
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (overlap - target).norm();
            max_overlap_deviation = max_overlap_deviation.max(dev);
            if dev > ORTHONORMAL_CHECK_TOL {
                overlap_violations.push((i, j));
            }
            if i != j {
                let cross = inner(pi.amplitudes(), &images[j]).norm();
                max_cross_term = max_cross_term.max(cross);
                if cross > cross_tol {
                    cross_term_violations.push((i, j));
                }
            }
        }
    }

    let mut components = Vec::with_capacity(states.len());
    let mut large_weight = 0.0;
    let mut projected_correlation = 0.0;
    for (w, p) in weights.iter().zip(states) {
        let mean = expectation(a, p)?;
        let var = variance(a, p)?;
        let large = var >= threshold;
        if large {
            large_weight += w;
        }
        projected_correlation += 2.0 * w * var;
        components.push(ComponentCheck {
            weight: *w,
            mean,
            variance: var,
            large,
        });
    }

    Ok(ConditionReport {
        n_sites: n,
        threshold_exponent,
        threshold,
        orthonormal: overlap_violations.is_empty(),
        max_overlap_deviation,
        overlap_violations,
        no_cross_terms: cross_term_violations.is_empty(),
        max_cross_term,
        cross_term_violations,
        components,
        large_weight,
        projected_correlation,
    })
}
