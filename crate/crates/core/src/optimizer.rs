//! Maximization over additive observables.
//!
//! Two objectives share one projected-ascent routine:
//!
//! * the correlation objective `f(c) = Σλ₊(K(A_c))`, i.e. `⟨C⟩` already
//!   maximized over `η`;
//! * the variance objective `cᵀVc` with `V` the covariance matrix of a pure
//!   state.
//!
//! The feasible set is the product of unit balls `|c_l| ≤ 1`. Steps follow the
//! normalized (tangential) gradient, grow after an accepted step and shrink
//! after a rejected one, so the accepted values never decrease.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{apply_density, eta_optimal, FACTORED_SUPPORT_CAP, MAX_ENSEMBLE_SITES};
use crate::error::{Error, Result};
use crate::linalg::{inner, DENSE_DIM_CAP};
use crate::observables::{
    covariance_matrix, random_unit_coeffs, site_pauli_inner, AdditiveObservable, Coeffs,
    CovarianceMatrix,
};
use crate::states::{Density, DensityOperator, MixedForm, MixedState, PureState};
use crate::C64;

/// Sites at or beyond this norm count as on the boundary of their ball.
const BOUNDARY_TOL: f64 = 1e-9;
/// Steps below this are treated as a stalled search.
const MIN_STEP: f64 = 1e-12;
const MAX_STEP: f64 = 2.0;
const STEP_GROWTH: f64 = 1.5;
/// Eigenvalues of `ρ` below this are dropped when a dense state is
/// converted to an ensemble.
const RANK_CUTOFF: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub step_shrink: f64,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 500,
            step_init: 0.5,
            step_shrink: 0.5,
            grad_tol: 1e-7,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("optimizer config: {what}")));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return bad("step_init must be positive");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("step_shrink must lie in (0, 1)");
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return bad("grad_tol must be positive");
        }
        Ok(())
    }
}

/// How a restart was initialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Magnetization,
    Staggered,
    Covariance,
    Random,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Optimum {
    pub observable: AdditiveObservable,
    pub value: f64,
    pub iterations: usize,
    pub restart_index: usize,
    pub start: StartKind,
    pub converged: bool,
    /// Objective after every accepted step of the winning restart, starting
    /// with the initial value.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Scales every site vector with norm above 1 back onto the unit sphere.
/// Feasible stacks come back unchanged bit for bit.
pub fn project_feasible(c: &[Coeffs]) -> Vec<Coeffs> {
    c.iter().map(project_site).collect()
}

fn project_site(c: &Coeffs) -> Coeffs {
    let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    if norm > 1.0 {
        [c[0] / norm, c[1] / norm, c[2] / norm]
    } else {
        *c
    }
}

fn to_stack(flat: &[f64]) -> Vec<Coeffs> {
    flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn to_flat(stack: &[Coeffs]) -> Vec<f64> {
    stack.iter().flatten().copied().collect()
}

/// Removes the outward radial part of the gradient at sites on the boundary.
fn tangential(c: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = g.to_vec();
    for (cl, gl) in c.chunks_exact(3).zip(out.chunks_exact_mut(3)) {
        let norm = (cl[0] * cl[0] + cl[1] * cl[1] + cl[2] * cl[2]).sqrt();
        if norm >= 1.0 - BOUNDARY_TOL {
            let radial = (gl[0] * cl[0] + gl[1] * cl[1] + gl[2] * cl[2]) / norm;
            if radial > 0.0 {
                for k in 0..3 {
                    gl[k] -= radial * cl[k] / norm;
                }
            }
        }
    }
    out
}

struct Ascent {
    point: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn ascend(
    objective: &(impl Fn(&[f64]) -> Result<(f64, Vec<f64>)> + ?Sized),
    start: Vec<f64>,
    cfg: &OptimizerConfig,
) -> Result<Ascent> {
    let mut point = to_flat(&project_feasible(&to_stack(&start)));
    let (mut value, mut grad) = objective(&point)?;
    let mut trace = vec![value];
    let mut step = cfg.step_init.min(MAX_STEP);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let dir = tangential(&point, &grad);
        let gnorm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm <= cfg.grad_tol * (1.0 + value.abs()) || step < MIN_STEP {
            converged = true;
            break;
        }
        iterations += 1;
        let trial: Vec<f64> = point
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + step * d / gnorm)
            .collect();
        let trial = to_flat(&project_feasible(&to_stack(&trial)));
        let (trial_value, trial_grad) = objective(&trial)?;
        if trial_value > value {
            point = trial;
            value = trial_value;
            grad = trial_grad;
            trace.push(value);
            step = (step * STEP_GROWTH).min(MAX_STEP);
        } else {
            step *= cfg.step_shrink;
        }
    }
    Ok(Ascent {
        point,
        value,
        iterations,
        converged,
        trace,
    })
}

fn start_point(
    kind: StartKind,
    n: usize,
    cov: Option<&CovarianceMatrix>,
    rng_seed: u64,
    index: usize,
) -> Result<Vec<f64>> {
    Ok(match kind {
        StartKind::Magnetization => to_flat(AdditiveObservable::m_z(n).coeffs()),
        StartKind::Staggered => to_flat(AdditiveObservable::staggered_z(n).coeffs()),
        StartKind::Covariance => {
            let (_, v) = cov
                .expect("covariance start needs a covariance matrix")
                .top_eigenpair()?;
            // unit norm on every site that carries weight
            let stack: Vec<Coeffs> = to_stack(&v)
                .into_iter()
                .map(|c| {
                    let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                    if norm > 1e-12 {
                        [c[0] / norm, c[1] / norm, c[2] / norm]
                    } else {
                        [0.0, 0.0, 1.0]
                    }
                })
                .collect();
            to_flat(&stack)
        }
        StartKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(index as u64);
            to_flat(&random_unit_coeffs(n, &mut rng))
        }
    })
}

/// Runs every restart and keeps the best; ties go to the lowest index.
fn multi_start(
    n: usize,
    kinds: &[StartKind],
    cov: Option<&CovarianceMatrix>,
    cfg: &OptimizerConfig,
    objective: &(dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Sync),
) -> Result<Optimum> {
    cfg.validate()?;
    let runs: Vec<Result<(usize, StartKind, Ascent)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let kind = kinds.get(i).copied().unwrap_or(StartKind::Random);
            let start = start_point(kind, n, cov, cfg.seed, i)?;
            Ok((i, kind, ascend(objective, start, cfg)?))
        })
        .collect();
    let mut best: Option<(usize, StartKind, Ascent)> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.2.value > b.2.value) {
            best = Some(run);
        }
    }
    let (restart_index, start, ascent) = best.expect("at least one restart");
    Ok(Optimum {
        observable: AdditiveObservable::new(to_stack(&ascent.point))?,
        value: ascent.value,
        iterations: ascent.iterations,
        restart_index,
        start,
        converged: ascent.converged,
        trace: ascent.trace,
    })
}

/// `Σλ₊(K(A))` and its gradient with respect to the flat coefficients.
///
/// With `P` the projector onto the positive eigenspace and `S = σ_α(l)`,
/// `∂f/∂c_{lα} = Tr(P ∂K)` and
/// `∂K = [S,[A,ρ]] + [A,[S,ρ]]`, which gives
/// `Σ_p 2 Re(⟨p|S|Aρp⟩ + ⟨Ap|S|ρp⟩ - 2⟨p|S|ρAp⟩)`.
/// Where an eigenvalue crosses zero this is a subgradient.
pub fn c_objective(
    a: &AdditiveObservable,
    s: &(impl DensityOperator + ?Sized),
) -> Result<(f64, Vec<f64>)> {
    let n = s.n_sites();
    let r = eta_optimal(a, s)?;
    let mut grad = vec![0.0; 3 * n];
    let mut accumulate = |x: &[C64], y: &[C64], factor: f64| {
        for (l, e) in site_pauli_inner(x, y, n).iter().enumerate() {
            for k in 0..3 {
                grad[3 * l + k] += factor * e[k].re;
            }
        }
    };
    let positive = r.optimal_eta.vectors();
    match s.density() {
        Density::Uniform => {}
        Density::Ensemble { weights, states } => {
            for (w, psi) in weights.iter().zip(states) {
                let psi = psi.amplitudes();
                // ξ = Pψ, ζ = P A ψ
                let a_psi = a.apply_slice(psi);
                let mut xi = vec![C64::new(0.0, 0.0); psi.len()];
                let mut zeta = vec![C64::new(0.0, 0.0); psi.len()];
                for p in positive {
                    let p = p.as_slice();
                    let (c0, c1) = (inner(p, psi), inner(p, &a_psi));
                    for i in 0..psi.len() {
                        xi[i] += p[i] * c0;
                        zeta[i] += p[i] * c1;
                    }
                }
                let a_xi = a.apply_slice(&xi);
                accumulate(&xi, &a_psi, 2.0 * w);
                accumulate(&a_xi, psi, 2.0 * w);
                accumulate(&zeta, psi, -4.0 * w);
            }
        }
        Density::Dense(_) => {
            for p in positive {
                let p = p.as_slice();
                let ap = a.apply_slice(p);
                let rp = apply_density(s, p);
                let arp = a.apply_slice(&rp);
                let rap = apply_density(s, &ap);
                accumulate(p, &arp, 2.0);
                accumulate(&ap, &rp, 2.0);
                accumulate(p, &rap, -4.0);
            }
        }
    }
    Ok((r.value, grad))
}

/// Turns a low-rank dense state into an ensemble so the factored path applies.
fn prepare(s: &(impl DensityOperator + ?Sized)) -> Result<Option<MixedState>> {
    let n = s.n_sites();
    match s.density() {
        Density::Dense(m) => {
            if s.dim() > DENSE_DIM_CAP {
                return Err(Error::Capacity {
                    what: "dense matrix dimension",
                    limit: DENSE_DIM_CAP,
                    requested: s.dim(),
                });
            }
            let dense = MixedState::dense(n, m.clone())?;
            let ens = dense.to_ensemble(RANK_CUTOFF)?;
            let rank = match ens.form() {
                MixedForm::Ensemble { states, .. } => states.len(),
                _ => usize::MAX,
            };
            Ok((3 * rank <= FACTORED_SUPPORT_CAP && n <= MAX_ENSEMBLE_SITES).then_some(ens))
        }
        _ => Ok(None),
    }
}

/// Maximizes `max_η ⟨C⟩` over additive observables.
pub fn maximize_c(
    s: &(impl DensityOperator + Sync + ?Sized),
    cfg: &OptimizerConfig,
) -> Result<Optimum> {
    let n = s.n_sites();
    let converted = prepare(s)?;
    let target: &(dyn DensityOperator + Sync) = match &converted {
        Some(m) => m,
        None => &Wrapper(s),
    };
    if let Density::Uniform = target.density() {
        // K vanishes for every A.
        cfg.validate()?;
        return Ok(Optimum {
            observable: AdditiveObservable::m_z(n),
            value: 0.0,
            iterations: 0,
            restart_index: 0,
            start: StartKind::Magnetization,
            converged: true,
            trace: vec![0.0],
        });
    }
    // fail early on capacity rather than once per restart
    eta_optimal(&AdditiveObservable::m_z(n), target)?;
    let pure = match target.density() {
        Density::Ensemble { weights, states } if weights.len() == 1 => Some(&states[0]),
        _ => None,
    };
    let cov = pure.map(covariance_matrix).transpose()?;
    let kinds: &[StartKind] = if cov.is_some() {
        &[
            StartKind::Magnetization,
            StartKind::Staggered,
            StartKind::Covariance,
        ]
    } else {
        &[StartKind::Magnetization, StartKind::Staggered]
    };
    let objective = |flat: &[f64]| -> Result<(f64, Vec<f64>)> {
        let a = AdditiveObservable::new(to_stack(flat))?;
        c_objective(&a, target)
    };
    let mut best = multi_start(n, kinds, cov.as_ref(), cfg, &objective)?;
    // report the exact spectral value for the returned observable
    best.value = eta_optimal(&best.observable, target)?.value;
    Ok(best)
}

/// Maximizes `Var_ψ(A)` over additive observables.
pub fn maximize_variance(s: &PureState, cfg: &OptimizerConfig) -> Result<Optimum> {
    let cov = covariance_matrix(s)?;
    let objective = |flat: &[f64]| -> Result<(f64, Vec<f64>)> {
        Ok((cov.quadratic_form(flat), cov.gradient(flat)))
    };
    let kinds = [
        StartKind::Covariance,
        StartKind::Magnetization,
        StartKind::Staggered,
    ];
    multi_start(s.n_sites(), &kinds, Some(&cov), cfg, &objective)
}

/// Lets a generic `?Sized` state be used as a trait object.
struct Wrapper<'a, S: ?Sized>(&'a S);

impl<S: DensityOperator + ?Sized> DensityOperator for Wrapper<'_, S> {
    fn n_sites(&self) -> usize {
        self.0.n_sites()
    }

    fn density(&self) -> Density<'_> {
        self.0.density()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexVector;
    use crate::states::{
        make_cat, make_ex1, make_haar_state, make_product, make_psi1, make_random_mixed,
    };

    fn quick() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 6,
            max_iters: 200,
            ..Default::default()
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_feasible(&[[0.0, 0.0, 2.0]]), vec![[0.0, 0.0, 1.0]]);
        assert_eq!(project_feasible(&[[0.3, 0.0, 0.4]]), vec![[0.3, 0.0, 0.4]]);
        let once = project_feasible(&[[3.0, -1.0, 0.2], [0.1, 0.2, 0.3]]);
        assert_eq!(project_feasible(&once), once);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            step_shrink: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let cfg: OptimizerConfig = serde_json::from_str(r#"{"restarts": 4}"#).unwrap();
        assert_eq!(cfg.restarts, 4);
        assert_eq!(cfg.max_iters, 500);
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"restart": 4}"#).is_err());
    }

    #[test]
    fn cat_reaches_optimum() {
        let o = maximize_c(&make_cat(6).unwrap(), &quick()).unwrap();
        assert!(o.value >= 72.0 - 1e-6, "{}", o.value);
    }

    #[test]
    fn uniform_is_zero() {
        let s = MixedState::maximally_mixed(4).unwrap();
        assert_eq!(maximize_c(&s, &quick()).unwrap().value, 0.0);
    }

    #[test]
    fn ex1_stays_linear() {
        let o = maximize_c(&make_ex1(6).unwrap(), &quick()).unwrap();
        // each product component contributes at most (1 + √3)N
        assert!(o.value <= (1.0 + 3f64.sqrt()) * 6.0 + 1e-6, "{}", o.value);
    }

    #[test]
    fn trace_is_monotone() {
        let o = maximize_c(&make_random_mixed(3, 2, 4).unwrap(), &quick()).unwrap();
        assert!(o.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!((o.trace.last().unwrap() - o.value).abs() <= 1e-8 * o.value.max(1.0));
    }

    #[test]
    fn deterministic() {
        let s = make_haar_state(3, 9).unwrap();
        let a = maximize_c(&s, &quick()).unwrap();
        let b = maximize_c(&s, &quick()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.observable, b.observable);
        assert_eq!(a.restart_index, b.restart_index);
    }

    #[test]
    fn dense_input_converted() {
        let s = make_cat(4).unwrap();
        let d = MixedState::dense(4, s.to_density_matrix().unwrap()).unwrap();
        let o = maximize_c(&d, &quick()).unwrap();
        assert!((o.value - 32.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = make_haar_state(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = to_flat(&crate::observables::random_coeffs(3, &mut rng));
        let f =
            |x: &[f64]| c_objective(&AdditiveObservable::new(to_stack(x)).unwrap(), &s).unwrap();
        let (_, g) = f(&c);
        for k in 0..c.len() {
            let h = 1e-5;
            let mut up = c.clone();
            up[k] += h;
            let mut dn = c.clone();
            dn[k] -= h;
            let fd = (f(&up).0 - f(&dn).0) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() <= 1e-4 * (1.0 + g[k].abs()),
                "k={k}: {fd} vs {}",
                g[k]
            );
        }
    }

    #[test]
    fn dense_gradient_matches_ensemble_gradient() {
        let e = make_random_mixed(3, 3, 8).unwrap();
        let d = e.to_dense().unwrap();
        let a = AdditiveObservable::new(vec![[0.2, 0.5, -0.1], [0.0, 0.9, 0.1], [-0.7, 0.0, 0.3]])
            .unwrap();
        let (ve, ge) = c_objective(&a, &e).unwrap();
        let (vd, gd) = c_objective(&a, &d).unwrap();
        assert!((ve - vd).abs() < 1e-9);
        for (x, y) in ge.iter().zip(&gd) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn variance_examples() {
        let o = maximize_variance(&make_cat(6).unwrap(), &quick()).unwrap();
        assert!((o.value - 36.0).abs() < 1e-9);
        assert!(o
            .observable
            .coeffs()
            .iter()
            .all(|c| (c[2].abs() - 1.0).abs() < 1e-9));

        let o = maximize_variance(&make_product(6, 5).unwrap(), &quick()).unwrap();
        assert!(o.value <= 6.0 + 1e-6);

        let up = PureState::new(4, ComplexVector::basis(16, 15)).unwrap();
        let o = maximize_variance(&up, &quick()).unwrap();
        assert!((o.value - 4.0).abs() < 1e-9);
    }

    #[test]
    fn psi1_variance() {
        let o = maximize_variance(&make_psi1(8).unwrap(), &quick()).unwrap();
        assert!(o.value >= 28.0 - 1e-9, "{}", o.value);
    }
}
