//! The double-commutator correlation `⟨C⟩ = Tr(ρ [A,[A,η]])`.
//!
//! By cyclicity `⟨C⟩ = Tr(K η)` with `K = [A,[A,ρ]]`, so the maximum over
//! projectors `η` is the sum of the positive eigenvalues of `K`, attained by
//! the projector onto its positive eigenspace. For an ensemble
//! `ρ = Σ w_λ |ψ_λ⟩⟨ψ_λ|` the range of `K` lies inside
//! `span{ψ_λ, Aψ_λ, A²ψ_λ}`, which is how `K` is represented without ever
//! forming a `2^N × 2^N` matrix.

mod chsh;
mod conditions;
mod conversion;
mod local;
mod mermin;

pub use chsh::{macro_chsh_lambda_max, ChshChoice, MAX_CHSH_SITES};
pub use conditions::{check_sufficient_condition, ComponentCheck, ConditionReport};
pub use conversion::{single_site_conversion, ConversionOutcome, TwoBranchState};
pub use local::{local_decomposition_expectation, MAX_LOCAL_SITES};
pub use mermin::{mermin_score, mermin_two_branch, MerminReport};

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, hermitian_eig, inner, orthonormality_deviation, orthonormalize, zero_threshold,
    ComplexVector, HermitianMatrix, DENSE_DIM_CAP, ORTHONORMAL_CHECK_TOL,
};
use crate::observables::{variance, AdditiveObservable};
use crate::states::{Density, DensityOperator, PureState};
use crate::C64;

/// Largest factored support `3·rank` accepted for ensembles.
pub const FACTORED_SUPPORT_CAP: usize = 256;
/// Largest site count for the factored (ensemble) path.
pub const MAX_ENSEMBLE_SITES: usize = 20;
/// Residual cut used when orthonormalizing `{ψ, Aψ, A²ψ}`.
const KRYLOV_TOL: f64 = 1e-10;
/// Absolute part of the zero-eigenvalue threshold, in units of `(1 + ‖A‖)²`.
const ZERO_FLOOR: f64 = 1e-12;

fn zero_c() -> C64 {
    C64::new(0.0, 0.0)
}

pub(crate) fn eigen_floor(a: &AdditiveObservable) -> f64 {
    ZERO_FLOOR * (1.0 + a.norm_bound()).powi(2)
}

fn check_sites(a: &AdditiveObservable, n: usize) -> Result<()> {
    if a.n_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: a.n_sites(),
            found: n,
        });
    }
    Ok(())
}

/// `η = Σ_j |φ_j⟩⟨φ_j|` for an orthonormal set `{φ_j}`.
#[derive(Clone, Debug)]
pub struct ProjectorSpec {
    basis: Vec<ComplexVector>,
}

impl ProjectorSpec {
    pub fn new(basis: Vec<ComplexVector>) -> Result<Self> {
        if let Some(first) = basis.first() {
            if let Some(v) = basis.iter().find(|v| v.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: v.len(),
                });
            }
        }
        let deviation = orthonormality_deviation(&basis);
        if deviation > ORTHONORMAL_CHECK_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self { basis })
    }

    /// Rank-one projector onto a normalized copy of `v`.
    pub fn rank_one(v: &ComplexVector) -> Result<Self> {
        Self::new(vec![v.normalized()?])
    }

    /// The identity on the `dim`-dimensional space.
    pub fn identity(dim: usize) -> Self {
        Self {
            basis: (0..dim).map(|i| ComplexVector::basis(dim, i)).collect(),
        }
    }

    /// Projector onto the span of the given states (which must be orthonormal).
    pub fn onto_states(states: &[PureState]) -> Result<Self> {
        Self::new(states.iter().map(|s| s.vector().clone()).collect())
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn vectors(&self) -> &[ComplexVector] {
        &self.basis
    }
}

/// The maximum of `⟨C⟩` over projectors for fixed `A`, with its optimizer.
#[derive(Clone, Debug)]
pub struct CorrelationResult {
    pub value: f64,
    pub optimal_eta: ProjectorSpec,
    /// Nonzero eigenvalues of `K`, ascending.
    pub k_spectrum: Vec<f64>,
}

/// Serializable summary of a [`CorrelationResult`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub value: f64,
    pub k_spectrum: Vec<f64>,
    pub eta_rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_vectors: Option<Vec<Vec<[f64; 2]>>>,
}

impl CorrelationResult {
    pub fn to_record(&self, include_eta: bool) -> CorrelationRecord {
        CorrelationRecord {
            value: self.value,
            k_spectrum: self.k_spectrum.clone(),
            eta_rank: self.optimal_eta.rank(),
            eta_vectors: include_eta.then(|| {
                self.optimal_eta
                    .vectors()
                    .iter()
                    .map(|v| v.as_slice().iter().map(|z| [z.re, z.im]).collect())
                    .collect()
            }),
        }
    }
}

/// `A|ψ⟩` and `A²|ψ⟩`.
fn krylov_images(a: &AdditiveObservable, psi: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let a1 = a.apply_slice(psi);
    let a2 = a.apply_slice(&a1);
    (a1, a2)
}

/// `K = [A,[A,ρ]]`.
///
/// Ensembles (and pure states) give a factored matrix over the
/// orthonormalized `{ψ_λ, Aψ_λ, A²ψ_λ}`; dense states give a dense matrix;
/// the maximally mixed state gives zero.
pub fn build_k(
    a: &AdditiveObservable,
    s: &(impl DensityOperator + ?Sized),
) -> Result<HermitianMatrix> {
    check_sites(a, s.n_sites())?;
    let dim = s.dim();
    match s.density() {
        Density::Uniform => Ok(HermitianMatrix::zero(dim)),
        Density::Dense(rho) => {
            if dim > DENSE_DIM_CAP {
                return Err(Error::Capacity {
                    what: "dense matrix dimension",
                    limit: DENSE_DIM_CAP,
                    requested: dim,
                });
            }
            // Y = [A,ρ] = Aρ - (Aρ)†;  K = AY + (AY)†
            let x = a.apply_columns(rho);
            let y = Mat::from_fn(dim, dim, |i, j| x[(i, j)] - x[(j, i)].conj());
            let z = a.apply_columns(&y);
            HermitianMatrix::from_dense(Mat::from_fn(dim, dim, |i, j| z[(i, j)] + z[(j, i)].conj()))
        }
        Density::Ensemble { weights, states } => {
            let support = (3 * states.len()).min(dim);
            if s.n_sites() > MAX_ENSEMBLE_SITES {
                return Err(Error::Capacity {
                    what: "sites for the factored path",
                    limit: MAX_ENSEMBLE_SITES,
                    requested: s.n_sites(),
                });
            }
            if support > FACTORED_SUPPORT_CAP {
                return Err(Error::Capacity {
                    what: "factored support 3*rank",
                    limit: FACTORED_SUPPORT_CAP,
                    requested: support,
                });
            }
            let mut generators = Vec::with_capacity(3 * states.len());
            let mut images = Vec::with_capacity(states.len());
            for psi in states {
                let (a1, a2) = krylov_images(a, psi.amplitudes());
                generators.push(psi.vector().clone());
                generators.push(ComplexVector::new(a1.clone())?);
                generators.push(ComplexVector::new(a2.clone())?);
                images.push((a1, a2));
            }
            let basis = orthonormalize(&generators, KRYLOV_TOL)?;
            let r = basis.len();
            let mut block = Mat::<C64>::zeros(r, r);
            for ((w, psi), (a1, a2)) in weights.iter().zip(states).zip(&images) {
                if *w == 0.0 {
                    continue;
                }
                let s0: Vec<C64> = basis
                    .iter()
                    .map(|q| inner(q.as_slice(), psi.amplitudes()))
                    .collect();
                let s1: Vec<C64> = basis.iter().map(|q| inner(q.as_slice(), a1)).collect();
                let s2: Vec<C64> = basis.iter().map(|q| inner(q.as_slice(), a2)).collect();
                for j in 0..r {
                    for k in 0..r {
                        block[(j, k)] += (s2[j] * s0[k].conj() - s1[j] * s1[k].conj() * 2.0
                            + s0[j] * s2[k].conj())
                            * *w;
                    }
                }
            }
            HermitianMatrix::from_factored(dim, basis, block)
        }
    }
}

/// `ρ|v⟩`
pub(crate) fn apply_density(s: &(impl DensityOperator + ?Sized), v: &[C64]) -> Vec<C64> {
    match s.density() {
        Density::Uniform => {
            let scale = 1.0 / v.len() as f64;
            v.iter().map(|z| z * scale).collect()
        }
        Density::Dense(rho) => (0..v.len())
            .map(|i| (0..v.len()).map(|j| rho[(i, j)] * v[j]).sum())
            .collect(),
        Density::Ensemble { weights, states } => {
            let mut out = vec![zero_c(); v.len()];
            for (w, psi) in weights.iter().zip(states) {
                let c = inner(psi.amplitudes(), v) * *w;
                for (o, p) in out.iter_mut().zip(psi.amplitudes()) {
                    *o += c * p;
                }
            }
            out
        }
    }
}

/// `⟨C⟩ = Tr(ρ [A,[A,η]]) = Σ_j ⟨φ_j|K|φ_j⟩`.
pub fn c_expectation(
    a: &AdditiveObservable,
    eta: &ProjectorSpec,
    s: &(impl DensityOperator + ?Sized),
) -> Result<f64> {
    check_sites(a, s.n_sites())?;
    let dim = s.dim();
    if let Some(v) = eta.vectors().iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    let value = match s.density() {
        Density::Uniform => 0.0,
        Density::Ensemble { weights, states } => {
            let mut acc = 0.0;
            for (w, psi) in weights.iter().zip(states) {
                let (a1, a2) = krylov_images(a, psi.amplitudes());
                for phi in eta.vectors() {
                    let phi = phi.as_slice();
                    let cross = inner(phi, &a2) * inner(psi.amplitudes(), phi);
                    acc += w * (2.0 * cross.re - 2.0 * inner(phi, &a1).norm_sqr());
                }
            }
            acc
        }
        Density::Dense(_) => {
            // ⟨φ|K|φ⟩ = 2 Re⟨A²φ|ρ|φ⟩ - 2⟨Aφ|ρ|Aφ⟩
            let mut acc = 0.0;
            for phi in eta.vectors() {
                let (a1, a2) = krylov_images(a, phi.as_slice());
                let rho_phi = apply_density(s, phi.as_slice());
                let rho_a1 = apply_density(s, &a1);
                acc += 2.0 * inner(&a2, &rho_phi).re - 2.0 * inner(&a1, &rho_a1).re;
            }
            acc
        }
    };
    Ok(value)
}

/// Maximizes `⟨C⟩` over projectors: the positive eigenspace of `K`.
pub fn eta_optimal(
    a: &AdditiveObservable,
    s: &(impl DensityOperator + ?Sized),
) -> Result<CorrelationResult> {
    let k = build_k(a, s)?;
    let eig = hermitian_eig(&k)?;
    let threshold = zero_threshold(&eig.values, eigen_floor(a));
    let mut value = 0.0;
    let mut positive = Vec::new();
    let mut spectrum = Vec::new();
    for (lambda, v) in eig.values.iter().zip(eig.vectors) {
        if lambda.abs() > threshold {
            spectrum.push(*lambda);
        }
        if *lambda > threshold {
            value += lambda;
            positive.push(v);
        }
    }
    Ok(CorrelationResult {
        value,
        optimal_eta: ProjectorSpec { basis: positive },
        k_spectrum: spectrum,
    })
}

/// Largest eigenvalue of `[A,[A,|ψ⟩⟨ψ|]]` and its eigenvector, computed in
/// the (at most) three-dimensional span of `{ψ, Aψ, A²ψ}`.
pub fn pure_max_eta(a: &AdditiveObservable, s: &PureState) -> Result<(f64, ComplexVector)> {
    check_sites(a, s.n_sites())?;
    let psi = s.amplitudes();
    let (a1, a2) = krylov_images(a, psi);
    let generators = vec![
        s.vector().clone(),
        ComplexVector::new(a1.clone())?,
        ComplexVector::new(a2.clone())?,
    ];
    let basis = orthonormalize(&generators, KRYLOV_TOL)?;
    let r = basis.len();
    // K q = A²ψ⟨ψ|q⟩ - 2 Aψ⟨Aψ|q⟩ + ψ⟨A²ψ|q⟩
    let images: Vec<Vec<C64>> = basis
        .iter()
        .map(|q| {
            let q = q.as_slice();
            let (c0, c1, c2) = (inner(psi, q), inner(&a1, q), inner(&a2, q));
            (0..psi.len())
                .map(|i| a2[i] * c0 - a1[i] * c1 * 2.0 + psi[i] * c2)
                .collect()
        })
        .collect();
    let block = Mat::from_fn(r, r, |j, k| inner(basis[j].as_slice(), &images[k]));
    let small = HermitianMatrix::from_dense(block)?;
    let eig = hermitian_eig(&small)?;
    let threshold = zero_threshold(&eig.values, eigen_floor(a));
    let top = eig.values.len() - 1;
    let value = if eig.values[top] > threshold {
        eig.values[top]
    } else {
        0.0
    };
    let mut phi = ComplexVector::zeros(psi.len());
    for (j, q) in basis.iter().enumerate() {
        phi.axpy(eig.vectors[top].as_slice()[j], q);
    }
    Ok((value, phi.normalized()?))
}

/// Both sides of `max_η⟨C⟩ ≤ 2 √(Var_φ(A) Var_ψ(A))`, `φ` the maximizing eigenvector.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CauchySchwarzCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub variance_phi: f64,
    pub variance_psi: f64,
}

impl CauchySchwarzCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

pub fn cauchy_schwarz_bound(a: &AdditiveObservable, s: &PureState) -> Result<CauchySchwarzCheck> {
    let (lhs, phi) = pure_max_eta(a, s)?;
    let phi_state = PureState::new(s.n_sites(), phi)?;
    let variance_phi = variance(a, &phi_state)?;
    let variance_psi = variance(a, s)?;
    Ok(CauchySchwarzCheck {
        lhs,
        rhs: 2.0 * (variance_phi * variance_psi).sqrt(),
        variance_phi,
        variance_psi,
    })
}

/// Number of eigenvalues of `K` above the zero threshold.
pub fn positive_eigenvalue_count(
    a: &AdditiveObservable,
    s: &(impl DensityOperator + ?Sized),
) -> Result<usize> {
    let k = build_k(a, s)?;
    let values = linalg::hermitian_eigenvalues(&k)?;
    let threshold = zero_threshold(&values, eigen_floor(a));
    Ok(values.iter().filter(|v| **v > threshold).count())
}
