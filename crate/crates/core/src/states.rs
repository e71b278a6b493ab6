//! Pure and mixed states of `N` spin-1/2 sites, and the named example
//! families.
//!
//! Basis convention: site `l` (1-based) is bit `l-1` of the basis index,
//! `|↓⟩` is bit 0 and `|↑⟩` is bit 1. So `|↓↓…↓⟩` is index 0 and
//! `|↑↑…↑⟩` is index `2^N - 1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexVector, DENSE_DIM_CAP};
use crate::C64;

pub const NORM_TOL: f64 = 1e-12;
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
/// Largest site count for which full state vectors are allocated.
pub const MAX_VECTOR_SITES: usize = 24;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn check_vector_sites(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "number of sites must be at least 1".into(),
        ));
    }
    if n > MAX_VECTOR_SITES {
        return Err(Error::Capacity {
            what: "sites for a full state vector",
            limit: MAX_VECTOR_SITES,
            requested: n,
        });
    }
    Ok(())
}

/// Bit mask with the lowest `n` bits set: the all-up basis index.
pub fn all_up(n: usize) -> usize {
    (1usize << n) - 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_sites: usize,
    vector: ComplexVector,
}

impl PureState {
    pub fn new(n_sites: usize, vector: ComplexVector) -> Result<Self> {
        check_vector_sites(n_sites)?;
        if vector.len() != 1 << n_sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_sites,
                found: vector.len(),
            });
        }
        let norm = vector.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(Self { n_sites, vector })
    }

    /// Normalizes `amplitudes` and infers `N` from the length.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let v = ComplexVector::new(amplitudes)?.normalized()?;
        Self::new(len.trailing_zeros() as usize, v)
    }

    /// Parses the plain-text amplitude format: one `re im` pair per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse_amplitudes(text: &str) -> Result<Self> {
        let mut amps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut next = |what: &str| -> Result<f64> {
                let tok = parts.next().ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: format!("missing {what} part"),
                })?;
                tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: format!("bad {what} part `{tok}`: {e}"),
                })
            };
            let re = next("real")?;
            let im = next("imaginary")?;
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected exactly two numbers".into(),
                });
            }
            amps.push(C64::new(re, im));
        }
        Self::from_amplitudes(amps)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn vector(&self) -> &ComplexVector {
        &self.vector
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.vector.as_slice()
    }

    pub fn to_density_matrix(&self) -> Result<Mat<C64>> {
        if self.dim() > DENSE_DIM_CAP {
            return Err(Error::Capacity {
                what: "dense density dimension",
                limit: DENSE_DIM_CAP,
                requested: self.dim(),
            });
        }
        let a = self.amplitudes();
        Ok(Mat::from_fn(self.dim(), self.dim(), |i, j| {
            a[i] * a[j].conj()
        }))
    }
}

#[derive(Clone, Debug)]
pub enum MixedForm {
    Dense(Mat<C64>),
    Ensemble {
        weights: Vec<f64>,
        states: Vec<PureState>,
    },
    /// The maximally mixed state `1/2^N`, never materialized.
    Uniform,
}

#[derive(Clone, Debug)]
pub struct MixedState {
    n_sites: usize,
    form: MixedForm,
}

impl MixedState {
    pub fn ensemble(weights: Vec<f64>, states: Vec<PureState>) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::InvalidState(format!(
                "ensemble needs matching non-empty weights and states ({} vs {})",
                weights.len(),
                states.len()
            )));
        }
        let n = states[0].n_sites();
        if let Some(s) = states.iter().find(|s| s.n_sites() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.n_sites(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidState(format!("weight {w} outside [0, 1]")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        Ok(Self {
            n_sites: n,
            form: MixedForm::Ensemble { weights, states },
        })
    }

    /// Validates trace one, Hermiticity and positive semidefiniteness.
    pub fn dense(n_sites: usize, rho: Mat<C64>) -> Result<Self> {
        check_vector_sites(n_sites)?;
        let dim = 1usize << n_sites;
        if dim > DENSE_DIM_CAP {
            return Err(Error::Capacity {
                what: "dense density dimension",
                limit: DENSE_DIM_CAP,
                requested: dim,
            });
        }
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: rho.nrows(),
            });
        }
        let h = linalg::HermitianMatrix::from_dense(rho)?;
        let trace = h.trace();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let values = linalg::hermitian_eigenvalues(&h)?;
        if values[0] < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite: smallest eigenvalue {}",
                values[0]
            )));
        }
        Ok(Self {
            n_sites,
            form: MixedForm::Dense(h.dense().expect("dense").clone()),
        })
    }

    pub fn maximally_mixed(n_sites: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidArgument(
                "number of sites must be at least 1".into(),
            ));
        }
        Ok(Self {
            n_sites,
            form: MixedForm::Uniform,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn form(&self) -> &MixedForm {
        &self.form
    }

    pub fn components(&self) -> Option<(&[f64], &[PureState])> {
        match &self.form {
            MixedForm::Ensemble { weights, states } => Some((weights, states)),
            _ => None,
        }
    }

    pub fn to_density_matrix(&self) -> Result<Mat<C64>> {
        let dim = self.dim();
        if dim > DENSE_DIM_CAP {
            return Err(Error::Capacity {
                what: "dense density dimension",
                limit: DENSE_DIM_CAP,
                requested: dim,
            });
        }
        Ok(match &self.form {
            MixedForm::Dense(m) => m.clone(),
            MixedForm::Uniform => Mat::from_fn(dim, dim, |i, j| {
                if i == j {
                    real(1.0 / dim as f64)
                } else {
                    zero()
                }
            }),
            MixedForm::Ensemble { weights, states } => {
                let mut m = Mat::<C64>::zeros(dim, dim);
                for (w, s) in weights.iter().zip(states) {
                    let a = s.amplitudes();
                    let nz: Vec<usize> = (0..dim).filter(|&i| a[i] != zero()).collect();
                    for &j in &nz {
                        for &i in &nz {
                            m[(i, j)] += a[i] * a[j].conj() * *w;
                        }
                    }
                }
                m
            }
        })
    }

    /// Dense form of this state.
    pub fn to_dense(&self) -> Result<MixedState> {
        Ok(Self {
            n_sites: self.n_sites,
            form: MixedForm::Dense(self.to_density_matrix()?),
        })
    }

    /// Spectral decomposition into an ensemble of orthonormal eigenvectors.
    /// Eigenvalues below `cutoff` are discarded and the rest renormalized.
    pub fn to_ensemble(&self, cutoff: f64) -> Result<MixedState> {
        match &self.form {
            MixedForm::Ensemble { .. } => Ok(self.clone()),
            _ => {
                let h = linalg::HermitianMatrix::from_dense(self.to_density_matrix()?)?;
                let e = linalg::hermitian_eig(&h)?;
                let mut weights = Vec::new();
                let mut states = Vec::new();
                for (w, v) in e.values.iter().zip(e.vectors) {
                    if *w > cutoff {
                        weights.push(*w);
                        states.push(PureState::new(self.n_sites, v.normalized()?)?);
                    }
                }
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                Self::ensemble(weights, states)
            }
        }
    }
}

/// Borrowed view used by every routine that accepts "a pure or mixed state".
#[derive(Clone, Copy, Debug)]
pub enum Density<'a> {
    Ensemble {
        weights: &'a [f64],
        states: &'a [PureState],
    },
    Dense(&'a Mat<C64>),
    Uniform,
}

pub trait DensityOperator {
    fn n_sites(&self) -> usize;
    fn density(&self) -> Density<'_>;

    fn dim(&self) -> usize {
        1 << self.n_sites()
    }
}

static UNIT_WEIGHT: [f64; 1] = [1.0];

impl DensityOperator for PureState {
    fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn density(&self) -> Density<'_> {
        Density::Ensemble {
            weights: &UNIT_WEIGHT,
            states: std::slice::from_ref(self),
        }
    }
}

impl DensityOperator for MixedState {
    fn n_sites(&self) -> usize {
        self.n_sites
    }

    fn density(&self) -> Density<'_> {
        match &self.form {
            MixedForm::Dense(m) => Density::Dense(m),
            MixedForm::Ensemble { weights, states } => Density::Ensemble { weights, states },
            MixedForm::Uniform => Density::Uniform,
        }
    }
}

/// Dense `2^N × 2^N` density matrix of any state.
pub fn density_matrix_of(s: &(impl DensityOperator + ?Sized)) -> Result<Mat<C64>> {
    match s.density() {
        Density::Dense(m) => Ok(m.clone()),
        Density::Uniform => MixedState::maximally_mixed(s.n_sites())?.to_density_matrix(),
        Density::Ensemble { weights, states } => MixedState {
            n_sites: s.n_sites(),
            form: MixedForm::Ensemble {
                weights: weights.to_vec(),
                states: states.to_vec(),
            },
        }
        .to_density_matrix(),
    }
}

/// Either kind of state, as produced by [`StateSpec::build`].
#[derive(Clone, Debug)]
pub enum State {
    Pure(PureState),
    Mixed(MixedState),
}

impl State {
    pub fn as_pure(&self) -> Option<&PureState> {
        match self {
            State::Pure(p) => Some(p),
            State::Mixed(_) => None,
        }
    }

    pub fn into_mixed(self) -> MixedState {
        match self {
            State::Pure(p) => MixedState {
                n_sites: p.n_sites,
                form: MixedForm::Ensemble {
                    weights: vec![1.0],
                    states: vec![p],
                },
            },
            State::Mixed(m) => m,
        }
    }
}

impl DensityOperator for State {
    fn n_sites(&self) -> usize {
        match self {
            State::Pure(p) => p.n_sites,
            State::Mixed(m) => m.n_sites,
        }
    }

    fn density(&self) -> Density<'_> {
        match self {
            State::Pure(p) => p.density(),
            State::Mixed(m) => m.density(),
        }
    }
}

impl From<PureState> for State {
    fn from(p: PureState) -> Self {
        State::Pure(p)
    }
}

impl From<MixedState> for State {
    fn from(m: MixedState) -> Self {
        State::Mixed(m)
    }
}

/// A superposition of computational basis states with the given amplitudes.
fn sparse_state(n: usize, terms: &[(usize, C64)]) -> Result<PureState> {
    check_vector_sites(n)?;
    let mut v = vec![zero(); 1 << n];
    for &(i, a) in terms {
        v[i] += a;
    }
    PureState::new(n, ComplexVector::new(v)?)
}

/// `(|↓⟩^⊗n + |↑⟩^⊗n)/√2`
pub fn make_cat(n: usize) -> Result<PureState> {
    check_vector_sites(n)?;
    sparse_state(
        n,
        &[(0, real(FRAC_1_SQRT_2)), (all_up(n), real(FRAC_1_SQRT_2))],
    )
}

/// `√(1-1/n)|↓⟩^⊗n + √(1/n)|↑⟩^⊗n`
pub fn make_psi1(n: usize) -> Result<PureState> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "psi1 needs n >= 2, got {n}"
        )));
    }
    check_vector_sites(n)?;
    let nf = n as f64;
    sparse_state(
        n,
        &[
            (0, real((1.0 - 1.0 / nf).sqrt())),
            (all_up(n), real((1.0 / nf).sqrt())),
        ],
    )
}

/// Equal superposition of the domain walls `|↑⟩^⊗k |↓⟩^⊗(n-k)`, `k = 0..=n`.
pub fn make_psi2(n: usize) -> Result<PureState> {
    check_vector_sites(n)?;
    let a = real(1.0 / ((n + 1) as f64).sqrt());
    let terms: Vec<(usize, C64)> = (0..=n).map(|k| ((1usize << k) - 1, a)).collect();
    sparse_state(n, &terms)
}

/// `(|pattern⟩ + |complement⟩)/√2`
fn branch_pair(n: usize, pattern: usize) -> Result<PureState> {
    let a = real(FRAC_1_SQRT_2);
    sparse_state(n, &[(pattern, a), (all_up(n) ^ pattern, a)])
}

/// One-flipped-spin pair `(|↓..↑_λ..↓⟩ + |↑..↓_λ..↑⟩)/√2`, `λ` 1-based.
pub fn single_flip_pair(n: usize, lambda: usize) -> Result<PureState> {
    if lambda == 0 || lambda > n {
        return Err(Error::InvalidArgument(format!(
            "lambda {lambda} outside 1..={n}"
        )));
    }
    branch_pair(n, 1 << (lambda - 1))
}

/// Uniform mixture of the `n` single-flip pairs.
pub fn make_ex2_ensemble(n: usize) -> Result<MixedState> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("ex2 needs n >= 3, got {n}")));
    }
    let states = (1..=n)
        .map(|l| single_flip_pair(n, l))
        .collect::<Result<Vec<_>>>()?;
    MixedState::ensemble(vec![1.0 / n as f64; n], states)
}

fn ex3_from_patterns(n: usize, patterns: Vec<usize>) -> Result<MixedState> {
    let count = patterns.len();
    let states = patterns
        .into_iter()
        .map(|p| branch_pair(n, p))
        .collect::<Result<Vec<_>>>()?;
    MixedState::ensemble(vec![1.0 / count as f64; count], states)
}

fn check_ex3(n: usize) -> Result<()> {
    if n == 0 || !n.is_multiple_of(3) {
        return Err(Error::InvalidArgument(format!(
            "ex3 needs n divisible by 3, got {n}"
        )));
    }
    Ok(())
}

/// Uniform mixture of `(|λ⟩ + |λ̄⟩)/√2` for `λ = 1..=n/3`, where `|λ⟩` has
/// the first `λ` spins up.
pub fn make_ex3_ensemble(n: usize) -> Result<MixedState> {
    check_ex3(n)?;
    ex3_from_patterns(n, (1..=n / 3).map(|l| (1usize << l) - 1).collect())
}

/// As [`make_ex3_ensemble`] but `|λ⟩` has a seeded random set of `λ` up spins.
pub fn make_ex3_random_ensemble(n: usize, seed: u64) -> Result<MixedState> {
    check_ex3(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns = (1..=n / 3)
        .map(|l| {
            let mut sites: Vec<usize> = (0..n).collect();
            // partial Fisher–Yates
            for i in 0..l {
                let j = rng.random_range(i..n);
                sites.swap(i, j);
            }
            sites[..l].iter().fold(0usize, |acc, &s| acc | (1 << s))
        })
        .collect();
    ex3_from_patterns(n, patterns)
}

/// `½ (|↓⟩⟨↓|)^⊗n + ½ (|↑⟩⟨↑|)^⊗n`
pub fn make_ex1(n: usize) -> Result<MixedState> {
    let down = sparse_state(n, &[(0, real(1.0))])?;
    let up = sparse_state(n, &[(all_up(n), real(1.0))])?;
    MixedState::ensemble(vec![0.5, 0.5], vec![down, up])
}

pub fn make_random_state(n: usize) -> Result<MixedState> {
    MixedState::maximally_mixed(n)
}

/// `⊗_l (cos θ_l |↓⟩ + e^{iφ_l} sin θ_l |↑⟩)` with seeded angles.
pub fn make_product(n: usize, seed: u64) -> Result<PureState> {
    check_vector_sites(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<(C64, C64)> = (0..n)
        .map(|_| {
            let theta = rng.random_range(0.0..PI);
            let phi = rng.random_range(0.0..2.0 * PI);
            (real(theta.cos()), C64::from_polar(theta.sin(), phi))
        })
        .collect();
    product_of(&sites)
}

/// Haar-random pure state: normalized complex Gaussian amplitudes.
pub fn make_haar_state(n: usize, seed: u64) -> Result<PureState> {
    check_vector_sites(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..1usize << n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    PureState::from_amplitudes(v)
}

/// Seeded rank-`rank` ensemble: independent Haar vectors with uniform
/// random weights. The components are generally not orthogonal.
pub fn make_random_mixed(n: usize, rank: usize, seed: u64) -> Result<MixedState> {
    if rank == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = (0..rank)
        .map(|_| make_haar_state(n, rng.random()))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = (0..rank).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    MixedState::ensemble(raw.iter().map(|w| w / total).collect(), states)
}

/// Product state from per-site `(⟨↓|ψ_l⟩, ⟨↑|ψ_l⟩)` pairs, site 1 first.
pub fn product_of(sites: &[(C64, C64)]) -> Result<PureState> {
    let n = sites.len();
    check_vector_sites(n)?;
    let v: Vec<C64> = (0..1usize << n)
        .map(|i| {
            sites
                .iter()
                .enumerate()
                .map(|(l, (d, u))| if i >> l & 1 == 1 { *u } else { *d })
                .product()
        })
        .collect();
    PureState::from_amplitudes(v)
}

/// `w·a + (1-w)·b`.
///
/// Two ensembles (or pure states) combine into an ensemble; anything
/// involving a dense or maximally mixed state is combined densely.
pub fn mix(a: &State, b: &State, w: f64) -> Result<MixedState> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidArgument(format!(
            "mixing weight {w} outside [0, 1]"
        )));
    }
    if a.n_sites() != b.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: a.n_sites(),
            found: b.n_sites(),
        });
    }
    if w == 1.0 {
        return Ok(a.clone().into_mixed());
    }
    if w == 0.0 {
        return Ok(b.clone().into_mixed());
    }
    let n = a.n_sites();
    match (a.density(), b.density()) {
        (
            Density::Ensemble {
                weights: wa,
                states: sa,
            },
            Density::Ensemble {
                weights: wb,
                states: sb,
            },
        ) => {
            let mut weights: Vec<f64> = wa
                .iter()
                .map(|x| x * w)
                .chain(wb.iter().map(|x| x * (1.0 - w)))
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|x| *x /= total);
            let states = sa.iter().chain(sb).cloned().collect();
            MixedState::ensemble(weights, states)
        }
        _ => {
            let ra = a.clone().into_mixed().to_density_matrix()?;
            let rb = b.clone().into_mixed().to_density_matrix()?;
            let dim = ra.nrows();
            let m = Mat::from_fn(dim, dim, |i, j| ra[(i, j)] * w + rb[(i, j)] * (1.0 - w));
            MixedState::dense(n, m)
        }
    }
}

/// A named state family with its parameters, e.g. `cat`, `ex2prime(0.5)`,
/// `product(7)`.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    Cat,
    Psi1,
    Psi2,
    Ex1,
    Ex2,
    Ex3,
    Ex3Random(u64),
    Ex2Prime(f64),
    Ex3Prime(f64),
    Product(u64),
    Haar(u64),
    Random,
}

impl StateSpec {
    pub fn build(&self, n: usize) -> Result<State> {
        Ok(match self {
            StateSpec::Cat => make_cat(n)?.into(),
            StateSpec::Psi1 => make_psi1(n)?.into(),
            StateSpec::Psi2 => make_psi2(n)?.into(),
            StateSpec::Ex1 => make_ex1(n)?.into(),
            StateSpec::Ex2 => make_ex2_ensemble(n)?.into(),
            StateSpec::Ex3 => make_ex3_ensemble(n)?.into(),
            StateSpec::Ex3Random(seed) => make_ex3_random_ensemble(n, *seed)?.into(),
            StateSpec::Ex2Prime(w) => {
                mix(&make_ex2_ensemble(n)?.into(), &make_ex1(n)?.into(), *w)?.into()
            }
            StateSpec::Ex3Prime(w) => {
                mix(&make_ex3_ensemble(n)?.into(), &make_ex1(n)?.into(), *w)?.into()
            }
            StateSpec::Product(seed) => make_product(n, *seed)?.into(),
            StateSpec::Haar(seed) => make_haar_state(n, *seed)?.into(),
            StateSpec::Random => make_random_state(n)?.into(),
        })
    }

    /// Whether the family is a pure state.
    pub fn is_pure(&self) -> bool {
        matches!(
            self,
            StateSpec::Cat
                | StateSpec::Psi1
                | StateSpec::Psi2
                | StateSpec::Product(_)
                | StateSpec::Haar(_)
        )
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Cat => write!(f, "cat"),
            StateSpec::Psi1 => write!(f, "psi1"),
            StateSpec::Psi2 => write!(f, "psi2"),
            StateSpec::Ex1 => write!(f, "ex1"),
            StateSpec::Ex2 => write!(f, "ex2"),
            StateSpec::Ex3 => write!(f, "ex3"),
            StateSpec::Ex3Random(s) => write!(f, "ex3random({s})"),
            StateSpec::Ex2Prime(w) => write!(f, "ex2prime({w})"),
            StateSpec::Ex3Prime(w) => write!(f, "ex3prime({w})"),
            StateSpec::Product(s) => write!(f, "product({s})"),
            StateSpec::Haar(s) => write!(f, "haar({s})"),
            StateSpec::Random => write!(f, "random"),
        }
    }
}

impl FromStr for StateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(open) => {
                let close = s
                    .strip_suffix(')')
                    .ok_or_else(|| Error::UnknownState(s.to_string()))?;
                (&s[..open], Some(close[open + 1..].trim()))
            }
            None => (s, None),
        };
        let float = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| {
                Error::InvalidArgument(format!("`{name}` needs a weight argument"))
            })?;
            a.parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad weight `{a}` for `{name}`: {e}")))
        };
        let int = |a: Option<&str>| -> Result<u64> {
            let a =
                a.ok_or_else(|| Error::InvalidArgument(format!("`{name}` needs a seed argument")))?;
            a.parse::<u64>()
                .map_err(|e| Error::InvalidArgument(format!("bad seed `{a}` for `{name}`: {e}")))
        };
        let no_arg = |spec: StateSpec| -> Result<StateSpec> {
            match arg {
                None => Ok(spec),
                Some(_) => Err(Error::InvalidArgument(format!(
                    "`{name}` takes no argument"
                ))),
            }
        };
        match name.to_ascii_lowercase().as_str() {
            "cat" => no_arg(StateSpec::Cat),
            "psi1" => no_arg(StateSpec::Psi1),
            "psi2" => no_arg(StateSpec::Psi2),
            "ex1" => no_arg(StateSpec::Ex1),
            "ex2" => no_arg(StateSpec::Ex2),
            "ex3" => no_arg(StateSpec::Ex3),
            "random" => no_arg(StateSpec::Random),
            "ex3random" => Ok(StateSpec::Ex3Random(int(arg)?)),
            "ex2prime" => Ok(StateSpec::Ex2Prime(float(arg)?)),
            "ex3prime" => Ok(StateSpec::Ex3Prime(float(arg)?)),
            "product" => Ok(StateSpec::Product(int(arg)?)),
            "haar" => Ok(StateSpec::Haar(int(arg)?)),
            _ => Err(Error::UnknownState(s.to_string())),
        }
    }
}
