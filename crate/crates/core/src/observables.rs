//! Additive observables `A = Σ_l a(l)` with traceless single-site terms
//! `a(l) = c_l · σ(l)`.
//!
//! In the site basis `(|↓⟩, |↑⟩)` a single-site term is
//! `[[-c_z, c_x + i c_y], [c_x - i c_y, c_z]]`, so `σ_z|↑⟩ = |↑⟩` and
//! `(σ_x + iσ_y)|↓⟩ = 2|↑⟩`.

use std::fmt::Write as _;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexVector};
use crate::states::{Density, DensityOperator, PureState};
use crate::C64;

/// Per-site operator-norm budget `|c_l| ≤ 1`, with this slack.
pub const COEFF_NORM_SLACK: f64 = 1e-12;

pub type Coeffs = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn unit(self) -> Coeffs {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }
}

pub fn coeff_norm(c: &Coeffs) -> f64 {
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveObservable {
    locals: Vec<Coeffs>,
}

impl AdditiveObservable {
    pub fn new(locals: Vec<Coeffs>) -> Result<Self> {
        if locals.is_empty() {
            return Err(Error::InvalidArgument(
                "observable needs at least one site".into(),
            ));
        }
        for (l, c) in locals.iter().enumerate() {
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "site {}: non-finite coefficient",
                    l + 1
                )));
            }
            let norm = coeff_norm(c);
            if norm > 1.0 + COEFF_NORM_SLACK {
                return Err(Error::InvalidArgument(format!(
                    "site {}: coefficient norm {norm} exceeds 1",
                    l + 1
                )));
            }
        }
        Ok(Self { locals })
    }

    /// Same direction on every site.
    pub fn uniform(n: usize, c: Coeffs) -> Result<Self> {
        Self::new(vec![c; n])
    }

    /// `M_α = Σ_l σ_α(l)`
    pub fn magnetization(n: usize, axis: Axis) -> Self {
        Self {
            locals: vec![axis.unit(); n.max(1)],
        }
    }

    /// `M_z = Σ_l σ_z(l)`
    pub fn m_z(n: usize) -> Self {
        Self::magnetization(n, Axis::Z)
    }

    /// `Σ_l (-1)^l σ_z(l)` with 1-based `l`.
    pub fn staggered_z(n: usize) -> Self {
        Self {
            locals: (1..=n.max(1))
                .map(|l| [0.0, 0.0, if l % 2 == 0 { 1.0 } else { -1.0 }])
                .collect(),
        }
    }

    /// From the stacked coefficients `(c_1x, c_1y, c_1z, c_2x, …)`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(3) {
            return Err(Error::InvalidArgument(format!(
                "coefficient stack length {} is not a multiple of 3",
                flat.len()
            )));
        }
        Self::new(flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.locals.iter().flatten().copied().collect()
    }

    pub fn n_sites(&self) -> usize {
        self.locals.len()
    }

    pub fn coeffs(&self) -> &[Coeffs] {
        &self.locals
    }

    /// `Σ_l |c_l|`, an upper bound on the operator norm (tight for
    /// spin-1/2: attained by the aligned product state).
    pub fn norm_bound(&self) -> f64 {
        self.locals.iter().map(coeff_norm).sum()
    }

    /// Whether every site sits on the boundary `|c_l| = 1`.
    pub fn on_boundary(&self, tol: f64) -> bool {
        self.locals
            .iter()
            .all(|c| (coeff_norm(c) - 1.0).abs() <= tol)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        let expected = 1usize << self.n_sites();
        if len != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: len,
            });
        }
        Ok(())
    }

    /// `A|v⟩`, site by site.
    pub fn apply(&self, v: &ComplexVector) -> Result<ComplexVector> {
        self.check_dim(v.len())?;
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.apply_into(v.as_slice(), &mut out);
        ComplexVector::new(out)
    }

    /// `out += A v`; `v.len()` must be `2^N`.
    pub(crate) fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        for (l, c) in self.locals.iter().enumerate() {
            if c.iter().all(|&x| x == 0.0) {
                continue;
            }
            apply_local_into(l, c, v, out);
        }
    }

    pub(crate) fn apply_slice(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// `A M`, applying `A` to every column of a dense matrix.
    pub(crate) fn apply_columns(&self, m: &Mat<C64>) -> Mat<C64> {
        let d = m.nrows();
        let mut out = Mat::<C64>::zeros(d, m.ncols());
        let mut col = vec![C64::new(0.0, 0.0); d];
        for j in 0..m.ncols() {
            for i in 0..d {
                col[i] = m[(i, j)];
            }
            let image = self.apply_slice(&col);
            for i in 0..d {
                out[(i, j)] = image[i];
            }
        }
        out
    }

    /// One line per site, three coefficients separated by spaces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.locals {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut locals = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        message: format!("bad coefficient `{t}`: {e}"),
                    })
                })
                .collect::<Result<_>>()?;
            if nums.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 3 coefficients, found {}", nums.len()),
                });
            }
            locals.push([nums[0], nums[1], nums[2]]);
        }
        Self::new(locals)
    }
}

/// `out += (c·σ(site)) v`
pub(crate) fn apply_local_into(site: usize, c: &Coeffs, v: &[C64], out: &mut [C64]) {
    let bit = 1usize << site;
    let up_from_down = C64::new(c[0], -c[1]);
    let down_from_up = C64::new(c[0], c[1]);
    let cz = c[2];
    for block in (0..v.len()).step_by(bit << 1) {
        for i in block..block + bit {
            let j = i | bit;
            let (v0, v1) = (v[i], v[j]);
            out[i] += down_from_up * v1 - v0 * cz;
            out[j] += up_from_down * v0 + v1 * cz;
        }
    }
}

/// `⟨x|σ_α(l)|y⟩` for every site `l` and axis `α`.
pub(crate) fn site_pauli_inner(x: &[C64], y: &[C64], n_sites: usize) -> Vec<[C64; 3]> {
    let i_unit = C64::new(0.0, 1.0);
    (0..n_sites)
        .map(|l| {
            let bit = 1usize << l;
            let mut acc = [C64::new(0.0, 0.0); 3];
            for block in (0..x.len()).step_by(bit << 1) {
                for i in block..block + bit {
                    let j = i | bit;
                    let (xi, xj) = (x[i].conj(), x[j].conj());
                    acc[0] += xi * y[j] + xj * y[i];
                    acc[1] += i_unit * (xi * y[j] - xj * y[i]);
                    acc[2] += xj * y[j] - xi * y[i];
                }
            }
            acc
        })
        .collect()
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

/// `Tr(ρ A)`
pub fn expectation(a: &AdditiveObservable, s: &(impl DensityOperator + ?Sized)) -> Result<f64> {
    check_sites(a, s.n_sites())?;
    let n = s.n_sites();
    let value = match s.density() {
        Density::Uniform => C64::new(0.0, 0.0),
        Density::Ensemble { weights, states } => weights
            .iter()
            .zip(states)
            .map(|(w, psi)| {
                let per_site = site_pauli_inner(psi.amplitudes(), psi.amplitudes(), n);
                per_site
                    .iter()
                    .zip(a.coeffs())
                    .map(|(e, c)| e[0] * c[0] + e[1] * c[1] + e[2] * c[2])
                    .sum::<C64>()
                    * *w
            })
            .sum(),
        Density::Dense(rho) => {
            let mut acc = C64::new(0.0, 0.0);
            for (l, c) in a.coeffs().iter().enumerate() {
                let bit = 1usize << l;
                let a01 = C64::new(c[0], c[1]);
                let a10 = C64::new(c[0], -c[1]);
                for i in (0..rho.nrows()).filter(|i| i & bit == 0) {
                    let j = i | bit;
                    acc +=
                        rho[(j, i)] * a01 + rho[(i, j)] * a10 + (rho[(j, j)] - rho[(i, i)]) * c[2];
                }
            }
            acc
        }
    };
    debug_assert!(value.im.abs() <= 1e-10 * (1.0 + value.re.abs()));
    Ok(value.re)
}

/// `⟨ψ|(A - ⟨A⟩)²|ψ⟩`
pub fn variance(a: &AdditiveObservable, s: &PureState) -> Result<f64> {
    let image = a.apply(s.vector())?;
    let mean = s.vector().dot(&image).re;
    let second = image.norm().powi(2);
    Ok((second - mean * mean).max(0.0))
}

/// `V_{(l,α),(l',β)} = Re⟨ψ|Δσ_α(l) Δσ_β(l')|ψ⟩`, so `Var(A) = cᵀ V c`.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix {
    n_sites: usize,
    entries: Mat<f64>,
}

impl CovarianceMatrix {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn size(&self) -> usize {
        3 * self.n_sites
    }

    /// Entry for `(site, axis)` pairs, sites 0-based.
    pub fn get(&self, site_a: usize, axis_a: Axis, site_b: usize, axis_b: Axis) -> f64 {
        self.entries[(3 * site_a + axis_a as usize, 3 * site_b + axis_b as usize)]
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn quadratic_form(&self, c: &[f64]) -> f64 {
        let k = self.size();
        let mut acc = 0.0;
        for i in 0..k {
            let row: f64 = (0..k).map(|j| self.entries[(i, j)] * c[j]).sum();
            acc += c[i] * row;
        }
        acc
    }

    /// `2 V c`
    pub fn gradient(&self, c: &[f64]) -> Vec<f64> {
        let k = self.size();
        (0..k)
            .map(|i| 2.0 * (0..k).map(|j| self.entries[(i, j)] * c[j]).sum::<f64>())
            .collect()
    }

    /// Largest eigenvalue and its unit eigenvector.
    pub fn top_eigenpair(&self) -> Result<(f64, Vec<f64>)> {
        let (values, vectors) = linalg::symmetric_eig(&self.entries)?;
        let k = self.size();
        let (best, _) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        Ok((values[best], (0..k).map(|i| vectors[(i, best)]).collect()))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::symmetric_eigenvalues(&self.entries)?[0])
    }
}

pub fn covariance_matrix(s: &PureState) -> Result<CovarianceMatrix> {
    let n = s.n_sites();
    let psi = s.amplitudes();
    let mut images = Vec::with_capacity(3 * n);
    for l in 0..n {
        for axis in Axis::ALL {
            let mut out = vec![C64::new(0.0, 0.0); psi.len()];
            apply_local_into(l, &axis.unit(), psi, &mut out);
            images.push(out);
        }
    }
    let means: Vec<f64> = images.iter().map(|w| linalg::inner(psi, w).re).collect();
    let k = 3 * n;
    let mut entries = Mat::<f64>::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = linalg::inner(&images[i], &images[j]).re - means[i] * means[j];
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(CovarianceMatrix {
        n_sites: n,
        entries,
    })
}

/// Coefficients drawn uniformly from the unit ball at every site.
pub fn random_coeffs(n: usize, rng: &mut impl Rng) -> Vec<Coeffs> {
    (0..n)
        .map(|_| {
            let dir: [f64; 3] = UnitSphere.sample(rng);
            let r = rng.random::<f64>().cbrt();
            [dir[0] * r, dir[1] * r, dir[2] * r]
        })
        .collect()
}

/// Unit-norm coefficients with uniformly random direction at every site.
pub fn random_unit_coeffs(n: usize, rng: &mut impl Rng) -> Vec<Coeffs> {
    (0..n).map(|_| UnitSphere.sample(rng)).collect()
}

/// `|Tr(ρ₁ B) - Tr(ρ₂ B)|`
pub fn additive_deviation(
    s1: &(impl DensityOperator + ?Sized),
    s2: &(impl DensityOperator + ?Sized),
    b: &AdditiveObservable,
) -> Result<f64> {
    Ok((expectation(b, s1)? - expectation(b, s2)?).abs())
}

/// Largest [`additive_deviation`] over `trials` random additive observables.
pub fn additive_indistinguishability(
    s1: &(impl DensityOperator + ?Sized),
    s2: &(impl DensityOperator + ?Sized),
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if s1.n_sites() != s2.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: s1.n_sites(),
            found: s2.n_sites(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let b = AdditiveObservable::new(random_coeffs(s1.n_sites(), &mut rng))?;
        worst = worst.max(additive_deviation(s1, s2, &b)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_cat, make_ex1, make_product, make_psi1, MixedState};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn mz_on_all_down() {
        let v = ComplexVector::basis(4, 0);
        let out = AdditiveObservable::m_z(2).apply(&v).unwrap();
        assert_eq!(out.as_slice()[0], C64::new(-2.0, 0.0));
        assert!(out.as_slice()[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn mz_on_cat() {
        let cat = make_cat(2).unwrap();
        let out = AdditiveObservable::m_z(2).apply(cat.vector()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(out.as_slice()[0].re, -2.0 * s, 1e-15);
        assert_close(out.as_slice()[3].re, 2.0 * s, 1e-15);
    }

    #[test]
    fn raising_combination_convention() {
        // (σx + iσy)|↓⟩ = 2|↑⟩ on one site
        let down = ComplexVector::basis(2, 0);
        let mut out = vec![C64::new(0.0, 0.0); 2];
        apply_local_into(0, &[1.0, 0.0, 0.0], down.as_slice(), &mut out);
        let mut y = vec![C64::new(0.0, 0.0); 2];
        apply_local_into(0, &[0.0, 1.0, 0.0], down.as_slice(), &mut y);
        let raised = out[1] + C64::new(0.0, 1.0) * y[1];
        assert_close(raised.re, 2.0, 1e-15);
        assert_close(raised.im, 0.0, 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let v = ComplexVector::basis(8, 0);
        assert!(matches!(
            AdditiveObservable::m_z(2).apply(&v),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn coefficient_budget_enforced() {
        assert!(AdditiveObservable::new(vec![[0.0, 0.0, 1.5]]).is_err());
        assert!(AdditiveObservable::new(vec![[0.6, 0.0, 0.8]]).is_ok());
    }

    #[test]
    fn expectations() {
        let up = crate::states::PureState::new(4, ComplexVector::basis(16, 15)).unwrap();
        assert_close(
            expectation(&AdditiveObservable::m_z(4), &up).unwrap(),
            4.0,
            1e-14,
        );
        assert_close(
            expectation(&AdditiveObservable::m_z(4), &make_psi1(4).unwrap()).unwrap(),
            -2.0,
            1e-14,
        );
        assert_close(
            expectation(&AdditiveObservable::m_z(4), &make_ex1(4).unwrap()).unwrap(),
            0.0,
            1e-14,
        );
        assert_close(
            expectation(
                &AdditiveObservable::m_z(4),
                &MixedState::maximally_mixed(4).unwrap(),
            )
            .unwrap(),
            0.0,
            0.0,
        );
    }

    #[test]
    fn dense_and_ensemble_expectations_agree() {
        let e = make_ex1(3).unwrap();
        let d = e.to_dense().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let a = AdditiveObservable::new(random_coeffs(3, &mut rng)).unwrap();
            assert_close(
                expectation(&a, &e).unwrap(),
                expectation(&a, &d).unwrap(),
                1e-12,
            );
        }
        let p = make_product(3, 2).unwrap();
        let pd = MixedState::dense(3, p.to_density_matrix().unwrap()).unwrap();
        let a = AdditiveObservable::new(random_coeffs(3, &mut rng)).unwrap();
        assert_close(
            expectation(&a, &p).unwrap(),
            expectation(&a, &pd).unwrap(),
            1e-12,
        );
    }

    #[test]
    fn variances() {
        let mz = AdditiveObservable::m_z(4);
        assert_close(variance(&mz, &make_cat(4).unwrap()).unwrap(), 16.0, 1e-12);
        assert_close(variance(&mz, &make_psi1(4).unwrap()).unwrap(), 12.0, 1e-12);
        let up = crate::states::PureState::new(4, ComplexVector::basis(16, 15)).unwrap();
        assert_close(variance(&mz, &up).unwrap(), 0.0, 1e-12);
    }

    #[test]
    fn covariance_of_cat() {
        let v = covariance_matrix(&make_cat(2).unwrap()).unwrap();
        assert_close(v.get(0, Axis::Z, 1, Axis::Z), 1.0, 1e-14);
        let v4 = covariance_matrix(&make_cat(4).unwrap()).unwrap();
        let (top, vec) = v4.top_eigenpair().unwrap();
        assert_close(top, 4.0, 1e-12);
        // uniform in the z components, zero elsewhere
        for l in 0..4 {
            assert_close(vec[3 * l + 2].abs(), 0.5, 1e-10);
            assert_close(vec[3 * l].abs() + vec[3 * l + 1].abs(), 0.0, 1e-10);
        }
        let all_z: Vec<f64> = (0..4).flat_map(|_| [0.0, 0.0, 1.0]).collect();
        assert_close(v4.quadratic_form(&all_z), 16.0, 1e-12);
    }

    #[test]
    fn covariance_of_product_is_block_diagonal() {
        let v = covariance_matrix(&make_product(4, 3).unwrap()).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if a == b {
                    continue;
                }
                for x in Axis::ALL {
                    for y in Axis::ALL {
                        assert!(v.get(a, x, b, y).abs() < 1e-12);
                    }
                }
            }
        }
        assert!(v.min_eigenvalue().unwrap() > -1e-9);
    }

    #[test]
    fn indistinguishability_cases() {
        let cat = make_cat(4).unwrap();
        assert_eq!(
            additive_indistinguishability(&cat, &cat, 20, 1).unwrap(),
            0.0
        );
        let up = crate::states::PureState::new(4, ComplexVector::basis(16, 15)).unwrap();
        let down = crate::states::PureState::new(4, ComplexVector::basis(16, 0)).unwrap();
        assert_close(
            additive_deviation(&up, &down, &AdditiveObservable::m_z(4)).unwrap(),
            8.0,
            1e-14,
        );
    }

    #[test]
    fn text_roundtrip() {
        let a = AdditiveObservable::new(vec![[0.1, -0.2, 0.3], [0.0, 0.0, 1.0]]).unwrap();
        let text = a.to_text();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(AdditiveObservable::from_text(&text).unwrap(), a);
        assert!(matches!(
            AdditiveObservable::from_text("1 2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn staggered_signs() {
        let s = AdditiveObservable::staggered_z(4);
        let z: Vec<f64> = s.coeffs().iter().map(|c| c[2]).collect();
        assert_eq!(z, vec![-1.0, 1.0, -1.0, 1.0]);
    }
}
