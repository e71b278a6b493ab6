//! Complex linear algebra over the spin Hilbert space.
//!
//! Vectors are plain amplitude lists. Hermitian operators come in two
//! representations: a dense `dim × dim` array, or a factored form `Q B Q†`
//! where `Q` is an orthonormal set of full-space vectors and `B` is a small
//! Hermitian block. The factored form is what keeps low-rank ensembles
//! tractable at sizes where a dense matrix would not fit in memory.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::C64;

/// Relative tolerance for the Hermiticity check.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Tolerance for orthonormality of vectors produced by this module.
pub const ORTHONORMAL_TOL: f64 = 1e-12;
/// Tolerance used when validating caller-supplied orthonormal sets.
pub const ORTHONORMAL_CHECK_TOL: f64 = 1e-10;
/// Eigenvalues within this fraction of the spectral radius count as zero.
pub const ZERO_EIGENVALUE_REL: f64 = 1e-10;
/// Largest dimension for which dense matrices are built.
pub const DENSE_DIM_CAP: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector(Vec<C64>);

impl ComplexVector {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("empty vector".into()));
        }
        Ok(Self(entries))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); dim.max(1)])
    }

    /// The computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[index] = C64::new(1.0, 0.0);
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn dot(&self, other: &ComplexVector) -> C64 {
        inner(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: C64) -> ComplexVector {
        Self(self.0.iter().map(|z| z * factor).collect())
    }

    /// `self += factor · other`
    pub fn axpy(&mut self, factor: C64, other: &ComplexVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    pub fn normalized(&self) -> Result<ComplexVector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidArgument(
                "cannot normalize a zero vector".into(),
            ));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }
}

impl From<ComplexVector> for Vec<C64> {
    fn from(v: ComplexVector) -> Self {
        v.0
    }
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Clone, Debug)]
enum Repr {
    Dense(Mat<C64>),
    Factored {
        basis: Vec<ComplexVector>,
        block: Mat<C64>,
    },
}

/// A Hermitian operator, either dense or factored as `Q B Q†`.
#[derive(Clone, Debug)]
pub struct HermitianMatrix {
    dim: usize,
    repr: Repr,
}

/// Largest `|m_ij - conj(m_ji)|` divided by the largest entry magnitude.
pub fn relative_asymmetry(m: &Mat<C64>) -> f64 {
    let n = m.nrows();
    let mut scale = 0.0_f64;
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(m[(i, j)].norm());
            if i <= j {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

fn symmetrize(m: &mut Mat<C64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..=j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

impl HermitianMatrix {
    /// Validates Hermiticity (relative to the largest entry) and symmetrizes.
    pub fn from_dense(mut m: Mat<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let asymmetry = relative_asymmetry(&m);
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NotHermitian {
                asymmetry,
                tolerance: SYMMETRY_TOL,
            });
        }
        symmetrize(&mut m);
        Ok(Self {
            dim: m.nrows(),
            repr: Repr::Dense(m),
        })
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        Self::from_dense(Mat::from_fn(dim, dim, f))
    }

    /// `Σ_jk |basis_j⟩ block_jk ⟨basis_k|` on a space of dimension `dim`.
    pub fn from_factored(
        dim: usize,
        basis: Vec<ComplexVector>,
        mut block: Mat<C64>,
    ) -> Result<Self> {
        if block.nrows() != basis.len() || block.ncols() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: block.nrows(),
            });
        }
        if let Some(v) = basis.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        let deviation = orthonormality_deviation(&basis);
        if deviation > ORTHONORMAL_CHECK_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        let asymmetry = relative_asymmetry(&block);
        if asymmetry > SYMMETRY_TOL {
            return Err(Error::NotHermitian {
                asymmetry,
                tolerance: SYMMETRY_TOL,
            });
        }
        symmetrize(&mut block);
        Ok(Self {
            dim,
            repr: Repr::Factored { basis, block },
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            repr: Repr::Factored {
                basis: Vec::new(),
                block: Mat::zeros(0, 0),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_factored(&self) -> bool {
        matches!(self.repr, Repr::Factored { .. })
    }

    /// Rank bound of the representation: `dim` for dense, block size for factored.
    pub fn support_dim(&self) -> usize {
        match &self.repr {
            Repr::Dense(_) => self.dim,
            Repr::Factored { basis, .. } => basis.len(),
        }
    }

    pub fn dense(&self) -> Option<&Mat<C64>> {
        match &self.repr {
            Repr::Dense(m) => Some(m),
            Repr::Factored { .. } => None,
        }
    }

    pub fn factors(&self) -> Option<(&[ComplexVector], &Mat<C64>)> {
        match &self.repr {
            Repr::Dense(_) => None,
            Repr::Factored { basis, block } => Some((basis, block)),
        }
    }

    pub fn to_dense(&self) -> Result<Mat<C64>> {
        if self.dim > DENSE_DIM_CAP {
            return Err(Error::Capacity {
                what: "dense matrix dimension",
                limit: DENSE_DIM_CAP,
                requested: self.dim,
            });
        }
        Ok(match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Factored { basis, block } => {
                let r = basis.len();
                Mat::from_fn(self.dim, self.dim, |i, j| {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..r {
                        let left = basis[a].as_slice()[i];
                        if left == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for b in 0..r {
                            acc += left * block[(a, b)] * basis[b].as_slice()[j].conj();
                        }
                    }
                    acc
                })
            }
        })
    }

    pub fn apply(&self, v: &ComplexVector) -> Result<ComplexVector> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let x = v.as_slice();
        let out = match &self.repr {
            Repr::Dense(m) => (0..self.dim)
                .map(|i| (0..self.dim).map(|j| m[(i, j)] * x[j]).sum())
                .collect(),
            Repr::Factored { basis, block } => {
                let coeffs: Vec<C64> = basis.iter().map(|b| inner(b.as_slice(), x)).collect();
                let mut out = vec![C64::new(0.0, 0.0); self.dim];
                for (a, b) in basis.iter().enumerate() {
                    let c: C64 = (0..coeffs.len()).map(|k| block[(a, k)] * coeffs[k]).sum();
                    for (o, bi) in out.iter_mut().zip(b.as_slice()) {
                        *o += c * bi;
                    }
                }
                out
            }
        };
        Ok(ComplexVector(out))
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Dense(m) => (0..self.dim).map(|i| m[(i, i)].re).sum(),
            Repr::Factored { block, .. } => (0..block.nrows()).map(|i| block[(i, i)].re).sum(),
        }
    }

    /// `⟨v|M|v⟩`
    pub fn quadratic_form(&self, v: &ComplexVector) -> Result<f64> {
        Ok(v.dot(&self.apply(v)?).re)
    }
}

/// Eigenpairs with eigenvalues in ascending order.
///
/// For a factored matrix only the eigenpairs inside the factor subspace are
/// returned; the complement carries eigenvalue zero implicitly.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Vec<ComplexVector>,
}

impl EigenDecomposition {
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

fn dense_eig(m: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    match m.self_adjoint_eigen(Side::Lower) {
        Ok(evd) => {
            let s = evd.S().column_vector();
            Ok(((0..n).map(|i| s[i].re).collect(), evd.U().to_owned()))
        }
        Err(_) => shifted_eig(m),
    }
}

/// The QR iteration occasionally stalls on very sparse input with exact
/// zeros. Shifting the diagonal keeps the eigenvectors and moves every
/// eigenvalue by the same amount, which is enough to get it going again.
fn shifted_eig(m: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = m.nrows();
    let scale = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .fold(0.0_f64, |acc, (i, j)| acc.max(m[(i, j)].norm()));
    let mut last = String::new();
    for factor in [1.0, 0.37, 2.9] {
        let shift = factor * (1.0 + scale);
        let shifted = Mat::from_fn(
            n,
            n,
            |i, j| {
                if i == j {
                    m[(i, j)] + shift
                } else {
                    m[(i, j)]
                }
            },
        );
        match shifted.self_adjoint_eigen(Side::Lower) {
            Ok(evd) => {
                let s = evd.S().column_vector();
                return Ok((
                    (0..n).map(|i| s[i].re - shift).collect(),
                    evd.U().to_owned(),
                ));
            }
            Err(e) => last = format!("{e:?}"),
        }
    }
    Err(Error::Eigensolver(last))
}

pub fn hermitian_eig(m: &HermitianMatrix) -> Result<EigenDecomposition> {
    match &m.repr {
        Repr::Dense(d) => {
            let (values, u) = dense_eig(d)?;
            let vectors = (0..values.len())
                .map(|k| ComplexVector((0..m.dim).map(|i| u[(i, k)]).collect()))
                .collect();
            Ok(EigenDecomposition { values, vectors })
        }
        Repr::Factored { basis, block } => {
            let (values, u) = dense_eig(block)?;
            let vectors = (0..values.len())
                .map(|k| {
                    let mut v = ComplexVector(vec![C64::new(0.0, 0.0); m.dim]);
                    for (a, b) in basis.iter().enumerate() {
                        v.axpy(u[(a, k)], b);
                    }
                    v
                })
                .collect();
            Ok(EigenDecomposition { values, vectors })
        }
    }
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(m: &HermitianMatrix) -> Result<Vec<f64>> {
    let target = match &m.repr {
        Repr::Dense(d) => d,
        Repr::Factored { block, .. } => block,
    };
    if target.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut values = target
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut values = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenpairs of a real symmetric matrix; eigenvectors are the columns.
pub fn symmetric_eig(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = m.nrows();
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    Ok(((0..n).map(|i| s[i]).collect(), evd.U().to_owned()))
}

/// Threshold below which an eigenvalue is treated as zero.
///
/// `floor` is an absolute scale supplied by the caller; the relative part
/// alone would classify rounding noise as signal when the matrix vanishes.
pub fn zero_threshold(values: &[f64], floor: f64) -> f64 {
    let radius = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (ZERO_EIGENVALUE_REL * radius).max(floor)
}

pub fn orthonormality_deviation(vs: &[ComplexVector]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, a) in vs.iter().enumerate() {
        for (j, b) in vs.iter().enumerate().skip(i) {
            let g = a.dot(b);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
///
/// An input is dropped when its residual after projection is below `tol`
/// times its own norm. Empty input yields empty output.
pub fn orthonormalize(vs: &[ComplexVector], tol: f64) -> Result<Vec<ComplexVector>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let Some(first) = vs.first() else {
        return Ok(Vec::new());
    };
    let dim = first.len();
    let mut out: Vec<ComplexVector> = Vec::with_capacity(vs.len());
    for v in vs {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        let original = v.norm();
        if original == 0.0 {
            continue;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&r);
                r.axpy(-c, q);
            }
        }
        let residual = r.norm();
        if residual < tol * original {
            continue;
        }
        out.push(r.scaled(C64::new(1.0 / residual, 0.0)));
    }
    Ok(out)
}

/// The block `B_jk = ⟨basis_j| m |basis_k⟩`, symmetrized.
pub fn project_into_subspace(
    m: &HermitianMatrix,
    basis: &[ComplexVector],
) -> Result<HermitianMatrix> {
    let images: Vec<ComplexVector> = basis.iter().map(|b| m.apply(b)).collect::<Result<_>>()?;
    let r = basis.len();
    let mut block = Mat::from_fn(r, r, |j, k| basis[j].dot(&images[k]));
    symmetrize(&mut block);
    Ok(HermitianMatrix {
        dim: r,
        repr: Repr::Dense(block),
    })
}
