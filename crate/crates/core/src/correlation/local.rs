//! `⟨C⟩` assembled from expectation values of products of single-site
//! Hermitian operators.
//!
//! In the product eigenbasis `|x⟩ = ⊗_l |x_l⟩` of `A`,
//! `C = Σ_{x,y} (A_x - A_y)² ⟨x|η|y⟩ |x⟩⟨y|`, and each `|x_l⟩⟨y_l|` splits
//! into `φ' + iφ''` with `φ' = (|x_l⟩⟨y_l| + h.c.)/2` and
//! `φ'' = (|x_l⟩⟨y_l| - h.c.)/2i`. Expanding the tensor product gives
//! `4^N · 2^N` local terms, so this is only for very small systems.

use faer::Mat;

use super::{check_sites, ProjectorSpec};
use crate::error::{Error, Result};
use crate::linalg::inner;
use crate::observables::{coeff_norm, AdditiveObservable, Coeffs};
use crate::states::{density_matrix_of, DensityOperator};
use crate::C64;

pub const MAX_LOCAL_SITES: usize = 4;

type Local = [[C64; 2]; 2];

/// Orthonormal eigenvectors of `c·σ`, as columns `(↓, ↑)`, for eigenvalues
/// `(-r, +r)`.
fn local_eigenbasis(c: &Coeffs) -> ([f64; 2], [[C64; 2]; 2]) {
    let r = coeff_norm(c);
    if r == 0.0 {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        return ([0.0, 0.0], [[one, zero], [zero, one]]);
    }
    let off = C64::new(c[0], c[1]);
    let vec_for = |lambda: f64| {
        // rows of (M - λ) give two candidate null vectors; keep the better one
        let v1 = [off, C64::new(lambda + c[2], 0.0)];
        let v2 = [C64::new(lambda - c[2], 0.0), off.conj()];
        let n1 = (v1[0].norm_sqr() + v1[1].norm_sqr()).sqrt();
        let n2 = (v2[0].norm_sqr() + v2[1].norm_sqr()).sqrt();
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        [v[0] / n, v[1] / n]
    };
    ([-r, r], [vec_for(-r), vec_for(r)])
}

/// `Tr(ρ ⊗_l h_l)`, site `l` on bit `l`.
fn product_expectation(rho: &Mat<C64>, ops: &[Local]) -> C64 {
    let d = rho.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            let mut t = rho[(j, i)];
            for (l, h) in ops.iter().enumerate() {
                t *= h[(i >> l) & 1][(j >> l) & 1];
                if t == C64::new(0.0, 0.0) {
                    break;
                }
            }
            acc += t;
        }
    }
    acc
}

pub fn local_decomposition_expectation(
    a: &AdditiveObservable,
    eta: &ProjectorSpec,
    s: &(impl DensityOperator + ?Sized),
) -> Result<f64> {
    let n = s.n_sites();
    check_sites(a, n)?;
    if n > MAX_LOCAL_SITES {
        return Err(Error::Capacity {
            what: "sites for the local-operator expansion",
            limit: MAX_LOCAL_SITES,
            requested: n,
        });
    }
    let dim = 1usize << n;
    if let Some(v) = eta.vectors().iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: v.len(),
        });
    }
    let rho = density_matrix_of(s)?;
    let bases: Vec<_> = a.coeffs().iter().map(local_eigenbasis).collect();

    // product eigenvectors |x⟩ and eigenvalues A_x
    let product_vec = |x: usize| -> Vec<C64> {
        (0..dim)
            .map(|i| {
                (0..n)
                    .map(|l| bases[l].1[(x >> l) & 1][(i >> l) & 1])
                    .product::<C64>()
            })
            .collect()
    };
    let eigvecs: Vec<Vec<C64>> = (0..dim).map(product_vec).collect();
    let eigvals: Vec<f64> = (0..dim)
        .map(|x| (0..n).map(|l| bases[l].0[(x >> l) & 1]).sum())
        .collect();
    // u_x^j = ⟨x|φ_j⟩
    let u: Vec<Vec<C64>> = eta
        .vectors()
        .iter()
        .map(|phi| eigvecs.iter().map(|e| inner(e, phi.as_slice())).collect())
        .collect();

    let i_unit = C64::new(0.0, 1.0);
    let mut total = C64::new(0.0, 0.0);
    let mut ops = vec![[[C64::new(0.0, 0.0); 2]; 2]; n];
    for x in 0..dim {
        for y in 0..dim {
            let gap = eigvals[x] - eigvals[y];
            if gap == 0.0 {
                continue;
            }
            let weight: C64 = u.iter().map(|uj| uj[x] * uj[y].conj()).sum::<C64>() * (gap * gap);
            if weight.norm() == 0.0 {
                continue;
            }
            // local outer products |x_l⟩⟨y_l| and their Hermitian parts
            let mut parts = Vec::with_capacity(n);
            for l in 0..n {
                let ket = bases[l].1[(x >> l) & 1];
                let bra = bases[l].1[(y >> l) & 1];
                let outer: Local = [
                    [ket[0] * bra[0].conj(), ket[0] * bra[1].conj()],
                    [ket[1] * bra[0].conj(), ket[1] * bra[1].conj()],
                ];
                let mut re = [[C64::new(0.0, 0.0); 2]; 2];
                let mut im = [[C64::new(0.0, 0.0); 2]; 2];
                for p in 0..2 {
                    for q in 0..2 {
                        re[p][q] = (outer[p][q] + outer[q][p].conj()) * 0.5;
                        im[p][q] = (outer[p][q] - outer[q][p].conj()) / (i_unit * 2.0);
                    }
                }
                parts.push((re, im));
            }
            for subset in 0..dim {
                for (l, op) in ops.iter_mut().enumerate() {
                    *op = if (subset >> l) & 1 == 1 {
                        parts[l].1
                    } else {
                        parts[l].0
                    };
                }
                let phase = i_unit.powi(subset.count_ones() as i32);
                total += weight * phase * product_expectation(&rho, &ops);
            }
        }
    }
    Ok(total.re)
}

#[cfg(test)]
mod tests {
    use super::super::c_expectation;
    use super::*;
    use crate::linalg::ComplexVector;
    use crate::states::{make_cat, make_product, PureState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_vector(dim: usize, seed: u64) -> ComplexVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<C64> = (0..dim)
            .map(|_| {
                C64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect();
        ComplexVector::new(v).unwrap().normalized().unwrap()
    }

    #[test]
    fn cat_two_sites() {
        let s = make_cat(2).unwrap();
        let eta = ProjectorSpec::rank_one(s.vector()).unwrap();
        let v = local_decomposition_expectation(&AdditiveObservable::m_z(2), &eta, &s).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn random_three_sites_matches_direct() {
        let s = PureState::new(3, random_vector(8, 11)).unwrap();
        let eta = ProjectorSpec::rank_one(&random_vector(8, 12)).unwrap();
        let a = AdditiveObservable::m_z(3);
        let direct = c_expectation(&a, &eta, &s).unwrap();
        let local = local_decomposition_expectation(&a, &eta, &s).unwrap();
        assert!((direct - local).abs() < 1e-8, "{direct} vs {local}");
    }

    #[test]
    fn general_axes_match_direct() {
        let s = make_product(3, 4).unwrap();
        let a = AdditiveObservable::new(vec![[0.3, -0.5, 0.2], [0.0, 0.0, -1.0], [0.6, 0.6, 0.0]])
            .unwrap();
        let pair =
            crate::linalg::orthonormalize(&[random_vector(8, 1), random_vector(8, 2)], 1e-10)
                .unwrap();
        let eta = ProjectorSpec::new(pair).unwrap();
        let direct = c_expectation(&a, &eta, &s).unwrap();
        let local = local_decomposition_expectation(&a, &eta, &s).unwrap();
        assert!((direct - local).abs() < 1e-8, "{direct} vs {local}");
    }

    #[test]
    fn single_sector_eta_vanishes() {
        // η inside one eigenspace of A: every (A_x - A_y)² factor on its support is zero.
        let s = make_cat(3).unwrap();
        let v = ComplexVector::from_real(&[0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let eta = ProjectorSpec::rank_one(&v).unwrap();
        let r = local_decomposition_expectation(&AdditiveObservable::m_z(3), &eta, &s).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn cap_enforced() {
        let s = make_cat(5).unwrap();
        let eta = ProjectorSpec::rank_one(s.vector()).unwrap();
        assert!(matches!(
            local_decomposition_expectation(&AdditiveObservable::m_z(5), &eta, &s),
            Err(Error::Capacity { .. })
        ));
    }
}
