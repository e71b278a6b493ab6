//! CHSH correlation of additive observables on two halves of the system.
//!
//! `C = (AB + A'B - AB' + A'B') / (n/2)²` with `A, A'` on the first `n/2`
//! sites and `B, B'` on the rest. Returns the largest eigenvalue, which is the
//! maximum of `⟨C⟩` over all states.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, symmetric_eigenvalues, HermitianMatrix};
use crate::observables::{apply_local_into, coeff_norm, Axis, Coeffs};
use crate::C64;

/// `2^12 = 4096` is the dense cap.
pub const MAX_CHSH_SITES: usize = 12;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChshChoice {
    /// `A = Σx`, `A' = Σz`, `B = Σ(x+z)/√2`, `B' = Σ(x-z)/√2`
    Canonical,
    /// `A = A' = B = B' = Σz`
    Commuting,
    /// Per-site coefficients for each half, each of length `n/2`.
    Custom {
        a: Vec<Coeffs>,
        a_prime: Vec<Coeffs>,
        b: Vec<Coeffs>,
        b_prime: Vec<Coeffs>,
    },
}

impl ChshChoice {
    fn observables(&self, half: usize) -> Result<[Vec<Coeffs>; 4]> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let rep = |c: Coeffs| vec![c; half];
        let set = match self {
            ChshChoice::Canonical => [
                rep(Axis::X.unit()),
                rep(Axis::Z.unit()),
                rep([r, 0.0, r]),
                rep([r, 0.0, -r]),
            ],
            ChshChoice::Commuting => [
                rep(Axis::Z.unit()),
                rep(Axis::Z.unit()),
                rep(Axis::Z.unit()),
                rep(Axis::Z.unit()),
            ],
            ChshChoice::Custom {
                a,
                a_prime,
                b,
                b_prime,
            } => [a.clone(), a_prime.clone(), b.clone(), b_prime.clone()],
        };
        for obs in &set {
            if obs.len() != half {
                return Err(Error::DimensionMismatch {
                    expected: half,
                    found: obs.len(),
                });
            }
        }
        set.map(|obs| normalize(obs, half))
            .into_iter()
            .collect::<Result<Vec<_>>>()
            .map(|v| v.try_into().expect("four observables"))
    }
}

/// Rescales so that `Σ_l |c_l| = half`.
fn normalize(obs: Vec<Coeffs>, half: usize) -> Result<Vec<Coeffs>> {
    let total: f64 = obs.iter().map(coeff_norm).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidArgument(
            "CHSH observable has zero norm".into(),
        ));
    }
    let s = half as f64 / total;
    Ok(obs
        .into_iter()
        .map(|c| [c[0] * s, c[1] * s, c[2] * s])
        .collect())
}

/// Dense matrix of `Σ_l c_l·σ(l)` on `m` sites.
fn half_matrix(coeffs: &[Coeffs]) -> Mat<C64> {
    let d = 1usize << coeffs.len();
    let mut out = Mat::<C64>::zeros(d, d);
    let mut e = vec![C64::new(0.0, 0.0); d];
    let mut col = vec![C64::new(0.0, 0.0); d];
    for j in 0..d {
        e.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        e[j] = C64::new(1.0, 0.0);
        for (l, c) in coeffs.iter().enumerate() {
            apply_local_into(l, c, &e, &mut col);
        }
        for i in 0..d {
            out[(i, j)] = col[i];
        }
    }
    out
}

pub fn macro_chsh_lambda_max(n: usize, choice: &ChshChoice) -> Result<f64> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "CHSH needs an even, positive site count, got {n}"
        )));
    }
    if n > MAX_CHSH_SITES {
        return Err(Error::Capacity {
            what: "sites for the CHSH operator",
            limit: MAX_CHSH_SITES,
            requested: n,
        });
    }
    let half = n / 2;
    let [a, a_prime, b, b_prime] = choice.observables(half)?;
    let real = [&a, &a_prime, &b, &b_prime]
        .iter()
        .all(|obs| obs.iter().all(|c| c[1] == 0.0));
    let (ma, map_, mb, mbp) = (
        half_matrix(&a),
        half_matrix(&a_prime),
        half_matrix(&b),
        half_matrix(&b_prime),
    );
    let dh = 1usize << half;
    // A(B - B') + A'(B + B')
    let minus = Mat::from_fn(dh, dh, |i, j| mb[(i, j)] - mbp[(i, j)]);
    let plus = Mat::from_fn(dh, dh, |i, j| mb[(i, j)] + mbp[(i, j)]);
    let scale = 1.0 / (half as f64 * half as f64);
    let d = dh * dh;
    let entry = |r: usize, c: usize| {
        let (ia, ib) = (r % dh, r / dh);
        let (ja, jb) = (c % dh, c / dh);
        (ma[(ia, ja)] * minus[(ib, jb)] + map_[(ia, ja)] * plus[(ib, jb)]) * scale
    };
    let values = if real {
        symmetric_eigenvalues(&Mat::from_fn(d, d, |r, c| entry(r, c).re))?
    } else {
        hermitian_eigenvalues(&HermitianMatrix::from_fn(d, entry)?)?
    };
    Ok(*values.last().expect("nonempty spectrum"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsirelson_at_two_sites() {
        let v = macro_chsh_lambda_max(2, &ChshChoice::Canonical).unwrap();
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn commuting_gives_two() {
        for n in [2, 4, 6] {
            let v = macro_chsh_lambda_max(n, &ChshChoice::Commuting).unwrap();
            assert!((v - 2.0).abs() < 1e-12, "n={n}: {v}");
        }
    }

    #[test]
    fn canonical_decreases() {
        let v4 = macro_chsh_lambda_max(4, &ChshChoice::Canonical).unwrap();
        let v6 = macro_chsh_lambda_max(6, &ChshChoice::Canonical).unwrap();
        let v8 = macro_chsh_lambda_max(8, &ChshChoice::Canonical).unwrap();
        assert!((v4 - 2.0).abs() < 1e-10, "{v4}");
        assert!((v6 - 1.7617).abs() < 1e-4, "{v6}");
        assert!((v8 - 1.6583).abs() < 1e-4, "{v8}");
        assert!(v8 < v6 && v6 < v4);
    }

    #[test]
    fn complex_path_agrees() {
        // Rotating every axis about z by 90° maps x to y; the spectrum is unchanged.
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let choice = ChshChoice::Custom {
            a: vec![[0.0, 1.0, 0.0]; 2],
            a_prime: vec![[0.0, 0.0, 1.0]; 2],
            b: vec![[0.0, r, r]; 2],
            b_prime: vec![[0.0, r, -r]; 2],
        };
        let v = macro_chsh_lambda_max(4, &choice).unwrap();
        let w = macro_chsh_lambda_max(4, &ChshChoice::Canonical).unwrap();
        assert!((v - w).abs() < 1e-10);
    }

    #[test]
    fn normalization_applied() {
        let choice = ChshChoice::Custom {
            a: vec![[3.0, 0.0, 0.0]],
            a_prime: vec![[0.0, 0.0, 0.5]],
            b: vec![[1.0, 0.0, 1.0]],
            b_prime: vec![[1.0, 0.0, -1.0]],
        };
        let v = macro_chsh_lambda_max(2, &choice).unwrap();
        assert!((v - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn odd_rejected() {
        assert!(macro_chsh_lambda_max(5, &ChshChoice::Canonical).is_err());
        assert!(macro_chsh_lambda_max(14, &ChshChoice::Canonical).is_err());
    }
}
