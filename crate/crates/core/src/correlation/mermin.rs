//! Mermin's many-point correlation, used as a baseline.
//!
//! `raw = |Tr(ρ ⊗_l (σx + iσy))|`. Since `σx + iσy = 2|↑⟩⟨↓|` in our basis,
//! only the `⟨↓…↓|ρ|↑…↑⟩` element survives and `raw = 2^N |ρ_{↓…↓, ↑…↑}|`.
//! Taking the modulus is the same as maximizing over a global rotation of
//! the measurement axes about `z`.

use serde::{Deserialize, Serialize};

use super::conversion::TwoBranchState;
use crate::states::{all_up, Density, DensityOperator};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MerminReport {
    pub n_sites: usize,
    pub raw: f64,
    /// `2^{(N-1)/2}`, used for every `N`.
    pub lhv_bound: f64,
    pub ratio: f64,
    /// The bound above is the odd-`N` one; for even `N` it is only indicative.
    pub even_n: bool,
}

impl MerminReport {
    fn new(n_sites: usize, raw: f64) -> Self {
        let lhv_bound = 2f64.powf((n_sites as f64 - 1.0) / 2.0);
        Self {
            n_sites,
            raw,
            lhv_bound,
            ratio: raw / lhv_bound,
            even_n: n_sites.is_multiple_of(2),
        }
    }
}

pub fn mermin_score(s: &(impl DensityOperator + ?Sized)) -> MerminReport {
    let n = s.n_sites();
    let up = all_up(n);
    let coherence = match s.density() {
        Density::Uniform => 0.0,
        Density::Dense(rho) => rho[(0, up)].norm(),
        Density::Ensemble { weights, states } => weights
            .iter()
            .zip(states)
            .map(|(w, p)| p.amplitudes()[0] * p.amplitudes()[up].conj() * *w)
            .sum::<crate::C64>()
            .norm(),
    };
    MerminReport::new(n, 2f64.powi(n as i32) * coherence)
}

/// Score of a two-branch state after relabeling each site so that the
/// branches become `|↓…↓⟩` and `|↑…↑⟩`; equals `2^N |ab|`.
pub fn mermin_two_branch(s: &TwoBranchState) -> MerminReport {
    MerminReport::new(
        s.n_sites(),
        2f64.powi(s.n_sites() as i32) * (s.a() * s.b()).norm(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_cat, make_ex1, make_psi1};

    #[test]
    fn cat_five() {
        let r = mermin_score(&make_cat(5).unwrap());
        assert!((r.raw - 16.0).abs() < 1e-12);
        assert!((r.lhv_bound - 4.0).abs() < 1e-12);
        assert!((r.ratio - 4.0).abs() < 1e-12);
        assert!(!r.even_n);
    }

    #[test]
    fn psi1_four() {
        let r = mermin_score(&make_psi1(4).unwrap());
        assert!((r.ratio - 6f64.sqrt()).abs() < 1e-12);
        assert!(r.even_n);
        let t = mermin_two_branch(&TwoBranchState::psi1(4).unwrap());
        assert!((t.raw - r.raw).abs() < 1e-12);
    }

    #[test]
    fn ex1_has_no_coherence() {
        assert_eq!(mermin_score(&make_ex1(4).unwrap()).raw, 0.0);
    }

    #[test]
    fn dense_matches_ensemble() {
        let s = make_psi1(5).unwrap();
        let d = crate::states::MixedState::dense(5, s.to_density_matrix().unwrap()).unwrap();
        assert!((mermin_score(&s).raw - mermin_score(&d).raw).abs() < 1e-12);
    }
}
