//! Converting a lopsided two-branch superposition into a cat state with one
//! single-site projective measurement.
//!
//! For `a|B₁⟩ + b|B₂⟩` with branches that differ on every site, measuring
//! site `l` along `|m⟩ = |b|·|B₁(l)⟩ + |a|·|B₂(l)⟩` leaves the other sites in
//! `(a|b| |B₁'⟩ + b|a| |B₂'⟩)/√p`, whose branches have equal weight. The
//! success probability is `p = 2|a|²|b|²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::states::{all_up, PureState, MAX_VECTOR_SITES};
use crate::C64;

/// Amplitudes below this (relative to the largest) count as absent.
const AMPLITUDE_CUT: f64 = 1e-12;

/// `a|pattern₁⟩ + b|pattern₂⟩` with complementary bit patterns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBranchState {
    n_sites: usize,
    pattern1: u64,
    a: C64,
    b: C64,
}

impl TwoBranchState {
    pub fn new(n_sites: usize, pattern1: u64, a: C64, b: C64) -> Result<Self> {
        if n_sites == 0 || n_sites > 63 {
            return Err(Error::InvalidArgument(format!(
                "two-branch state needs 1..=63 sites, got {n_sites}"
            )));
        }
        if pattern1 >> n_sites != 0 {
            return Err(Error::InvalidArgument(format!(
                "pattern {pattern1:#b} has bits beyond {n_sites} sites"
            )));
        }
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("two-branch amplitudes vanish".into()));
        }
        Ok(Self {
            n_sites,
            pattern1,
            a: a / norm,
            b: b / norm,
        })
    }

    pub fn cat(n: usize) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(n, 0, C64::new(h, 0.0), C64::new(h, 0.0))
    }

    pub fn psi1(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "psi1 needs n >= 2, got {n}"
            )));
        }
        let nf = n as f64;
        Self::new(
            n,
            0,
            C64::new((1.0 - 1.0 / nf).sqrt(), 0.0),
            C64::new((1.0 / nf).sqrt(), 0.0),
        )
    }

    /// Recognizes a vector with exactly two nonzero amplitudes on
    /// complementary basis states.
    pub fn from_pure(s: &PureState) -> Result<Self> {
        let amps = s.amplitudes();
        let largest = amps.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let support: Vec<usize> = (0..amps.len())
            .filter(|&i| amps[i].norm() > AMPLITUDE_CUT * largest)
            .collect();
        if support.len() != 2 {
            return Err(Error::NotTwoBranch(format!(
                "{} nonzero amplitudes, need 2",
                support.len()
            )));
        }
        let (p1, p2) = (support[0], support[1]);
        if p1 ^ p2 != all_up(s.n_sites()) {
            return Err(Error::NotTwoBranch(format!(
                "branches {p1:#b} and {p2:#b} agree on some site"
            )));
        }
        Self::new(s.n_sites(), p1 as u64, amps[p1], amps[p2])
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn pattern1(&self) -> u64 {
        self.pattern1
    }

    pub fn pattern2(&self) -> u64 {
        self.pattern1 ^ ((1u64 << self.n_sites) - 1)
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn b(&self) -> C64 {
        self.b
    }

    pub fn to_pure(&self) -> Result<PureState> {
        if self.n_sites > MAX_VECTOR_SITES {
            return Err(Error::Capacity {
                what: "sites for a state vector",
                limit: MAX_VECTOR_SITES,
                requested: self.n_sites,
            });
        }
        let mut v = vec![C64::new(0.0, 0.0); 1 << self.n_sites];
        v[self.pattern1 as usize] = self.a;
        v[self.pattern2() as usize] = self.b;
        PureState::new(self.n_sites, ComplexVector::new(v)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConversionOutcome {
    pub site: usize,
    /// Measurement vector on the measured site, `(↓, ↑)` components.
    pub measurement: [C64; 2],
    pub success_prob: f64,
    /// State of the remaining `N-1` sites on success.
    pub post_state: TwoBranchState,
}

/// Drops bit `bit` from `x`, shifting the higher bits down.
fn remove_bit(x: u64, bit: usize) -> u64 {
    let low = x & ((1u64 << bit) - 1);
    let high = (x >> (bit + 1)) << bit;
    low | high
}

/// Optimal single-site measurement at `site` (1-based).
pub fn single_site_conversion(s: &TwoBranchState, site: usize) -> Result<ConversionOutcome> {
    let n = s.n_sites();
    if site == 0 || site > n {
        return Err(Error::InvalidArgument(format!(
            "site {site} outside 1..={n}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "conversion needs at least two sites".into(),
        ));
    }
    let bit = site - 1;
    let (na, nb) = (s.a.norm(), s.b.norm());
    // |m⟩ puts weight |b| on branch 1's local state and |a| on branch 2's.
    let branch1_up = (s.pattern1 >> bit) & 1 == 1;
    let mut measurement = [C64::new(0.0, 0.0); 2];
    measurement[usize::from(branch1_up)] = C64::new(nb, 0.0);
    measurement[usize::from(!branch1_up)] = C64::new(na, 0.0);

    let success_prob = 2.0 * na * na * nb * nb;
    let post_state = if success_prob > 0.0 {
        let root = success_prob.sqrt();
        TwoBranchState::new(
            n - 1,
            remove_bit(s.pattern1, bit),
            s.a * nb / root,
            s.b * na / root,
        )?
    } else {
        return Err(Error::NotTwoBranch("one branch has zero amplitude".into()));
    };
    Ok(ConversionOutcome {
        site,
        measurement,
        success_prob,
        post_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_cat, make_psi1, make_psi2};

    #[test]
    fn psi1_probabilities() {
        let r = single_site_conversion(&TwoBranchState::psi1(4).unwrap(), 2).unwrap();
        assert!((r.success_prob - 0.375).abs() < 1e-15);
        let r16 = single_site_conversion(&TwoBranchState::psi1(16).unwrap(), 1).unwrap();
        assert!((r16.success_prob - 30.0 / 256.0).abs() < 1e-15);
        assert!(r16.success_prob < r.success_prob);
    }

    #[test]
    fn post_state_is_balanced() {
        let r = single_site_conversion(&TwoBranchState::psi1(7).unwrap(), 3).unwrap();
        let p = r.post_state;
        assert_eq!(p.n_sites(), 6);
        assert!((p.a().norm() - p.b().norm()).abs() < 1e-12);
        assert_eq!(p.pattern1(), 0);
    }

    #[test]
    fn cat_stays_cat() {
        let r = single_site_conversion(&TwoBranchState::cat(4).unwrap(), 4).unwrap();
        assert!((r.success_prob - 0.5).abs() < 1e-15);
        assert_eq!(r.post_state, TwoBranchState::cat(3).unwrap());
    }

    #[test]
    fn measurement_projects_correctly() {
        // Apply ⟨m| on the site directly and compare with the closed form.
        let s = TwoBranchState::new(3, 0b101, C64::new(0.3, 0.4), C64::new(0.0, -0.6)).unwrap();
        let r = single_site_conversion(&s, 2).unwrap();
        let v = s.to_pure().unwrap();
        let amps = v.amplitudes();
        let mut rest = [C64::new(0.0, 0.0); 4];
        for (i, z) in amps.iter().enumerate() {
            let local = (i >> 1) & 1;
            rest[remove_bit(i as u64, 1) as usize] += r.measurement[local].conj() * z;
        }
        let p: f64 = rest.iter().map(|z| z.norm_sqr()).sum();
        assert!((p - r.success_prob).abs() < 1e-14);
        let post = r.post_state.to_pure().unwrap();
        for (x, y) in rest.iter().zip(post.amplitudes()) {
            assert!((x / p.sqrt() - y).norm() < 1e-12);
        }
    }

    #[test]
    fn recognizes_two_branch_vectors() {
        let t = TwoBranchState::from_pure(&make_psi1(5).unwrap()).unwrap();
        assert_eq!(t, TwoBranchState::psi1(5).unwrap());
        assert!(TwoBranchState::from_pure(&make_cat(3).unwrap()).is_ok());
        assert!(matches!(
            TwoBranchState::from_pure(&make_psi2(4).unwrap()),
            Err(Error::NotTwoBranch(_))
        ));
        let s = PureState::from_amplitudes(vec![
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(
            TwoBranchState::from_pure(&s),
            Err(Error::NotTwoBranch(_))
        ));
    }
}
