//! Amplitude algebra in the neutral-kaon quasi-spin space.
//!
//! States are stored in the lifetime basis {K_S, K_L}, where free evolution
//! is diagonal. The strangeness basis {K0, K0bar} is reached through the
//! CP-conserving dictionary (CP violation neglected, so the bases are
//! orthonormal):
//!
//! ```text
//! K_S = (K0 + K0bar)/sqrt(2)        K0    = (K_S + K_L)/sqrt(2)
//! K_L = (K0 - K0bar)/sqrt(2)        K0bar = (K_S - K_L)/sqrt(2)
//! ```
//!
//! This one convention is used everywhere a mixed-basis amplitude is formed.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this squared norm a state is considered fully decayed.
pub const NORM_SQ_FLOOR: f64 = 1e-30;

/// Γ_S / Γ_L.
pub const WIDTH_RATIO_S_OVER_L: f64 = 579.0;

/// Which beam a kaon travels along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Single-kaon amplitudes over {K_S, K_L}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleKaonState {
    pub a_s: Complex64,
    pub a_l: Complex64,
}

impl SingleKaonState {
    pub const K_S: Self = Self::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    pub const K_L: Self = Self::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    pub const K0: Self = Self::new(
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
    );
    pub const K0BAR: Self = Self::new(
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(-FRAC_1_SQRT_2, 0.0),
    );

    pub const fn new(a_s: Complex64, a_l: Complex64) -> Self {
        Self { a_s, a_l }
    }

    pub fn norm_sq(&self) -> f64 {
        self.a_s.norm_sqr() + self.a_l.norm_sqr()
    }

    /// Amplitudes over {K0, K0bar}.
    pub fn strangeness_amplitudes(&self) -> [Complex64; 2] {
        [
            (self.a_s + self.a_l) * FRAC_1_SQRT_2,
            (self.a_s - self.a_l) * FRAC_1_SQRT_2,
        ]
    }

    pub fn from_strangeness(k0: Complex64, k0bar: Complex64) -> Self {
        Self::new((k0 + k0bar) * FRAC_1_SQRT_2, (k0 - k0bar) * FRAC_1_SQRT_2)
    }

    /// Tensor product `self ⊗ right`.
    pub fn tensor(&self, right: &SingleKaonState) -> PairState {
        PairState::new([
            self.a_s * right.a_s,
            self.a_s * right.a_l,
            self.a_l * right.a_s,
            self.a_l * right.a_l,
        ])
    }
}

/// Two-kaon amplitudes `(c_SS, c_SL, c_LS, c_LL)`, ordered left ⊗ right.
///
/// The norm is not required to be one: free propagation removes decayed
/// pairs and shrinks it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    pub amps: [Complex64; 4],
}

/// Index into [`PairState::amps`] for lifetime-basis labels (0 = S, 1 = L).
#[inline]
pub(crate) const fn idx(left: usize, right: usize) -> usize {
    2 * left + right
}

impl PairState {
    pub const fn new(amps: [Complex64; 4]) -> Self {
        Self { amps }
    }

    pub fn from_real(re: [f64; 4]) -> Self {
        Self::new(re.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn zero() -> Self {
        Self::from_real([0.0; 4])
    }

    /// The antisymmetric state (K_S K_L - K_L K_S)/sqrt(2).
    pub fn singlet() -> Self {
        Self::from_real([0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0])
    }

    pub fn c_ss(&self) -> Complex64 {
        self.amps[0]
    }
    pub fn c_sl(&self) -> Complex64 {
        self.amps[1]
    }
    pub fn c_ls(&self) -> Complex64 {
        self.amps[2]
    }
    pub fn c_ll(&self) -> Complex64 {
        self.amps[3]
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::new(self.amps.map(|c| c * factor))
    }

    /// Exchange the roles of the two beams: `c'_ij = c_ji`.
    pub fn swap_sides(&self) -> Self {
        let [ss, sl, ls, ll] = self.amps;
        Self::new([ss, ls, sl, ll])
    }

    /// Largest absolute per-amplitude difference.
    pub fn max_abs_diff(&self, other: &PairState) -> f64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Apply a single-kaon linear map to one side. `map` sends the basis
    /// amplitudes `(a_S, a_L)` of that side to new ones.
    pub fn apply_one_side<F>(&self, side: Side, map: F) -> Self
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64),
    {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        match side {
            Side::Right => {
                for left in 0..2 {
                    let (s, l) = map(self.amps[idx(left, 0)], self.amps[idx(left, 1)]);
                    out[idx(left, 0)] = s;
                    out[idx(left, 1)] = l;
                }
            }
            Side::Left => {
                for right in 0..2 {
                    let (s, l) = map(self.amps[idx(0, right)], self.amps[idx(1, right)]);
                    out[idx(0, right)] = s;
                    out[idx(1, right)] = l;
                }
            }
        }
        Self::new(out)
    }

    /// Rewrite over {K0, K0bar} ⊗ {K0, K0bar}.
    pub fn to_strangeness(&self) -> StrangenessState {
        let to_strange =
            |s: Complex64, l: Complex64| ((s + l) * FRAC_1_SQRT_2, (s - l) * FRAC_1_SQRT_2);
        let mixed = self
            .apply_one_side(Side::Left, to_strange)
            .apply_one_side(Side::Right, to_strange);
        StrangenessState { amps: mixed.amps }
    }
}

/// Two-kaon amplitudes `(c_00, c_0B, c_B0, c_BB)` in the strangeness basis,
/// where `0` is K0 and `B` is K0bar. A view on a [`PairState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrangenessState {
    pub amps: [Complex64; 4],
}

impl StrangenessState {
    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn to_lifetime(&self) -> PairState {
        // The single-kaon change of basis is its own inverse.
        let to_life = |k0: Complex64, k0bar: Complex64| {
            ((k0 + k0bar) * FRAC_1_SQRT_2, (k0 - k0bar) * FRAC_1_SQRT_2)
        };
        PairState::new(self.amps)
            .apply_one_side(Side::Left, to_life)
            .apply_one_side(Side::Right, to_life)
    }
}

pub fn basis_to_strangeness(s: &PairState) -> StrangenessState {
    s.to_strangeness()
}

/// ⟨a|b⟩, conjugate-linear in `a`.
pub fn inner_product(a: &PairState, b: &PairState) -> Complex64 {
    a.amps
        .iter()
        .zip(b.amps.iter())
        .map(|(x, y)| x.conj() * y)
        .sum()
}

/// Rescale to unit norm. Returns the state and its original norm.
pub fn normalize(s: &PairState) -> Result<(PairState, f64)> {
    let norm_sq = s.norm_sq();
    if !norm_sq.is_finite() || norm_sq <= NORM_SQ_FLOOR {
        return Err(Error::DegenerateState { norm_sq });
    }
    let norm = norm_sq.sqrt();
    Ok((s.scale(Complex64::new(1.0 / norm, 0.0)), norm))
}

/// Decay widths and mass difference in units of 1/τ_S (ħ = c = 1).
///
/// `epsilon_mag` and `ks_kl_overlap` are carried for error budgets only;
/// amplitude evolution always uses ε = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    #[serde(rename = "gamma_S_per_tau_s", default = "one")]
    pub gamma_s: f64,
    #[serde(rename = "gamma_L_per_tau_s", default = "default_gamma_l")]
    pub gamma_l: f64,
    /// m_L - m_S. Not fixed by the model; always supplied by the caller.
    #[serde(rename = "delta_m_per_tau_s")]
    pub delta_m: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_mag: f64,
    #[serde(default = "default_overlap")]
    pub ks_kl_overlap: f64,
}

fn one() -> f64 {
    1.0
}
fn default_gamma_l() -> f64 {
    1.0 / WIDTH_RATIO_S_OVER_L
}
fn default_epsilon() -> f64 {
    2.3e-3
}
fn default_overlap() -> f64 {
    3.2e-3
}

impl PhysicalConstants {
    /// Γ_S = 1, Γ_L = 1/579 and the recorded CP magnitudes, with the given Δm.
    pub fn with_delta_m(delta_m: f64) -> Self {
        Self {
            gamma_s: 1.0,
            gamma_l: default_gamma_l(),
            delta_m,
            epsilon_mag: default_epsilon(),
            ks_kl_overlap: default_overlap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_s != 1.0 {
            return Err(Error::param(
                "gamma_S_per_tau_s",
                format!(
                    "time unit is τ_S, so Γ_S must be exactly 1 (got {})",
                    self.gamma_s
                ),
            ));
        }
        if !(self.gamma_l.is_finite() && self.gamma_l >= 0.0 && self.gamma_l < self.gamma_s) {
            return Err(Error::param(
                "gamma_L_per_tau_s",
                format!("must satisfy 0 <= Γ_L < Γ_S (got {})", self.gamma_l),
            ));
        }
        if !self.delta_m.is_finite() {
            return Err(Error::param("delta_m_per_tau_s", "must be finite"));
        }
        for (name, v) in [
            ("epsilon_mag", self.epsilon_mag),
            ("ks_kl_overlap", self.ks_kl_overlap),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Complex eigenvalue λ_S = m_S - iΓ_S/2, with m_S = -Δm/2.
    ///
    /// Splitting the masses symmetrically drops the e^{-i(m_S+m_L)t} phase.
    pub fn lambda_s(&self) -> Complex64 {
        Complex64::new(-0.5 * self.delta_m, -0.5 * self.gamma_s)
    }

    /// λ_L = m_L - iΓ_L/2, with m_L = +Δm/2.
    pub fn lambda_l(&self) -> Complex64 {
        Complex64::new(0.5 * self.delta_m, -0.5 * self.gamma_l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn singlet_is_antisymmetric_in_strangeness_basis() {
        let s = PairState::singlet().to_strangeness();
        let expect = [0.0, -FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0];
        for (a, e) in s.amps.iter().zip(expect) {
            assert_abs_diff_eq!(a.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn ks_ks_spreads_evenly() {
        let s = PairState::from_real([1.0, 0.0, 0.0, 0.0]).to_strangeness();
        for a in s.amps {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn named_single_states_match_dictionary() {
        let k0 = SingleKaonState::K0.strangeness_amplitudes();
        assert_abs_diff_eq!(k0[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k0[1].norm(), 0.0, epsilon = 1e-15);
        let ks = SingleKaonState::from_strangeness(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        assert_abs_diff_eq!(ks.a_s.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ks.a_l.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn tensor_of_basis_states() {
        let p = SingleKaonState::K_S.tensor(&SingleKaonState::K_L);
        assert_eq!(p, PairState::from_real([0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn inner_product_basics() {
        let s = PairState::singlet();
        assert_abs_diff_eq!(inner_product(&s, &s).re, 1.0, epsilon = 1e-15);
        let ss = PairState::from_real([1.0, 0.0, 0.0, 0.0]);
        let ll = PairState::from_real([0.0, 0.0, 0.0, 1.0]);
        assert_eq!(inner_product(&ss, &ll), c(0.0, 0.0));
        let a = PairState::new([c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        // conjugate-linear in the first slot
        assert_eq!(inner_product(&a, &ss), c(0.0, -1.0));
    }

    #[test]
    fn normalize_rescales_and_reports_norm() {
        let (n, norm) = normalize(&PairState::from_real([0.0, 2.0, 0.0, 0.0])).unwrap();
        assert_eq!(norm, 2.0);
        assert_eq!(n, PairState::from_real([0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn normalize_rejects_decayed_state() {
        assert!(matches!(
            normalize(&PairState::zero()),
            Err(Error::DegenerateState { .. })
        ));
        assert!(normalize(&PairState::from_real([1e-16, 0.0, 0.0, 0.0])).is_err());
        assert!(normalize(&PairState::from_real([1e-14, 0.0, 0.0, 0.0])).is_ok());
    }

    #[test]
    fn swap_sides_is_an_involution() {
        let s = PairState::new([c(1.0, 0.0), c(2.0, 0.5), c(3.0, -1.0), c(4.0, 0.0)]);
        assert_eq!(s.swap_sides().c_sl(), c(3.0, -1.0));
        assert_eq!(s.swap_sides().swap_sides(), s);
    }

    #[test]
    fn constants_validation() {
        let k = PhysicalConstants::with_delta_m(0.4737);
        k.validate().unwrap();
        assert_abs_diff_eq!(k.gamma_l * 579.0, 1.0, epsilon = 1e-15);
        let bad = PhysicalConstants { gamma_s: 2.0, ..k };
        assert!(bad.validate().is_err());
        let bad = PhysicalConstants { gamma_l: 1.5, ..k };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn eigenvalues_split_mass_symmetrically() {
        let k = PhysicalConstants::with_delta_m(0.5);
        let sum = k.lambda_s() + k.lambda_l();
        assert_abs_diff_eq!(sum.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((k.lambda_l() - k.lambda_s()).re, 0.5, epsilon = 1e-15);
    }
}
