//! Preparation of the two-kaon state: φ decay, a thin regenerator on the
//! right beam next to the decay point, then free flight to a common proper
//! time `T`, after which the surviving pairs are renormalized.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complex_serde;
use crate::error::{Error, Result};
use crate::quasispin::{normalize, PairState, PhysicalConstants, Side};

/// Above this |r| the first-order regenerator map is no longer trustworthy.
pub const R_FIRST_ORDER_LIMIT: f64 = 0.1;

/// Free-flight times outside `[T_DIAG_MIN, T_DIAG_MAX_GAMMA_L / Γ_L]` trigger
/// a diagnostic; they are still evaluated.
pub const T_DIAG_MIN: f64 = 5.0;
pub const T_DIAG_MAX_GAMMA_L: f64 = 0.1;

/// Homogeneous regenerator slab, natural units with lengths in fm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialRegenerator {
    /// Density of scattering centres.
    #[serde(rename = "nu_per_fm3")]
    pub nu: f64,
    /// Forward-amplitude difference f - fbar.
    #[serde(rename = "delta_f_fm", with = "complex_serde")]
    pub delta_f: Complex64,
    #[serde(rename = "d_fm")]
    pub d: f64,
    #[serde(rename = "p_K_per_fm")]
    pub p_k: f64,
    #[serde(rename = "m_K_per_fm")]
    pub m_k: f64,
}

impl MaterialRegenerator {
    /// Kaon proper time spent inside the slab, `d m_K / p_K` (fm, c = 1).
    pub fn crossing_proper_time(&self) -> f64 {
        self.d * self.m_k / self.p_k
    }

    /// The slab with its length multiplied by `factor`.
    pub fn with_thickness_scaled(&self, factor: f64) -> Self {
        Self {
            d: self.d * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegenSpec {
    Direct {
        #[serde(with = "complex_serde")]
        r: Complex64,
    },
    Material(MaterialRegenerator),
}

impl RegenSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RegenSpec::Direct { r } => {
                if !(r.re.is_finite() && r.im.is_finite()) {
                    return Err(Error::InvalidSpec("r must be finite".into()));
                }
            }
            RegenSpec::Material(m) => {
                let fields = [
                    ("nu_per_fm3", m.nu),
                    ("d_fm", m.d),
                    ("p_K_per_fm", m.p_k),
                    ("m_K_per_fm", m.m_k),
                    ("delta_f_fm.re", m.delta_f.re),
                    ("delta_f_fm.im", m.delta_f.im),
                ];
                for (name, v) in fields {
                    if !v.is_finite() {
                        return Err(Error::InvalidSpec(format!("{name} must be finite")));
                    }
                }
                if m.nu < 0.0 {
                    return Err(Error::InvalidSpec("nu_per_fm3 must be >= 0".into()));
                }
                if m.d < 0.0 {
                    return Err(Error::InvalidSpec("d_fm must be >= 0".into()));
                }
                if m.p_k <= 0.0 || m.m_k <= 0.0 {
                    return Err(Error::InvalidSpec(
                        "p_K_per_fm and m_K_per_fm must be > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparationConfig {
    pub regen: RegenSpec,
    /// Common free-flight proper time, in τ_S.
    pub t: f64,
    /// Drop the doubly suppressed K_S K_S term before renormalizing.
    pub truncate_ss: bool,
    pub constants: PhysicalConstants,
}

impl PreparationConfig {
    pub fn validate(&self) -> Result<()> {
        self.regen.validate()?;
        self.constants.validate()?;
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::param("T_tau_s", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Output of [`prepare_bell_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedState {
    /// Unit-norm state of the pairs surviving to `T`.
    pub state: PairState,
    /// Regeneration parameter used.
    pub r: Complex64,
    /// Effective K_L K_L coefficient, read off the propagated amplitudes.
    pub big_r: Complex64,
    /// Squared norm before renormalization.
    pub survive_fraction: f64,
}

/// (K_S K_L - K_L K_S)/sqrt(2), the pair from φ decay at t = 0.
pub fn phi_initial() -> PairState {
    PairState::singlet()
}

/// r = iπν(f - fbar)d / p_K, or the given value for a direct spec.
pub fn regeneration_parameter(spec: &RegenSpec) -> Result<Complex64> {
    spec.validate()?;
    Ok(match spec {
        RegenSpec::Direct { r } => *r,
        RegenSpec::Material(m) => Complex64::new(0.0, PI * m.nu * m.d / m.p_k) * m.delta_f,
    })
}

/// First-order thin regenerator on one beam: K_S → K_S + r K_L and
/// K_L → K_L + r K_S. Crossing time is taken as zero.
pub fn apply_thin_regenerator(s: &PairState, r: Complex64, side: Side) -> PairState {
    if r.norm() > R_FIRST_ORDER_LIMIT {
        warn!(
            "|r| = {} exceeds {}; the first-order regenerator map is unreliable",
            r.norm(),
            R_FIRST_ORDER_LIMIT
        );
    }
    s.apply_one_side(side, |a_s, a_l| (a_s + r * a_l, a_l + r * a_s))
}

/// Free, non-unitary evolution: each K_S factor picks up e^{-iλ_S t} and each
/// K_L factor e^{-iλ_L t}, with the proper time of its own beam.
pub fn propagate_free(
    s: &PairState,
    t_left: f64,
    t_right: f64,
    constants: &PhysicalConstants,
) -> PairState {
    let minus_i = Complex64::new(0.0, -1.0);
    let lambdas = [constants.lambda_s(), constants.lambda_l()];
    let left = lambdas.map(|l| (minus_i * l * t_left).exp());
    let right = lambdas.map(|l| (minus_i * l * t_right).exp());
    let mut out = s.amps;
    for (i, li) in left.iter().enumerate() {
        for (j, rj) in right.iter().enumerate() {
            out[2 * i + j] *= li * rj;
        }
    }
    PairState::new(out)
}

/// Closed form R = -r exp([-iΔm + (Γ_S - Γ_L)/2] T).
pub fn effective_r(r: Complex64, t: f64, constants: &PhysicalConstants) -> Complex64 {
    let exponent = Complex64::new(
        0.5 * (constants.gamma_s - constants.gamma_l) * t,
        -constants.delta_m * t,
    );
    -r * exponent.exp()
}

/// Normalized (0, 1, -1, R)/sqrt(2 + |R|^2), the closed-form surviving-pair state.
pub fn closed_form_state(big_r: Complex64) -> PairState {
    let n = 1.0 / (2.0 + big_r.norm_sqr()).sqrt();
    PairState::new([
        Complex64::new(0.0, 0.0),
        Complex64::new(n, 0.0),
        Complex64::new(-n, 0.0),
        big_r * n,
    ])
}

/// Run the full chain: singlet, regenerator on the right, free flight to
/// `T` on both beams, optional K_S K_S truncation, renormalization.
pub fn prepare_bell_state(cfg: &PreparationConfig) -> Result<PreparedState> {
    cfg.validate()?;
    let k = &cfg.constants;
    if cfg.t < T_DIAG_MIN || (k.gamma_l > 0.0 && cfg.t > T_DIAG_MAX_GAMMA_L / k.gamma_l) {
        warn!(
            "T = {} τ_S is outside the τ_S << T << τ_L regime; R is still evaluated",
            cfg.t
        );
    }
    let r = regeneration_parameter(&cfg.regen)?;
    let regenerated = apply_thin_regenerator(&phi_initial(), r, Side::Right);
    let mut propagated = propagate_free(&regenerated, cfg.t, cfg.t, k);
    if cfg.truncate_ss {
        propagated.amps[0] = Complex64::new(0.0, 0.0);
    }
    let survive_fraction = propagated.norm_sq();
    let (state, _) = normalize(&propagated)?;
    // c_SL carries the singlet weight N(T)/sqrt(2); R is K_L K_L relative to it.
    let big_r = propagated.c_ll() / propagated.c_sl();
    Ok(PreparedState {
        state,
        r,
        big_r,
        survive_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn k() -> PhysicalConstants {
        PhysicalConstants::with_delta_m(0.4737)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_initial_is_singlet_in_both_bases() {
        let s = phi_initial();
        assert_eq!(
            s,
            PairState::from_real([0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0])
        );
        let st = s.to_strangeness();
        assert_abs_diff_eq!(st.amps[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.amps[3].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((st.amps[1] + st.amps[2]).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn regenerator_right_reproduces_first_order_state() {
        let r = c(2e-3, -1e-3);
        let s = apply_thin_regenerator(&phi_initial(), r, Side::Right);
        let h = FRAC_1_SQRT_2;
        let expect = [r * h, c(h, 0.0), c(-h, 0.0), -r * h];
        for (a, e) in s.amps.iter().zip(expect) {
            assert_abs_diff_eq!((a - e).norm(), 0.0, epsilon = 1e-16);
        }
    }

    #[test]
    fn regenerator_left_flips_signs() {
        let r = c(2e-3, 1e-3);
        let s = apply_thin_regenerator(&phi_initial(), r, Side::Left);
        let h = FRAC_1_SQRT_2;
        assert_abs_diff_eq!((s.c_ss() + r * h).norm(), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!((s.c_ll() - r * h).norm(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn zero_regenerator_is_identity() {
        let s = phi_initial();
        assert_eq!(apply_thin_regenerator(&s, c(0.0, 0.0), Side::Right), s);
        let spec = RegenSpec::Material(MaterialRegenerator {
            nu: 1e-16,
            delta_f: c(1.0, 1.0),
            d: 0.0,
            p_k: 0.55,
            m_k: 2.52,
        });
        assert_eq!(regeneration_parameter(&spec).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn material_r_is_linear_in_thickness() {
        let slab = MaterialRegenerator {
            nu: 1.24e-16,
            delta_f: c(1.3, -1.6),
            d: 1e12,
            p_k: 0.557,
            m_k: 2.52,
        };
        let r1 = regeneration_parameter(&RegenSpec::Material(slab)).unwrap();
        let r16 =
            regeneration_parameter(&RegenSpec::Material(slab.with_thickness_scaled(1.6))).unwrap();
        assert_abs_diff_eq!(r16.norm() / r1.norm(), 1.6, epsilon = 1e-14);
        // r = iπν Δf d / p_K, computed by hand
        let by_hand = c(0.0, 1.0) * PI * 1.24e-16 * c(1.3, -1.6) * 1e12 / 0.557;
        assert_abs_diff_eq!((r1 - by_hand).norm(), 0.0, epsilon = 1e-18);
        assert_abs_diff_eq!(
            slab.crossing_proper_time(),
            1e12 * 2.52 / 0.557,
            epsilon = 1.0
        );
    }

    #[test]
    fn invalid_material_rejected() {
        let mut slab = MaterialRegenerator {
            nu: 1.0,
            delta_f: c(1.0, 0.0),
            d: 1.0,
            p_k: 1.0,
            m_k: 1.0,
        };
        slab.d = -1.0;
        assert!(matches!(
            regeneration_parameter(&RegenSpec::Material(slab)),
            Err(Error::InvalidSpec(_))
        ));
        slab.d = 1.0;
        slab.p_k = 0.0;
        assert!(regeneration_parameter(&RegenSpec::Material(slab)).is_err());
        assert!(regeneration_parameter(&RegenSpec::Direct {
            r: c(f64::NAN, 0.0)
        })
        .is_err());
    }

    #[test]
    fn propagation_identity_at_zero_time() {
        let s = PairState::new([c(0.1, 0.2), c(0.3, 0.0), c(0.0, -0.4), c(0.5, 0.5)]);
        assert_eq!(propagate_free(&s, 0.0, 0.0, &k()), s);
    }

    #[test]
    fn ks_ks_decays_with_both_factors() {
        let s = PairState::from_real([1.0, 0.0, 0.0, 0.0]);
        let p = propagate_free(&s, 1.0, 1.0, &k());
        // each K_S factor contributes e^{-Γ_S t} to |amplitude|^2
        assert_abs_diff_eq!(p.norm_sq(), (-2.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn effective_r_closed_form() {
        let r = c(2.29e-3, 0.0);
        assert_eq!(effective_r(r, 0.0, &k()), -r);
        let big = effective_r(r, 11.0, &k());
        let expect = 2.29e-3 * ((1.0 - 1.0 / 579.0) * 5.5f64).exp();
        assert_abs_diff_eq!(big.norm(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(big.norm(), 0.5550469368791893, epsilon = 1e-12);
        let r = c(1e-3, 2e-3);
        let big = effective_r(r, 3.0, &k());
        let dphase = (big / (-r)).arg();
        assert_abs_diff_eq!(dphase, -0.4737 * 3.0, epsilon = 1e-12);
    }

    #[test]
    fn truncated_pipeline_matches_closed_form_exactly() {
        let cfg = PreparationConfig {
            regen: RegenSpec::Direct {
                r: Complex64::from_polar(2.29e-3, 0.4737 * 11.0),
            },
            t: 11.0,
            truncate_ss: true,
            constants: k(),
        };
        let p = prepare_bell_state(&cfg).unwrap();
        let closed = closed_form_state(effective_r(p.r, 11.0, &k()));
        assert!(p.state.max_abs_diff(&closed) < 1e-14);
        // arg(r) = Δm T makes R real and negative
        assert_abs_diff_eq!(p.big_r.im, 0.0, epsilon = 1e-15);
        assert!(p.big_r.re < 0.0);
    }

    #[test]
    fn no_regenerator_leaves_decayed_singlet() {
        let cfg = PreparationConfig {
            regen: RegenSpec::Direct { r: c(0.0, 0.0) },
            t: 11.0,
            truncate_ss: false,
            constants: k(),
        };
        let p = prepare_bell_state(&cfg).unwrap();
        assert_eq!(p.big_r, c(0.0, 0.0));
        assert!(p.state.max_abs_diff(&phi_initial()) < 1e-15);
        let expect = (-11.0 * (1.0 + 1.0 / 579.0f64)).exp();
        assert_abs_diff_eq!(p.survive_fraction / expect, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fully_decayed_pipeline_is_degenerate() {
        let cfg = PreparationConfig {
            regen: RegenSpec::Direct { r: c(0.0, 0.0) },
            t: 80.0,
            truncate_ss: false,
            constants: k(),
        };
        assert!(matches!(
            prepare_bell_state(&cfg),
            Err(Error::DegenerateState { .. })
        ));
    }
}
