//! Detector response and experimental feasibility.
//!
//! Lifetime identification: a kaon that decays inside `[T, T + ΔT]` is
//! recorded as K_S, a survivor reaching the end absorber as K_L. Strangeness
//! identification: the absorber records the true strangeness with an
//! efficiency, otherwise the kaon is `Lost`; there is no K0↔K0bar cross-talk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{MeasurementSetting, Outcome};
use crate::quasispin::PhysicalConstants;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    /// Length of the decay window, in τ_S.
    #[serde(rename = "delta_T_tau_s")]
    pub delta_t: f64,
    #[serde(rename = "eta_K0bar")]
    pub eta_k0bar: f64,
    #[serde(rename = "eta_K0")]
    pub eta_k0: f64,
    /// Kaon velocity in the lab, in units of c.
    pub beta: f64,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::param("delta_T_tau_s", "must be > 0"));
        }
        validate_efficiencies(self.eta_k0bar, self.eta_k0)?;
        validate_beta(self.beta)
    }

    pub fn lifetime(&self, constants: &PhysicalConstants) -> Result<ResponseMatrix> {
        lifetime_response(self.delta_t, constants)
    }

    pub fn strangeness(&self) -> Result<ResponseMatrix> {
        strangeness_response(self.eta_k0bar, self.eta_k0)
    }

    /// Efficiency for a recorded strangeness outcome; 1 for everything else.
    pub fn efficiency(&self, o: Outcome) -> f64 {
        match o {
            Outcome::K0 => self.eta_k0,
            Outcome::K0bar => self.eta_k0bar,
            _ => 1.0,
        }
    }
}

fn validate_efficiencies(eta_k0bar: f64, eta_k0: f64) -> Result<()> {
    for (name, eta) in [("eta_K0bar", eta_k0bar), ("eta_K0", eta_k0)] {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::param(
                name,
                format!("must lie in [0, 1] (got {eta})"),
            ));
        }
    }
    if eta_k0 > eta_k0bar {
        return Err(Error::param(
            "eta_K0",
            format!("K0 efficiency {eta_k0} exceeds K0bar efficiency {eta_k0bar}"),
        ));
    }
    Ok(())
}

fn validate_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param(
            "beta",
            format!("must satisfy 0 < beta < 1 (got {beta})"),
        ));
    }
    Ok(())
}

/// Conditional probabilities `P(recorded | true)` for one measurement kind.
/// Rows are the two true outcomes in slot order, columns the recorded
/// outcomes `[first, second, Lost]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub setting: MeasurementSetting,
    pub rows: [[f64; 3]; 2],
}

impl ResponseMatrix {
    pub fn ideal(setting: MeasurementSetting) -> Self {
        Self {
            setting,
            rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        }
    }

    pub fn prob(&self, truth: Outcome, recorded: Outcome) -> f64 {
        debug_assert_eq!(truth.setting(), Some(self.setting));
        self.rows[truth.slot()][recorded.slot()]
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Recorded slot for a true slot, given a uniform draw `u` in [0, 1).
    #[inline]
    pub(crate) fn sample(&self, truth_slot: usize, u: f64) -> usize {
        let row = &self.rows[truth_slot];
        if u < row[0] {
            0
        } else if u < row[0] + row[1] {
            1
        } else {
            2
        }
    }
}

/// K_S correctly seen decaying with probability 1 - e^{-Γ_S ΔT}; K_L
/// correctly seen surviving with probability e^{-Γ_L ΔT}.
pub fn lifetime_response(delta_t: f64, constants: &PhysicalConstants) -> Result<ResponseMatrix> {
    if delta_t.is_nan() || delta_t < 0.0 {
        return Err(Error::param("delta_T_tau_s", "must be >= 0"));
    }
    let ks_survives = (-constants.gamma_s * delta_t).exp();
    let kl_survives = (-constants.gamma_l * delta_t).exp();
    Ok(ResponseMatrix {
        setting: MeasurementSetting::Lifetime,
        rows: [
            [1.0 - ks_survives, ks_survives, 0.0],
            [1.0 - kl_survives, kl_survives, 0.0],
        ],
    })
}

pub fn strangeness_response(eta_k0bar: f64, eta_k0: f64) -> Result<ResponseMatrix> {
    validate_efficiencies(eta_k0bar, eta_k0)?;
    Ok(ResponseMatrix {
        setting: MeasurementSetting::Strangeness,
        rows: [
            [eta_k0, 0.0, 1.0 - eta_k0],
            [0.0, eta_k0bar, 1.0 - eta_k0bar],
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacelikeCheck {
    pub ok: bool,
    /// Smallest T (τ_S) keeping the far decay window spacelike to the near measurement.
    #[serde(rename = "T_min_tau_s")]
    pub t_min: f64,
}

/// Back-to-back kaons at speed β: the right decay region `[T, T + ΔT]` is
/// spacelike to the left measurement at `T` iff `T > ΔT (1 - β) / (2β)`.
pub fn check_spacelike(t: f64, delta_t: f64, beta: f64) -> Result<SpacelikeCheck> {
    validate_beta(beta)?;
    let t_min = delta_t * (1.0 - beta) / (2.0 * beta);
    Ok(SpacelikeCheck {
        ok: t > t_min,
        t_min,
    })
}

/// Fraction of initial pairs with both kaons alive at `T`, ignoring the
/// O(|r|^2) regenerator correction.
pub fn sample_economics(t: f64, constants: &PhysicalConstants) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::param("T_tau_s", "must be >= 0"));
    }
    Ok((-(constants.gamma_s + constants.gamma_l) * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k() -> PhysicalConstants {
        PhysicalConstants::with_delta_m(0.4737)
    }

    #[test]
    fn lifetime_window_numbers() {
        let m = lifetime_response(5.5, &k()).unwrap();
        assert_abs_diff_eq!(
            m.prob(Outcome::KL, Outcome::KL),
            0.9905458378361734,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            m.prob(Outcome::KS, Outcome::KS),
            0.995913228561536,
            epsilon = 1e-14
        );
        assert!(m.prob(Outcome::KL, Outcome::KS) < 0.01);
        assert!(m.prob(Outcome::KS, Outcome::KL) < 0.01);
        assert!(m.max_row_sum_error() < 1e-15);
    }

    #[test]
    fn lifetime_window_limits() {
        let none = lifetime_response(0.0, &k()).unwrap();
        assert_eq!(none.prob(Outcome::KS, Outcome::KL), 1.0);
        assert_eq!(none.prob(Outcome::KL, Outcome::KL), 1.0);
        let stable_l = PhysicalConstants {
            gamma_l: 0.0,
            ..k()
        };
        let long = lifetime_response(1e3, &stable_l).unwrap();
        assert_eq!(
            long.rows,
            ResponseMatrix::ideal(MeasurementSetting::Lifetime).rows
        );
        assert!(lifetime_response(-1.0, &k()).is_err());
    }

    #[test]
    fn strangeness_efficiencies() {
        let perfect = strangeness_response(1.0, 1.0).unwrap();
        assert_eq!(
            perfect.rows,
            ResponseMatrix::ideal(MeasurementSetting::Strangeness).rows
        );
        let m = strangeness_response(0.9, 0.7).unwrap();
        assert_abs_diff_eq!(m.prob(Outcome::K0bar, Outcome::Lost), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(m.prob(Outcome::K0, Outcome::Lost), 0.3, epsilon = 1e-15);
        assert_eq!(m.prob(Outcome::K0, Outcome::K0bar), 0.0);
        assert!(m.max_row_sum_error() < 1e-15);
    }

    #[test]
    fn strangeness_asymmetry_enforced() {
        assert!(strangeness_response(0.7, 0.9).is_err());
        assert!(strangeness_response(1.1, 0.9).is_err());
        assert!(strangeness_response(0.9, -0.1).is_err());
    }

    #[test]
    fn spacelike_threshold() {
        let c = check_spacelike(11.0, 5.5, 0.22).unwrap();
        assert!(c.ok);
        assert_abs_diff_eq!(c.t_min, 9.75, epsilon = 1e-12);
        assert_abs_diff_eq!(c.t_min / 5.5, 1.7727272727272727, epsilon = 1e-12);
        assert!(!check_spacelike(9.0, 5.5, 0.22).unwrap().ok);
        assert!(check_spacelike(1e-3, 5.5, 0.999_999).unwrap().t_min < 1e-5);
        assert!(check_spacelike(11.0, 5.5, 1.0).is_err());
        assert!(check_spacelike(11.0, 5.5, 0.0).is_err());
    }

    #[test]
    fn surviving_fraction() {
        assert_eq!(sample_economics(0.0, &k()).unwrap(), 1.0);
        let f = sample_economics(11.0, &k()).unwrap();
        assert_abs_diff_eq!(f, 1.638739243264198e-05, epsilon = 1e-18);
        assert!((1.0 / f - 61022.5).abs() < 1.0);
        let mut prev = 1.0;
        for i in 1..50 {
            let f = sample_economics(i as f64 * 0.5, &k()).unwrap();
            assert!(f < prev);
            prev = f;
        }
    }

    #[test]
    fn model_validation() {
        let good = DetectorModel {
            delta_t: 5.5,
            eta_k0bar: 0.9,
            eta_k0: 0.7,
            beta: 0.22,
        };
        good.validate().unwrap();
        assert!(DetectorModel {
            delta_t: 0.0,
            ..good
        }
        .validate()
        .is_err());
        assert!(DetectorModel { beta: 1.0, ..good }.validate().is_err());
        assert!(DetectorModel {
            eta_k0: 0.95,
            ..good
        }
        .validate()
        .is_err());
    }
}
