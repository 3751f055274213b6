//! Ideal quantum measurements on the pair and the Clauser–Horne statistic.
//!
//! Each beam is measured either in the strangeness basis (K0 vs K0bar,
//! absorber) or in the lifetime basis (K_S vs K_L, decay window). The two
//! CH variants share the homogeneous bound `B <= 0`; the second is the
//! first with left and right measurements exchanged.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::golden_section_max;
use crate::quasispin::{PairState, Side, SingleKaonState};

/// Allowed |norm^2 - 1| for states entering probability calculations.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Rounding floor for the violation flags; |B| below this is the LR boundary.
pub const VIOLATION_FLAG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementSetting {
    Strangeness,
    Lifetime,
}

impl MeasurementSetting {
    pub const ALL: [MeasurementSetting; 2] = [
        MeasurementSetting::Strangeness,
        MeasurementSetting::Lifetime,
    ];

    pub fn index(self) -> usize {
        match self {
            MeasurementSetting::Strangeness => 0,
            MeasurementSetting::Lifetime => 1,
        }
    }

    /// The two dichotomic outcomes of an ideal measurement.
    pub fn outcomes(self) -> [Outcome; 2] {
        match self {
            MeasurementSetting::Strangeness => [Outcome::K0, Outcome::K0bar],
            MeasurementSetting::Lifetime => [Outcome::KS, Outcome::KL],
        }
    }

    /// Recorded outcomes, in slot order, including the detector's `Lost`.
    pub fn recorded_outcomes(self) -> [Outcome; 3] {
        let [a, b] = self.outcomes();
        [a, b, Outcome::Lost]
    }
}

impl std::fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeasurementSetting::Strangeness => "strangeness",
            MeasurementSetting::Lifetime => "lifetime",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    K0,
    K0bar,
    KS,
    KL,
    /// Not identified (absorber inefficiency).
    Lost,
}

impl Outcome {
    pub fn setting(self) -> Option<MeasurementSetting> {
        match self {
            Outcome::K0 | Outcome::K0bar => Some(MeasurementSetting::Strangeness),
            Outcome::KS | Outcome::KL => Some(MeasurementSetting::Lifetime),
            Outcome::Lost => None,
        }
    }

    /// Position within `setting.recorded_outcomes()`.
    pub fn slot(self) -> usize {
        match self {
            Outcome::K0 | Outcome::KS => 0,
            Outcome::K0bar | Outcome::KL => 1,
            Outcome::Lost => 2,
        }
    }

    pub fn projector(self) -> Option<SingleKaonState> {
        match self {
            Outcome::K0 => Some(SingleKaonState::K0),
            Outcome::K0bar => Some(SingleKaonState::K0BAR),
            Outcome::KS => Some(SingleKaonState::K_S),
            Outcome::KL => Some(SingleKaonState::K_L),
            Outcome::Lost => None,
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::K0 => "K0",
            Outcome::K0bar => "K0bar",
            Outcome::KS => "KS",
            Outcome::KL => "KL",
            Outcome::Lost => "Lost",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// K_S and the K_S-side single probability on the left, K_L on the right.
    First,
    /// Left and right measurements exchanged.
    Second,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::First, Variant::Second];

    /// Sign of the linear Re R term in B.
    fn re_sign(self) -> f64 {
        match self {
            Variant::First => -1.0,
            Variant::Second => 1.0,
        }
    }
}

/// The six probabilities of a CH combination.
///
/// For [`Variant::First`] these are P(K0bar,K0bar), P(K_S,K0bar),
/// P(K0bar,K_L), P(K_S,K_L), P(K_S,*) and P(*,K_L) with (left, right)
/// ordering; [`Variant::Second`] holds the side-exchanged counterparts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChProbabilities {
    pub p_bb: f64,
    pub p_sb: f64,
    pub p_bl: f64,
    pub p_sl: f64,
    pub p_s_star: f64,
    pub p_star_l: f64,
}

impl ChProbabilities {
    pub fn combination(&self) -> f64 {
        -self.p_bb + self.p_sb + self.p_bl + self.p_sl - self.p_s_star - self.p_star_l
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.p_bb,
            self.p_sb,
            self.p_bl,
            self.p_sl,
            self.p_s_star,
            self.p_star_l,
        ]
    }
}

/// Standard errors; all zero for analytic evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChStdErr {
    pub p_bb: f64,
    pub p_sb: f64,
    pub p_bl: f64,
    pub p_sl: f64,
    pub p_s_star: f64,
    pub p_star_l: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CHReport {
    pub variant: Variant,
    #[serde(flatten)]
    pub probabilities: ChProbabilities,
    #[serde(rename = "B")]
    pub b: f64,
    /// 1 + B; above one means the homogeneous bound fails.
    pub ratio: f64,
    pub violated_upper: bool,
    pub violated_lower: bool,
    pub stderr: ChStdErr,
}

impl CHReport {
    pub fn new(variant: Variant, probabilities: ChProbabilities, stderr: ChStdErr) -> Self {
        let b = probabilities.combination();
        Self {
            variant,
            probabilities,
            b,
            ratio: 1.0 + b,
            violated_upper: b > VIOLATION_FLAG_TOL,
            violated_lower: b < -1.0 - VIOLATION_FLAG_TOL,
            stderr,
        }
    }

    /// (ratio - 1) / stderr(B); infinite for analytic reports.
    pub fn significance(&self) -> f64 {
        self.b / self.stderr.b
    }
}

pub(crate) fn check_unit_norm(s: &PairState) -> Result<()> {
    let norm_sq = s.norm_sq();
    if (norm_sq - 1.0).abs() > UNIT_NORM_TOL || !norm_sq.is_finite() {
        return Err(Error::StateNotNormalized { norm_sq });
    }
    Ok(())
}

fn projector_of(o: Outcome) -> Result<SingleKaonState> {
    o.projector()
        .ok_or_else(|| Error::param("outcome", "Lost is a detector outcome, not a projection"))
}

/// ⟨left ⊗ right|s⟩ without any validation.
pub(crate) fn joint_amplitude(
    s: &PairState,
    left: &SingleKaonState,
    right: &SingleKaonState,
) -> Complex64 {
    let u = [left.a_s.conj(), left.a_l.conj()];
    let v = [right.a_s.conj(), right.a_l.conj()];
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, ui) in u.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            acc += ui * vj * s.amps[2 * i + j];
        }
    }
    acc
}

/// Probabilities of the four ideal outcomes for a setting pair, indexed
/// `[left slot][right slot]`. Assumes a unit-norm state.
pub(crate) fn joint_table(
    s: &PairState,
    left: MeasurementSetting,
    right: MeasurementSetting,
) -> [[f64; 2]; 2] {
    let lo = left.outcomes();
    let ro = right.outcomes();
    let mut t = [[0.0; 2]; 2];
    for (a, oa) in lo.iter().enumerate() {
        for (b, ob) in ro.iter().enumerate() {
            let pa = oa.projector().expect("ideal outcome");
            let pb = ob.projector().expect("ideal outcome");
            t[a][b] = joint_amplitude(s, &pa, &pb).norm_sqr();
        }
    }
    t
}

/// |⟨left ⊗ right|s⟩|^2.
pub fn joint_probability(s: &PairState, left: Outcome, right: Outcome) -> Result<f64> {
    check_unit_norm(s)?;
    let pl = projector_of(left)?;
    let pr = projector_of(right)?;
    Ok(joint_amplitude(s, &pl, &pr).norm_sqr())
}

/// Single-side probability of `outcome` on `side`, summing the joint
/// probabilities over both outcomes of `other_setting` on the other beam.
pub fn marginal_probability(
    s: &PairState,
    side: Side,
    other_setting: MeasurementSetting,
    outcome: Outcome,
) -> Result<f64> {
    check_unit_norm(s)?;
    projector_of(outcome)?;
    let mut total = 0.0;
    for other in other_setting.outcomes() {
        total += match side {
            Side::Left => joint_probability(s, outcome, other)?,
            Side::Right => joint_probability(s, other, outcome)?,
        };
    }
    Ok(total)
}

fn first_variant_probabilities(s: &PairState) -> Result<ChProbabilities> {
    use Outcome::*;
    Ok(ChProbabilities {
        p_bb: joint_probability(s, K0bar, K0bar)?,
        p_sb: joint_probability(s, KS, K0bar)?,
        p_bl: joint_probability(s, K0bar, KL)?,
        p_sl: joint_probability(s, KS, KL)?,
        p_s_star: joint_probability(s, KS, K0)? + joint_probability(s, KS, K0bar)?,
        p_star_l: joint_probability(s, K0, KL)? + joint_probability(s, K0bar, KL)?,
    })
}

/// Evaluate one CH combination exactly on a unit-norm state.
pub fn ch_statistic(s: &PairState, variant: Variant) -> Result<CHReport> {
    check_unit_norm(s)?;
    let probs = match variant {
        Variant::First => first_variant_probabilities(s)?,
        Variant::Second => first_variant_probabilities(&s.swap_sides())?,
    };
    Ok(CHReport::new(variant, probs, ChStdErr::default()))
}

/// Both variants, first then second.
pub fn ch_statistics(s: &PairState) -> Result<[CHReport; 2]> {
    Ok([
        ch_statistic(s, Variant::First)?,
        ch_statistic(s, Variant::Second)?,
    ])
}

/// (2 ∓ Re R + |R|^2/4) / (2 + |R|^2) for the surviving-pair state.
pub fn qm_ratio(big_r: Complex64, variant: Variant) -> f64 {
    let m2 = big_r.norm_sqr();
    (2.0 + variant.re_sign() * big_r.re + 0.25 * m2) / (2.0 + m2)
}

/// B = (∓ Re R - 3|R|^2/4) / (2 + |R|^2).
pub fn qm_combination(big_r: Complex64, variant: Variant) -> f64 {
    let m2 = big_r.norm_sqr();
    (variant.re_sign() * big_r.re - 0.75 * m2) / (2.0 + m2)
}

/// True when one of the two variants is violated: |Re R| > 3|R|^2/4.
pub fn violation_condition(big_r: Complex64) -> bool {
    big_r.re.abs() > 0.75 * big_r.norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizeDomain {
    /// R real with |R| <= max_abs.
    RealAxis { max_abs: f64 },
    /// |R| <= radius.
    ComplexDisc { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    #[serde(rename = "R_star", with = "crate::complex_serde")]
    pub r_star: Complex64,
    pub ratio_star: f64,
}

/// Resolution of the optimizer in R.
pub const OPTIMIZE_TOL: f64 = 1e-6;

const COARSE_POINTS: usize = 401;

/// Maximize [`qm_ratio`] over the domain. The real axis uses a coarse scan
/// to bracket the peak followed by golden-section refinement; the disc uses
/// a grid that is repeatedly re-centred and refined.
pub fn optimize_r(domain: OptimizeDomain, variant: Variant) -> Result<Optimum> {
    match domain {
        OptimizeDomain::RealAxis { max_abs } => {
            if !(max_abs.is_finite() && max_abs > 0.0) {
                return Err(Error::param("max_abs", "must be finite and > 0"));
            }
            let f = |x: f64| qm_ratio(Complex64::new(x, 0.0), variant);
            let step = 2.0 * max_abs / (COARSE_POINTS - 1) as f64;
            let best = (0..COARSE_POINTS)
                .map(|i| -max_abs + step * i as f64)
                .map(|x| (x, f(x)))
                .fold(
                    (0.0, f64::NEG_INFINITY),
                    |a, b| if b.1 > a.1 { b } else { a },
                );
            let lo = (best.0 - step).max(-max_abs);
            let hi = (best.0 + step).min(max_abs);
            let (x, fx) = golden_section_max(f, lo, hi, 1e-3 * OPTIMIZE_TOL);
            Ok(Optimum {
                r_star: Complex64::new(x, 0.0),
                ratio_star: fx,
            })
        }
        OptimizeDomain::ComplexDisc { radius } => {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(Error::param("radius", "must be finite and > 0"));
            }
            Ok(refine_disc(radius, variant))
        }
    }
}

fn refine_disc(radius: f64, variant: Variant) -> Optimum {
    const HALF: i32 = 50;
    let mut center = Complex64::new(0.0, 0.0);
    let mut half_width = radius;
    let mut best = (center, qm_ratio(center, variant));
    loop {
        let h = half_width / HALF as f64;
        for i in -HALF..=HALF {
            for j in -HALF..=HALF {
                let z = center + Complex64::new(i as f64 * h, j as f64 * h);
                if z.norm() > radius {
                    continue;
                }
                let v = qm_ratio(z, variant);
                if v > best.1 {
                    best = (z, v);
                }
            }
        }
        if h < 1e-3 * OPTIMIZE_TOL {
            break;
        }
        center = best.0;
        half_width = 2.0 * h;
    }
    Optimum {
        r_star: best.0,
        ratio_star: best.1,
    }
}
