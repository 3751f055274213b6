//! Pseudo-experiments on the surviving-pair state.
//!
//! Every event picks a (left, right) setting pair at random, draws the ideal
//! outcome pair from the quantum joint distribution, and passes each side
//! through the detector response. Events are generated in fixed-size blocks;
//! block `k` draws from ChaCha stream `k` under the run seed, so the counts
//! do not depend on how blocks are scheduled across threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{DetectorModel, ResponseMatrix};
use crate::error::{Error, Result};
use crate::measurement::{
    check_unit_norm, joint_table, CHReport, ChProbabilities, ChStdErr, MeasurementSetting, Outcome,
    Variant,
};
use crate::quasispin::{PairState, PhysicalConstants};

/// Events per random stream.
pub const BLOCK_SIZE: u64 = 1 << 16;

use MeasurementSetting::{Lifetime, Strangeness};

/// The four setting pairs in table order.
pub const SETTING_PAIRS: [(MeasurementSetting, MeasurementSetting); 4] = [
    (Strangeness, Strangeness),
    (Strangeness, Lifetime),
    (Lifetime, Strangeness),
    (Lifetime, Lifetime),
];

#[inline]
pub fn pair_index(left: MeasurementSetting, right: MeasurementSetting) -> usize {
    2 * left.index() + right.index()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    /// Recorded frequencies, with `Lost` events in the denominators.
    #[default]
    Raw,
    /// Strangeness counts divided by the absorber efficiencies.
    EfficiencyCorrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    /// Unit-norm surviving-pair state.
    pub state: PairState,
    pub n_events: u64,
    /// Selection probabilities of [`SETTING_PAIRS`].
    pub setting_weights: [f64; 4],
    /// `None` is an ideal detector.
    pub detector: Option<DetectorModel>,
    pub constants: PhysicalConstants,
    pub seed: u64,
    pub correction: CorrectionMode,
}

impl RunPlan {
    pub fn validate(&self) -> Result<()> {
        check_unit_norm(&self.state)?;
        if self.n_events == 0 {
            return Err(Error::param("n_events", "must be >= 1"));
        }
        if self
            .setting_weights
            .iter()
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::param("setting_weights", "must be finite and >= 0"));
        }
        let total: f64 = self.setting_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(
                "setting_weights",
                format!("must sum to 1 (got {total})"),
            ));
        }
        self.constants.validate()?;
        if let Some(d) = &self.detector {
            d.validate()?;
            if self.correction == CorrectionMode::EfficiencyCorrected
                && (d.eta_k0 <= 0.0 || d.eta_k0bar <= 0.0)
            {
                return Err(Error::param(
                    "correction_mode",
                    "efficiency correction needs non-zero efficiencies",
                ));
            }
        }
        Ok(())
    }
}

/// Recorded-event counts, `[pair][left slot][right slot]` with slots from
/// [`MeasurementSetting::recorded_outcomes`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CountTable {
    pub counts: [[[u64; 3]; 3]; 4],
}

impl CountTable {
    pub fn get(
        &self,
        left: Outcome,
        right: Outcome,
        settings: (MeasurementSetting, MeasurementSetting),
    ) -> u64 {
        self.counts[pair_index(settings.0, settings.1)][left.slot()][right.slot()]
    }

    pub fn bucket_total(&self, pair: usize) -> u64 {
        self.counts[pair].iter().flatten().sum()
    }

    pub fn total(&self) -> u64 {
        (0..4).map(|p| self.bucket_total(p)).sum()
    }

    fn merge(mut self, other: &CountTable) -> CountTable {
        for (a, b) in self
            .counts
            .iter_mut()
            .flatten()
            .flatten()
            .zip(other.counts.iter().flatten().flatten())
        {
            *a += b;
        }
        self
    }

    /// The same data with the beams relabelled.
    pub fn swapped(&self) -> CountTable {
        let mut out = CountTable::default();
        for (l, r) in SETTING_PAIRS {
            let src = &self.counts[pair_index(l, r)];
            let dst = &mut out.counts[pair_index(r, l)];
            for (a, row) in src.iter().enumerate() {
                for (b, n) in row.iter().enumerate() {
                    dst[b][a] = *n;
                }
            }
        }
        out
    }

    /// CSV with one row per (setting pair, recorded outcome pair).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "setting_left",
            "setting_right",
            "outcome_left",
            "outcome_right",
            "count",
        ])?;
        for (l, r) in SETTING_PAIRS {
            for ol in recorded_for(l) {
                for or in recorded_for(r) {
                    wtr.write_record([
                        l.to_string(),
                        r.to_string(),
                        ol.to_string(),
                        or.to_string(),
                        self.get(*ol, *or, (l, r)).to_string(),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Outcomes a real detector can report for this setting.
fn recorded_for(s: MeasurementSetting) -> &'static [Outcome] {
    match s {
        Strangeness => &[Outcome::K0, Outcome::K0bar, Outcome::Lost],
        Lifetime => &[Outcome::KS, Outcome::KL],
    }
}

/// Precomputed sampling tables for one state and detector.
#[derive(Debug, Clone)]
pub struct EventSampler {
    /// Cumulative ideal joint probabilities per pair, cells `2a + b`.
    joint_cdf: [[f64; 4]; 4],
    /// Response per setting index.
    response: [ResponseMatrix; 2],
    setting_cdf: [f64; 4],
}

impl EventSampler {
    pub fn new(
        state: &PairState,
        detector: Option<&DetectorModel>,
        constants: &PhysicalConstants,
        setting_weights: [f64; 4],
    ) -> Result<Self> {
        check_unit_norm(state)?;
        let mut joint_cdf = [[0.0; 4]; 4];
        for (p, (l, r)) in SETTING_PAIRS.iter().enumerate() {
            let t = joint_table(state, *l, *r);
            let mut acc = 0.0;
            for (cell, v) in t.iter().flatten().enumerate() {
                acc += v;
                joint_cdf[p][cell] = acc;
            }
        }
        let response = response_pair(detector, constants)?;
        let mut setting_cdf = [0.0; 4];
        let mut acc = 0.0;
        for (c, w) in setting_cdf.iter_mut().zip(setting_weights) {
            acc += w;
            *c = acc;
        }
        Ok(Self {
            joint_cdf,
            response,
            setting_cdf,
        })
    }

    #[inline]
    fn pick(cdf: &[f64; 4], u: f64) -> usize {
        if let Some(i) = cdf.iter().position(|c| u < *c) {
            return i;
        }
        // u fell into the rounding gap above the total: last populated cell
        (0..4)
            .rev()
            .find(|&i| cdf[i] > if i == 0 { 0.0 } else { cdf[i - 1] })
            .unwrap_or(3)
    }

    /// Draw a setting pair index according to the run weights.
    #[inline]
    pub fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        Self::pick(&self.setting_cdf, rng.random::<f64>())
    }

    /// Recorded slots `(left, right)` for one event on setting pair `pair`.
    #[inline]
    pub fn draw_slots<R: Rng + ?Sized>(&self, pair: usize, rng: &mut R) -> (usize, usize) {
        let cell = Self::pick(&self.joint_cdf[pair], rng.random::<f64>());
        let (l, r) = SETTING_PAIRS[pair];
        let rec_l = self.response[l.index()].sample(cell / 2, rng.random::<f64>());
        let rec_r = self.response[r.index()].sample(cell % 2, rng.random::<f64>());
        (rec_l, rec_r)
    }
}

fn response_pair(
    detector: Option<&DetectorModel>,
    constants: &PhysicalConstants,
) -> Result<[ResponseMatrix; 2]> {
    Ok(match detector {
        None => [
            ResponseMatrix::ideal(Strangeness),
            ResponseMatrix::ideal(Lifetime),
        ],
        Some(d) => [d.strangeness()?, d.lifetime(constants)?],
    })
}

/// One recorded outcome pair for the given settings.
pub fn sample_event<R: Rng + ?Sized>(
    sampler: &EventSampler,
    settings: (MeasurementSetting, MeasurementSetting),
    rng: &mut R,
) -> (Outcome, Outcome) {
    let (l, r) = settings;
    let (a, b) = sampler.draw_slots(pair_index(l, r), rng);
    (l.recorded_outcomes()[a], r.recorded_outcomes()[b])
}

/// Random stream for block `block` of a run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub counts: CountTable,
    /// First and second CH variants.
    pub reports: [CHReport; 2],
}

/// Generate the counts for `plan` and estimate both CH variants.
pub fn run_experiment(plan: &RunPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let sampler = EventSampler::new(
        &plan.state,
        plan.detector.as_ref(),
        &plan.constants,
        plan.setting_weights,
    )?;
    let counts = generate_counts(&sampler, plan.n_events, plan.seed);
    let reports = estimate_from_counts(&counts, plan.detector.as_ref(), plan.correction)?;
    Ok(ExperimentResult { counts, reports })
}

/// Count table for `n_events` events, reproducible for a given seed.
pub fn generate_counts(sampler: &EventSampler, n_events: u64, seed: u64) -> CountTable {
    let n_blocks = n_events.div_ceil(BLOCK_SIZE);
    (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = block_rng(seed, block);
            let start = block * BLOCK_SIZE;
            let len = BLOCK_SIZE.min(n_events - start);
            let mut table = CountTable::default();
            for _ in 0..len {
                let pair = sampler.draw_pair(&mut rng);
                let (a, b) = sampler.draw_slots(pair, &mut rng);
                table.counts[pair][a][b] += 1;
            }
            table
        })
        .reduce(CountTable::default, |a, b| a.merge(&b))
}

/// Recorded outcome distribution per setting pair, with the bucket size
/// used for error propagation (`None` for exact expectations).
#[derive(Debug, Clone, Copy)]
struct Distributions {
    probs: [[[f64; 3]; 3]; 4],
    n: Option<[f64; 4]>,
}

impl Distributions {
    fn from_counts(counts: &CountTable) -> Result<Self> {
        let mut probs = [[[0.0; 3]; 3]; 4];
        let mut n = [0.0; 4];
        for (p, (l, r)) in SETTING_PAIRS.iter().enumerate() {
            let total = counts.bucket_total(p);
            if total == 0 {
                return Err(Error::InsufficientEvents {
                    left: l.to_string(),
                    right: r.to_string(),
                });
            }
            n[p] = total as f64;
            for (row, counts_row) in probs[p].iter_mut().zip(&counts.counts[p]) {
                for (pi, c) in row.iter_mut().zip(counts_row) {
                    *pi = *c as f64 / n[p];
                }
            }
        }
        Ok(Self { probs, n: Some(n) })
    }
}

/// One cell of a CH term: setting pair and recorded outcomes.
type Cell = (usize, Outcome, Outcome);

/// Linear functionals of the recorded distributions making up B for the
/// first variant; the second is obtained by relabelling the beams.
fn first_variant_terms() -> [Vec<Cell>; 6] {
    use Outcome::*;
    let ss = pair_index(Strangeness, Strangeness);
    let sl = pair_index(Strangeness, Lifetime);
    let ls = pair_index(Lifetime, Strangeness);
    let ll = pair_index(Lifetime, Lifetime);
    [
        vec![(ss, K0bar, K0bar)],
        vec![(ls, KS, K0bar)],
        vec![(sl, K0bar, KL)],
        vec![(ll, KS, KL)],
        vec![(ls, KS, K0), (ls, KS, K0bar)],
        vec![(sl, K0, KL), (sl, K0bar, KL)],
    ]
}

const TERM_SIGNS: [f64; 6] = [-1.0, 1.0, 1.0, 1.0, -1.0, -1.0];

fn estimate_first(
    d: &Distributions,
    weight: &dyn Fn(Outcome) -> f64,
    variant: Variant,
) -> CHReport {
    let terms = first_variant_terms();
    let mut values = [0.0; 6];
    let mut errs = [0.0; 6];
    // per-bucket coefficients of B, so within-bucket covariances are exact
    let mut b_coef = [[[0.0; 3]; 3]; 4];
    for (t, cells) in terms.iter().enumerate() {
        let mut coef = [[[0.0; 3]; 3]; 4];
        for &(p, a, b) in cells {
            let w = weight(a) * weight(b);
            coef[p][a.slot()][b.slot()] += w;
            b_coef[p][a.slot()][b.slot()] += TERM_SIGNS[t] * w;
        }
        let (v, var) = functional(d, &coef);
        values[t] = v;
        errs[t] = var.sqrt();
    }
    let (_, var_b) = functional(d, &b_coef);
    let probs = ChProbabilities {
        p_bb: values[0],
        p_sb: values[1],
        p_bl: values[2],
        p_sl: values[3],
        p_s_star: values[4],
        p_star_l: values[5],
    };
    let stderr = ChStdErr {
        p_bb: errs[0],
        p_sb: errs[1],
        p_bl: errs[2],
        p_sl: errs[3],
        p_s_star: errs[4],
        p_star_l: errs[5],
        b: var_b.sqrt(),
    };
    CHReport::new(variant, probs, stderr)
}

/// Value and multinomial variance of `Σ coef · π` summed over buckets.
fn functional(d: &Distributions, coef: &[[[f64; 3]; 3]; 4]) -> (f64, f64) {
    let mut value = 0.0;
    let mut var = 0.0;
    for p in 0..4 {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (c, pi) in coef[p].iter().flatten().zip(d.probs[p].iter().flatten()) {
            m1 += c * pi;
            m2 += c * c * pi;
        }
        value += m1;
        if let Some(n) = d.n {
            var += ((m2 - m1 * m1) / n[p]).max(0.0);
        }
    }
    (value, var)
}

fn estimate_both(
    first: Distributions,
    second: Distributions,
    detector: Option<&DetectorModel>,
    mode: CorrectionMode,
) -> [CHReport; 2] {
    let weight = |o: Outcome| match (detector, mode) {
        (Some(d), CorrectionMode::EfficiencyCorrected) => 1.0 / d.efficiency(o),
        _ => 1.0,
    };
    [
        estimate_first(&first, &weight, Variant::First),
        estimate_first(&second, &weight, Variant::Second),
    ]
}

/// Estimate both CH variants from a count table.
pub fn estimate_from_counts(
    counts: &CountTable,
    detector: Option<&DetectorModel>,
    mode: CorrectionMode,
) -> Result<[CHReport; 2]> {
    let first = Distributions::from_counts(counts)?;
    let second = Distributions::from_counts(&counts.swapped())?;
    Ok(estimate_both(first, second, detector, mode))
}

/// Expected value of the estimator: the analytic joint probabilities pushed
/// through the detector response, then corrected as in `mode`.
pub fn predict_recorded(
    state: &PairState,
    detector: Option<&DetectorModel>,
    constants: &PhysicalConstants,
    mode: CorrectionMode,
) -> Result<[CHReport; 2]> {
    check_unit_norm(state)?;
    if let Some(d) = detector {
        d.validate()?;
    }
    let response = response_pair(detector, constants)?;
    let recorded = |s: &PairState| {
        let mut probs = [[[0.0; 3]; 3]; 4];
        for (p, (l, r)) in SETTING_PAIRS.iter().enumerate() {
            let truth = joint_table(s, *l, *r);
            let ml = &response[l.index()].rows;
            let mr = &response[r.index()].rows;
            for (a, row) in truth.iter().enumerate() {
                for (b, pt) in row.iter().enumerate() {
                    for ra in 0..3 {
                        for rb in 0..3 {
                            probs[p][ra][rb] += pt * ml[a][ra] * mr[b][rb];
                        }
                    }
                }
            }
        }
        Distributions { probs, n: None }
    };
    Ok(estimate_both(
        recorded(state),
        recorded(&state.swap_sides()),
        detector,
        mode,
    ))
}
