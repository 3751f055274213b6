//! Subcommand implementations behind the `kaon-bell` binary. Each returns a
//! serializable value; the binary decides where it is written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complex_serde;
use crate::config::{Format, RunConfig, StateConfig};
use crate::detector::{
    check_spacelike, lifetime_response, sample_economics, ResponseMatrix, SpacelikeCheck,
};
use crate::dynamics::{closed_form_state, prepare_bell_state, MaterialRegenerator, RegenSpec};
use crate::error::{Error, Result};
use crate::measurement::{
    ch_statistics, optimize_r, qm_ratio, violation_condition, CHReport, OptimizeDomain, Optimum,
    Variant,
};
use crate::montecarlo::{run_experiment, CountTable};
use crate::quasispin::PairState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    #[serde(rename = "R", with = "complex_serde")]
    pub big_r: Complex64,
    /// Closed-form ratios of the two variants.
    pub qm_ratio: [f64; 2],
    pub violation_condition: bool,
    /// Present when the state came from the preparation chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survive_fraction: Option<f64>,
    pub reports: [CHReport; 2],
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<PredictReport> {
    let resolved = cfg.resolve_state()?;
    Ok(PredictReport {
        big_r: resolved.big_r,
        qm_ratio: Variant::BOTH.map(|v| qm_ratio(resolved.big_r, v)),
        violation_condition: violation_condition(resolved.big_r),
        survive_fraction: resolved.prepared.map(|p| p.survive_fraction),
        reports: ch_statistics(&resolved.state)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScanAxis {
    /// Re R, with Im R held fixed.
    ReR,
    /// |R|, with arg R held fixed.
    AbsR,
    /// Free-flight time T (τ_S) through the preparation chain.
    T,
    /// Regenerator thickness d (fm) of a material regenerator.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub axis: ScanAxis,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    /// Im R for `re-r`, arg R (rad) for `abs-r`; unused otherwise.
    pub fixed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub axis_value: f64,
    pub ratio_first: f64,
    pub ratio_second: f64,
    pub violated: bool,
}

pub fn cmd_scan(cfg: &RunConfig, spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    if spec.steps < 2 {
        return Err(Error::param("steps", "must be >= 2"));
    }
    if !(spec.from.is_finite() && spec.to.is_finite() && spec.from < spec.to) {
        return Err(Error::param("range", "need finite from < to"));
    }
    if matches!(spec.axis, ScanAxis::T | ScanAxis::D | ScanAxis::AbsR) && spec.from < 0.0 {
        return Err(Error::param("range", "axis values must be >= 0"));
    }
    let base = cfg.preparation();
    if matches!(spec.axis, ScanAxis::T | ScanAxis::D) && base.is_none() {
        return Err(Error::param(
            "axis",
            "T and d scans need a `state.preparation` section",
        ));
    }
    let h = (spec.to - spec.from) / (spec.steps - 1) as f64;
    (0..spec.steps)
        .map(|i| {
            let x = if i + 1 == spec.steps {
                spec.to
            } else {
                spec.from + h * i as f64
            };
            let state: PairState = match spec.axis {
                ScanAxis::ReR => closed_form_state(Complex64::new(x, spec.fixed)),
                ScanAxis::AbsR => closed_form_state(Complex64::from_polar(x, spec.fixed)),
                ScanAxis::T => {
                    let mut p = base.expect("checked above");
                    p.t = x;
                    prepare_bell_state(&p)?.state
                }
                ScanAxis::D => {
                    let mut p = base.expect("checked above");
                    p.regen = match p.regen {
                        RegenSpec::Material(m) => {
                            RegenSpec::Material(MaterialRegenerator { d: x, ..m })
                        }
                        RegenSpec::Direct { .. } => {
                            return Err(Error::param("axis", "d scans need a material regenerator"))
                        }
                    };
                    prepare_bell_state(&p)?.state
                }
            };
            let [first, second] = ch_statistics(&state)?;
            Ok(ScanRow {
                axis_value: x,
                ratio_first: first.ratio,
                ratio_second: second.ratio,
                violated: first.violated_upper || second.violated_upper,
            })
        })
        .collect()
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["axis_value", "ratio_first", "ratio_second", "violated"])?;
    for r in rows {
        wtr.write_record([
            r.axis_value.to_string(),
            r.ratio_first.to_string(),
            r.ratio_second.to_string(),
            r.violated.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub domain: OptimizeDomain,
    pub variant: Variant,
    #[serde(flatten)]
    pub optimum: Optimum,
    #[serde(rename = "abs_R_star")]
    pub abs_r_star: f64,
}

pub fn cmd_optimize(domain: OptimizeDomain, variant: Variant) -> Result<OptimizeReport> {
    let optimum = optimize_r(domain, variant)?;
    Ok(OptimizeReport {
        domain,
        variant,
        optimum,
        abs_r_star: optimum.r_star.norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    #[serde(rename = "T_tau_s")]
    pub t: f64,
    #[serde(rename = "delta_T_tau_s")]
    pub delta_t: f64,
    pub beta: f64,
    #[serde(flatten)]
    pub spacelike: SpacelikeCheck,
    #[serde(rename = "T_min_over_delta_T")]
    pub t_min_over_delta_t: f64,
    pub surviving_fraction: f64,
    /// Lifetime identification response, rows true K_S / K_L.
    pub lifetime_response: ResponseMatrix,
    /// P(recorded K_L | true K_S), P(recorded K_S | true K_L).
    pub misid: [f64; 2],
}

pub fn cmd_feasibility(cfg: &RunConfig) -> Result<FeasibilityReport> {
    let det = cfg
        .detector
        .ok_or_else(|| Error::Config("feasibility needs a `detector` section".into()))?;
    let t = match &cfg.state {
        StateConfig::Preparation { t, .. } => *t,
        StateConfig::Direct { t: Some(t), .. } => *t,
        StateConfig::Direct { t: None, .. } => {
            return Err(Error::Config(
                "feasibility needs `T_tau_s` in the state section".into(),
            ))
        }
    };
    let spacelike = check_spacelike(t, det.delta_t, det.beta)?;
    let response = lifetime_response(det.delta_t, &cfg.constants)?;
    Ok(FeasibilityReport {
        t,
        delta_t: det.delta_t,
        beta: det.beta,
        spacelike,
        t_min_over_delta_t: spacelike.t_min / det.delta_t,
        surviving_fraction: sample_economics(t, &cfg.constants)?,
        misid: [response.rows[0][1], response.rows[1][0]],
        lifetime_response: response,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n_events: u64,
    pub seed: u64,
    #[serde(rename = "R", with = "complex_serde")]
    pub big_r: Complex64,
    pub reports: [CHReport; 2],
    /// Largest B / σ(B) over the two variants.
    pub max_significance_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub counts: CountTable,
    pub report: SimulationReport,
}

impl SimulationOutput {
    pub fn summary_line(&self) -> String {
        let [a, b] = &self.report.reports;
        format!(
            "n = {}, seed = {}: ratio_first = {:.5} ± {:.5}, ratio_second = {:.5} ± {:.5}; violation significance {:.2} σ",
            self.report.n_events,
            self.report.seed,
            a.ratio,
            a.stderr.b,
            b.ratio,
            b.stderr.b,
            self.report.max_significance_sigma
        )
    }

    /// Write `counts.csv` and `report.json` into `dir`, returning both paths.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join("counts.csv");
        let json_path = dir.join("report.json");
        self.counts.write_csv(fs::File::create(&csv_path)?)?;
        let mut f = fs::File::create(&json_path)?;
        serde_json::to_writer_pretty(&mut f, &self.report)?;
        writeln!(f)?;
        Ok((csv_path, json_path))
    }
}

pub fn cmd_simulate(cfg: &RunConfig, seed_override: Option<u64>) -> Result<SimulationOutput> {
    let mut plan = cfg.run_plan()?;
    if let Some(seed) = seed_override {
        plan.seed = seed;
    }
    let big_r = cfg.resolve_state()?.big_r;
    let result = run_experiment(&plan)?;
    let max_significance_sigma = result
        .reports
        .iter()
        .map(|r| r.significance())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SimulationOutput {
        counts: result.counts,
        report: SimulationReport {
            n_events: plan.n_events,
            seed: plan.seed,
            big_r,
            reports: result.reports,
            max_significance_sigma,
        },
    })
}

/// CSV form of a pair of CH reports, one row per variant.
pub fn write_reports_csv<W: Write>(reports: &[CHReport], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "variant",
        "p_bb",
        "p_sb",
        "p_bl",
        "p_sl",
        "p_s_star",
        "p_star_l",
        "B",
        "ratio",
        "violated_upper",
        "violated_lower",
        "stderr_B",
    ])?;
    for r in reports {
        let p = &r.probabilities;
        wtr.write_record([
            format!("{:?}", r.variant).to_lowercase(),
            p.p_bb.to_string(),
            p.p_sb.to_string(),
            p.p_bl.to_string(),
            p.p_sl.to_string(),
            p.p_s_star.to_string(),
            p.p_star_l.to_string(),
            r.b.to_string(),
            r.ratio.to_string(),
            r.violated_upper.to_string(),
            r.violated_lower.to_string(),
            r.stderr.b.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn default_format(cfg: Option<&RunConfig>) -> Format {
    cfg.and_then(|c| c.output.as_ref().map(|o| o.format))
        .unwrap_or_default()
}
