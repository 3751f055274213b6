//! JSON run configuration. Units are part of the key names; unknown keys
//! are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complex_serde;
use crate::detector::DetectorModel;
use crate::dynamics::{
    closed_form_state, prepare_bell_state, PreparationConfig, PreparedState, RegenSpec,
};
use crate::error::{Error, Result};
use crate::montecarlo::{CorrectionMode, RunPlan};
use crate::quasispin::{PairState, PhysicalConstants};

/// Defaults shipped with the crate.
pub const DEFAULTS_JSON: &str = include_str!("../config/defaults.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form annotations (provenance of values, etc.); ignored by the engine.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
    pub constants: PhysicalConstants,
    pub state: StateConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    /// The surviving-pair state given directly by its K_L K_L coefficient.
    Direct {
        #[serde(rename = "R", with = "complex_serde")]
        big_r: Complex64,
        /// Free-flight time, only used by feasibility checks.
        #[serde(rename = "T_tau_s", default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    /// Build the state from a regenerator and free flight.
    Preparation {
        regenerator: RegenSpec,
        #[serde(rename = "T_tau_s")]
        t: f64,
        #[serde(rename = "truncate_SS", default = "yes")]
        truncate_ss: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_events: u64,
    #[serde(default)]
    pub seed: u64,
    /// Weights of (S,S), (S,L), (L,S), (L,L); S = strangeness, L = lifetime.
    #[serde(default = "equal_weights")]
    pub setting_weights: [f64; 4],
    /// Apply the `detector` section; otherwise the detector is ideal.
    #[serde(default)]
    pub use_detector: bool,
    #[serde(default)]
    pub correction_mode: CorrectionMode,
}

fn equal_weights() -> [f64; 4] {
    [0.25; 4]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

/// The state a configuration describes, with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedState {
    pub state: PairState,
    pub big_r: Complex64,
    pub t: Option<f64>,
    pub prepared: Option<PreparedState>,
}

fn in_section(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::InvalidParameter {
            name: format!("{section}.{name}"),
            reason,
        },
        Error::InvalidSpec(msg) => Error::InvalidSpec(format!("{section}: {msg}")),
        other => other,
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {}", e.line(), e.column(), e))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn defaults() -> Self {
        Self::from_json_str(DEFAULTS_JSON).expect("shipped defaults are valid")
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants
            .validate()
            .map_err(|e| in_section("constants", e))?;
        match &self.state {
            StateConfig::Direct { big_r, t } => {
                if !(big_r.re.is_finite() && big_r.im.is_finite()) {
                    return Err(Error::param("state.direct.R", "must be finite"));
                }
                if let Some(t) = t {
                    if !(t.is_finite() && *t >= 0.0) {
                        return Err(Error::param("state.direct.T_tau_s", "must be >= 0"));
                    }
                }
            }
            StateConfig::Preparation { .. } => {
                self.preparation()
                    .expect("preparation state")
                    .validate()
                    .map_err(|e| in_section("state.preparation", e))?;
            }
        }
        if let Some(d) = &self.detector {
            d.validate().map_err(|e| in_section("detector", e))?;
        }
        if let Some(mc) = &self.mc {
            if mc.use_detector && self.detector.is_none() {
                return Err(Error::param(
                    "mc.use_detector",
                    "requires a `detector` section",
                ));
            }
            // the state is only needed for its norm here; a normalized stand-in is fine
            self.run_plan_with_state(PairState::singlet())?
                .validate()
                .map_err(|e| in_section("mc", e))?;
        }
        Ok(())
    }

    pub fn preparation(&self) -> Option<PreparationConfig> {
        match &self.state {
            StateConfig::Preparation {
                regenerator,
                t,
                truncate_ss,
            } => Some(PreparationConfig {
                regen: *regenerator,
                t: *t,
                truncate_ss: *truncate_ss,
                constants: self.constants,
            }),
            StateConfig::Direct { .. } => None,
        }
    }

    pub fn resolve_state(&self) -> Result<ResolvedState> {
        match &self.state {
            StateConfig::Direct { big_r, t } => Ok(ResolvedState {
                state: closed_form_state(*big_r),
                big_r: *big_r,
                t: *t,
                prepared: None,
            }),
            StateConfig::Preparation { t, .. } => {
                let prep = prepare_bell_state(&self.preparation().expect("preparation state"))?;
                Ok(ResolvedState {
                    state: prep.state,
                    big_r: prep.big_r,
                    t: Some(*t),
                    prepared: Some(prep),
                })
            }
        }
    }

    fn run_plan_with_state(&self, state: PairState) -> Result<RunPlan> {
        let mc = self
            .mc
            .as_ref()
            .ok_or_else(|| Error::Config("missing `mc` section".into()))?;
        Ok(RunPlan {
            state,
            n_events: mc.n_events,
            setting_weights: mc.setting_weights,
            detector: if mc.use_detector { self.detector } else { None },
            constants: self.constants,
            seed: mc.seed,
            correction: mc.correction_mode,
        })
    }

    /// Monte Carlo plan for the configured state.
    pub fn run_plan(&self) -> Result<RunPlan> {
        let resolved = self.resolve_state()?;
        self.run_plan_with_state(resolved.state)
    }
}
