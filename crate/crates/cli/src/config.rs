//! JSON experiment configuration shared by every subcommand.

use std::path::Path;

use aif_core::bifurcation::{Spacing, SweptParameter};
use aif_core::integrator::{State, StepControl};
use aif_core::model::{ModelParams, NonlinearityKind, ResetRule};
use aif_core::spike_analysis::AnalysisSettings;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Quadratic,
    GeneralizedQuadratic,
    Quartic,
    Exponential,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: KindName,
    /// `[p2, p1, p0]` for the generalized quadratic; defaults to `[0.04, 5, 140]`.
    #[serde(default)]
    pub coefficients: Option<[f64; 3]>,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "I")]
    pub current: f64,
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let kind = match (self.kind, self.coefficients) {
            (KindName::Quadratic, None) => NonlinearityKind::Quadratic,
            (KindName::Quartic, None) => NonlinearityKind::Quartic,
            (KindName::Exponential, None) => NonlinearityKind::Exponential,
            (KindName::GeneralizedQuadratic, None) => NonlinearityKind::izhikevich(),
            (KindName::GeneralizedQuadratic, Some([p2, p1, p0])) => NonlinearityKind::GeneralizedQuadratic { p2, p1, p0 },
            (_, Some(_)) => {
                return Err(CliError::config(
                    "model.coefficients",
                    "coefficients are only accepted for kind generalized_quadratic",
                ))
            }
        };
        ModelParams::new(kind, self.a, self.b, self.current).map_err(|e| CliError::config("model", e.to_string()))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetSection {
    pub theta: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Defaults to the reset potential `c`.
    #[serde(default)]
    pub v0: Option<f64>,
    #[serde(default)]
    pub w0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config<E> {
    pub model: ModelSection,
    pub reset: ResetSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub control: StepControl,
    pub experiment: E,
}

impl<E> Config<E> {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        self.model.params()
    }

    pub fn reset(&self) -> Result<ResetRule, CliError> {
        let r = &self.reset;
        ResetRule::new(r.theta, r.c, r.d).map_err(|e| CliError::config("reset", e.to_string()))
    }

    pub fn control(&self) -> Result<StepControl, CliError> {
        self.control.validate().map_err(|e| CliError::config("control", e.to_string()))?;
        Ok(self.control)
    }

    pub fn start(&self) -> State {
        State::new(0.0, self.initial.v0.unwrap_or(self.reset.c), self.initial.w0)
    }
}

/// Reads and validates a config, reporting the JSON path of the first
/// offending field.
pub fn load<E: DeserializeOwned>(path: &Path) -> Result<Config<E>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("", format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let reason = e.into_inner().to_string();
        // serde reports a missing field against its parent
        match missing_field(&reason) {
            Some(name) if field == "." => CliError::config(name, reason.clone()),
            Some(name) => CliError::config(&format!("{field}.{name}"), reason.clone()),
            None => CliError::config(&field, reason),
        }
    })
}

fn missing_field(reason: &str) -> Option<&str> {
    let rest = reason.strip_prefix("missing field `")?;
    rest.split('`').next()
}

fn default_spikes() -> usize {
    600
}

fn default_rate_tail() -> f64 {
    aif_core::bifurcation::DEFAULT_RATE_TAIL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Adaptive,
    Euler,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateExperiment {
    #[serde(default = "default_spikes")]
    pub n_spikes: usize,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub scheme: Scheme,
    /// Step for the Euler scheme.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default = "default_rate_tail")]
    pub rate_tail_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Fresh,
    Continuation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepExperiment {
    #[serde(default)]
    pub parameter: SweptParameter,
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default = "default_spikes")]
    pub n_spikes: usize,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default = "default_rate_tail")]
    pub rate_tail_fraction: f64,
    /// Bisect every class change down to this width.
    #[serde(default)]
    pub refine: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyExperiment {
    #[serde(default = "default_spikes")]
    pub n_spikes: usize,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    /// Also classify with halved integrator tolerances.
    #[serde(default = "yes")]
    pub tolerance_check: bool,
    /// Euler steps to compare against.
    #[serde(default)]
    pub euler_dt: Vec<f64>,
}

fn yes() -> bool {
    true
}

/// Entry point into the spiking zone; detected from `initial` when omitted.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySection {
    pub v1: f64,
    pub w1: f64,
}

fn default_v_max() -> f64 {
    1e6
}

fn default_nodes() -> usize {
    61
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsExperiment {
    #[serde(default)]
    pub entry: Option<EntrySection>,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileExperiment {
    #[serde(default)]
    pub entry: Option<EntrySection>,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
    /// Extra models profiled from the same entry, after the main one.
    #[serde(default)]
    pub models: Vec<ModelSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateCurveExperiment {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default = "default_spikes")]
    pub n_spikes: usize,
    #[serde(default = "default_rate_tail")]
    pub rate_tail_fraction: f64,
    /// Extra models swept with the same reset rule, after the main one.
    #[serde(default)]
    pub models: Vec<ModelSection>,
}

