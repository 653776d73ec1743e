//! Parameter sweeps: bifurcation diagrams of the stationary reset values,
//! firing rate against the cutoff, and divergence profiles `W(v)`.
//!
//! Sweep points are independent; with the `parallel` feature (default) they
//! are evaluated on the rayon pool, otherwise sequentially. Both paths
//! produce identical rows.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{simulate_train, State, StepControl, Stop, SpikeTrain};
use crate::model::{ModelParams, ResetRule};
use crate::phase_plane::{self, SpikingZoneEntry};
use crate::spike_analysis::{classify_train, firing_rate, AnalysisSettings, Pattern, PatternClass};

pub const DEFAULT_SPIKE_BUDGET: usize = 600;
pub const DEFAULT_RATE_TAIL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    #[default]
    Theta,
    /// Input current `I`.
    Current,
    /// Spike-triggered increment `d`.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Initial condition used at every sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum InitialPolicy {
    /// Start from `(v0, w0)`; `v0` defaults to the reset potential `c`.
    Fresh { v0: Option<f64>, w0: f64 },
    /// Start the first point fresh and every later point from the previous
    /// point's final post-reset state. Forces sequential evaluation.
    Continuation { v0: Option<f64>, w0: f64 },
}

impl Default for InitialPolicy {
    fn default() -> Self {
        InitialPolicy::Fresh { v0: None, w0: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub params: ModelParams,
    pub reset: ResetRule,
    #[serde(default)]
    pub parameter: SweptParameter,
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default = "default_budget")]
    pub n_spikes: usize,
    #[serde(default)]
    pub initial: InitialPolicy,
    #[serde(default)]
    pub control: StepControl,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    #[serde(default = "default_rate_tail")]
    pub rate_tail_fraction: f64,
}

fn default_budget() -> usize {
    DEFAULT_SPIKE_BUDGET
}

fn default_rate_tail() -> f64 {
    DEFAULT_RATE_TAIL
}

impl SweepSpec {
    /// Cutoff sweep with the default budget, analysis and control.
    pub fn cutoff(params: ModelParams, reset: ResetRule, lo: f64, hi: f64, n_points: usize) -> Self {
        SweepSpec {
            params,
            reset,
            parameter: SweptParameter::Theta,
            lo,
            hi,
            n_points,
            spacing: Spacing::Linear,
            n_spikes: DEFAULT_SPIKE_BUDGET,
            initial: InitialPolicy::default(),
            control: StepControl::default(),
            analysis: AnalysisSettings::default(),
            rate_tail_fraction: DEFAULT_RATE_TAIL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.control.validate()?;
        let degenerate = self.n_points == 1 && self.lo == self.hi;
        if !(degenerate || (self.lo < self.hi && self.n_points >= 2)) {
            return Err(Error::InvalidParameter(format!(
                "sweep needs lo < hi and n_points >= 2 (or a single point with lo == hi), got [{}, {}] x {}",
                self.lo, self.hi, self.n_points
            )));
        }
        if self.spacing == Spacing::Log && self.lo <= 0.0 {
            return Err(Error::InvalidParameter("log spacing needs lo > 0".into()));
        }
        Ok(())
    }

    /// Sweep values. Refining with `2 n - 1` points reproduces these exactly
    /// at even indices.
    pub fn points(&self) -> Vec<f64> {
        if self.n_points == 1 {
            return vec![self.lo];
        }
        let last = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| {
                if i + 1 == self.n_points {
                    return self.hi;
                }
                let frac = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.lo + (self.hi - self.lo) * frac,
                    Spacing::Log => self.lo * (self.hi / self.lo).powf(frac),
                }
            })
            .map(|x| x.min(self.hi))
            .collect()
    }

    /// Model and reset rule with the swept parameter set to `value`.
    pub fn configure(&self, value: f64) -> (ModelParams, ResetRule) {
        let mut p = self.params;
        let mut r = self.reset;
        match self.parameter {
            SweptParameter::Theta => r.theta = value,
            SweptParameter::Current => p.current = value,
            SweptParameter::D => r.d = value,
        }
        (p, r)
    }

    fn fresh_state(&self, r: &ResetRule) -> State {
        let (v0, w0) = match self.initial {
            InitialPolicy::Fresh { v0, w0 } | InitialPolicy::Continuation { v0, w0 } => (v0, w0),
        };
        State::new(0.0, v0.unwrap_or(r.c), w0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFlags {
    pub stiffness_failure: bool,
    pub insufficient_data: bool,
    /// Any other failure, rendered as text.
    pub error: Option<String>,
}

impl RowFlags {
    pub fn is_clean(&self) -> bool {
        !self.stiffness_failure && !self.insufficient_data && self.error.is_none()
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.stiffness_failure {
            parts.push("stiffness".to_string());
        }
        if self.insufficient_data {
            parts.push("insufficient_data".to_string());
        }
        if let Some(e) = &self.error {
            parts.push(format!("error:{e}"));
        }
        parts.join(";")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramRow {
    /// Value of the swept parameter (the cutoff by default).
    pub theta: f64,
    pub class: Option<PatternClass>,
    pub firing_rate: f64,
    pub n_spikes: usize,
    pub flags: RowFlags,
}

impl DiagramRow {
    pub fn pattern(&self) -> Option<Pattern> {
        self.class.as_ref().map(|c| c.pattern)
    }

    pub fn period(&self) -> Option<usize> {
        self.pattern().and_then(|p| p.period())
    }
}

fn analyse(spec: &SweepSpec, value: f64, train: &SpikeTrain, mut flags: RowFlags) -> DiagramRow {
    let class = match classify_train(train, &spec.analysis) {
        Ok(c) => Some(c),
        Err(Error::InsufficientData { .. }) => {
            flags.insufficient_data = true;
            None
        }
        Err(e) => {
            flags.error.get_or_insert(e.to_string());
            None
        }
    };
    DiagramRow {
        theta: value,
        class,
        firing_rate: firing_rate(train, spec.rate_tail_fraction),
        n_spikes: train.len(),
        flags,
    }
}

fn run_point(spec: &SweepSpec, value: f64, start: Option<State>) -> (DiagramRow, State) {
    let (p, r) = spec.configure(value);
    let s0 = start.unwrap_or_else(|| spec.fresh_state(&r));
    let mut flags = RowFlags::default();
    let train = match simulate_train(&p, &r, s0, &spec.control, Stop::spikes(spec.n_spikes)) {
        Ok(t) => t,
        Err(fail) => {
            match fail.error {
                Error::Stiffness { .. } => flags.stiffness_failure = true,
                ref e => flags.error = Some(e.to_string()),
            }
            fail.train
        }
    };
    let last = train.final_state;
    (analyse(spec, value, &train, flags), last)
}

/// Simulates and classifies a single sweep value from the fresh initial state.
pub fn evaluate_point(spec: &SweepSpec, value: f64) -> DiagramRow {
    run_point(spec, value, None).0
}

/// Sequential sweep; always available, used as the reference for the parallel path.
pub fn sweep_cutoff_sequential(spec: &SweepSpec) -> Result<Vec<DiagramRow>> {
    spec.validate()?;
    let points = spec.points();
    if let InitialPolicy::Continuation { .. } = spec.initial {
        let mut rows = Vec::with_capacity(points.len());
        let mut carry: Option<State> = None;
        for value in points {
            let (row, last) = run_point(spec, value, carry);
            let (_, r) = spec.configure(value);
            carry = (row.n_spikes > 0 && last.v < r.theta).then_some(State::new(0.0, last.v, last.w));
            rows.push(row);
        }
        return Ok(rows);
    }
    Ok(points.into_iter().map(|v| evaluate_point(spec, v)).collect())
}

/// Sweeps the configured parameter, one row per point ordered by value.
/// Failures are reported per row through [`RowFlags`].
pub fn sweep_cutoff(spec: &SweepSpec) -> Result<Vec<DiagramRow>> {
    #[cfg(feature = "parallel")]
    {
        if let InitialPolicy::Fresh { .. } = spec.initial {
            spec.validate()?;
            return Ok(spec.points().into_par_iter().map(|v| evaluate_point(spec, v)).collect());
        }
    }
    sweep_cutoff_sequential(spec)
}

/// A change of class between two adjacent sweep values, refined by bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub theta_star: f64,
    /// Final bracket `[lower, upper]`.
    pub bracket: (f64, f64),
    pub lower: Option<Pattern>,
    pub upper: Option<Pattern>,
}

/// Bisects between two sweep values with different classes until the
/// bracket is narrower than `resolution`.
pub fn refine_transition(spec: &SweepSpec, lo: f64, hi: f64, resolution: f64) -> Result<Transition> {
    let mut a = lo;
    let mut b = hi;
    let pa = evaluate_point(spec, a).pattern();
    let pb = evaluate_point(spec, b).pattern();
    if pa == pb {
        return Err(Error::InvalidParameter(format!(
            "no class change between {lo} and {hi} ({pa:?})"
        )));
    }
    while b - a >= resolution {
        let mid = 0.5 * (a + b);
        if evaluate_point(spec, mid).pattern() == pa {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Transition {
        theta_star: 0.5 * (a + b),
        bracket: (a, b),
        lower: pa,
        upper: evaluate_point(spec, b).pattern(),
    })
}

/// Every class change between consecutive rows, each bisected to `resolution`.
pub fn find_transitions(spec: &SweepSpec, rows: &[DiagramRow], resolution: f64) -> Result<Vec<Transition>> {
    rows.windows(2)
        .filter(|w| w[0].pattern() != w[1].pattern())
        .map(|w| refine_transition(spec, w[0].theta, w[1].theta, resolution))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub theta: f64,
    pub rate: f64,
    pub flags: RowFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub model: String,
    pub points: Vec<RatePoint>,
}

/// Firing rate against the swept value for each model.
pub fn rate_curve(specs: &[SweepSpec]) -> Result<Vec<RateTable>> {
    specs
        .iter()
        .map(|spec| {
            let rows = sweep_cutoff(spec)?;
            Ok(RateTable {
                model: spec.params.kind.name().to_string(),
                points: rows
                    .into_iter()
                    .map(|r| RatePoint {
                        theta: r.theta,
                        rate: r.firing_rate,
                        flags: r.flags,
                    })
                    .collect(),
            })
        })
        .collect()
}

/// `(v, W(v))` on log-spaced nodes from the entry point to `v_max`.
pub fn divergence_profile(
    p: &ModelParams,
    entry: &SpikingZoneEntry,
    v_max: f64,
    n_nodes: usize,
) -> Result<Vec<(f64, f64)>> {
    let graph = phase_plane::orbit_graph(p, entry, v_max, n_nodes)?;
    Ok(graph.samples)
}
