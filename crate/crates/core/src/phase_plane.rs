//! The orbit inside the spiking zone, seen as a graph `W(v)`.
//!
//! Once `w < b v` and `F(v) - b v + I > 0` with `v` past the minimiser of
//! that gap, `v` increases monotonically to blow-up and the adaptation
//! obeys
//!
//! ```text
//! dW/dv = a (b v - W) / (F(v) - W + I),   W(v1) = w1.
//! ```
//!
//! Freezing `W` at `w1` in the denominator gives a linear equation whose
//! solution `z(v)` bounds `W` from below; replacing `W` by `b v` in the
//! denominator and by `w1` in the numerator gives an upper bound.

use serde::{Deserialize, Serialize};

use crate::dopri;
use crate::error::{Error, Result};
use crate::integrator::{integrate_to_spike_observed, SpikeOutcome, State, StepControl};
use crate::model::{self, inverse_drive, ModelParams, NonlinearityKind, ResetRule};
use crate::quadrature::integrate;

/// Where improper integrals switch to analytic tails.
pub const TAIL_SPLIT: f64 = 1.0e4;
/// Quadrature tolerance for the envelopes.
pub const ENVELOPE_REL_TOL: f64 = 1.0e-10;
/// Cauchy tolerance for the limit of `W` in the convergent case.
pub const CAUCHY_TOL: f64 = 1.0e-8;

const ORBIT_REL_TOL: f64 = 1.0e-12;
const ORBIT_ABS_TOL: f64 = 1.0e-14;
const INNER_REL_TOL: f64 = 1.0e-13;
const QUAD_ABS_TOL: f64 = 1.0e-15;
// cutoff used to drive a trajectory into the zone when searching for entry
const ENTRY_PROBE: f64 = 1.0e6;
const CAUCHY_DECADES: i32 = 8;

/// A point from which the trajectory is trapped in the spiking zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikingZoneEntry {
    pub v1: f64,
    pub w1: f64,
    /// Lower bound on `F(v) - W(v) + I` for every `v >= v1`.
    pub k: f64,
    pub t1: Option<f64>,
}

impl SpikingZoneEntry {
    /// Checks that `(v1, w1)` is trapped and sets `k` to half the margin
    /// `F(v1) - w1 + I`.
    ///
    /// Trapping is certified by `w1 < b v1`, `v1` at or past the minimiser of
    /// the convex gap `F(v) - b v + I`, and that gap being at least `k` at
    /// `v1`: along the orbit the denominator never drops below the gap,
    /// which only grows from there.
    pub fn new(p: &ModelParams, v1: f64, w1: f64) -> Result<Self> {
        match Self::try_at(p, v1, w1)? {
            Some(e) => Ok(e),
            None => Err(Error::InvalidParameter(format!(
                "({v1}, {w1}) is not inside the spiking zone"
            ))),
        }
    }

    fn try_at(p: &ModelParams, v1: f64, w1: f64) -> Result<Option<Self>> {
        if !(v1.is_finite() && w1.is_finite()) || v1 > p.kind.saturation_limit() {
            return Ok(None);
        }
        if !(w1 < p.b * v1) || v1 < model::gap_minimiser(p)? {
            return Ok(None);
        }
        let margin = p.f(v1)? - w1 + p.current;
        let k = 0.5 * margin;
        let gap = p.nullcline_gap(v1)?;
        if !(k > 0.0) || gap < k {
            return Ok(None);
        }
        Ok(Some(SpikingZoneEntry { v1, w1, k, t1: None }))
    }

    pub fn with_time(mut self, t1: f64) -> Self {
        self.t1 = Some(t1);
        self
    }
}

/// First sampled state of the trajectory from `s0` that lies in the spiking zone.
///
/// Fails with [`Error::CapturedByRest`] if the trajectory settles on a
/// stable equilibrium or `ctrl.t_max` elapses first.
pub fn detect_spiking_zone_entry(p: &ModelParams, s0: State, ctrl: &StepControl) -> Result<SpikingZoneEntry> {
    if let Some(e) = SpikingZoneEntry::try_at(p, s0.v, s0.w)? {
        return Ok(e.with_time(s0.t));
    }
    let probe = ResetRule::new(ENTRY_PROBE.max(s0.v + 1.0), s0.v - 1.0, 0.0)?;
    let mut found: Option<SpikingZoneEntry> = None;
    let mut failure: Option<Error> = None;
    let outcome = integrate_to_spike_observed(p, &probe, s0, ctrl, &mut |s| {
        if found.is_none() && failure.is_none() {
            match SpikingZoneEntry::try_at(p, s.v, s.w) {
                Ok(Some(e)) => found = Some(e.with_time(s.t)),
                Ok(None) => {}
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    match (found, outcome) {
        (Some(e), _) => Ok(e),
        (None, SpikeOutcome::Quiescent { state, .. }) => Err(Error::CapturedByRest { t: state.t }),
        (None, SpikeOutcome::Spike(ev)) => Err(Error::InvariantViolation(format!(
            "trajectory blew up at t = {} without a sampled state in the spiking zone",
            ev.t_star
        ))),
    }
}

/// `W(v)` with its lower and upper envelopes on a common set of nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitGraph {
    /// `(v, W(v))`, increasing in `v`.
    pub samples: Vec<(f64, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl OrbitGraph {
    /// Rows `(v, W, lower, upper)`.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        self.samples
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&(v, w), (&lo, &up))| [v, w, lo, up])
    }

    /// Largest amount by which a node leaves the sandwich, relative to `max(1, |W|)`.
    pub fn worst_violation(&self) -> f64 {
        self.rows()
            .map(|[_, w, lo, up]| ((lo - w).max(w - up)) / w.abs().max(1.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `n_nodes` points from `v1` to `v_max`, geometric in `v - v1 + 1`.
pub fn log_nodes(v1: f64, v_max: f64, n_nodes: usize) -> Result<Vec<f64>> {
    if !(v_max > v1) || n_nodes < 2 {
        return Err(Error::InvalidParameter(format!(
            "need v_max > v1 and at least two nodes, got v1 = {v1}, v_max = {v_max}, n = {n_nodes}"
        )));
    }
    let span = v_max - v1 + 1.0;
    let last = (n_nodes - 1) as f64;
    let mut nodes: Vec<f64> = (0..n_nodes)
        .map(|i| v1 - 1.0 + span.powf(i as f64 / last))
        .collect();
    nodes[0] = v1;
    nodes[n_nodes - 1] = v_max;
    nodes.dedup();
    Ok(nodes)
}

/// Integrates the orbit equation through `nodes` (the first node is `v1`),
/// aborting if the denominator falls below `floor`.
fn orbit_values(p: &ModelParams, w1: f64, nodes: &[f64], floor: f64) -> Result<Vec<f64>> {
    let mut rhs = |v: f64, y: &[f64; 1]| -> Result<[f64; 1]> {
        if p.a == 0.0 {
            return Ok([0.0]);
        }
        Ok([p.a * (p.b * v - y[0]) * inverse_drive(&p.kind, p.a, v, p.current - y[0])])
    };
    let mut v = nodes[0];
    let mut y = [w1];
    let mut k = rhs(v, &y)?;
    let mut h = 1e-3 * v.abs().max(1.0);
    let mut out = Vec::with_capacity(nodes.len());
    out.push(w1);
    for &target in &nodes[1..] {
        while v < target {
            let remaining = target - v;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let at = dopri::attempt(&mut rhs, v, &y, &k, step)?;
            let err = if at.is_finite() {
                at.error_norm(&y, ORBIT_REL_TOL, ORBIT_ABS_TOL)
            } else {
                f64::INFINITY
            };
            let proposal = step * dopri::step_factor(err);
            if err <= 1.0 {
                v = if last { target } else { v + step };
                y = at.y_new;
                k = at.k_new;
                let denominator = model::drive(&p.kind, p.a, v, p.current - y[0]);
                if denominator < floor {
                    return Err(Error::LeftSpikingZone { v, denominator, floor });
                }
                h = if last { h.max(proposal) } else { proposal };
            } else {
                h = proposal;
                if h <= f64::EPSILON * v.abs().max(1.0) {
                    return Err(Error::InvariantViolation(format!("orbit step size underflow at v = {v}")));
                }
            }
        }
        out.push(y[0]);
    }
    Ok(out)
}

/// Cumulative evaluation of `g`, the lower envelope and the upper envelope
/// along increasing `v`.
struct Envelopes<'a> {
    p: &'a ModelParams,
    w1: f64,
    v: f64,
    g: f64,
    outer: f64,
    upper: f64,
}

impl<'a> Envelopes<'a> {
    fn new(p: &'a ModelParams, entry: &SpikingZoneEntry) -> Self {
        Envelopes {
            p,
            w1: entry.w1,
            v: entry.v1,
            g: 0.0,
            outer: 0.0,
            upper: 0.0,
        }
    }

    /// `a / (F(u) - w1 + I)`
    fn rate(&self, u: f64) -> f64 {
        self.p.a * inverse_drive(&self.p.kind, self.p.a, u, self.p.current - self.w1)
    }

    fn advance(&mut self, to: f64) -> Result<()> {
        if to <= self.v {
            return Ok(());
        }
        if self.p.a == 0.0 {
            self.v = to;
            return Ok(());
        }
        let (p, w1, v0, g0) = (self.p, self.w1, self.v, self.g);
        let rate = |u: f64| self.rate(u);
        let g_at = |u: f64| -> f64 {
            match integrate(rate, v0, u, INNER_REL_TOL, QUAD_ABS_TOL) {
                Ok(e) => g0 - e.value,
                Err(_) => f64::NAN,
            }
        };
        let outer = integrate(
            |u| p.b * u * rate(u) * (-g_at(u)).exp(),
            v0,
            to,
            ENVELOPE_REL_TOL * 0.1,
            QUAD_ABS_TOL,
        )?;
        let dg = integrate(rate, v0, to, INNER_REL_TOL, QUAD_ABS_TOL)?;
        let up = integrate(
            |u| p.a * (p.b * u - w1) * inverse_drive(&p.kind, p.a, u, p.current - p.b * u),
            v0,
            to,
            ENVELOPE_REL_TOL * 0.1,
            QUAD_ABS_TOL,
        )?;
        self.g = g0 - dg.value;
        self.outer += outer.value;
        self.upper += up.value;
        self.v = to;
        Ok(())
    }

    /// Advances through decade breakpoints in `v - v1 + 1` to keep each
    /// quadrature panel well conditioned.
    fn advance_in_decades(&mut self, v1: f64, to: f64) -> Result<()> {
        for b in decade_breaks(v1, to) {
            self.advance(b)?;
        }
        Ok(())
    }

    fn lower(&self) -> f64 {
        (self.outer + self.w1) * self.g.exp()
    }

    fn upper(&self) -> f64 {
        self.w1 + self.upper
    }
}

fn decade_breaks(v1: f64, to: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = 10.0;
    while v1 - 1.0 + x < to {
        out.push(v1 - 1.0 + x);
        x *= 10.0;
    }
    out.push(to);
    out
}

fn check_entry(p: &ModelParams, entry: &SpikingZoneEntry) -> Result<()> {
    p.validate()?;
    let fresh = SpikingZoneEntry::new(p, entry.v1, entry.w1)?;
    if !(entry.k > 0.0 && entry.k <= 2.0 * fresh.k) {
        return Err(Error::InvalidParameter(format!(
            "margin k = {} must lie in (0, {}]",
            entry.k,
            2.0 * fresh.k
        )));
    }
    Ok(())
}

/// `F(u) - w1 + I > 0` for all `u >= v1`, which is all the envelopes need.
fn check_frozen_denominator(p: &ModelParams, entry: &SpikingZoneEntry) -> Result<()> {
    p.validate()?;
    let frozen = ModelParams {
        b: 0.0,
        current: p.current - entry.w1,
        ..*p
    };
    let u = model::gap_minimiser(&frozen)?.max(entry.v1);
    if !(frozen.nullcline_gap(u)? > 0.0) {
        return Err(Error::DenominatorRoot { u });
    }
    Ok(())
}

fn check_gap(p: &ModelParams, v1: f64, v: f64) -> Result<()> {
    let u = model::gap_minimiser(p)?.clamp(v1, v);
    if p.nullcline_gap(u)? <= 0.0 {
        return Err(Error::DenominatorRoot { u });
    }
    Ok(())
}

/// Integrates the orbit from the entry point to `v_max` and evaluates both
/// envelopes at `n_nodes` log-spaced nodes.
pub fn orbit_graph(p: &ModelParams, entry: &SpikingZoneEntry, v_max: f64, n_nodes: usize) -> Result<OrbitGraph> {
    check_entry(p, entry)?;
    let nodes = log_nodes(entry.v1, v_max, n_nodes)?;
    let w = orbit_values(p, entry.w1, &nodes, 0.5 * entry.k)?;
    let mut env = Envelopes::new(p, entry);
    let mut lower = Vec::with_capacity(nodes.len());
    let mut upper = Vec::with_capacity(nodes.len());
    for &v in &nodes {
        env.advance(v)?;
        lower.push(env.lower());
        upper.push(env.upper());
    }
    Ok(OrbitGraph {
        samples: nodes.into_iter().zip(w).collect(),
        lower,
        upper,
    })
}

/// `W(v)` at each of `vs` (increasing, all `>= v1`).
pub fn orbit_at(p: &ModelParams, entry: &SpikingZoneEntry, vs: &[f64]) -> Result<Vec<f64>> {
    check_entry(p, entry)?;
    if vs.windows(2).any(|w| w[1] < w[0]) || vs.first().is_some_and(|&v| v < entry.v1) {
        return Err(Error::InvalidParameter("evaluation points must be increasing and >= v1".into()));
    }
    let mut nodes = vec![entry.v1];
    nodes.extend_from_slice(vs);
    Ok(orbit_values(p, entry.w1, &nodes, 0.5 * entry.k)?.split_off(1))
}

/// `g(v) = -∫_{v1}^{v} a / (F(u) - w1 + I) du`.
pub fn g_value(p: &ModelParams, entry: &SpikingZoneEntry, v: f64) -> Result<f64> {
    check_frozen_denominator(p, entry)?;
    let mut env = Envelopes::new(p, entry);
    env.advance_in_decades(entry.v1, v)?;
    Ok(env.g)
}

/// Lower envelope `z(v)` solving the linear comparison equation.
pub fn gronwall_lower(p: &ModelParams, entry: &SpikingZoneEntry, v: f64) -> Result<f64> {
    check_frozen_denominator(p, entry)?;
    if v < entry.v1 {
        return Err(Error::InvalidParameter(format!("v = {v} is below v1 = {}", entry.v1)));
    }
    let mut env = Envelopes::new(p, entry);
    env.advance_in_decades(entry.v1, v)?;
    Ok(env.lower())
}

/// Upper envelope `w1 + ∫_{v1}^{v} a (b u - w1) / (F(u) - b u + I) du`.
pub fn upper_bound(p: &ModelParams, entry: &SpikingZoneEntry, v: f64) -> Result<f64> {
    p.validate()?;
    if v < entry.v1 {
        return Err(Error::InvalidParameter(format!("v = {v} is below v1 = {}", entry.v1)));
    }
    check_gap(p, entry.v1, v)?;
    let mut env = Envelopes::new(p, entry);
    env.advance_in_decades(entry.v1, v)?;
    Ok(env.upper())
}

/// `∫_V^∞ du / (F(u) + s)` in closed form or by an asymptotic series
/// accurate far below double precision at `V >= 1e4`.
pub fn tail_integral(kind: &NonlinearityKind, a: f64, v: f64, s: f64) -> f64 {
    // ∫_m^∞ du / (u^2 + kappa)
    fn quadratic_tail(m: f64, kappa: f64) -> f64 {
        if kappa > 0.0 {
            let r = kappa.sqrt();
            (r / m).atan() / r
        } else if kappa < 0.0 {
            let r = (-kappa).sqrt();
            (r / m).atanh() / r
        } else {
            1.0 / m
        }
    }
    match *kind {
        NonlinearityKind::Quadratic => quadratic_tail(v, s),
        NonlinearityKind::GeneralizedQuadratic { p2, p1, p0 } => {
            let shift = p1 / (2.0 * p2);
            let kappa = (p0 + s) / p2 - shift * shift;
            quadratic_tail(v + shift, kappa) / p2
        }
        NonlinearityKind::Quartic => {
            // 1/(u^4 + 2 a u + s) = u^-4 - (2 a u + s) u^-8 + O(u^-10)
            1.0 / (3.0 * v.powi(3)) - a / (3.0 * v.powi(6)) - s / (7.0 * v.powi(7))
        }
        NonlinearityKind::Exponential => {
            let decay = (-v).exp();
            if s == 0.0 {
                decay
            } else {
                (s * decay).ln_1p() / s
            }
        }
    }
}

/// `g(∞)`: quadrature up to `max(1e4, v1)` plus the analytic tail.
pub fn g_limit(p: &ModelParams, entry: &SpikingZoneEntry) -> Result<f64> {
    check_frozen_denominator(p, entry)?;
    if p.a == 0.0 {
        return Ok(0.0);
    }
    let split = TAIL_SPLIT.max(entry.v1);
    let head = g_value(p, entry, split)?;
    Ok(head - p.a * tail_integral(&p.kind, p.a, split, p.current - entry.w1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum DivergenceClass {
    /// `W` grows like `asymptotic_slope * ln v`.
    LogDivergent { asymptotic_slope: f64 },
    /// `W(v)` has a finite limit as `v -> ∞`.
    Convergent { w_limit: f64 },
}

/// Slope of `W` against `ln v` predicted by `dW/dv ~ a b / (p2 v)`.
pub fn predicted_log_slope(p: &ModelParams) -> Option<f64> {
    p.kind.leading_quadratic().map(|p2| p.a * p.b / p2)
}

/// Reference potential for the decade estimators: `1e6`, or further out if
/// the entry is already beyond it.
pub fn decade_reference(entry: &SpikingZoneEntry) -> f64 {
    1.0e6_f64.max(10.0 * (entry.v1.abs() + 1.0))
}

/// Log-divergent for quadratic-growth `F` with slope `(W(10 V) - W(V)) / ln 10`
/// at `V = 1e6`; otherwise convergent, with the limit taken once successive
/// decades agree to `1e-8`.
pub fn divergence_class(p: &ModelParams, entry: &SpikingZoneEntry) -> Result<DivergenceClass> {
    check_entry(p, entry)?;
    if p.a == 0.0 {
        return Ok(DivergenceClass::Convergent { w_limit: entry.w1 });
    }
    let v_ref = decade_reference(entry);
    if p.kind.is_quadratic_growth() {
        let w = orbit_at(p, entry, &[v_ref, 10.0 * v_ref])?;
        return Ok(DivergenceClass::LogDivergent {
            asymptotic_slope: (w[1] - w[0]) / std::f64::consts::LN_10,
        });
    }
    let start = TAIL_SPLIT.max(10.0 * (entry.v1.abs() + 1.0));
    let vs: Vec<f64> = (0..=CAUCHY_DECADES).map(|i| start * 10f64.powi(i)).collect();
    let w = orbit_at(p, entry, &vs)?;
    for pair in w.windows(2) {
        if (pair[1] - pair[0]).abs() < CAUCHY_TOL * pair[0].abs().max(1.0) {
            return Ok(DivergenceClass::Convergent { w_limit: pair[1] });
        }
    }
    Err(Error::InvariantViolation(format!(
        "W did not settle between v = {start:e} and {:e}: last values {:?}",
        vs[vs.len() - 1],
        &w[w.len() - 2..]
    )))
}
