//! Time-domain integration of the hybrid system: adaptive Dormand–Prince
//! stepping through the blow-up of `v`, cutoff-crossing localisation on the
//! dense interpolant, the reset map and spike-train generation.
//!
//! A fixed-step forward Euler train ([`euler_train`]) is provided alongside
//! to study the step-size sensitivity of the naive scheme.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dopri::{self, Dense};
use crate::error::{Error, Result};
use crate::model::{self, Equilibrium, ModelParams, NonlinearityKind, ResetRule};

/// Above this cutoff the exponential model hands over to the v-parameterised
/// orbit (remaining contributions are below `e^-500`).
pub const EXP_HANDOFF: f64 = 500.0;

/// Consecutive accepted steps near a stable equilibrium before declaring rest.
pub const QUIESCENCE_DWELL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub v: f64,
    pub w: f64,
}

impl State {
    pub fn new(t: f64, v: f64, w: f64) -> Self {
        State { t, v, w }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.v.is_finite() && self.w.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: f64,
    /// Blow-up needs steps far below any intrinsic time scale, hence the tiny default.
    pub dt_min: f64,
    pub dt_max: f64,
    /// Cap on accepted steps per inter-spike segment.
    pub max_steps: usize,
    pub quiescence_tol: f64,
    /// Longest simulated time to wait for a single spike.
    pub t_max: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            dt_init: 1e-3,
            dt_min: 1e-250,
            dt_max: 1.0,
            max_steps: 1_000_000,
            quiescence_tol: 1e-9,
            t_max: 1e5,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.quiescence_tol > 0.0
            && self.t_max > 0.0
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid step control {self:?}")))
        }
    }

    /// Same control with both local-error tolerances scaled by `factor`.
    pub fn scaled_tolerances(&self, factor: f64) -> Self {
        StepControl {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub t_star: f64,
    pub w_at_spike: f64,
    /// Accepted steps (or Euler steps) since the previous reset.
    pub steps_taken: usize,
    /// Set by [`euler_train`] when the scheme overflowed before the cutoff.
    #[serde(default)]
    pub overshoot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuiescenceReason {
    /// Settled on a stable equilibrium.
    Equilibrium,
    /// No crossing within the waiting time.
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpikeOutcome {
    Spike(SpikeEvent),
    Quiescent { state: State, reason: QuiescenceReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    SpikeCountReached,
    TimeLimit,
    Quiescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub events: Vec<SpikeEvent>,
    /// `reset_w[n] = events[n].w_at_spike + d`.
    pub reset_w: Vec<f64>,
    pub terminated_by: Termination,
    /// State where the simulation stopped.
    pub final_state: State,
}

impl SpikeTrain {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn spike_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.t_star).collect()
    }

    pub fn is_quiescent(&self) -> bool {
        self.terminated_by == Termination::Quiescent
    }
}

/// Stop rule for spike trains; at least one bound should be finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub max_spikes: Option<usize>,
    pub t_end: Option<f64>,
}

impl Stop {
    pub fn spikes(n: usize) -> Self {
        Stop {
            max_spikes: Some(n),
            t_end: None,
        }
    }

    pub fn time(t_end: f64) -> Self {
        Stop {
            max_spikes: None,
            t_end: Some(t_end),
        }
    }
}

/// A train that failed part-way; the spikes recorded so far are kept.
#[derive(Debug, Clone, Error)]
#[error("{error} (after {} spikes)", .train.events.len())]
pub struct TrainFailure {
    pub train: SpikeTrain,
    pub error: Error,
}

/// One accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepResult {
    pub state: State,
    pub dt_used: f64,
    pub error_estimate: f64,
}

/// Adaptive stepper over the subthreshold flow.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    params: &'a ModelParams,
    ctrl: StepControl,
    state: State,
    deriv: [f64; 2],
    h_next: f64,
    last_dense: Option<Dense<2>>,
}

impl<'a> Stepper<'a> {
    pub fn new(params: &'a ModelParams, state: State, ctrl: &StepControl) -> Result<Self> {
        let (dv, dw) = params.vector_field(state.v, state.w)?;
        Ok(Stepper {
            params,
            ctrl: *ctrl,
            state,
            deriv: [dv, dw],
            h_next: ctrl.dt_init,
            last_dense: None,
        })
    }

    pub fn state(&self) -> State {
        self.state
    }

    /// Derivative `(dv/dt, dw/dt)` at the current state.
    pub fn derivative(&self) -> (f64, f64) {
        (self.deriv[0], self.deriv[1])
    }

    /// Largest step allowed by the blow-up guard: `|dv| <= max(1, |v|) / 2`.
    fn blowup_cap(&self) -> f64 {
        let speed = self.deriv[0].abs();
        if speed == 0.0 {
            f64::INFINITY
        } else {
            0.5 * self.state.v.abs().max(1.0) / speed
        }
    }

    pub fn step(&mut self) -> Result<StepResult> {
        self.step_until(f64::INFINITY)
    }

    /// Takes one accepted step, never passing `t_limit`.
    pub fn step_until(&mut self, t_limit: f64) -> Result<StepResult> {
        let p = self.params;
        let mut rhs = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
            let (dv, dw) = p.vector_field(y[0], y[1])?;
            Ok([dv, dw])
        };
        let y = [self.state.v, self.state.w];
        let mut h = self.h_next.min(self.ctrl.dt_max).min(self.blowup_cap());
        let remaining = t_limit - self.state.t;
        let mut clipped = false;
        if remaining <= h {
            h = remaining;
            clipped = true;
        }
        let mut rejected = false;
        loop {
            if h < self.ctrl.dt_min && !clipped {
                return Err(Error::Stiffness {
                    state: self.state,
                    dt_min: self.ctrl.dt_min,
                });
            }
            match dopri::attempt(&mut rhs, self.state.t, &y, &self.deriv, h) {
                Ok(at) if at.is_finite() => {
                    let err = at.error_norm(&y, self.ctrl.rel_tol, self.ctrl.abs_tol);
                    if err <= 1.0 {
                        let mut factor = dopri::step_factor(err);
                        if rejected {
                            factor = factor.min(1.0);
                        }
                        self.last_dense = Some(at.dense(h, &y));
                        let t_new = if clipped { t_limit } else { self.state.t + h };
                        self.state = State::new(t_new, at.y_new[0], at.y_new[1]);
                        self.deriv = at.k_new;
                        if !clipped || factor < 1.0 {
                            self.h_next = h * factor;
                        }
                        return Ok(StepResult {
                            state: self.state,
                            dt_used: h,
                            error_estimate: err,
                        });
                    }
                    h *= dopri::step_factor(err).min(0.9);
                }
                Ok(_) | Err(Error::Saturation { .. }) => h *= 0.25,
                Err(e) => return Err(e),
            }
            clipped = false;
            rejected = true;
        }
    }

    pub(crate) fn last_dense(&self) -> Option<&Dense<2>> {
        self.last_dense.as_ref()
    }
}

/// One adaptive step from `s` starting with the proposal `ctrl.dt_init`.
pub fn step(p: &ModelParams, s: State, ctrl: &StepControl) -> Result<StepResult> {
    Stepper::new(p, s, ctrl)?.step()
}

/// Attractors used for quiescence detection. With frozen adaptation (`a = 0`)
/// the rest points are those of the 1-D flow at the current `w`.
fn attractors(p: &ModelParams, w: f64) -> Result<Vec<Equilibrium>> {
    if p.a == 0.0 {
        let frozen = ModelParams {
            b: 0.0,
            current: p.current - w,
            ..*p
        };
        Ok(model::fixed_points(&frozen)?
            .into_iter()
            .filter(|e| p.f_prime(e.v_star) < 0.0)
            .map(|e| Equilibrium { w_star: w, ..e })
            .collect())
    } else {
        Ok(model::fixed_points(p)?
            .into_iter()
            .filter(|e| e.stability.is_attracting())
            .collect())
    }
}

fn near(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol * target.abs().max(1.0)
}

/// Locates `v = level` on the unit-parameterised dense interpolant.
fn localize(dense: &Dense<2>, level: f64, abs_tol: f64) -> (f64, [f64; 2]) {
    let phi = |s: f64| dense.eval_unit(s)[0] - level;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (mut f_lo, mut f_hi) = (phi(lo), phi(hi));
    if f_hi <= 0.0 {
        return (1.0, dense.eval_unit(1.0));
    }
    let mut side = 0i8;
    let mut s = 1.0;
    for _ in 0..200 {
        // Illinois-modified regula falsi with a bisection fallback
        let mut cand = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(cand > lo && cand < hi) {
            cand = 0.5 * (lo + hi);
        }
        s = cand;
        let f = phi(s);
        if f.abs() <= 0.25 * abs_tol || hi - lo <= 4.0 * f64::EPSILON {
            break;
        }
        if f > 0.0 {
            hi = s;
            f_hi = f;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = s;
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }
    (s, dense.eval_unit(s))
}

/// Integrates `(t, w)` as functions of `v` from `v_from` to `v_to` inside the
/// spiking zone. Used past the exponential handoff level.
fn complete_along_orbit(p: &ModelParams, start: State, v_to: f64, ctrl: &StepControl) -> Result<State> {
    let mut rhs = |v: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let inv = model::inverse_drive(&p.kind, p.a, v, p.current - y[1]);
        Ok([inv, p.a * (p.b * v - y[1]) * inv])
    };
    let mut v = start.v;
    let mut y = [start.t, start.w];
    let mut k = rhs(v, &y)?;
    let mut h = (v_to - v).min(1.0);
    while v < v_to {
        h = h.min(v_to - v);
        let at = dopri::attempt(&mut rhs, v, &y, &k, h)?;
        let err = at.error_norm(&y, ctrl.rel_tol, ctrl.abs_tol);
        if err <= 1.0 && at.is_finite() {
            v = if h == v_to - v { v_to } else { v + h };
            y = at.y_new;
            k = at.k_new;
        }
        h *= dopri::step_factor(err);
    }
    Ok(State::new(y[0], v_to, y[1]))
}

fn run_to_spike(
    p: &ModelParams,
    r: &ResetRule,
    s0: State,
    ctrl: &StepControl,
    horizon: f64,
    observer: &mut dyn FnMut(&State),
) -> Result<SpikeOutcome> {
    if !s0.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite initial state {s0:?}")));
    }
    if s0.v >= r.theta {
        return Err(Error::InvalidParameter(format!(
            "initial v = {} is not below the cutoff {}",
            s0.v, r.theta
        )));
    }
    let handoff = p.kind == NonlinearityKind::Exponential && r.theta > EXP_HANDOFF;
    let level = if handoff { EXP_HANDOFF } else { r.theta };
    let rest = attractors(p, s0.w)?;

    let mut stepper = Stepper::new(p, s0, ctrl)?;
    let mut dwell = 0usize;
    let mut steps = 0usize;
    observer(&s0);
    if level <= s0.v {
        let done = complete_along_orbit(p, s0, r.theta, ctrl)?;
        return Ok(SpikeOutcome::Spike(SpikeEvent {
            t_star: done.t,
            w_at_spike: done.w,
            steps_taken: 0,
            overshoot: false,
        }));
    }
    loop {
        if stepper.state().t >= horizon {
            return Ok(SpikeOutcome::Quiescent {
                state: stepper.state(),
                reason: QuiescenceReason::TimeLimit,
            });
        }
        if steps >= ctrl.max_steps {
            return Err(Error::StepBudget {
                state: stepper.state(),
                max_steps: ctrl.max_steps,
            });
        }
        let before = stepper.state();
        let res = stepper.step_until(horizon)?;
        steps += 1;
        let s = res.state;
        if s.v >= level {
            let dense = stepper.last_dense().expect("accepted step has a dense interpolant");
            let (frac, y) = localize(dense, level, ctrl.abs_tol);
            let t_cross = before.t + frac * res.dt_used;
            let crossing = State::new(t_cross, y[0], y[1]);
            observer(&crossing);
            let spike_state = if handoff {
                complete_along_orbit(p, State::new(t_cross, level, y[1]), r.theta, ctrl)?
            } else {
                crossing
            };
            return Ok(SpikeOutcome::Spike(SpikeEvent {
                t_star: spike_state.t,
                w_at_spike: spike_state.w,
                steps_taken: steps,
                overshoot: false,
            }));
        }
        observer(&s);
        if rest
            .iter()
            .any(|e| near(s.v, e.v_star, ctrl.quiescence_tol) && near(s.w, e.w_star, ctrl.quiescence_tol))
        {
            dwell += 1;
            if dwell >= QUIESCENCE_DWELL {
                return Ok(SpikeOutcome::Quiescent {
                    state: s,
                    reason: QuiescenceReason::Equilibrium,
                });
            }
        } else {
            dwell = 0;
        }
    }
}

/// Integrates from `s0` until `v` reaches the cutoff, the state settles on a
/// stable equilibrium, or `ctrl.t_max` elapses.
pub fn integrate_to_spike(p: &ModelParams, r: &ResetRule, s0: State, ctrl: &StepControl) -> Result<SpikeOutcome> {
    run_to_spike(p, r, s0, ctrl, s0.t + ctrl.t_max, &mut |_| {})
}

/// As [`integrate_to_spike`], calling `observer` on the initial state, every
/// accepted state below the cutoff and the localised crossing.
pub fn integrate_to_spike_observed(
    p: &ModelParams,
    r: &ResetRule,
    s0: State,
    ctrl: &StepControl,
    observer: &mut dyn FnMut(&State),
) -> Result<SpikeOutcome> {
    run_to_spike(p, r, s0, ctrl, s0.t + ctrl.t_max, observer)
}

/// Repeatedly integrates to the cutoff and applies `(v, w) <- (c, w + d)`.
pub fn simulate_train(
    p: &ModelParams,
    r: &ResetRule,
    s0: State,
    ctrl: &StepControl,
    stop: Stop,
) -> std::result::Result<SpikeTrain, TrainFailure> {
    let mut train = SpikeTrain {
        events: Vec::new(),
        reset_w: Vec::new(),
        terminated_by: Termination::TimeLimit,
        final_state: s0,
    };
    let fail = |train: SpikeTrain, error: Error| TrainFailure { train, error };
    if let Err(e) = p.validate().and_then(|_| r.validate()).and_then(|_| ctrl.validate()) {
        return Err(fail(train, e));
    }
    let t_end = stop.t_end.unwrap_or(f64::INFINITY);
    let mut s = s0;
    loop {
        if stop.max_spikes.is_some_and(|n| train.events.len() >= n) {
            train.terminated_by = Termination::SpikeCountReached;
            break;
        }
        let wait = s.t + ctrl.t_max;
        let horizon = wait.min(t_end);
        match run_to_spike(p, r, s, ctrl, horizon, &mut |_| {}) {
            Ok(SpikeOutcome::Spike(ev)) => {
                train.reset_w.push(ev.w_at_spike + r.d);
                train.events.push(ev);
                s = State::new(ev.t_star, r.c, ev.w_at_spike + r.d);
                train.final_state = s;
            }
            Ok(SpikeOutcome::Quiescent { state, reason }) => {
                train.final_state = state;
                train.terminated_by = if reason == QuiescenceReason::TimeLimit && t_end <= wait {
                    Termination::TimeLimit
                } else {
                    Termination::Quiescent
                };
                break;
            }
            Err(e) => return Err(fail(train, e)),
        }
    }
    Ok(train)
}

/// Fixed-step forward Euler train; a spike is declared at the first grid
/// point with `v >= theta`.
pub fn euler_train(
    p: &ModelParams,
    r: &ResetRule,
    s0: State,
    dt: f64,
    stop: Stop,
) -> std::result::Result<SpikeTrain, TrainFailure> {
    let mut train = SpikeTrain {
        events: Vec::new(),
        reset_w: Vec::new(),
        terminated_by: Termination::TimeLimit,
        final_state: s0,
    };
    let fail = |train: SpikeTrain, error: Error| TrainFailure { train, error };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(fail(train, Error::InvalidParameter(format!("Euler step must be positive, got {dt}"))));
    }
    if stop.max_spikes.is_none() && stop.t_end.is_none() {
        return Err(fail(train, Error::InvalidParameter("Euler train needs a bounded stop rule".into())));
    }
    if let Err(e) = p.validate().and_then(|_| r.validate()) {
        return Err(fail(train, e));
    }
    let t_end = stop.t_end.unwrap_or(f64::INFINITY);
    // grid anchored at each reset to avoid drift from repeated additions
    let (mut t0, mut v, mut w) = (s0.t, s0.v, s0.w);
    let mut n = 0usize;
    loop {
        if stop.max_spikes.is_some_and(|m| train.events.len() >= m) {
            train.terminated_by = Termination::SpikeCountReached;
            break;
        }
        let t = t0 + n as f64 * dt;
        if t >= t_end {
            train.terminated_by = Termination::TimeLimit;
            break;
        }
        let next = p.vector_field(v, w).map(|(dv, dw)| (v + dt * dv, w + dt * dw));
        n += 1;
        let t_next = t0 + n as f64 * dt;
        let event = match next {
            Ok((vn, wn)) if vn.is_finite() && wn.is_finite() => {
                v = vn;
                w = wn;
                (v >= r.theta).then_some(SpikeEvent {
                    t_star: t_next,
                    w_at_spike: w,
                    steps_taken: n,
                    overshoot: false,
                })
            }
            _ => Some(SpikeEvent {
                t_star: t_next,
                w_at_spike: w,
                steps_taken: n,
                overshoot: true,
            }),
        };
        if let Some(ev) = event {
            train.reset_w.push(ev.w_at_spike + r.d);
            train.events.push(ev);
            t0 = t_next;
            n = 0;
            v = r.c;
            w = ev.w_at_spike + r.d;
        }
        train.final_state = State::new(t0 + n as f64 * dt, v, w);
    }
    Ok(train)
}
