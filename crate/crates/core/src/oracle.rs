//! Independent reference computations for testing.
//!
//! Time integration uses classical fourth-order Runge–Kutta with fixed steps
//! in a rescaled time `s` (`dt/ds = 1 / (1 + |dv/dt| / (1 + |v|))`, so the
//! blow-up becomes exponential growth in `s`), step halving and Richardson
//! extrapolation. Quadrature is recursive adaptive Simpson. Neither shares
//! code with the main integrator or the Gauss–Kronrod routine, and both are
//! orders of magnitude slower.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::State;
use crate::model::{ModelParams, NonlinearityKind};

pub const ORACLE_VERSION: &str = "rk4-richardson-simpson/1";
pub const DEFAULT_TOL: f64 = 1e-12;

const INITIAL_STEPS_PER_UNIT: f64 = 64.0;
const MAX_HALVINGS: usize = 14;
const MAX_SIMPSON_DEPTH: usize = 60;
// exponential runs switch to v as independent variable past this level
const EXP_SWITCH: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum Target {
    /// Integrate to time `t`.
    Time { t: f64 },
    /// Integrate until `v` first reaches `theta`.
    Crossing { theta: f64 },
}

/// Extrapolated result with its step-halving error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub state: State,
    pub error: f64,
    pub steps: usize,
}

type Y = [f64; 3];

fn add(y: &Y, k: &Y, h: f64) -> Y {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

fn rk4(f: &dyn Fn(&Y) -> Y, y: &Y, h: f64) -> Y {
    let k1 = f(y);
    let k2 = f(&add(y, &k1, 0.5 * h));
    let k3 = f(&add(y, &k2, 0.5 * h));
    let k4 = f(&add(y, &k3, h));
    let mut out = *y;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn f_value(p: &ModelParams, v: f64) -> f64 {
    match p.kind {
        NonlinearityKind::Quadratic => v * v,
        NonlinearityKind::GeneralizedQuadratic { p2, p1, p0 } => (p2 * v + p1) * v + p0,
        NonlinearityKind::Quartic => v * v * v * v + 2.0 * p.a * v,
        NonlinearityKind::Exponential => v.exp(),
    }
}

/// Rescaled field for `(t, v, w)` against `s`.
fn rescaled(p: &ModelParams) -> impl Fn(&Y) -> Y + '_ {
    move |y: &Y| {
        let dv = f_value(p, y[1]) - y[2] + p.current;
        let dw = p.a * (p.b * y[1] - y[2]);
        let scale = 1.0 / (1.0 + dv.abs() / (1.0 + y[1].abs()));
        [scale, dv * scale, dw * scale]
    }
}

/// Largest `sigma` in `[0, h]` with `phi(rk4 step of length sigma) < 0`,
/// found by bisection; `phi` changes sign on the step.
fn bisect_partial(f: &dyn Fn(&Y) -> Y, y: &Y, h: f64, phi: &dyn Fn(&Y) -> f64) -> Y {
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(&rk4(f, y, mid)) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    rk4(f, y, 0.5 * (lo + hi))
}

fn run_fixed(p: &ModelParams, s0: State, target: Target, h: f64, max_steps: usize) -> Result<(Y, usize)> {
    let f = rescaled(p);
    let phi: Box<dyn Fn(&Y) -> f64> = match target {
        Target::Time { t } => Box::new(move |y: &Y| y[0] - t),
        Target::Crossing { theta } => Box::new(move |y: &Y| y[1] - theta),
    };
    let mut y = [s0.t, s0.v, s0.w];
    if phi(&y) >= 0.0 {
        return Ok((y, 0));
    }
    for n in 0..max_steps {
        let next = rk4(&f, &y, h);
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::OracleBudget(format!("non-finite state after {n} steps from {y:?}")));
        }
        if phi(&next) >= 0.0 {
            return Ok((bisect_partial(&f, &y, h, phi.as_ref()), n + 1));
        }
        y = next;
    }
    Err(Error::OracleBudget(format!("{max_steps} steps of size {h} did not reach {target:?}")))
}

/// `(t, w)` along the orbit from `v_from` to `v_to`, with `v` as the
/// independent variable; used past the exponential switch level.
fn run_orbit_fixed(p: &ModelParams, start: Y, v_to: f64, n: usize) -> Y {
    let f = |y: &Y| {
        let v = y[1];
        // 1/(e^v - w + I) written to avoid overflow
        let decay = (-v).exp();
        let inv = decay / (1.0 + (p.current - y[2]) * decay);
        [inv, 1.0, p.a * (p.b * v - y[2]) * inv]
    };
    let h = (v_to - start[1]) / n as f64;
    let mut y = start;
    for _ in 0..n {
        y = rk4(&f, &y, h);
    }
    y[1] = v_to;
    y
}

fn extrapolate(coarse: &Y, fine: &Y) -> (Y, f64) {
    let mut out = *fine;
    let mut err: f64 = 0.0;
    for i in 0..3 {
        let diff = fine[i] - coarse[i];
        out[i] = fine[i] + diff / 15.0;
        err = err.max(diff.abs() / 15.0 / fine[i].abs().max(1.0));
    }
    (out, err)
}

/// Reference solution of the subthreshold flow from `s0` to a time or a
/// cutoff crossing, certified by step-halving agreement to `tol` (relative
/// to `max(1, |y|)` per component).
pub fn reference_integrate(p: &ModelParams, s0: State, target: Target, tol: f64) -> Result<Reference> {
    p.validate()?;
    let switch = p.kind == NonlinearityKind::Exponential
        && matches!(target, Target::Crossing { theta } if theta > EXP_SWITCH)
        && s0.v < EXP_SWITCH;
    let first = if switch { Target::Crossing { theta: EXP_SWITCH } } else { target };
    let mut h = 1.0 / INITIAL_STEPS_PER_UNIT;
    let mut steps = 0usize;
    let mut budget = 1usize << 16;
    let solve = |h: f64, budget: usize| -> Result<(Y, usize)> {
        let (mut y, n) = run_fixed(p, s0, first, h, budget)?;
        if let (true, Target::Crossing { theta }) = (switch, target) {
            let pieces = ((theta - EXP_SWITCH) / h).ceil().clamp(16.0, 1e8) as usize;
            y = run_orbit_fixed(p, y, theta, pieces);
        }
        Ok((y, n))
    };
    let (mut coarse, n) = solve(h, budget)?;
    steps += n;
    for _ in 0..MAX_HALVINGS {
        h *= 0.5;
        budget *= 2;
        let (fine, n) = solve(h, budget)?;
        steps += n;
        let (best, err) = extrapolate(&coarse, &fine);
        if err < tol {
            return Ok(Reference {
                state: State::new(best[0], best[1], best[2]),
                error: err,
                steps,
            });
        }
        coarse = fine;
    }
    Err(Error::OracleBudget(format!(
        "no step-halving agreement to {tol} after {MAX_HALVINGS} halvings"
    )))
}

/// `W(v_end)` on the orbit `dW/dv = a (b v - W) / (F(v) - W + I)`, by RK4
/// in `x = ln(v - v1 + 1)` with step halving and Richardson extrapolation.
pub fn reference_orbit(p: &ModelParams, v1: f64, w1: f64, v_end: f64, tol: f64) -> Result<f64> {
    p.validate()?;
    if v_end == v1 {
        return Ok(w1);
    }
    let f = |y: &Y| {
        // y = [x, v, W]
        let v = v1 - 1.0 + y[0].exp();
        let dvdx = v - v1 + 1.0;
        let den = if p.kind == NonlinearityKind::Exponential && v > 30.0 {
            let decay = (-v).exp();
            decay / (1.0 + (p.current - y[2]) * decay)
        } else {
            1.0 / (f_value(p, v) - y[2] + p.current)
        };
        [1.0, dvdx, p.a * (p.b * v - y[2]) * den * dvdx]
    };
    let x_end = (v_end - v1 + 1.0).ln();
    let solve = |n: usize| {
        let h = x_end / n as f64;
        let mut y = [0.0, v1, w1];
        for _ in 0..n {
            y = rk4(&f, &y, h);
        }
        y[2]
    };
    let mut n = ((x_end * 32.0).ceil() as usize).max(16);
    let mut coarse = solve(n);
    for _ in 0..MAX_HALVINGS + 4 {
        n *= 2;
        let fine = solve(n);
        let err = (fine - coarse).abs() / 15.0;
        if !fine.is_finite() {
            return Err(Error::OracleBudget(format!("orbit diverged before v = {v_end}")));
        }
        if err < tol * fine.abs().max(1.0) {
            return Ok(fine + (fine - coarse) / 15.0);
        }
        coarse = fine;
    }
    Err(Error::OracleBudget(format!("orbit to v = {v_end} did not converge to {tol}")))
}

fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    (a, fa): (f64, f64),
    (m, fm): (f64, f64),
    (b, fb): (f64, f64),
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if !diff.is_finite() {
        return Err(Error::OracleBudget(format!("non-finite integrand on [{a}, {b}]")));
    }
    if diff.abs() <= 15.0 * tol || depth == 0 || lm <= a || rm >= b {
        if depth == 0 && diff.abs() > 15.0 * tol {
            return Err(Error::OracleBudget(format!("Simpson depth exhausted on [{a}, {b}]")));
        }
        return Ok(left + right + diff / 15.0);
    }
    Ok(simpson_rec(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1)?
        + simpson_rec(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1)?)
}

/// `∫_lo^hi f` by adaptive Simpson with absolute tolerance `tol`.
pub fn reference_quadrature(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    // split into a few panels so narrow features are not missed by the first estimate
    let panels = 16;
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let a = lo + width * i as f64;
        let b = if i + 1 == panels { hi } else { a + width };
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_rec(f, (a, fa), (m, fm), (b, fb), whole, tol / panels as f64, MAX_SIMPSON_DEPTH)?;
    }
    Ok(total)
}

/// `∫_lo^∞ f` for `f` decaying faster than `1/u`: `[lo, V]` directly and
/// `[V, ∞)` through `u = V / t`, with `V = max(1, lo + 1)` (or `lo` if positive).
pub fn reference_improper(f: &dyn Fn(f64) -> f64, lo: f64, tol: f64) -> Result<f64> {
    let split = if lo > 0.0 { lo } else { 1.0_f64.max(lo + 1.0) };
    let head = reference_quadrature(f, lo, split, 0.5 * tol)?;
    let mapped = |t: f64| {
        // the endpoint t = 0 stands for u = ∞; sample just inside it
        let t = t.max(1e-150);
        f(split / t) * split / (t * t)
    };
    Ok(head + reference_quadrature(&mapped, 0.0, 1.0, 0.5 * tol)?)
}

/// One reference value with enough context to recompute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenValue {
    pub case_id: String,
    pub inputs: serde_json::Value,
    pub value: f64,
    pub tol: f64,
    pub oracle_version: String,
}

impl GoldenValue {
    pub fn new(case_id: &str, inputs: serde_json::Value, value: f64, tol: f64) -> Self {
        GoldenValue {
            case_id: case_id.to_string(),
            inputs,
            value,
            tol,
            oracle_version: ORACLE_VERSION.to_string(),
        }
    }
}

pub fn write_golden(path: &Path, values: &[GoldenValue]) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(values).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

pub fn read_golden(path: &Path) -> std::io::Result<Vec<GoldenValue>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(std::io::Error::other)
}
