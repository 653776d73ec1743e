//! Nonlinear adaptive integrate-and-fire models.
//!
//! The subthreshold dynamics are
//!
//! ```text
//! dv/dt = F(v) - w + I
//! dw/dt = a (b v - w)
//! ```
//!
//! with a strictly convex `F` growing faster than `v^(1+eps)`. A spike is
//! emitted when `v` reaches the cutoff `theta`, after which `v <- c` and
//! `w <- w + d` (see [`ResetRule`]).

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest argument accepted by the exponential nonlinearity.
pub const EXP_SATURATION: f64 = 700.0;

/// Default half-width of the equilibrium search interval.
pub const FIXED_POINT_SEARCH: f64 = 1.0e3;

/// Which `F(v)` drives the membrane potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `F(v) = v^2`
    Quadratic,
    /// `F(v) = p2 v^2 + p1 v + p0`, `p2 > 0`. With `(0.04, 5, 140)` this is the
    /// conventional millivolt-scale form.
    GeneralizedQuadratic { p2: f64, p1: f64, p0: f64 },
    /// `F(v) = v^4 + 2 a v`, coupled to the model's own `a`.
    Quartic,
    /// `F(v) = e^v`
    Exponential,
}

impl NonlinearityKind {
    /// The conventional `0.04 v^2 + 5 v + 140` form.
    pub const fn izhikevich() -> Self {
        NonlinearityKind::GeneralizedQuadratic {
            p2: 0.04,
            p1: 5.0,
            p0: 140.0,
        }
    }

    /// True when `F(v)/v^2` tends to a positive constant.
    pub fn is_quadratic_growth(&self) -> bool {
        matches!(
            self,
            NonlinearityKind::Quadratic | NonlinearityKind::GeneralizedQuadratic { .. }
        )
    }

    /// Leading coefficient of `v^2` for quadratic-growth kinds.
    pub fn leading_quadratic(&self) -> Option<f64> {
        match *self {
            NonlinearityKind::Quadratic => Some(1.0),
            NonlinearityKind::GeneralizedQuadratic { p2, .. } => Some(p2),
            _ => None,
        }
    }

    /// Upper limit of `v` for which `F(v)` is representable.
    pub fn saturation_limit(&self) -> f64 {
        match self {
            NonlinearityKind::Exponential => EXP_SATURATION,
            // v^4 overflows near 1.3e77
            NonlinearityKind::Quartic => 1.0e76,
            _ => 1.0e150,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NonlinearityKind::Quadratic => "quadratic",
            NonlinearityKind::GeneralizedQuadratic { .. } => "generalized_quadratic",
            NonlinearityKind::Quartic => "quartic",
            NonlinearityKind::Exponential => "exponential",
        }
    }
}

/// Evaluates `F(v)`. `a` is only read by the quartic kind.
pub fn f_eval(kind: &NonlinearityKind, a: f64, v: f64) -> Result<f64> {
    let value = match *kind {
        NonlinearityKind::Quadratic => v * v,
        NonlinearityKind::GeneralizedQuadratic { p2, p1, p0 } => (p2 * v + p1) * v + p0,
        NonlinearityKind::Quartic => {
            let v2 = v * v;
            v2 * v2 + 2.0 * a * v
        }
        NonlinearityKind::Exponential => {
            if v > EXP_SATURATION {
                return Err(Error::Saturation {
                    v,
                    limit: EXP_SATURATION,
                });
            }
            v.exp()
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Saturation {
            v,
            limit: kind.saturation_limit(),
        })
    }
}

/// `F'(v)`; saturates to `+inf` instead of failing.
pub fn f_prime(kind: &NonlinearityKind, a: f64, v: f64) -> f64 {
    match *kind {
        NonlinearityKind::Quadratic => 2.0 * v,
        NonlinearityKind::GeneralizedQuadratic { p2, p1, .. } => 2.0 * p2 * v + p1,
        NonlinearityKind::Quartic => 4.0 * v * v * v + 2.0 * a,
        NonlinearityKind::Exponential => v.exp(),
    }
}

/// `F''(v)`.
pub fn f_second(kind: &NonlinearityKind, v: f64) -> f64 {
    match *kind {
        NonlinearityKind::Quadratic => 2.0,
        NonlinearityKind::GeneralizedQuadratic { p2, .. } => 2.0 * p2,
        NonlinearityKind::Quartic => 12.0 * v * v,
        NonlinearityKind::Exponential => v.exp(),
    }
}

/// `1 / (F(v) + shift)` without overflowing for large `v`.
///
/// Only meaningful where `F(v) + shift > 0`. Beyond the exponential guard the
/// value is computed as `e^-v / (1 + shift e^-v)`.
pub fn inverse_drive(kind: &NonlinearityKind, a: f64, v: f64, shift: f64) -> f64 {
    match kind {
        NonlinearityKind::Exponential if v > 30.0 => {
            let decay = (-v).exp();
            decay / (1.0 + shift * decay)
        }
        _ => match f_eval(kind, a, v) {
            Ok(f) => 1.0 / (f + shift),
            Err(_) => 0.0,
        },
    }
}

/// `F(v) + shift`, saturating to `+inf`.
pub fn drive(kind: &NonlinearityKind, a: f64, v: f64, shift: f64) -> f64 {
    match f_eval(kind, a, v) {
        Ok(f) => f + shift,
        Err(_) => f64::INFINITY,
    }
}

/// The continuous subthreshold system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: NonlinearityKind,
    /// Adaptation rate.
    pub a: f64,
    /// Adaptation coupling.
    pub b: f64,
    /// Input current.
    #[serde(rename = "I")]
    pub current: f64,
}

impl ModelParams {
    pub fn new(kind: NonlinearityKind, a: f64, b: f64, current: f64) -> Result<Self> {
        let p = ModelParams {
            kind,
            a,
            b,
            current,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(Error::InvalidParameter(format!("a must be finite and >= 0, got {}", self.a)));
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::InvalidParameter(format!("b must be finite and >= 0, got {}", self.b)));
        }
        if !self.current.is_finite() {
            return Err(Error::InvalidParameter("I must be finite".into()));
        }
        if let NonlinearityKind::GeneralizedQuadratic { p2, p1, p0 } = self.kind {
            if !(p2 > 0.0 && p2.is_finite() && p1.is_finite() && p0.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "generalized quadratic needs finite coefficients with p2 > 0, got ({p2}, {p1}, {p0})"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn f(&self, v: f64) -> Result<f64> {
        f_eval(&self.kind, self.a, v)
    }

    #[inline]
    pub fn f_prime(&self, v: f64) -> f64 {
        f_prime(&self.kind, self.a, v)
    }

    /// `F(v) - b v + I`, whose roots are the equilibrium potentials.
    pub fn nullcline_gap(&self, v: f64) -> Result<f64> {
        Ok(self.f(v)? - self.b * v + self.current)
    }

    /// Right-hand side of the subthreshold system.
    #[inline]
    pub fn vector_field(&self, v: f64, w: f64) -> Result<(f64, f64)> {
        Ok((self.f(v)? - w + self.current, self.a * (self.b * v - w)))
    }
}

/// Free-function form of [`ModelParams::vector_field`].
pub fn vector_field(p: &ModelParams, v: f64, w: f64) -> Result<(f64, f64)> {
    p.vector_field(v, w)
}

/// Hybrid reset applied when `v` reaches `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetRule {
    pub theta: f64,
    pub c: f64,
    pub d: f64,
}

impl ResetRule {
    pub fn new(theta: f64, c: f64, d: f64) -> Result<Self> {
        let r = ResetRule { theta, c, d };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.c.is_finite() && self.d.is_finite()) {
            return Err(Error::InvalidParameter("reset values must be finite".into()));
        }
        if self.theta <= self.c {
            return Err(Error::InvalidParameter(format!(
                "cutoff theta = {} must exceed reset potential c = {}",
                self.theta, self.c
            )));
        }
        Ok(())
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        ResetRule { theta, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    StableNode,
    StableFocus,
    Saddle,
    UnstableNode,
    UnstableFocus,
    Degenerate,
}

impl Stability {
    /// Whether nearby trajectories stay close (used for quiescence detection).
    pub fn is_attracting(&self) -> bool {
        matches!(self, Stability::StableNode | Stability::StableFocus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub v_star: f64,
    pub w_star: f64,
    pub stability: Stability,
}

/// Jacobian `[[F'(v), -1], [a b, -a]]` at an equilibrium potential.
pub fn jacobian(p: &ModelParams, v: f64) -> [[f64; 2]; 2] {
    [[p.f_prime(v), -1.0], [p.a * p.b, -p.a]]
}

/// Classifies a 2x2 Jacobian from its trace and determinant.
pub fn classify_jacobian(j: [[f64; 2]; 2]) -> Stability {
    let trace = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det < 0.0 {
        return Stability::Saddle;
    }
    if det == 0.0 {
        return Stability::Degenerate;
    }
    let disc = trace * trace - 4.0 * det;
    match (disc >= 0.0, trace.partial_cmp(&0.0)) {
        (true, Some(std::cmp::Ordering::Less)) => Stability::StableNode,
        (true, Some(std::cmp::Ordering::Greater)) => Stability::UnstableNode,
        (false, Some(std::cmp::Ordering::Less)) => Stability::StableFocus,
        (false, Some(std::cmp::Ordering::Greater)) => Stability::UnstableFocus,
        _ => Stability::Degenerate,
    }
}

/// Bisects a sign change of `h` on `[lo, hi]` down to adjacent floats.
fn bisect(mut lo: f64, mut hi: f64, h: impl Fn(f64) -> f64) -> Result<f64> {
    let (bracket_lo, bracket_hi) = (lo, hi);
    let mut h_lo = h(lo);
    if h_lo == 0.0 {
        return Ok(lo);
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(if h(lo).abs() <= h(hi).abs() { lo } else { hi });
        }
        let h_mid = h(mid);
        if h_mid.is_nan() {
            break;
        }
        if h_mid == 0.0 {
            return Ok(mid);
        }
        if (h_mid < 0.0) == (h_lo < 0.0) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::RootPolish {
        lo: bracket_lo,
        hi: bracket_hi,
    })
}

/// Minimiser of the convex gap `F(v) - b v + I` within `[-1e3, 1e3]`
/// (clipped to the saturation guard).
pub fn gap_minimiser(p: &ModelParams) -> Result<f64> {
    let lo = -FIXED_POINT_SEARCH;
    let hi = FIXED_POINT_SEARCH.min(p.kind.saturation_limit());
    let slope = |v: f64| p.f_prime(v) - p.b;
    if slope(lo) >= 0.0 {
        Ok(lo)
    } else if slope(hi) <= 0.0 {
        Ok(hi)
    } else {
        bisect(lo, hi, slope)
    }
}

/// All equilibria in `[-1e3, 1e3]` (clipped to the saturation guard), sorted
/// by `v_star`.
///
/// `F(v) - b v + I` is convex, so it has at most two roots: the minimiser is
/// located from the monotone derivative and each flank is bisected.
pub fn fixed_points(p: &ModelParams) -> Result<Vec<Equilibrium>> {
    let lo = -FIXED_POINT_SEARCH;
    let hi = FIXED_POINT_SEARCH.min(p.kind.saturation_limit());
    let gap = |v: f64| p.nullcline_gap(v).unwrap_or(f64::INFINITY);
    let v_min = gap_minimiser(p)?;
    let g_min = gap(v_min);
    let scale = 1.0_f64.max(p.f(v_min)?.abs()).max(p.current.abs());

    let mut roots = Vec::new();
    if g_min.abs() <= 1e-14 * scale {
        roots.push(v_min);
    } else if g_min < 0.0 {
        if v_min > lo && gap(lo) >= 0.0 {
            roots.push(bisect(lo, v_min, gap)?);
        }
        if v_min < hi && gap(hi) >= 0.0 {
            roots.push(bisect(v_min, hi, gap)?);
        }
    }

    Ok(roots
        .into_iter()
        .map(|v| Equilibrium {
            v_star: v,
            w_star: p.b * v,
            stability: classify_jacobian(jacobian(p, v)),
        })
        .collect())
}

/// Blow-up time of `du/dt = u^2 - b u + (I - w_frozen)` from `u(0) = v0`.
///
/// With `m = u - b/2` and `kappa = (I - w_frozen) - b^2/4` the solution is a
/// shifted tangent (`kappa > 0`), a hyperbola (`kappa = 0`) or a hyperbolic
/// cotangent (`kappa < 0`). Because `dv/dt >= F(v) - b v + I` inside the
/// spiking zone, the result bounds the explosion time of the full system
/// from above whenever `w(t) >= w_frozen` there.
pub fn explosion_time_bound_quadratic(p: &ModelParams, v0: f64, w_frozen: f64) -> Result<f64> {
    if p.kind != NonlinearityKind::Quadratic {
        return Err(Error::InvalidParameter(format!(
            "explosion time bound needs F(v) = v^2, got {}",
            p.kind.name()
        )));
    }
    let m0 = v0 - 0.5 * p.b;
    let kappa = (p.current - w_frozen) - 0.25 * p.b * p.b;
    if kappa > 0.0 {
        let root = kappa.sqrt();
        let angle = if m0 > 0.0 {
            (root / m0).atan()
        } else {
            FRAC_PI_2 - (m0 / root).atan()
        };
        Ok(angle / root)
    } else if kappa == 0.0 {
        if m0 > 0.0 {
            Ok(1.0 / m0)
        } else {
            Err(Error::NoFiniteExplosion(format!(
                "kappa = 0 and m0 = {m0} <= 0: trajectory approaches the double root"
            )))
        }
    } else {
        let root = (-kappa).sqrt();
        if m0 > root {
            Ok((root / m0).atanh() / root)
        } else {
            Err(Error::NoFiniteExplosion(format!(
                "kappa = {kappa} < 0 and m0 = {m0} <= sqrt(-kappa) = {root}"
            )))
        }
    }
}
