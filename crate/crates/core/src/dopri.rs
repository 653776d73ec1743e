//! Dormand–Prince 5(4) embedded pair with the 4th-order continuous extension.
//!
//! Shared by the time-domain integrator and the phase-plane orbit solver.
//! The reference oracle deliberately does not use this module.

use crate::error::Result;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Result of one trial step; not yet accepted or rejected.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Attempt<const N: usize> {
    pub y_new: [f64; N],
    /// Derivative at the new point (first-same-as-last).
    pub k_new: [f64; N],
    pub err: [f64; N],
    stages: [[f64; N]; 6],
}

/// Dense interpolant over one accepted step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dense<const N: usize> {
    r: [[f64; N]; 5],
}

impl<const N: usize> Dense<N> {
    /// Evaluates at the fraction `s` in `[0, 1]` of the step.
    pub fn eval_unit(&self, s: f64) -> [f64; N] {
        let s1 = 1.0 - s;
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            let r = |j: usize| self.r[j][i];
            *o = r(0) + s * (r(1) + s1 * (r(2) + s * (r(3) + s1 * r(4))));
        }
        out
    }
}

#[inline]
fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Performs one trial step of size `h` from `(t, y)` with `k1 = f(t, y)`.
pub(crate) fn attempt<const N: usize, F>(
    rhs: &mut F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> Result<Attempt<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k2 = rhs(t + C2 * h, &combo(y, h, &[(A21, k1)]))?;
    let k3 = rhs(t + C3 * h, &combo(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = rhs(t + C4 * h, &combo(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = rhs(
        t + C5 * h,
        &combo(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = rhs(
        t + h,
        &combo(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    )?;
    let y_new = combo(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(t + h, &y_new)?;
    let mut err = [0.0; N];
    for (i, e) in err.iter_mut().enumerate() {
        *e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok(Attempt {
        y_new,
        k_new: k7,
        err,
        stages: [*k1, k3, k4, k5, k6, k7],
    })
}

impl<const N: usize> Attempt<N> {
    /// Scaled RMS error; `<= 1` means acceptable.
    pub fn error_norm(&self, y: &[f64; N], rel_tol: f64, abs_tol: f64) -> f64 {
        let mut sum = 0.0;
        for i in 0..N {
            let scale = abs_tol + rel_tol * y[i].abs().max(self.y_new[i].abs());
            let r = self.err[i] / scale;
            sum += r * r;
        }
        let norm = (sum / N as f64).sqrt();
        if norm.is_finite() {
            norm
        } else {
            f64::INFINITY
        }
    }

    pub fn is_finite(&self) -> bool {
        self.y_new.iter().chain(self.k_new.iter()).all(|x| x.is_finite())
    }

    pub fn dense(&self, h: f64, y: &[f64; N]) -> Dense<N> {
        let [k1, k3, k4, k5, k6, k7] = &self.stages;
        let mut r = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k7[i] - bspl;
            r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        Dense { r }
    }
}

/// Standard step-size update factor for a 5th-order pair.
pub(crate) fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else if !err.is_finite() {
        0.2
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}
