//! Scalar special functions and bracketing root finders.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::{E, FRAC_1_SQRT_2};

use crate::error::{Error, Result};

/// Default iteration cap for [`find_root`].
pub const DEFAULT_MAX_ITERATIONS: usize = 200;

const LAMBERT_MAX_ITERATIONS: usize = 64;

/// A closed interval `[lo, hi]` known to contain a sign change, plus the
/// absolute tolerance on the argument at which bisection may stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl RootBracket {
    pub fn new(lo: f64, hi: f64, tol: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "bracket requires finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bracket tolerance must be positive, got {tol}"
            )));
        }
        Ok(Self { lo, hi, tol })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Gaussian upper-tail probability `Q(x) = P(Z > x)` for standard normal `Z`.
pub fn q_function(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("Q(x) requires finite x, got {x}")));
    }
    Ok(gaussian_tail(x))
}

/// Unchecked `Q(x)`; NaN in, NaN out.
#[inline]
pub(crate) fn gaussian_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Principal branch `W0` of the Lambert W function on `[0, inf)`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!(
            "lambert_w0 is defined here for x >= 0 only, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x <= E {
        Ok(halley_direct(x))
    } else {
        Ok(newton_log_form(x.ln()))
    }
}

/// `W0(exp(log_x))`, for arguments whose magnitude would overflow `f64`.
///
/// `log_x = -inf` maps to 0.
pub fn lambert_w0_from_log(log_x: f64) -> Result<f64> {
    if log_x.is_nan() {
        return Err(Error::Domain("lambert_w0_from_log got NaN".into()));
    }
    if log_x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if log_x <= 1.0 {
        Ok(halley_direct(log_x.exp()))
    } else {
        Ok(newton_log_form(log_x))
    }
}

// Halley on w*e^w - x, for 0 < x <= e.
fn halley_direct(x: f64) -> f64 {
    let mut w = x.ln_1p();
    for _ in 0..LAMBERT_MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = w - step;
        if (next - w).abs() <= 4.0 * f64::EPSILON * next.abs() {
            w = next;
            break;
        }
        w = next;
    }
    w
}

// Newton on w + ln(w) - L for L > 1 (so w > 1, where the log form is well conditioned).
fn newton_log_form(log_x: f64) -> f64 {
    let mut w = if log_x > 3.0 {
        log_x - log_x.ln()
    } else {
        log_x.exp().ln_1p()
    };
    for _ in 0..LAMBERT_MAX_ITERATIONS {
        let g = w + w.ln() - log_x;
        let next = w - g / (1.0 + 1.0 / w);
        if (next - w).abs() <= 2.0 * f64::EPSILON * next.abs() {
            w = next;
            break;
        }
        w = next;
    }
    w
}

/// Bisection root finder on a bracket with a sign change.
///
/// Returns as soon as `f` evaluates to exactly zero or the bracket width
/// falls below `bracket.tol`.
pub fn find_root<F>(f: F, bracket: RootBracket) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    find_root_with_limit(f, bracket, DEFAULT_MAX_ITERATIONS)
}

pub fn find_root_with_limit<F>(f: F, bracket: RootBracket, max_iterations: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    let lo_negative = f_lo < 0.0;
    for _ in 0..max_iterations {
        let mid = lo + 0.5 * (hi - lo);
        if hi - lo <= bracket.tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence {
        iterations: max_iterations,
    })
}

/// Bisection safeguarded Newton: takes the Newton step when it lands strictly
/// inside the current bracket, otherwise bisects.
pub fn find_root_newton<F, D>(f: F, df: D, bracket: RootBracket) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    let lo_negative = f_lo < 0.0;
    let mut x = lo + 0.5 * (hi - lo);
    for _ in 0..DEFAULT_MAX_ITERATIONS {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= bracket.tol {
            return Ok(lo + 0.5 * (hi - lo));
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            lo + 0.5 * (hi - lo)
        };
        if (next - x).abs() <= bracket.tol {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Convergence {
        iterations: DEFAULT_MAX_ITERATIONS,
    })
}

/// Neumaier-compensated sum, accumulated strictly left to right.
pub fn compensated_sum<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// `ln(sum(exp(x_i)))` without overflow. Empty input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + compensated_sum(values.iter().map(|v| (v - max).exp())).ln()
}
