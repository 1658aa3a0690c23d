//! Standard Gaussian tail function and its inverse.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Error, Result};

/// Largest out-of-range excursion that is silently clamped back into [0, 1].
const CLAMP_SILENT: f64 = 1e-12;
/// Beyond this excursion a probability is considered a formula bug, not rounding.
const CLAMP_FATAL: f64 = 1e-9;

/// Upper tail of the standard normal distribution, `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("q_function argument must be finite, got {x}"));
    }
    Ok(0.5 * libm::erfc(x * FRAC_1_SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q_function`]: returns `x` with `Q(x) = p`.
///
/// Starts from a rational approximation and polishes with safeguarded Newton
/// steps inside a shrinking bracket.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("q_inverse requires 0 < p < 1, got {p}"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }

    let mut x = -normal_quantile_guess(p);
    // Q is decreasing: Q(lo) > p > Q(hi).
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);

    for _ in 0..100 {
        let q = q_function(x)?;
        let resid = q - p;
        if resid == 0.0 {
            return Ok(x);
        }
        if resid > 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let density = normal_pdf(x);
        let mut next = x + resid / density;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numerical(format!(
        "q_inverse({p}) failed to converge; bracket [{lo}, {hi}], last iterate {x}"
    )))
}

/// Acklam's rational approximation of the standard normal quantile
/// (relative error about 1e-9), used as a Newton starting point.
fn normal_quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Pulls a computed probability back into [0, 1].
///
/// Excursions up to 1e-9 are treated as rounding; anything larger is reported
/// as a numerical-consistency error.
pub fn clamp_probability(p: f64, what: &str) -> Result<f64> {
    if p.is_nan() {
        return Err(Error::Numerical(format!("{what} evaluated to NaN")));
    }
    if (0.0..=1.0).contains(&p) {
        return Ok(p);
    }
    let excess = if p < 0.0 { -p } else { p - 1.0 };
    if excess > CLAMP_FATAL {
        return Err(Error::Numerical(format!(
            "{what} = {p} lies {excess:e} outside [0, 1]"
        )));
    }
    if excess > CLAMP_SILENT {
        log_clamp(what, p);
    }
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(debug_assertions)]
fn log_clamp(what: &str, p: f64) {
    eprintln!("warning: clamped {what} = {p} into [0, 1]");
}

#[cfg(not(debug_assertions))]
fn log_clamp(_what: &str, _p: f64) {}
