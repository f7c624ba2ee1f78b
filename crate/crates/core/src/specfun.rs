//! Special functions used by the closed forms for C(ℓ).
//!
//! Everything here is self-contained: `erf`/`erfc` use the everywhere-convergent
//! exponential series for small arguments and a Lentz-evaluated continued
//! fraction for the tail, and `dilog` maps every non-positive argument into a
//! region where the power series converges geometrically.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const PI_SQ_6: f64 = PI * PI / 6.0;

/// exp(-x²) with the square split into a short head and a tail, so the
/// rounding of x² does not leak into the result for large x.
fn exp_neg_sq(x: f64) -> f64 {
    let head = (x * 4096.0).trunc() / 4096.0;
    let tail = x - head;
    (-head * head).exp() * (-tail * (x + head)).exp()
}

/// erf for |x| < 2 via erf(x) = 2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (2n+1)!!.
/// All terms are positive, so there is no cancellation.
fn erf_series(x: f64) -> f64 {
    let two_x2 = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    while term.abs() > 1e-17 * sum.abs() {
        k += 2.0;
        term *= two_x2 / k;
        sum += term;
    }
    FRAC_2_SQRT_PI * exp_neg_sq(x) * sum
}

/// erfc for x >= 2 from the continued fraction
/// erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..5000 {
        let a = n as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    exp_neg_sq(x) / (f * PI.sqrt())
}

/// The error function (2/√π)∫₀ˣ e^{-t²} dt.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let v = if ax < 2.0 {
        erf_series(ax)
    } else if ax < 27.0 {
        1.0 - erfc_cf(ax)
    } else {
        1.0
    };
    v.copysign(x)
}

/// The complementary error function 1 − erf(x), accurate in the right tail.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x < 2.0 {
        1.0 - erf_series(x)
    } else if x < 27.3 {
        erfc_cf(x)
    } else {
        0.0
    }
}

/// Σ zᵏ/k² for |z| ≤ 1/2.
fn dilog_series(z: f64) -> f64 {
    let mut power = z;
    let mut sum = z;
    let mut k = 1.0_f64;
    loop {
        k += 1.0;
        power *= z;
        let term = power / (k * k);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Li₂ on [-1, 0].
fn dilog_unit(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x >= -0.5 {
        dilog_series(x)
    } else {
        // Landen: Li₂(x) = -Li₂(x/(x-1)) - ½ln²(1-x), with x/(x-1) in [1/3, 1/2].
        let l = (-x).ln_1p();
        -dilog_series(x / (x - 1.0)) - 0.5 * l * l
    }
}

/// The dilogarithm Li₂(x) = -∫₀ˣ ln(1-t)/t dt for x ≤ 0.
///
/// Arguments below -1 go through the inversion identity
/// Li₂(x) = -π²/6 - ½ln²(-x) - Li₂(1/x).
pub fn dilog(x: f64) -> Result<f64> {
    if x.is_nan() || x > 0.0 {
        return Err(Error::invalid(format!(
            "dilog is only implemented for x <= 0, got {x}"
        )));
    }
    if x >= -1.0 {
        return Ok(dilog_unit(x));
    }
    if x == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let l = (-x).ln();
    Ok(-PI_SQ_6 - 0.5 * l * l - dilog_unit(1.0 / x))
}

/// Li₂(-eᵗ) without forming eᵗ, so arbitrarily large t is fine.
pub fn dilog_neg_exp(t: f64) -> f64 {
    if t <= 0.0 {
        dilog_unit(-(t.exp()))
    } else {
        -PI_SQ_6 - 0.5 * t * t - dilog_unit(-((-t).exp()))
    }
}

/// Inverse hyperbolic sine, ln(x + √(x²+1)).
pub fn arcsinh(x: f64) -> f64 {
    x.asinh()
}

/// ln(1 + eˣ) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
