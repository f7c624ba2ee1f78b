//! Skewing functions: symmetric CDFs G with G(−x) = 1 − G(x).
//!
//! Each family exposes its CDF and density plus the constant
//! C(ℓ) = (2/ℓ²)∫₀^ℓ yG(y)dy, both in closed form and by quadrature.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::specfun::{arcsinh, dilog_neg_exp, erf, erfc, softplus};

/// Below this semi-range the closed forms are replaced by quadrature.
const SHORT_INTERVAL: f64 = 0.125;

pub const CLOSED_FORM_MIN_ELL: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SkewingFunction {
    Normal,
    /// Student-t with two degrees of freedom, G(x) = ½(1 + x/√(x²+2)).
    StudentT2,
    Cauchy,
    Laplace,
    Logistic,
}

impl SkewingFunction {
    pub const ALL: [SkewingFunction; 5] = [
        SkewingFunction::Normal,
        SkewingFunction::StudentT2,
        SkewingFunction::Cauchy,
        SkewingFunction::Laplace,
        SkewingFunction::Logistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SkewingFunction::Normal => "normal",
            SkewingFunction::StudentT2 => "student-t2",
            SkewingFunction::Cauchy => "cauchy",
            SkewingFunction::Laplace => "laplace",
            SkewingFunction::Logistic => "logistic",
        }
    }

    /// Upper tail 1 − G(y) for y ⩾ 0, computed without subtracting from one.
    fn tail(self, y: f64) -> f64 {
        debug_assert!(y >= 0.0);
        match self {
            SkewingFunction::Normal => 0.5 * erfc(y * FRAC_1_SQRT_2),
            SkewingFunction::StudentT2 => {
                let r = (y * y + 2.0).sqrt();
                1.0 / (r * (r + y))
            }
            SkewingFunction::Cauchy => {
                if y == 0.0 {
                    0.5
                } else {
                    (1.0 / y).atan() / PI
                }
            }
            SkewingFunction::Laplace => 0.5 * (-y).exp(),
            SkewingFunction::Logistic => 1.0 / (1.0 + y.exp()),
        }
    }

    /// G(y) − G(−y) = 2G(y) − 1 for y ⩾ 0, accurate as y → 0.
    pub fn central_mass(self, y: f64) -> f64 {
        let y = y.abs();
        match self {
            SkewingFunction::Normal => erf(y * FRAC_1_SQRT_2),
            SkewingFunction::StudentT2 => y / (y * y + 2.0).sqrt(),
            SkewingFunction::Cauchy => 2.0 * y.atan() / PI,
            SkewingFunction::Laplace => -(-y).exp_m1(),
            SkewingFunction::Logistic => (0.5 * y).tanh(),
        }
    }

    /// G(x) − ½, odd in x.
    fn half_centered(self, x: f64) -> f64 {
        (0.5 * self.central_mass(x)).copysign(x)
    }

    /// The skewing function G(x).
    pub fn cdf(self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x < 0.0 {
            self.tail(-x)
        } else {
            1.0 - self.tail(x)
        }
    }

    /// G(hi) − G(lo), choosing the cancellation-free route for where the
    /// endpoints sit. Negative when hi < lo.
    ///
    /// Short intervals on one side of the origin integrate the density
    /// directly, since any difference of G values would cancel there.
    pub fn mass(self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return -self.mass(hi, lo);
        }
        if hi - lo <= SHORT_INTERVAL && (lo >= 0.0 || hi <= 0.0) {
            quadrature::kronrod_value(|x| self.pdf(x), lo, hi)
        } else if lo >= 1.0 {
            self.tail(lo) - self.tail(hi)
        } else if hi <= -1.0 {
            self.tail(-hi) - self.tail(-lo)
        } else {
            self.half_centered(hi) - self.half_centered(lo)
        }
    }

    /// Density G'(x).
    pub fn pdf(self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            SkewingFunction::Normal => (-0.5 * ax * ax).exp() / (2.0 * PI).sqrt(),
            SkewingFunction::StudentT2 => (ax * ax + 2.0).powf(-1.5),
            SkewingFunction::Cauchy => 1.0 / (PI * (1.0 + ax * ax)),
            SkewingFunction::Laplace => 0.5 * (-ax).exp(),
            SkewingFunction::Logistic => {
                let e = (-ax).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    /// Breakpoints for integrands built from G or its density: the density
    /// of every family peaks at the origin and Laplace has a kink there.
    pub(crate) fn breaks_around(self, origin: f64) -> Vec<f64> {
        quadrature::feature_points(origin)
    }
}

impl fmt::Display for SkewingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SkewingFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SkewingFunction::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown family '{s}' (expected one of normal, student-t2, cauchy, laplace, logistic)"
                ))
            })
    }
}

/// C(ℓ) for one semi-range. Always lies in [1/2, G(ℓ)].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CValue {
    pub ell: f64,
    pub c: f64,
}

fn check_ell(ell: f64) -> Result<()> {
    if ell.is_finite() && ell > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("semi-range must be positive and finite, got {ell}")))
    }
}

/// 2C(ℓ) − 1 = (2/ℓ²)∫₀^ℓ y(2G(y) − 1)dy by adaptive quadrature.
///
/// The constant part of G is integrated exactly, so the result keeps full
/// relative precision as ℓ → 0 where C(ℓ) → ½.
pub fn c_excess_quadrature(g: SkewingFunction, ell: f64) -> Result<f64> {
    check_ell(ell)?;
    let integral = quadrature::integrate_with_breaks(
        |y| y * g.central_mass(y),
        0.0,
        ell,
        &g.breaks_around(0.0),
        Tolerance::relative(1e-12),
    )?;
    Ok(2.0 * integral.value / (ell * ell))
}

/// C(ℓ) evaluated from its defining integral.
pub fn c_quadrature(g: SkewingFunction, ell: f64) -> Result<CValue> {
    let excess = c_excess_quadrature(g, ell)?;
    Ok(CValue {
        ell,
        c: 0.5 + 0.5 * excess,
    })
}

/// C(ℓ) from the family's closed form. Below [`CLOSED_FORM_MIN_ELL`] the
/// closed forms lose digits to cancellation and quadrature is used instead.
pub fn c_closed(g: SkewingFunction, ell: f64) -> Result<CValue> {
    check_ell(ell)?;
    if ell < CLOSED_FORM_MIN_ELL {
        return c_quadrature(g, ell);
    }
    Ok(CValue {
        ell,
        c: c_closed_raw(g, ell),
    })
}

/// The closed forms themselves, with no small-ℓ switch.
pub fn c_closed_raw(g: SkewingFunction, l: f64) -> f64 {
    let l2 = l * l;
    match g {
        SkewingFunction::Normal => {
            let gauss = (-0.5 * l2).exp() * (2.0 / PI).sqrt();
            (l * (l + gauss) + (l2 - 1.0) * erf(l * FRAC_1_SQRT_2)) / (2.0 * l2)
        }
        SkewingFunction::StudentT2 => {
            let r = (2.0 + l2).sqrt();
            let bracket = 2.0 * l + l2 * l - 2.0 * r * arcsinh(l / 2.0_f64.sqrt());
            (l2 + (1.0 / l) * (l / r) * bracket) / (2.0 * l2)
        }
        SkewingFunction::Cauchy => {
            (l * (l * PI - 2.0) + 2.0 * (1.0 + l2) * l.atan()) / (2.0 * PI * l2)
        }
        // e^{-ℓ}[1 + ℓ + e^ℓ(ℓ² − 1)] with the product distributed so e^ℓ
        // never overflows.
        SkewingFunction::Laplace => ((1.0 + l) * (-l).exp() + (l2 - 1.0)) / l2,
        SkewingFunction::Logistic => {
            2.0 / l2 * (PI * PI / 12.0 + l * softplus(l) + dilog_neg_exp(l))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cdf_values() {
        assert_eq!(SkewingFunction::Cauchy.cdf(0.0), 0.5);
        assert_relative_eq!(SkewingFunction::Cauchy.cdf(1.0), 0.75, max_relative = 1e-15);
        let laplace = 0.5 + 0.5 * (1.0 - (-1.0_f64).exp());
        assert!((SkewingFunction::Laplace.cdf(1.0) - 0.816_060_279_4).abs() < 1e-10);
        assert_relative_eq!(SkewingFunction::Laplace.cdf(1.0), laplace, max_relative = 1e-15);
        // Student-t2 is a genuine CDF
        assert_relative_eq!(
            SkewingFunction::StudentT2.cdf(1.0),
            0.5 * (1.0 + 1.0 / 3.0_f64.sqrt()),
            max_relative = 1e-15
        );
    }

    #[test]
    fn pdf_values() {
        assert!((SkewingFunction::Normal.pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert!((SkewingFunction::Cauchy.pdf(0.0) - 0.318_309_886_2).abs() < 1e-10);
        let total = quadrature::integrate_with_breaks(
            |x| SkewingFunction::Logistic.pdf(x),
            -40.0,
            40.0,
            &[0.0],
            Tolerance::default(),
        )
        .unwrap();
        assert!((total.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pdf_is_derivative_of_cdf() {
        for g in SkewingFunction::ALL {
            for &x in &[-3.0, -0.4, 0.7, 2.5] {
                let h = 1e-5;
                let fd = (g.cdf(x + h) - g.cdf(x - h)) / (2.0 * h);
                assert_relative_eq!(g.pdf(x), fd, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn mass_agrees_with_cdf_difference() {
        for g in SkewingFunction::ALL {
            for &(a, b) in &[(-2.0, 3.0), (0.5, 0.7), (1.5, 8.0), (-9.0, -2.0), (-0.2, 0.0)] {
                assert_relative_eq!(g.mass(a, b), g.cdf(b) - g.cdf(a), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn family_names_round_trip() {
        for g in SkewingFunction::ALL {
            assert_eq!(g.name().parse::<SkewingFunction>().unwrap(), g);
        }
        assert!("gumbel".parse::<SkewingFunction>().is_err());
    }

    #[test]
    fn closed_form_cauchy_at_one() {
        let c = c_closed(SkewingFunction::Cauchy, 1.0).unwrap().c;
        let expected = (PI - 2.0 + PI) / (2.0 * PI);
        assert_relative_eq!(c, expected, max_relative = 1e-15);
        assert!((c - 0.681_690_113_9).abs() < 1e-10);
    }

    #[test]
    fn closed_form_laplace_at_two() {
        // (2/ℓ²)∫₀^ℓ yG(y)dy at ℓ = 2, integrated independently with Simpson
        let g = SkewingFunction::Laplace;
        let n = 20_000;
        let h = 2.0 / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let y = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * y * g.cdf(y);
        }
        let simpson = 2.0 / 4.0 * s * h / 3.0;
        assert_relative_eq!(c_closed(g, 2.0).unwrap().c, simpson, max_relative = 1e-12);
        assert_relative_eq!(c_closed(g, 2.0).unwrap().c, 0.851_501_462_427_459_5, max_relative = 1e-14);
    }

    #[test]
    fn closed_matches_quadrature_spot_checks() {
        for g in [SkewingFunction::Normal, SkewingFunction::StudentT2] {
            let ell = if g == SkewingFunction::Normal { 1.0 } else { 3.0 };
            let closed = c_closed(g, ell).unwrap().c;
            let quad = c_quadrature(g, ell).unwrap().c;
            assert_relative_eq!(closed, quad, max_relative = 1e-8);
        }
    }

    #[test]
    fn tiny_ell_gives_one_half() {
        for g in SkewingFunction::ALL {
            let c = c_quadrature(g, 1e-6).unwrap().c;
            assert!((c - 0.5).abs() < 1e-6);
            assert!((c_closed(g, 1e-6).unwrap().c - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_nonpositive_ell() {
        assert!(c_closed(SkewingFunction::Normal, 0.0).is_err());
        assert!(c_closed(SkewingFunction::Normal, -1.0).is_err());
        assert!(c_quadrature(SkewingFunction::Normal, f64::NAN).is_err());
    }

    #[test]
    fn closed_matches_quadrature_on_log_grid() {
        for g in SkewingFunction::ALL {
            for i in 0..200 {
                let ell = 10f64.powf(-3.0 + 6.0 * i as f64 / 199.0);
                let closed = c_closed(g, ell).unwrap().c;
                let quad = c_quadrature(g, ell).unwrap().c;
                assert!(
                    ((closed - quad) / quad).abs() <= 1e-8,
                    "{g} at ell={ell}: {closed} vs {quad}"
                );
                assert!(closed >= 0.5 && closed <= g.cdf(ell) + 1e-15, "{g} at {ell}");
            }
        }
    }

    proptest! {
        #[test]
        fn cdf_symmetry(x in -1e3f64..1e3) {
            for g in SkewingFunction::ALL {
                prop_assert!((g.cdf(-x) + g.cdf(x) - 1.0).abs() <= 1e-14);
                prop_assert!(g.pdf(x) >= 0.0);
                prop_assert_eq!(g.pdf(x), g.pdf(-x));
            }
        }

        #[test]
        fn cdf_monotone(x in -50f64..50.0, dx in 0f64..5.0) {
            for g in SkewingFunction::ALL {
                prop_assert!(g.cdf(x + dx) >= g.cdf(x));
                prop_assert!((0.0..=1.0).contains(&g.cdf(x)));
            }
        }
    }
}
