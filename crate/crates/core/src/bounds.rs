//! Upper and lower bounds on moments of truncated distributions, each paired
//! with the actual value so the inequality can be checked.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::moments::{self, MomentQuery};
use crate::skewing::SkewingFunction;
use crate::truncated::TruncatedDistribution;

/// Absolute slack below which a bound still counts as satisfied.
pub const SLACK_TOLERANCE: f64 = 1e-10;

/// Grid size for the minimum over centers.
pub const CENTER_GRID: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// The bound is an upper bound on the actual value.
    Upper,
    /// The bound is a lower bound on the actual value.
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub bound_value: f64,
    pub actual_value: f64,
    pub direction: Direction,
    /// Signed distance from the actual value to the bound; negative means
    /// the inequality is violated.
    pub slack: f64,
    pub satisfied: bool,
}

impl BoundReport {
    pub fn new(bound_value: f64, actual_value: f64, direction: Direction) -> Self {
        let slack = match direction {
            Direction::Upper => bound_value - actual_value,
            Direction::Lower => actual_value - bound_value,
        };
        BoundReport {
            bound_value,
            actual_value,
            direction,
            slack,
            satisfied: slack >= -SLACK_TOLERANCE,
        }
    }

    pub fn upper(bound_value: f64, actual_value: f64) -> Self {
        Self::new(bound_value, actual_value, Direction::Upper)
    }

    pub fn lower(bound_value: f64, actual_value: f64) -> Self {
        Self::new(bound_value, actual_value, Direction::Lower)
    }
}

fn check_center(d: &TruncatedDistribution, c: f64) -> Result<()> {
    if d.contains(c) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "center {c} is outside the support ({}, {})",
            d.a(),
            d.b()
        )))
    }
}

/// P(X > x) without forming 1 − F(x).
fn survival(d: &TruncatedDistribution, x: f64) -> f64 {
    if x >= d.b() {
        0.0
    } else if x <= d.a() {
        1.0
    } else {
        d.g().mass(x, d.b()) / d.mass()
    }
}

/// E[(X−c)^p] ⩽ (b−c)^p[1−F(c)] + (a−c)^p F(c) for even p, and
/// ⩽ (b−c)^p[1−F(c)] for odd p.
pub fn upper_bound_corollary(d: &TruncatedDistribution, c: f64, p: u32) -> Result<BoundReport> {
    check_center(d, c)?;
    if p == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    let pi = p as i32;
    let right = (d.b() - c).powi(pi) * survival(d, c);
    let bound = if p % 2 == 0 {
        right + (d.a() - c).powi(pi) * d.cdf(c)
    } else {
        right
    };
    let actual = moments::moment_about(d, MomentQuery::new(c, p as f64))?;
    Ok(BoundReport::upper(bound, actual))
}

/// E[(X−c)^p] ⩾ (t−c)^p [F(b) − F(t)] for even p and c < t < b.
pub fn lower_bound_even(d: &TruncatedDistribution, c: f64, p: u32, t: f64) -> Result<BoundReport> {
    check_center(d, c)?;
    if p == 0 || p % 2 != 0 {
        return Err(Error::invalid(format!("order must be a positive even integer, got {p}")));
    }
    if !(t > c && t < d.b()) {
        return Err(Error::invalid(format!(
            "threshold {t} must lie in ({c}, {})",
            d.b()
        )));
    }
    let bound = (t - c).powi(p as i32) * survival(d, t);
    let actual = moments::moment_about(d, MomentQuery::new(c, p as f64))?;
    Ok(BoundReport::lower(bound, actual))
}

/// Upper bound on min over c of E[(X−c)^p]: ((b−a)/2)^p for even p, 0 for odd.
pub fn popoviciu_generalized(a: f64, b: f64, p: u32) -> f64 {
    if p % 2 == 0 {
        ((b - a) / 2.0).powi(p as i32)
    } else {
        0.0
    }
}

/// Checks [`popoviciu_generalized`] against the minimum of E[(X−c)^p] over a
/// uniform grid of interior centers, refined by golden-section search
/// around the best grid point.
pub fn popoviciu_generalized_check(d: &TruncatedDistribution, p: u32) -> Result<BoundReport> {
    if p == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    let (a, b) = (d.a(), d.b());
    let step = (b - a) / (CENTER_GRID + 1) as f64;
    let moment = |c: f64| moments::moment_about(d, MomentQuery::new(c, p as f64));
    let mut best = (f64::INFINITY, 0usize);
    for k in 1..=CENTER_GRID {
        let v = moment(a + k as f64 * step)?;
        if v < best.0 {
            best = (v, k);
        }
    }
    let (mut lo, mut hi) = (
        a + (best.1 - 1) as f64 * step,
        a + (best.1 + 1) as f64 * step,
    );
    // keep the search strictly inside the support
    lo = lo.max(a + 1e-9 * (b - a));
    hi = hi.min(b - 1e-9 * (b - a));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (moment(x1)?, moment(x2)?);
    for _ in 0..40 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = moment(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = moment(x2)?;
        }
    }
    let minimum = best.0.min(f1).min(f2);
    Ok(BoundReport::upper(popoviciu_generalized(a, b, p), minimum))
}

/// σ² ⩽ ((b−a)/2)².
pub fn popoviciu(d: &TruncatedDistribution) -> Result<BoundReport> {
    let var = moments::variance(d)?;
    Ok(BoundReport::upper(popoviciu_generalized(d.a(), d.b(), 2), var))
}

/// σ² ⩾ ((b−μ)/2)² [F(b) − F((μ+b)/2)].
pub fn reverse_popoviciu(d: &TruncatedDistribution) -> Result<BoundReport> {
    let (mu, var) = moments::mean_variance(d)?;
    let half = (d.b() - mu) / 2.0;
    let bound = half * half * survival(d, (mu + d.b()) / 2.0);
    Ok(BoundReport::lower(bound, var))
}

/// One randomly drawn configuration for the inequality checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuzzInstance {
    pub g: SkewingFunction,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub t: f64,
    pub p: u32,
}

impl FuzzInstance {
    /// Support widths log-uniform on [10⁻³, 10³], midpoints uniform on
    /// [−3, 3], center and threshold uniform inside the support.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let g = SkewingFunction::ALL[rng.gen_range(0..SkewingFunction::ALL.len())];
        let width = 10f64.powf(rng.gen_range(-3.0..3.0));
        let mid = rng.gen_range(-3.0..3.0);
        let a = mid - width / 2.0;
        let b = mid + width / 2.0;
        let c = a + width * rng.gen_range(0.02..0.98);
        let t = c + (b - c) * rng.gen_range(0.02..0.98);
        let p = rng.gen_range(1..=4);
        FuzzInstance { g, a, b, c, t, p }
    }

    pub fn distribution(&self) -> Result<TruncatedDistribution> {
        TruncatedDistribution::new(self.g, self.a, self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    Popoviciu,
    ReversePopoviciu,
    MomentUpper,
    EvenLower,
    GeneralizedPopoviciu,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [
        BoundKind::Popoviciu,
        BoundKind::ReversePopoviciu,
        BoundKind::MomentUpper,
        BoundKind::EvenLower,
        BoundKind::GeneralizedPopoviciu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Popoviciu => "popoviciu",
            BoundKind::ReversePopoviciu => "reverse-popoviciu",
            BoundKind::MomentUpper => "moment-upper",
            BoundKind::EvenLower => "even-moment-lower",
            BoundKind::GeneralizedPopoviciu => "generalized-popoviciu",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every bound that applies to the instance. The even-order lower bound
/// uses order p rounded up to the next even number.
pub fn check_instance(inst: &FuzzInstance) -> Result<Vec<(BoundKind, BoundReport)>> {
    let d = inst.distribution()?;
    let even_p = inst.p + inst.p % 2;
    Ok(vec![
        (BoundKind::Popoviciu, popoviciu(&d)?),
        (BoundKind::ReversePopoviciu, reverse_popoviciu(&d)?),
        (
            BoundKind::MomentUpper,
            upper_bound_corollary(&d, inst.c, inst.p)?,
        ),
        (
            BoundKind::EvenLower,
            lower_bound_even(&d, inst.c, even_p, inst.t)?,
        ),
        (
            BoundKind::GeneralizedPopoviciu,
            popoviciu_generalized_check(&d, inst.p)?,
        ),
    ])
}
