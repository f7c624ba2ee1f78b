//! Limiting behaviour as the support shrinks to a point or grows without
//! bound, probed numerically on grids of semi-ranges.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::{self, HMode};
use crate::quadrature::{self, Tolerance};
use crate::skewing::SkewingFunction;
use crate::truncated::TruncatedDistribution;

/// Semi-ranges at which large-range limits are probed. The Cauchy family
/// converges like 1/ℓ, so the last point is the one that matters for it.
pub const LARGE_PROBES: [f64; 4] = [1e1, 1e2, 1e3, 1e4];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitCheck {
    pub parameter_value: f64,
    pub observed: f64,
    pub target: f64,
    pub abs_error: f64,
}

impl LimitCheck {
    pub fn new(parameter_value: f64, observed: f64, target: f64) -> Self {
        LimitCheck {
            parameter_value,
            observed,
            target,
            abs_error: (observed - target).abs(),
        }
    }
}

/// E[((X − a)/(b − a))^p] for p > −1.
///
/// Integrated in v = u^{p+1}, u = (x − a)/(b − a), which turns u^p du into
/// dv/(p+1) and removes the endpoint singularity for negative p.
pub fn normalized_moment(d: &TruncatedDistribution, p: f64) -> Result<f64> {
    if !(p > -1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("order must exceed -1, got {p}")));
    }
    let (a, w) = (d.a(), d.width());
    let g = d.g();
    let q = 1.0 / (p + 1.0);
    let breaks: Vec<f64> = g
        .breaks_around(0.0)
        .into_iter()
        .map(|x| (x - a) / w)
        .filter(|&u| u > 0.0 && u < 1.0)
        .map(|u| u.powf(p + 1.0))
        .collect();
    let r = quadrature::integrate_with_breaks(
        |v| g.pdf(a + w * v.powf(q)),
        0.0,
        1.0,
        &breaks,
        Tolerance::relative(1e-12),
    )?;
    Ok(w * r.value / ((p + 1.0) * d.mass()))
}

/// What a small-range sweep measures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SmallRangeMode {
    /// H(ℓ) on (−ℓ, ℓ); limit 1/3.
    H,
    /// Normalized p-th moment on (center − ℓ, center + ℓ); limit 1/(p+1).
    NormalizedMoment(f64),
    /// (σ² + (μ − a)²)/(b − a)² on (center − ℓ, center + ℓ); limit 1/3.
    ScaledSecondMoment,
}

impl SmallRangeMode {
    pub fn target(&self) -> f64 {
        match *self {
            SmallRangeMode::H | SmallRangeMode::ScaledSecondMoment => 1.0 / 3.0,
            SmallRangeMode::NormalizedMoment(p) => 1.0 / (p + 1.0),
        }
    }
}

/// What a large-range sweep measures on (−ℓ, ℓ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LargeRangeMode {
    /// Normalized p-th moment; limit 1/2^p.
    NormalizedMoment(f64),
    /// σ²/ℓ = ℓH(ℓ); limit 2/π for Cauchy and 0 for the lighter tails.
    SigmaSqOverEll,
    /// σ²/(b − a)²; limit 0.
    SigmaSqOverRangeSq,
}

impl LargeRangeMode {
    pub fn target(&self, g: SkewingFunction) -> f64 {
        match *self {
            LargeRangeMode::NormalizedMoment(p) => 0.5f64.powf(p),
            LargeRangeMode::SigmaSqOverEll => {
                if g == SkewingFunction::Cauchy {
                    2.0 / PI
                } else {
                    0.0
                }
            }
            LargeRangeMode::SigmaSqOverRangeSq => 0.0,
        }
    }
}

fn small_observation(g: SkewingFunction, mode: SmallRangeMode, center: f64, ell: f64) -> Result<f64> {
    match mode {
        SmallRangeMode::H => Ok(moments::h_function(g, ell, HMode::Quadrature)?.h),
        SmallRangeMode::NormalizedMoment(p) => {
            let d = TruncatedDistribution::new(g, center - ell, center + ell)?;
            normalized_moment(&d, p)
        }
        SmallRangeMode::ScaledSecondMoment => {
            let d = TruncatedDistribution::new(g, center - ell, center + ell)?;
            let (mu, var) = moments::mean_variance(&d)?;
            let offset = mu - d.a();
            Ok((var + offset * offset) / (d.width() * d.width()))
        }
    }
}

/// Probes a small-range limit along a decreasing grid of semi-ranges.
/// Grid points are evaluated in parallel; output order follows `ells`.
pub fn limit_sweep_small(
    g: SkewingFunction,
    mode: SmallRangeMode,
    center: f64,
    ells: &[f64],
) -> Result<Vec<LimitCheck>> {
    if ells.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::invalid("semi-ranges must be positive and finite"));
    }
    if ells.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("small-range grid must be strictly decreasing"));
    }
    let target = mode.target();
    ells.par_iter()
        .map(|&ell| Ok(LimitCheck::new(ell, small_observation(g, mode, center, ell)?, target)))
        .collect()
}

fn large_observation(g: SkewingFunction, mode: LargeRangeMode, ell: f64) -> Result<f64> {
    match mode {
        LargeRangeMode::NormalizedMoment(p) => {
            normalized_moment(&TruncatedDistribution::symmetric(g, ell)?, p)
        }
        LargeRangeMode::SigmaSqOverEll => Ok(ell * moments::h_function(g, ell, HMode::Closed)?.h),
        LargeRangeMode::SigmaSqOverRangeSq => {
            Ok(moments::h_function(g, ell, HMode::Closed)?.h / 4.0)
        }
    }
}

/// Probes a large-range limit on the symmetric supports (−ℓ, ℓ).
pub fn limit_sweep_large(
    g: SkewingFunction,
    mode: LargeRangeMode,
    ells: &[f64],
) -> Result<Vec<LimitCheck>> {
    if ells.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::invalid("semi-ranges must be positive and finite"));
    }
    let target = mode.target(g);
    ells.par_iter()
        .map(|&ell| Ok(LimitCheck::new(ell, large_observation(g, mode, ell)?, target)))
        .collect()
}

/// `n` log-spaced points from `hi` down to `lo`.
pub fn decreasing_log_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (lh, ll) = (hi.log10(), lo.log10());
    (0..n)
        .map(|i| 10f64.powf(lh + (ll - lh) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Writes sweep results as CSV with columns `ell,observed,target,abs_error`.
pub fn write_checks_csv<W: Write>(out: W, checks: &[LimitCheck]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ell", "observed", "target", "abs_error"])?;
    for c in checks {
        w.write_record([
            crate::format::sig15(c.parameter_value),
            crate::format::sig15(c.observed),
            crate::format::sig15(c.target),
            crate::format::sig15(c.abs_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}
