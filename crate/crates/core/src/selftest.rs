//! Built-in verification suite: every closed form, identity, bound and
//! limit checked against an independent computation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::SeedableRng;
use rayon::prelude::*;

use crate::asymptotics::normalized_moment;
use crate::bounds::{self, FuzzInstance};
use crate::empirical::{self, CurvePoint};
use crate::error::Result;
use crate::moments::{self, h_function, HMode, MomentQuery};
use crate::quadrature::{self, Tolerance};
use crate::skewing::{self, SkewingFunction};
use crate::specfun::erf;
use crate::truncated::{SampleRng, TruncatedDistribution};

pub const DEFAULT_SEED: u64 = 20_240_229;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckOutcome {
            name,
            passed,
            detail,
        }
    }
}

fn outcome(name: &'static str, check: Result<(bool, String)>) -> CheckOutcome {
    match check {
        Ok((passed, detail)) => CheckOutcome::new(name, passed, detail),
        Err(e) => CheckOutcome::new(name, false, format!("error: {e}")),
    }
}

/// Runs every check; the suite passes when all outcomes pass.
pub fn run(seed: u64) -> Vec<CheckOutcome> {
    vec![
        outcome("closed-form-c", closed_forms()),
        outcome("moment-identity", moment_identity_oracle(250, seed)),
        outcome("cauchy-variance", cauchy_variance()),
        outcome("normal-variance", normal_variance()),
        outcome("limits", limits()),
        outcome("inequalities", inequalities(1000, seed)),
        outcome("monte-carlo-variance", monte_carlo_variance(1_000_000, seed)),
        outcome("truncation-curve", truncation_curve_tracks_h(seed)),
        outcome("power-law-fit", power_law_fit()),
        outcome("pipeline-determinism", pipeline_determinism(seed)),
    ]
}

fn closed_forms() -> Result<(bool, String)> {
    let grid: Vec<f64> = (0..200)
        .map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 199.0))
        .collect();
    let worst = SkewingFunction::ALL
        .par_iter()
        .map(|&g| {
            grid.iter().try_fold(0.0f64, |worst, &ell| {
                let q = skewing::c_quadrature(g, ell)?.c;
                let c = skewing::c_closed(g, ell)?.c;
                Ok(worst.max(((c - q) / q).abs()))
            })
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= 1e-8, format!("max relative error {worst:.3e}")))
}

/// E[(X − c)^p] by integrating (x − c)^p against the density.
pub fn direct_moment(d: &TruncatedDistribution, c: f64, p: i32) -> Result<f64> {
    let g = d.g();
    let mut breaks = quadrature::feature_points(0.0);
    breaks.push(c);
    let r = quadrature::integrate_with_breaks(
        |x| (x - c).powi(p) * g.pdf(x),
        d.a(),
        d.b(),
        &breaks,
        Tolerance::relative(1e-13),
    )?;
    Ok(r.value / d.mass())
}

fn moment_identity_oracle(count: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = SampleRng::seed_from_u64(seed);
    let instances: Vec<FuzzInstance> = (0..count).map(|_| FuzzInstance::draw(&mut rng)).collect();
    let worst = instances
        .par_iter()
        .map(|inst| {
            let d = inst.distribution()?;
            let m = moments::moment_about(&d, MomentQuery::new(inst.c, inst.p as f64))?;
            let o = direct_moment(&d, inst.c, inst.p as i32)?;
            Ok(((m - o) / o).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((
        worst <= 1e-8,
        format!("{count} instances, max relative error {worst:.3e}"),
    ))
}

fn cauchy_variance() -> Result<(bool, String)> {
    let exact = 4.0 / PI - 1.0;
    let d = TruncatedDistribution::symmetric(SkewingFunction::Cauchy, 1.0)?;
    let identity = moments::variance(&d)?;
    let h = h_function(SkewingFunction::Cauchy, 1.0, HMode::Closed)?.variance();
    let err = (identity - exact).abs().max((h - exact).abs());
    Ok((err <= 1e-9, format!("max abs error {err:.3e}")))
}

fn normal_variance() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for ell in [0.5f64, 1.0, 2.0] {
        let phi = (-0.5 * ell * ell).exp() / (2.0 * PI).sqrt();
        let exact = 1.0 - 2.0 * ell * phi / erf(ell * FRAC_1_SQRT_2);
        let d = TruncatedDistribution::symmetric(SkewingFunction::Normal, ell)?;
        worst = worst.max((moments::variance(&d)? - exact).abs());
    }
    Ok((worst <= 1e-9, format!("max abs error {worst:.3e}")))
}

fn limits() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for g in SkewingFunction::ALL {
        worst = worst.max((h_function(g, 1e-3, HMode::Quadrature)?.h - 1.0 / 3.0).abs());
        for p in [0.5, 1.0, 2.0, 3.0] {
            let narrow = TruncatedDistribution::new(g, 1.0 - 5e-4, 1.0 + 5e-4)?;
            worst = worst.max((normalized_moment(&narrow, p)? - 1.0 / (p + 1.0)).abs());
            let wide = TruncatedDistribution::symmetric(g, 1e4)?;
            worst = worst.max((normalized_moment(&wide, p)? - 0.5f64.powf(p)).abs());
        }
    }
    let cauchy = 1e4 * h_function(SkewingFunction::Cauchy, 1e4, HMode::Closed)?.h;
    worst = worst.max((cauchy - 2.0 / PI).abs());
    let normal = 1e4 * h_function(SkewingFunction::Normal, 1e4, HMode::Closed)?.h;
    worst = worst.max(normal);
    Ok((worst <= 1e-3, format!("max abs error {worst:.3e}")))
}

fn inequalities(count: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = SampleRng::seed_from_u64(seed ^ 0x5eed);
    let instances: Vec<FuzzInstance> = (0..count).map(|_| FuzzInstance::draw(&mut rng)).collect();
    let reports = instances
        .par_iter()
        .map(bounds::check_instance)
        .collect::<Result<Vec<_>>>()?;
    let checks: Vec<_> = reports.into_iter().flatten().collect();
    let failures = checks.iter().filter(|(_, r)| !r.satisfied).count();
    let min_slack = checks.iter().map(|(_, r)| r.slack).fold(f64::INFINITY, f64::min);
    Ok((
        failures == 0,
        format!(
            "{} checks over {count} instances, {failures} violated, min slack {min_slack:.3e}",
            checks.len()
        ),
    ))
}

/// Sample variance and its standard error from the fourth central moment.
pub fn variance_with_standard_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(s2, s4), &x| {
        let d2 = (x - mean) * (x - mean);
        (s2 + d2, s4 + d2 * d2)
    });
    let var = m2 / (n - 1.0);
    let pop = m2 / n;
    (var, ((m4 / n - pop * pop) / n).sqrt())
}

fn monte_carlo_variance(n: usize, seed: u64) -> Result<(bool, String)> {
    let zs = SkewingFunction::ALL
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            let d = TruncatedDistribution::symmetric(g, 1.0)?;
            let xs = d.sample(n, seed.wrapping_add(i as u64))?;
            let (var, se) = variance_with_standard_error(&xs);
            let h = h_function(g, 1.0, HMode::Closed)?.variance();
            Ok((var - h).abs() / se)
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = zs.iter().copied().fold(0.0, f64::max);
    Ok((worst <= 3.0, format!("max |z| {worst:.3}")))
}

fn truncation_curve_tracks_h(seed: u64) -> Result<(bool, String)> {
    let g = SkewingFunction::StudentT2;
    let series = empirical::synthesize_series(g, 5.0, 100, 1000, seed)?;
    let curve = empirical::truncation_curve(&series, 50)?;
    let mut worst = 0.0f64;
    for p in &curve {
        let sigma = p.sigma.unwrap_or(f64::NAN);
        let theory = p.ell * h_function(g, p.ell, HMode::Closed)?.ratio();
        let band = theory / (2.0 * (p.n_kept as f64 - 1.0)).sqrt();
        worst = worst.max((sigma - theory).abs() / band);
    }
    Ok((
        worst <= 3.0,
        format!("{} points, max deviation {worst:.3} standard errors", curve.len()),
    ))
}

fn power_law_fit() -> Result<(bool, String)> {
    let (beta, zeta) = (2.0, 0.5);
    let exact: Vec<CurvePoint> = (0..40)
        .map(|i| {
            let ell = 10f64.powf(-4.0 + i as f64 / 10.0);
            CurvePoint {
                ell,
                n_kept: 1000,
                sigma: Some((zeta * ell).powf(1.0 / beta)),
            }
        })
        .collect();
    let fit = empirical::fit_power_law(&exact, (0.0, f64::INFINITY))?;
    let mut ok = (fit.beta - beta).abs() <= 1e-10
        && (fit.zeta - zeta).abs() <= 1e-10
        && fit.r_squared == 1.0;
    let mut worst_slope = 0.0f64;
    for g in SkewingFunction::ALL {
        let curve = (1..=50)
            .map(|i| {
                let ell = 2e-4 * i as f64;
                Ok(CurvePoint {
                    ell,
                    n_kept: 1000,
                    sigma: Some(ell * h_function(g, ell, HMode::Quadrature)?.ratio()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let fit = empirical::fit_power_law(&curve, (0.0, f64::INFINITY))?;
        worst_slope = worst_slope.max(fit.slope.abs());
        let mid = (1e-4f64 * 1e-2).sqrt().ln();
        let fitted_ratio = (fit.intercept + fit.slope * mid).exp();
        ok &= (fitted_ratio - 1.0 / 3f64.sqrt()).abs() <= 1e-3;
    }
    ok &= worst_slope <= 0.02;
    Ok((
        ok,
        format!(
            "beta {:.12}, zeta {:.12}, R² {}, small-range max |slope| {worst_slope:.3e}",
            fit.beta, fit.zeta, fit.r_squared
        ),
    ))
}

fn pipeline_bytes(seed: u64) -> Result<(Vec<u8>, Vec<u8>, Vec<u8>)> {
    let series = empirical::synthesize_series(SkewingFunction::Laplace, 1.0, 5, 2000, seed)?;
    let mut synth = Vec::new();
    empirical::write_returns_csv(&mut synth, &series)?;
    let reread = empirical::ingest_returns(synth.as_slice(), empirical::Schema::Returns)?;
    let curve = empirical::truncation_curve(&reread, 200)?;
    let mut curve_csv = Vec::new();
    empirical::write_curve_csv(&mut curve_csv, &curve)?;
    let reread = empirical::read_curve_csv(curve_csv.as_slice())?;
    let range = empirical::default_fit_range(&reread).unwrap_or((0.0, f64::INFINITY));
    let mut report = Vec::new();
    empirical::fit_power_law(&reread, range)?.write_report(&mut report)?;
    Ok((synth, curve_csv, report))
}

fn pipeline_determinism(seed: u64) -> Result<(bool, String)> {
    let first = pipeline_bytes(seed)?;
    let second = pipeline_bytes(seed)?;
    let same = first == second;
    Ok((
        same,
        format!(
            "synth {} bytes, curve {} bytes, fit {} bytes, identical: {same}",
            first.0.len(),
            first.1.len(),
            first.2.len()
        ),
    ))
}
