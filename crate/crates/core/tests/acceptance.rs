//! Acceptance suite. Each test prints one PASS/FAIL line and its evidence.
//! Reference values come from a composite Gauss–Legendre rule written here,
//! independent of the library's adaptive quadrature.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;

use truncrange::asymptotics::normalized_moment;
use truncrange::bounds::{self, FuzzInstance, SLACK_TOLERANCE};
use truncrange::empirical::{self, CurvePoint};
use truncrange::moments::{self, h_function, HMode, MomentQuery};
use truncrange::skewing::{c_closed, c_quadrature};
use truncrange::truncated::SampleRng;
use truncrange::{SkewingFunction, TruncatedDistribution};

fn report(label: &str, passed: bool, detail: String) {
    println!("{} {label}: {detail}", if passed { "PASS" } else { "FAIL" });
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// ∫ f over [lo, hi], split at the given points and at ±¼·4^k, each piece
/// cut into equal panels of a 20-point Gauss–Legendre rule.
fn oracle_integral(f: impl Fn(f64) -> f64, lo: f64, hi: f64, extra_breaks: &[f64]) -> f64 {
    let rule = gauss_legendre(20);
    let mut cuts = vec![lo, hi, 0.0];
    cuts.extend_from_slice(extra_breaks);
    for k in -12..=12 {
        let s = 0.25 * 4f64.powi(k);
        cuts.push(s);
        cuts.push(-s);
    }
    cuts.retain(|&x| x >= lo && x <= hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let panels = 16;
        let h = (w[1] - w[0]) / panels as f64;
        for j in 0..panels {
            let a = w[0] + j as f64 * h;
            let (mid, half) = (a + 0.5 * h, 0.5 * h);
            total += half * rule.iter().map(|&(x, wt)| wt * f(mid + half * x)).sum::<f64>();
        }
    }
    total
}

fn oracle_moment(d: &TruncatedDistribution, c: f64, p: i32) -> f64 {
    let g = d.g();
    let num = oracle_integral(|x| (x - c).powi(p) * g.pdf(x), d.a(), d.b(), &[c]);
    let mass = oracle_integral(|x| g.pdf(x), d.a(), d.b(), &[c]);
    num / mass
}

#[test]
fn closed_form_c_matches_quadrature() {
    let start = Instant::now();
    let grid: Vec<f64> = (0..200)
        .map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 199.0))
        .collect();
    let mut worst = (0.0f64, SkewingFunction::Normal, 0.0);
    for g in SkewingFunction::ALL {
        for &ell in &grid {
            let q = c_quadrature(g, ell).unwrap().c;
            let c = c_closed(g, ell).unwrap().c;
            let rel = ((c - q) / q).abs();
            if rel > worst.0 {
                worst = (rel, g, ell);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst.0 <= 1e-8 && secs < 30.0;
    report(
        "closed-form C(ℓ) vs quadrature, 5 families × 200 ℓ in [1e-2, 1e3]",
        passed,
        format!(
            "max rel error {:.3e} ({} at ℓ={:.4e}), {secs:.2}s",
            worst.0, worst.1, worst.2
        ),
    );
    assert!(passed);
}

#[test]
fn moment_identity_matches_direct_integration() {
    let start = Instant::now();
    let mut rng = SampleRng::seed_from_u64(0xC0FFEE);
    let instances: Vec<FuzzInstance> = (0..250).map(|_| FuzzInstance::draw(&mut rng)).collect();
    let errors: Vec<(f64, FuzzInstance)> = instances
        .par_iter()
        .map(|inst| {
            let d = inst.distribution().unwrap();
            let m = moments::moment_about(&d, MomentQuery::new(inst.c, inst.p as f64)).unwrap();
            let o = oracle_moment(&d, inst.c, inst.p as i32);
            (((m - o) / o).abs(), *inst)
        })
        .collect();
    let (worst, inst) = errors
        .iter()
        .copied()
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-8 && secs < 60.0;
    report(
        "moment identity vs direct ∫(x−c)^p dF, 250 fuzzed instances",
        passed,
        format!("max rel error {worst:.3e} (worst {inst:?}), {secs:.2}s"),
    );
    assert!(passed);
}

#[test]
fn cauchy_variance_exact_value() {
    let exact = 4.0 / PI - 1.0;
    let d = TruncatedDistribution::symmetric(SkewingFunction::Cauchy, 1.0).unwrap();
    let identity = moments::variance(&d).unwrap();
    let via_h = h_function(SkewingFunction::Cauchy, 1.0, HMode::Closed)
        .unwrap()
        .variance();
    let err = (identity - exact).abs().max((via_h - exact).abs());
    let passed = err <= 1e-9;
    report(
        "Cauchy on (−1, 1): σ² = 4/π − 1 by both routes",
        passed,
        format!("identity {identity:.12}, ℓ²H {via_h:.12}, exact {exact:.12}, max error {err:.2e}"),
    );
    assert!(passed);
}

#[test]
fn normal_variance_closed_form() {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for ell in [0.5f64, 1.0, 2.0] {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let central = oracle_integral(phi, -ell, ell, &[]);
        let exact = 1.0 - 2.0 * ell * phi(ell) / central;
        let d = TruncatedDistribution::symmetric(SkewingFunction::Normal, ell).unwrap();
        let v = moments::variance(&d).unwrap();
        worst = worst.max((v - exact).abs());
        detail.push(format!("ℓ={ell}: {v:.12}"));
    }
    let passed = worst <= 1e-9;
    report(
        "Normal on (−ℓ, ℓ): σ² = 1 − 2ℓφ(ℓ)/(2Φ(ℓ)−1), ℓ ∈ {0.5, 1, 2}",
        passed,
        format!("{}, max error {worst:.2e}", detail.join(", ")),
    );
    assert!(passed);
}

/// Every limit listed for the asymptotic regimes. The Normal σ²/ℓ probe at
/// ℓ = 10² is reported on its own line: σ² → 1 there, so σ²/ℓ ≈ 10⁻² and a
/// 10⁻³ threshold cannot be met. It is asserted separately in
/// `normal_sigma_sq_over_ell_at_one_hundred`.
#[test]
fn asymptotic_limits() {
    let mut worst_h = 0.0f64;
    let mut worst_small = 0.0f64;
    let mut worst_large = 0.0f64;
    for g in SkewingFunction::ALL {
        worst_h = worst_h.max((h_function(g, 1e-3, HMode::Quadrature).unwrap().h - 1.0 / 3.0).abs());
        for p in [0.5, 1.0, 2.0, 3.0] {
            for center in [0.0, 1.7] {
                let narrow =
                    TruncatedDistribution::new(g, center - 5e-4, center + 5e-4).unwrap();
                let m = normalized_moment(&narrow, p).unwrap();
                worst_small = worst_small.max((m - 1.0 / (p + 1.0)).abs());
            }
            let wide = TruncatedDistribution::symmetric(g, 1e4).unwrap();
            let m = normalized_moment(&wide, p).unwrap();
            worst_large = worst_large.max((m - 0.5f64.powf(p)).abs());
        }
    }
    let cauchy = TruncatedDistribution::symmetric(SkewingFunction::Cauchy, 1e4).unwrap();
    let cauchy_ratio = moments::variance(&cauchy).unwrap() / 1e4;
    let cauchy_err = (cauchy_ratio - 2.0 / PI).abs();

    let normal = TruncatedDistribution::symmetric(SkewingFunction::Normal, 1e2).unwrap();
    let normal_ratio = moments::variance(&normal).unwrap() / 1e2;
    let normal_far = TruncatedDistribution::symmetric(SkewingFunction::Normal, 1e4).unwrap();
    let normal_far_ratio = moments::variance(&normal_far).unwrap() / 1e4;

    report("H(10⁻³) → 1/3, all families", worst_h <= 1e-3, format!("max error {worst_h:.3e}"));
    report(
        "normalized moment → 1/(p+1) at width 10⁻³, p ∈ {0.5, 1, 2, 3}",
        worst_small <= 1e-3,
        format!("max error {worst_small:.3e}"),
    );
    report(
        "normalized moment → 1/2^p at width 2·10⁴, p ∈ {0.5, 1, 2, 3}",
        worst_large <= 1e-3,
        format!("max error {worst_large:.3e}"),
    );
    report(
        "Cauchy σ²/ℓ → 2/π at ℓ = 10⁴",
        cauchy_err <= 1e-3,
        format!("σ²/ℓ = {cauchy_ratio:.9}, error {cauchy_err:.3e}"),
    );
    report(
        "Normal σ²/ℓ < 10⁻³ at ℓ = 10²",
        normal_ratio < 1e-3,
        format!("σ²/ℓ = {normal_ratio:.6e} (σ² → 1, so σ²/ℓ ≈ 1/ℓ); at ℓ = 10⁴ it is {normal_far_ratio:.3e}"),
    );
    assert!(worst_h <= 1e-3);
    assert!(worst_small <= 1e-3);
    assert!(worst_large <= 1e-3);
    assert!(cauchy_err <= 1e-3);
    assert!(normal_far_ratio < 1e-3);
}

#[test]
#[ignore = "not attainable: the Normal variance tends to 1, so σ²/ℓ at ℓ = 100 is about 0.01"]
fn normal_sigma_sq_over_ell_at_one_hundred() {
    let d = TruncatedDistribution::symmetric(SkewingFunction::Normal, 1e2).unwrap();
    let ratio = moments::variance(&d).unwrap() / 1e2;
    assert!(ratio < 1e-3, "σ²/ℓ = {ratio}");
}

#[test]
fn inequality_suite() {
    let start = Instant::now();
    let mut rng = SampleRng::seed_from_u64(0xB0_0D5);
    let instances: Vec<FuzzInstance> = (0..1000).map(|_| FuzzInstance::draw(&mut rng)).collect();
    let results: Vec<_> = instances
        .par_iter()
        .map(|inst| bounds::check_instance(inst).unwrap())
        .collect();
    let mut line = Vec::new();
    let mut passed = true;
    for kind in bounds::BoundKind::ALL {
        let slacks: Vec<f64> = results
            .iter()
            .flatten()
            .filter(|(k, _)| *k == kind)
            .map(|(_, r)| r.slack)
            .collect();
        let min = slacks.iter().copied().fold(f64::INFINITY, f64::min);
        let violated = slacks.iter().filter(|&&s| s < -SLACK_TOLERANCE).count();
        passed &= violated == 0;
        line.push(format!("{kind}: {violated}/{} violated, min slack {min:.2e}", slacks.len()));
    }
    let secs = start.elapsed().as_secs_f64();
    passed &= secs < 120.0;
    report(
        "variance and moment inequalities, 1000 fuzzed instances",
        passed,
        format!("{}; {secs:.2}s", line.join("; ")),
    );
    assert!(passed);
}

#[test]
fn monte_carlo_variance_matches_h() {
    let n = 1_000_000;
    let rows: Vec<(SkewingFunction, f64, f64, f64)> = SkewingFunction::ALL
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            let d = TruncatedDistribution::symmetric(g, 1.0).unwrap();
            let xs = d.sample(n, 1000 + i as u64).unwrap();
            let nf = n as f64;
            let mean = xs.iter().sum::<f64>() / nf;
            let m2: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            let m4: f64 = xs.iter().map(|x| (x - mean).powi(4)).sum();
            let var = m2 / (nf - 1.0);
            let se = ((m4 / nf - (m2 / nf).powi(2)) / nf).sqrt();
            let theory = h_function(g, 1.0, HMode::Closed).unwrap().variance();
            (g, var, theory, (var - theory).abs() / se)
        })
        .collect();
    let passed = rows.iter().all(|r| r.3 <= 3.0);
    let detail: Vec<String> = rows
        .iter()
        .map(|(g, v, t, z)| format!("{g}: {v:.6} vs {t:.6} (|z| {z:.2})"))
        .collect();
    report(
        "10⁶ samples per family at ℓ = 1 vs ℓ²H(ℓ)",
        passed,
        detail.join(", "),
    );
    assert!(passed);
}

#[test]
fn empirical_pipeline() {
    let g = SkewingFunction::StudentT2;
    let series = empirical::synthesize_series(g, 5.0, 100, 1000, 4242).unwrap();
    let curve = empirical::truncation_curve(&series, 50).unwrap();
    let worst_band = curve
        .iter()
        .map(|p| {
            let theory = p.ell * h_function(g, p.ell, HMode::Closed).unwrap().ratio();
            let band = theory / (2.0 * (p.n_kept as f64 - 1.0)).sqrt();
            (p.sigma.unwrap() - theory).abs() / band
        })
        .fold(0.0f64, f64::max);
    let curve_ok = curve.len() == 50 && worst_band <= 3.0;
    report(
        "Student-t₂ truncation curve (n = 10⁵, ℓ = 5) vs ℓ√H(ℓ) at 50 points",
        curve_ok,
        format!("max deviation {worst_band:.3} standard errors"),
    );

    let exact: Vec<CurvePoint> = (0..40)
        .map(|i| {
            let ell = 10f64.powf(-4.0 + i as f64 / 10.0);
            CurvePoint {
                ell,
                n_kept: 100,
                sigma: Some((0.5 * ell).powf(0.5)),
            }
        })
        .collect();
    let fit = empirical::fit_power_law(&exact, (0.0, f64::INFINITY)).unwrap();
    let fit_ok = (fit.beta - 2.0).abs() <= 1e-10
        && (fit.zeta - 0.5).abs() <= 1e-10
        && fit.r_squared == 1.0;
    report(
        "power-law fit recovers (β, ζ) = (2, 0.5) from exact points",
        fit_ok,
        format!(
            "β − 2 = {:.2e}, ζ − 0.5 = {:.2e}, R² = {}",
            fit.beta - 2.0,
            fit.zeta - 0.5,
            fit.r_squared
        ),
    );

    let mut worst_slope = 0.0f64;
    let mut worst_level = 0.0f64;
    for g in SkewingFunction::ALL {
        let series = empirical::synthesize_series(g, 1e-2, 20, 5000, 99).unwrap();
        let curve = empirical::truncation_curve(&series, 100).unwrap();
        let small: Vec<CurvePoint> = curve.into_iter().filter(|p| p.n_kept >= 1000).collect();
        let fit = empirical::fit_power_law(&small, (0.0, f64::INFINITY)).unwrap();
        worst_slope = worst_slope.max(fit.slope.abs());
        let exact: Vec<CurvePoint> = (1..=50)
            .map(|i| {
                let ell = 2e-4 * i as f64;
                CurvePoint {
                    ell,
                    n_kept: 1000,
                    sigma: Some(ell * h_function(g, ell, HMode::Quadrature).unwrap().ratio()),
                }
            })
            .collect();
        let fit = empirical::fit_power_law(&exact, (0.0, f64::INFINITY)).unwrap();
        worst_slope = worst_slope.max(fit.slope.abs());
        let level = (fit.intercept + fit.slope * (1e-3f64 * 1e-2).sqrt().ln()).exp();
        worst_level = worst_level.max((level - 1.0 / 3f64.sqrt()).abs());
    }
    let small_ok = worst_slope <= 0.02 && worst_level <= 1e-3;
    report(
        "small-ℓ fits: σ/ℓ flat at 1/√3, every family",
        small_ok,
        format!("max |slope| {worst_slope:.3e}, max |σ/ℓ − 1/√3| {worst_level:.3e}"),
    );
    assert!(curve_ok && fit_ok && small_ok);
}

fn pipeline_run(dir: &std::path::Path) -> Vec<Vec<u8>> {
    let exe = env!("CARGO_BIN_EXE_truncrange");
    let synth = dir.join("synth.csv");
    let curve = dir.join("curve.csv");
    let fit = dir.join("fit.txt");
    let run = |args: &[&str]| {
        let status = Command::new(exe).args(args).status().unwrap();
        assert!(status.success(), "{args:?}");
    };
    run(&[
        "synth", "--family", "laplace", "--ell", "0.5", "--days", "30", "--per-day", "500",
        "--seed", "17", "--output", synth.to_str().unwrap(),
    ]);
    run(&[
        "curve", "--input", synth.to_str().unwrap(), "--output", curve.to_str().unwrap(),
    ]);
    run(&["fit", "--input", curve.to_str().unwrap(), "--output", fit.to_str().unwrap()]);
    [synth, curve, fit]
        .iter()
        .map(|p| std::fs::read(p).unwrap())
        .collect()
}

#[test]
fn pipeline_is_deterministic() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let a = pipeline_run(first.path());
    let b = pipeline_run(second.path());
    let passed = a == b && a.iter().all(|f| !f.is_empty());
    report(
        "synth → curve → fit with a fixed seed, two runs byte-identical",
        passed,
        format!(
            "sizes {:?}",
            a.iter().map(|f| f.len()).collect::<Vec<_>>()
        ),
    );
    assert!(passed);
}
