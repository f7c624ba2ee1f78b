//! The `truncrange` command-line interface.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};
use rand::SeedableRng;
use rayon::prelude::*;

use crate::asymptotics::{self, LargeRangeMode, LimitCheck, SmallRangeMode};
use crate::bounds::{self, BoundKind, FuzzInstance, SLACK_TOLERANCE};
use crate::empirical::{self, Schema, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::format::sig15;
use crate::moments::{self, h_function, HMode, MomentQuery};
use crate::selftest;
use crate::skewing::SkewingFunction;
use crate::truncated::{SampleRng, TruncatedDistribution};

/// Environment variable selecting the log level: quiet, info or debug.
pub const LOG_ENV: &str = "TRUNC_RANGE_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "truncrange",
    version,
    about = "Moments, variance bounds and range-volatility curves of truncated distributions"
)]
pub struct Cli {
    /// Write results to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads for grid and sweep computations.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print E[(X − c)^p] for a truncated distribution.
    Moment {
        #[command(flatten)]
        support: SupportArgs,
        /// Center of the moment.
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        /// Order of the moment (a positive integer).
        #[arg(long)]
        p: f64,
    },
    /// Print the mean and variance; symmetric supports also show ℓ²H(ℓ).
    Variance {
        #[command(flatten)]
        support: SupportArgs,
    },
    /// CSV of H(ℓ) and σ/ℓ over a log grid of semi-ranges.
    Hcurve {
        /// Restrict to one family (default: all).
        #[arg(long)]
        family: Option<SkewingFunction>,
        #[arg(long, default_value_t = 1e-3)]
        ell_min: f64,
        #[arg(long, default_value_t = 1e2)]
        ell_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Evaluate C(ℓ) from its closed form or by quadrature.
        #[arg(long, value_enum, default_value_t = CliHMode::Closed)]
        mode: CliHMode,
    },
    /// Check the variance and moment inequalities on random instances.
    BoundsCheck {
        #[arg(long)]
        seed: u64,
        /// Number of random instances.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Smallest slack still counted as satisfied is minus this value.
        #[arg(long, default_value_t = SLACK_TOLERANCE)]
        tolerance: f64,
        /// Print every check rather than only the per-bound summary.
        #[arg(long)]
        verbose: bool,
    },
    /// Sweep a small- or large-range limit and report the distance to it.
    Limits {
        #[arg(long)]
        family: Option<SkewingFunction>,
        #[arg(long, value_enum, default_value_t = LimitQuantity::H)]
        quantity: LimitQuantity,
        /// Order for the normalized-moment quantities.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Support center for small-range sweeps.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        c: f64,
        #[arg(long)]
        ell_min: Option<f64>,
        #[arg(long)]
        ell_max: Option<f64>,
        #[arg(long, default_value_t = 7)]
        points: usize,
        /// Exit with status 2 when the last sweep point misses the limit by more than this.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Conditional standard deviation curve of a returns or prices file.
    Curve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = CliSchema::Returns)]
        schema: CliSchema,
        #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
        grid: usize,
        /// Also write per-day statistics to this CSV.
        #[arg(long)]
        daily: Option<PathBuf>,
    },
    /// Fit σ/ℓ ≈ ζ^{1/β} ℓ^{−1+1/β} to a curve CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ell_min: Option<f64>,
        #[arg(long)]
        ell_max: Option<f64>,
        /// Write the observed and fitted ratios (ell,ratio,fitted_ratio) here.
        #[arg(long)]
        points_output: Option<PathBuf>,
    },
    /// Write a seeded synthetic returns series.
    Synth {
        #[arg(long)]
        family: SkewingFunction,
        #[arg(long)]
        ell: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        days: usize,
        #[arg(long, default_value_t = 1000)]
        per_day: usize,
    },
    /// Run the built-in verification suite.
    Selftest {
        #[arg(long, default_value_t = selftest::DEFAULT_SEED)]
        seed: u64,
    },
}

/// A support given either as (−ℓ, ℓ) or as (a, b).
#[derive(Debug, Args)]
pub struct SupportArgs {
    #[arg(long)]
    pub family: SkewingFunction,
    /// Semi-range of the symmetric support (−ℓ, ℓ).
    #[arg(long, conflicts_with_all = ["a", "b"])]
    pub ell: Option<f64>,
    #[arg(long, requires = "b", allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, requires = "a", allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Require the symmetric support (−ℓ, ℓ).
    #[arg(long, requires = "ell")]
    pub symmetric: bool,
}

impl SupportArgs {
    fn distribution(&self) -> Result<TruncatedDistribution> {
        match (self.ell, self.a, self.b) {
            (Some(ell), _, _) => TruncatedDistribution::symmetric(self.family, ell),
            (None, Some(a), Some(b)) => TruncatedDistribution::new(self.family, a, b),
            _ => Err(Error::InvalidArgument(
                "give either --ell or both --a and --b".into(),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CliHMode {
    Closed,
    Quadrature,
}

impl From<CliHMode> for HMode {
    fn from(m: CliHMode) -> Self {
        match m {
            CliHMode::Closed => HMode::Closed,
            CliHMode::Quadrature => HMode::Quadrature,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CliSchema {
    Returns,
    Prices,
}

impl From<CliSchema> for Schema {
    fn from(s: CliSchema) -> Self {
        match s {
            CliSchema::Returns => Schema::Returns,
            CliSchema::Prices => Schema::Prices,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LimitQuantity {
    /// H(ℓ) as ℓ → 0, limit 1/3.
    H,
    /// Normalized p-th moment as the width shrinks, limit 1/(p+1).
    MomentSmall,
    /// (σ² + (μ − a)²)/(b − a)² as the width shrinks, limit 1/3.
    ScaledSecondMoment,
    /// Normalized p-th moment as ℓ grows, limit 1/2^p.
    MomentLarge,
    /// σ²/ℓ as ℓ grows: 2/π for Cauchy, 0 for the other families.
    SigmaSqOverEll,
    /// σ²/(b − a)² as ℓ grows, limit 0.
    SigmaSqOverRangeSq,
}

impl LimitQuantity {
    fn is_small_range(self) -> bool {
        matches!(
            self,
            LimitQuantity::H | LimitQuantity::MomentSmall | LimitQuantity::ScaledSecondMoment
        )
    }
}

fn init_logging() {
    let level = match std::env::var(LOG_ENV).as_deref() {
        Ok("quiet") => LevelFilter::Off,
        Ok("info") => LevelFilter::Info,
        Ok("debug") => LevelFilter::Debug,
        _ => LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status: 0 on success, 1 for usage or input errors, 2 for
/// numerical failures.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let exit = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if exit == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return exit;
        }
    };
    match execute(&cli, stdout) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    let pool = match cli.jobs {
        Some(0) => return Err(Error::InvalidArgument("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let mut file;
    let out: &mut dyn Write = match &cli.output {
        Some(path) => {
            file = BufWriter::new(File::create(path)?);
            &mut file
        }
        None => stdout,
    };
    let mut buffer = Vec::new();
    let status = pool.install(|| dispatch(&cli.command, &mut buffer))?;
    out.write_all(&buffer)?;
    out.flush()?;
    Ok(status)
}

fn open(path: &PathBuf) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Moment { support, c, p } => {
            let d = support.distribution()?;
            let m = moments::moment_about(&d, MomentQuery::new(*c, *p))?;
            writeln!(out, "{}", sig15(m))?;
            Ok(0)
        }
        Command::Variance { support } => variance(support, out),
        Command::Hcurve {
            family,
            ell_min,
            ell_max,
            points,
            mode,
        } => hcurve(*family, *ell_min, *ell_max, *points, (*mode).into(), out),
        Command::BoundsCheck {
            seed,
            count,
            tolerance,
            verbose,
        } => bounds_check(*seed, *count, *tolerance, *verbose, out),
        Command::Limits {
            family,
            quantity,
            p,
            c,
            ell_min,
            ell_max,
            points,
            tolerance,
        } => limits(
            *family, *quantity, *p, *c, *ell_min, *ell_max, *points, *tolerance, out,
        ),
        Command::Curve {
            input,
            schema,
            grid,
            daily,
        } => {
            let series = empirical::ingest_returns(open(input)?, (*schema).into())?;
            info!("read {} returns over {} days", series.n(), series.d());
            if let Some(path) = daily {
                write_daily(path, &series)?;
            }
            let curve = empirical::truncation_curve(&series, *grid)?;
            empirical::write_curve_csv(out, &curve)?;
            Ok(0)
        }
        Command::Fit {
            input,
            ell_min,
            ell_max,
            points_output,
        } => fit(input, *ell_min, *ell_max, points_output.as_ref(), out),
        Command::Synth {
            family,
            ell,
            seed,
            days,
            per_day,
        } => {
            let series = empirical::synthesize_series(*family, *ell, *days, *per_day, *seed)?;
            empirical::write_returns_csv(out, &series)?;
            Ok(0)
        }
        Command::Selftest { seed } => {
            let outcomes = selftest::run(*seed);
            for o in &outcomes {
                let tag = if o.passed { "PASS" } else { "FAIL" };
                writeln!(out, "{tag} {}: {}", o.name, o.detail)?;
            }
            Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 2 })
        }
    }
}

fn variance(support: &SupportArgs, out: &mut dyn Write) -> Result<i32> {
    let d = support.distribution()?;
    let (mu, var) = moments::mean_variance(&d)?;
    writeln!(out, "mean={}", sig15(mu))?;
    if d.is_symmetric() {
        let ell = d.b();
        let h = h_function(d.g(), ell, HMode::Closed)?;
        writeln!(out, "variance_moment_identity={}", sig15(var))?;
        writeln!(out, "variance_ell_sq_h={}", sig15(h.variance()))?;
        writeln!(out, "h={}", sig15(h.h))?;
    } else {
        writeln!(out, "variance={}", sig15(var))?;
    }
    Ok(0)
}

fn families(family: Option<SkewingFunction>) -> Vec<SkewingFunction> {
    family.map_or_else(|| SkewingFunction::ALL.to_vec(), |g| vec![g])
}

fn hcurve(
    family: Option<SkewingFunction>,
    ell_min: f64,
    ell_max: f64,
    points: usize,
    mode: HMode,
    out: &mut dyn Write,
) -> Result<i32> {
    if !(ell_min > 0.0 && ell_min <= ell_max && ell_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < ell-min <= ell-max, got {ell_min} and {ell_max}"
        )));
    }
    if points == 0 {
        return Err(Error::InvalidArgument("--points must be at least 1".into()));
    }
    let mut grid = asymptotics::decreasing_log_grid(ell_max, ell_min, points);
    grid.reverse();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "ell", "h", "sigma_over_ell"])?;
    for g in families(family) {
        let rows = grid
            .par_iter()
            .map(|&ell| h_function(g, ell, mode))
            .collect::<Result<Vec<_>>>()?;
        for hv in rows {
            w.write_record([
                g.name().to_string(),
                sig15(hv.ell),
                sig15(hv.h),
                sig15(hv.ratio()),
            ])?;
        }
    }
    w.flush()?;
    Ok(0)
}

fn bounds_check(
    seed: u64,
    count: usize,
    tolerance: f64,
    verbose: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidArgument("--tolerance must be non-negative".into()));
    }
    let mut rng = SampleRng::seed_from_u64(seed);
    let instances: Vec<FuzzInstance> = (0..count).map(|_| FuzzInstance::draw(&mut rng)).collect();
    let reports = instances
        .par_iter()
        .map(bounds::check_instance)
        .collect::<Result<Vec<_>>>()?;
    if verbose {
        writeln!(
            out,
            "instance,family,a,b,c,p,bound,bound_value,actual_value,slack,result"
        )?;
        for (i, (inst, checks)) in instances.iter().zip(&reports).enumerate() {
            for (kind, r) in checks {
                writeln!(
                    out,
                    "{i},{},{},{},{},{},{kind},{},{},{},{}",
                    inst.g,
                    sig15(inst.a),
                    sig15(inst.b),
                    sig15(inst.c),
                    inst.p,
                    sig15(r.bound_value),
                    sig15(r.actual_value),
                    sig15(r.slack),
                    if r.slack >= -tolerance { "pass" } else { "fail" }
                )?;
            }
        }
        writeln!(out)?;
    }
    writeln!(out, "{:<24}{:>8}{:>8}{:>16}", "bound", "checked", "failed", "min_slack")?;
    let mut any_failed = false;
    for kind in BoundKind::ALL {
        let slacks: Vec<f64> = reports
            .iter()
            .flatten()
            .filter(|(k, _)| *k == kind)
            .map(|(_, r)| r.slack)
            .collect();
        let failed = slacks.iter().filter(|&&s| s < -tolerance).count();
        any_failed |= failed > 0;
        let min = slacks.iter().copied().fold(f64::INFINITY, f64::min);
        writeln!(
            out,
            "{:<24}{:>8}{:>8}{:>16.6e}",
            kind.name(),
            slacks.len(),
            failed,
            min
        )?;
    }
    writeln!(out, "result={}", if any_failed { "FAIL" } else { "PASS" })?;
    Ok(if any_failed { 2 } else { 0 })
}

#[allow(clippy::too_many_arguments)]
fn limits(
    family: Option<SkewingFunction>,
    quantity: LimitQuantity,
    p: f64,
    c: f64,
    ell_min: Option<f64>,
    ell_max: Option<f64>,
    points: usize,
    tolerance: Option<f64>,
    out: &mut dyn Write,
) -> Result<i32> {
    if points == 0 {
        return Err(Error::InvalidArgument("--points must be at least 1".into()));
    }
    let small = quantity.is_small_range();
    let (lo, hi) = if small {
        (ell_min.unwrap_or(1e-4), ell_max.unwrap_or(1e-1))
    } else {
        (ell_min.unwrap_or(1e1), ell_max.unwrap_or(1e4))
    };
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < ell-min <= ell-max, got {lo} and {hi}"
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "ell", "observed", "target", "abs_error"])?;
    let mut missed = false;
    for g in families(family) {
        let checks: Vec<LimitCheck> = if small {
            let mode = match quantity {
                LimitQuantity::H => SmallRangeMode::H,
                LimitQuantity::MomentSmall => SmallRangeMode::NormalizedMoment(p),
                _ => SmallRangeMode::ScaledSecondMoment,
            };
            let grid = asymptotics::decreasing_log_grid(hi, lo, points);
            asymptotics::limit_sweep_small(g, mode, c, &grid)?
        } else {
            let mode = match quantity {
                LimitQuantity::MomentLarge => LargeRangeMode::NormalizedMoment(p),
                LimitQuantity::SigmaSqOverEll => LargeRangeMode::SigmaSqOverEll,
                _ => LargeRangeMode::SigmaSqOverRangeSq,
            };
            let mut grid = asymptotics::decreasing_log_grid(hi, lo, points);
            grid.reverse();
            asymptotics::limit_sweep_large(g, mode, &grid)?
        };
        if let (Some(tol), Some(last)) = (tolerance, checks.last()) {
            missed |= last.abs_error > tol;
        }
        for ch in &checks {
            w.write_record([
                g.name().to_string(),
                sig15(ch.parameter_value),
                sig15(ch.observed),
                sig15(ch.target),
                sig15(ch.abs_error),
            ])?;
        }
    }
    w.flush()?;
    Ok(if missed { 2 } else { 0 })
}

fn write_daily(path: &PathBuf, series: &empirical::ReturnSeries) -> Result<()> {
    let summary = empirical::daily_stats(series);
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record([
        "day",
        "n",
        "s_sample",
        "s_population",
        "ell",
        "ratio",
        "population_ratio",
    ])?;
    for st in &summary.stats {
        w.write_record([
            st.day.format("%Y-%m-%d").to_string(),
            st.n.to_string(),
            sig15(st.s_sample),
            sig15(st.s_population),
            sig15(st.ell),
            sig15(st.ratio()),
            sig15(st.population_ratio()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn fit(
    input: &PathBuf,
    ell_min: Option<f64>,
    ell_max: Option<f64>,
    points_output: Option<&PathBuf>,
    out: &mut dyn Write,
) -> Result<i32> {
    let curve = empirical::read_curve_csv(open(input)?)?;
    let range = match (ell_min, ell_max) {
        (None, None) => empirical::default_fit_range(&curve).ok_or_else(|| {
            Error::InvalidArgument("curve has no point with sigma > 0".into())
        })?,
        (lo, hi) => (lo.unwrap_or(0.0), hi.unwrap_or(f64::INFINITY)),
    };
    let fit = empirical::fit_power_law(&curve, range)?;
    fit.write_report(&mut *out)?;
    if let Some(path) = points_output {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(["ell", "ratio", "fitted_ratio", "in_fit_range"])?;
        for p in &curve {
            let Some(ratio) = p.ratio() else { continue };
            let fitted = (fit.intercept + fit.slope * p.ell.ln()).exp();
            let inside = p.ell >= range.0 && p.ell <= range.1;
            w.write_record([
                sig15(p.ell),
                sig15(ratio),
                sig15(fitted),
                u8::from(inside).to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(0)
}
