//! Tick-return pipeline: CSV ingestion, per-day statistics, the conditional
//! standard deviation curve ℓ ↦ σ(ℓ) over |X| ⩽ ℓ, and a log-log power-law
//! fit of σ/ℓ against ℓ.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use log::warn;

use crate::error::{Error, Result};
use crate::format::sig15;
use crate::skewing::SkewingFunction;
use crate::truncated::TruncatedDistribution;

pub const DEFAULT_GRID_SIZE: usize = 1000;

/// Minimum number of curve points a decade needs to be picked as the
/// default fit range.
pub const MIN_POINTS_PER_DECADE: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct DayReturns {
    pub day: NaiveDate,
    pub values: Vec<f64>,
}

/// Returns grouped by calendar day, days in ascending order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ReturnSeries {
    pub days: Vec<DayReturns>,
}

impl ReturnSeries {
    /// Total number of returns.
    pub fn n(&self) -> usize {
        self.days.iter().map(|d| d.values.len()).sum()
    }

    /// Number of days.
    pub fn d(&self) -> usize {
        self.days.len()
    }

    /// All returns, day by day, in input order within each day.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.days.iter().flat_map(|d| d.values.iter().copied())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schema {
    /// `day,value` rows holding returns directly.
    Returns,
    /// `timestamp,price` rows; returns are within-day log price ratios.
    Prices,
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "returns" => Ok(Schema::Returns),
            "prices" => Ok(Schema::Prices),
            _ => Err(Error::invalid(format!(
                "unknown schema '{s}' (expected returns or prices)"
            ))),
        }
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| DateTime::parse_from_rfc3339(s).ok().map(|t| t.naive_local()))
}

fn parse_finite(s: &str, what: &str, line: u64) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("{what} '{s}' is not a finite number"),
        }),
    }
}

/// Reads a returns or prices CSV.
///
/// Prices must be in non-decreasing timestamp order; a day's first price
/// only anchors the next one, so there are no overnight returns.
pub fn ingest_returns<R: Read>(source: R, schema: Schema) -> Result<ReturnSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let expected = match schema {
        Schema::Returns => ["day", "value"],
        Schema::Prices => ["timestamp", "price"],
    };
    let header = reader.headers()?.clone();
    if header.len() != 2 || header[0] != *expected[0] || header[1] != *expected[1] {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header '{},{}', found '{}'",
                expected[0],
                expected[1],
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut by_day: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    let mut rows = 0usize;
    let mut last: Option<(NaiveDateTime, f64)> = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        rows += 1;
        match schema {
            Schema::Returns => {
                let day = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| {
                    Error::Parse {
                        line,
                        message: format!("bad date '{}': {e}", &record[0]),
                    }
                })?;
                let value = parse_finite(&record[1], "return", line)?;
                by_day.entry(day).or_default().push(value);
            }
            Schema::Prices => {
                let ts = parse_timestamp(&record[0]).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("bad timestamp '{}'", &record[0]),
                })?;
                let price = parse_finite(&record[1], "price", line)?;
                if price <= 0.0 {
                    return Err(Error::Parse {
                        line,
                        message: format!("price must be positive, got {price}"),
                    });
                }
                if let Some((prev_ts, prev_price)) = last {
                    if ts < prev_ts {
                        return Err(Error::Parse {
                            line,
                            message: format!("timestamp {ts} precedes {prev_ts}"),
                        });
                    }
                    if ts.date() == prev_ts.date() {
                        by_day
                            .entry(ts.date())
                            .or_default()
                            .push((price / prev_price).ln());
                    }
                }
                last = Some((ts, price));
            }
        }
    }
    if rows == 0 {
        return Err(Error::EmptyInput("no data rows".into()));
    }
    let days: Vec<DayReturns> = by_day
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(day, values)| DayReturns { day, values })
        .collect();
    if days.is_empty() {
        return Err(Error::EmptyInput(
            "no day has two or more prices, so there are no returns".into(),
        ));
    }
    Ok(ReturnSeries { days })
}

/// Writes a series in the returns schema, values in shortest round-trip form.
pub fn write_returns_csv<W: Write>(out: W, series: &ReturnSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["day", "value"])?;
    for day in &series.days {
        let date = day.day.format("%Y-%m-%d").to_string();
        for v in &day.values {
            w.write_record([date.as_str(), v.to_string().as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Two-pass sample standard deviation with the n − 1 denominator.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DailyStat {
    pub day: NaiveDate,
    pub n: usize,
    /// Standard deviation with the n − 1 denominator.
    pub s_sample: f64,
    /// Standard deviation with the n denominator.
    pub s_population: f64,
    /// Largest absolute return of the day.
    pub ell: f64,
}

impl DailyStat {
    pub fn ratio(&self) -> f64 {
        self.s_sample / self.ell
    }

    pub fn population_ratio(&self) -> f64 {
        self.s_population / self.ell
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedDay {
    pub day: NaiveDate,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct DailySummary {
    pub stats: Vec<DailyStat>,
    pub skipped: Vec<SkippedDay>,
}

/// Per-day (s_i, ℓ_i). Days with fewer than two returns or with ℓ_i = 0
/// are skipped and reported.
pub fn daily_stats(series: &ReturnSeries) -> DailySummary {
    let mut summary = DailySummary::default();
    for day in &series.days {
        let n = day.values.len();
        let reason = if n < 2 {
            Some(format!("{n} return(s), need at least 2"))
        } else if day.values.iter().all(|&v| v == 0.0) {
            Some("all returns are zero, so the day's range is zero".to_string())
        } else {
            None
        };
        if let Some(reason) = reason {
            warn!("skipping {}: {reason}", day.day);
            summary.skipped.push(SkippedDay { day: day.day, reason });
            continue;
        }
        let s_sample = sample_std(&day.values);
        let nf = n as f64;
        summary.stats.push(DailyStat {
            day: day.day,
            n,
            s_sample,
            s_population: s_sample * ((nf - 1.0) / nf).sqrt(),
            ell: day.values.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        });
    }
    summary
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub ell: f64,
    pub n_kept: usize,
    /// Sample standard deviation of {x : |x| ⩽ ell}; `None` below two points.
    pub sigma: Option<f64>,
}

impl CurvePoint {
    pub fn ratio(&self) -> Option<f64> {
        self.sigma.map(|s| s / self.ell)
    }
}

/// σ(ℓ) on the grid ℓ = m·ℓ*/grid_size, m = 1..=grid_size, ℓ* = max |x|.
///
/// One sort by |x| followed by a single Welford pass; points that keep the
/// whole sample report the direct two-pass standard deviation instead.
pub fn truncation_curve(series: &ReturnSeries, grid_size: usize) -> Result<Vec<CurvePoint>> {
    if grid_size == 0 {
        return Err(Error::invalid("grid size must be at least 1"));
    }
    let values: Vec<f64> = series.values().collect();
    if values.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 returns, got {}",
            values.len()
        )));
    }
    let ell_star = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if ell_star == 0.0 {
        return Err(Error::invalid("all returns are zero"));
    }
    let full_sigma = sample_std(&values);
    let mut sorted = values;
    sorted.sort_by(|x, y| x.abs().total_cmp(&y.abs()));

    let n = sorted.len();
    let mut kept = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut curve = Vec::with_capacity(grid_size);
    for m in 1..=grid_size {
        let ell = if m == grid_size {
            ell_star
        } else {
            m as f64 * ell_star / grid_size as f64
        };
        while kept < n && sorted[kept].abs() <= ell {
            let x = sorted[kept];
            kept += 1;
            let delta = x - mean;
            mean += delta / kept as f64;
            m2 += delta * (x - mean);
        }
        let sigma = if kept == n {
            Some(full_sigma)
        } else if kept >= 2 {
            Some((m2 / (kept - 1) as f64).sqrt())
        } else {
            None
        };
        curve.push(CurvePoint {
            ell,
            n_kept: kept,
            sigma,
        });
    }
    Ok(curve)
}

/// Writes `ell,n_kept,sigma,ratio` rows; undefined σ leaves the last two
/// fields empty.
pub fn write_curve_csv<W: Write>(out: W, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ell", "n_kept", "sigma", "ratio"])?;
    for p in curve {
        w.write_record([
            sig15(p.ell),
            p.n_kept.to_string(),
            p.sigma.map(sig15).unwrap_or_default(),
            p.ratio().map(sig15).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(source: R) -> Result<Vec<CurvePoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().take(3).collect::<Vec<_>>() != ["ell", "n_kept", "sigma"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header 'ell,n_kept,sigma,ratio'".into(),
        });
    }
    let mut curve = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected at least 3 fields, found {}", record.len()),
            });
        }
        let ell = parse_finite(&record[0], "ell", line)?;
        let n_kept = record[1].parse::<usize>().map_err(|e| Error::Parse {
            line,
            message: format!("bad n_kept '{}': {e}", &record[1]),
        })?;
        let sigma = if record[2].is_empty() {
            None
        } else {
            Some(parse_finite(&record[2], "sigma", line)?)
        };
        curve.push(CurvePoint { ell, n_kept, sigma });
    }
    if curve.is_empty() {
        return Err(Error::EmptyInput("curve file has no rows".into()));
    }
    Ok(curve)
}

/// σ/ℓ ≈ ζ^{1/β} ℓ^{−1+1/β}, fitted as a straight line in (ln ℓ, ln σ/ℓ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub beta: f64,
    pub zeta: f64,
    /// −1 + 1/β.
    pub slope: f64,
    /// ln(ζ)/β.
    pub intercept: f64,
    pub r_squared: f64,
    pub fit_range: (f64, f64),
    pub points_used: usize,
}

impl PowerLawFit {
    /// `key=value` report lines.
    pub fn write_report<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "beta={}", sig15(self.beta))?;
        writeln!(out, "zeta={}", sig15(self.zeta))?;
        writeln!(out, "slope={}", sig15(self.slope))?;
        writeln!(out, "intercept={}", sig15(self.intercept))?;
        writeln!(out, "r_squared={}", sig15(self.r_squared))?;
        writeln!(out, "ell_min={}", sig15(self.fit_range.0))?;
        writeln!(out, "ell_max={}", sig15(self.fit_range.1))?;
        writeln!(out, "points_used={}", self.points_used)?;
        Ok(())
    }
}

fn usable(curve: &[CurvePoint]) -> impl Iterator<Item = (f64, f64)> + '_ {
    curve.iter().filter_map(|p| match p.sigma {
        Some(s) if s > 0.0 && p.ell > 0.0 => Some((p.ell, s)),
        _ => None,
    })
}

/// The lowest decade [10^k, 10^{k+1}) holding at least
/// [`MIN_POINTS_PER_DECADE`] usable points, or the full usable span when no
/// decade qualifies.
pub fn default_fit_range(curve: &[CurvePoint]) -> Option<(f64, f64)> {
    let ells: Vec<f64> = usable(curve).map(|(l, _)| l).collect();
    let lo = ells.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ells.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if ells.is_empty() {
        return None;
    }
    let first = lo.log10().floor() as i32;
    let last = hi.log10().floor() as i32;
    for k in first..=last {
        let (d_lo, d_hi) = (10f64.powi(k), 10f64.powi(k + 1));
        let count = ells.iter().filter(|&&l| l >= d_lo && l < d_hi).count();
        if count >= MIN_POINTS_PER_DECADE {
            return Some((d_lo, d_hi));
        }
    }
    Some((lo, hi))
}

/// Ordinary least squares of ln(σ/ℓ) on ln ℓ over curve points with
/// σ > 0 and ℓ in the closed `range`. Points are sorted by ℓ first, so the
/// result does not depend on input order.
pub fn fit_power_law(curve: &[CurvePoint], range: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = range;
    if !(lo <= hi) {
        return Err(Error::invalid(format!("empty fit range [{lo}, {hi}]")));
    }
    let mut pts: Vec<(f64, f64)> = usable(curve)
        .filter(|&(l, _)| l >= lo && l <= hi)
        .map(|(l, s)| (l.ln(), (s / l).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::invalid(format!(
            "power-law fit needs at least 3 points with sigma > 0 in [{lo}, {hi}], found {}",
            pts.len()
        )));
    }
    pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all fit points share one ell"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if slope <= -1.0 {
        return Err(Error::DegenerateFit(format!(
            "slope {slope} <= -1 leaves beta = 1/(slope + 1) undefined"
        )));
    }
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let beta = 1.0 / (slope + 1.0);
    Ok(PowerLawFit {
        beta,
        zeta: (intercept * beta).exp(),
        slope,
        intercept,
        r_squared,
        fit_range: range,
        points_used: pts.len(),
    })
}

/// Seeded synthetic series: `days × per_day` draws from the symmetric
/// truncation of `g` on (−ell, ell), on consecutive calendar days from
/// 2000-01-03.
pub fn synthesize_series(
    g: SkewingFunction,
    ell: f64,
    days: usize,
    per_day: usize,
    seed: u64,
) -> Result<ReturnSeries> {
    if days == 0 || per_day == 0 {
        return Err(Error::invalid("days and per-day counts must be at least 1"));
    }
    let d = TruncatedDistribution::symmetric(g, ell)?;
    let draws = d.sample(days * per_day, seed)?;
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    Ok(ReturnSeries {
        days: draws
            .chunks(per_day)
            .zip(start.iter_days())
            .map(|(chunk, day)| DayReturns {
                day,
                values: chunk.to_vec(),
            })
            .collect(),
    })
}
