use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiments::{NotNormReport, RateReport, ResampleReport, SandwichReport, TradeoffReport};
use crate::error::Result;

/// Bumped whenever a CSV column or JSON field changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Wall-clock time of one unit of work. Kept out of every deterministic output.
#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub label: String,
    /// The size variable the time is plotted against.
    pub x: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum ExperimentOutput {
    Rate(RateReport),
    Resample(ResampleReport),
    Tradeoff(TradeoffReport),
    Sandwich(SandwichReport),
    Notnorm(NotNormReport),
}

impl ExperimentOutput {
    pub fn timings(&self) -> &[Timing] {
        match self {
            ExperimentOutput::Rate(r) => &r.timings,
            ExperimentOutput::Resample(r) => &r.timings,
            ExperimentOutput::Tradeoff(r) => &r.timings,
            ExperimentOutput::Sandwich(r) => &r.timings,
            ExperimentOutput::Notnorm(r) => &r.timings,
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    experiment: &'static str,
    config: &'a ExperimentConfig,
    report: &'a ExperimentOutput,
}

/// `serde(flatten)` is not supported by the CSV writer, so sandwich rows are spelled out.
#[derive(Serialize)]
struct SandwichCsv<'a> {
    family: &'a str,
    param: &'a str,
    d: usize,
    #[serde(rename = "R")]
    level: u32,
    p: f64,
    exact: f64,
    besov_one: f64,
    besov_inf: f64,
    moser_ub: Option<f64>,
    dyadic_ub: f64,
    separated_lb: Option<f64>,
    slack: f64,
    ratio_inf: Option<f64>,
    ratio_one: Option<f64>,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Two columns of natural logs; nonpositive values are skipped.
fn write_tsv(path: &Path, header: (&str, &str), points: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    let mut s = format!("{}\t{}\n", header.0, header.1);
    for (x, y) in points {
        if x > 0.0 && y > 0.0 {
            writeln!(s, "{}\t{}", x.ln(), y.ln()).expect("writing to a String");
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Writes `results.csv`, `report.json`, `plotdata/*.tsv` and `timings.csv` into `dir`.
/// Everything except `timings.csv` is a deterministic function of the config.
pub fn write_outputs(out: &ExperimentOutput, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let plot = dir.join("plotdata");
    fs::create_dir_all(&plot)?;
    let results = dir.join("results.csv");
    match out {
        ExperimentOutput::Rate(r) => {
            write_csv(&results, &r.rows)?;
            for f in &r.fits {
                let pts = r.rows.iter().filter(|x| x.estimator == f.estimator).map(|x| (x.n as f64, x.mean));
                write_tsv(&plot.join(format!("rate_{}.tsv", f.estimator)), ("log_n", "log_mean"), pts)?;
            }
        }
        ExperimentOutput::Resample(r) => {
            write_csv(&results, &r.rows)?;
            write_tsv(&plot.join("resample.tsv"), ("log_M", "log_mean"), r.rows.iter().map(|x| (x.m as f64, x.mean)))?;
        }
        ExperimentOutput::Tradeoff(r) => {
            write_csv(&results, &r.rows)?;
            let pts = r.rows.iter().map(|x| (x.m as f64, x.precision));
            write_tsv(&plot.join("tradeoff_precision.tsv"), ("log_M", "log_precision"), pts)?;
            let pts = r.rows.iter().map(|x| (x.m as f64, x.work));
            write_tsv(&plot.join("tradeoff_work.tsv"), ("log_M", "log_work"), pts)?;
        }
        ExperimentOutput::Sandwich(r) => {
            write_csv(
                &results,
                r.rows.iter().map(|x| SandwichCsv {
                    family: &x.family,
                    param: &x.param,
                    d: x.d,
                    level: x.record.level,
                    p: x.record.p,
                    exact: x.record.exact,
                    besov_one: x.record.besov_one,
                    besov_inf: x.record.besov_inf,
                    moser_ub: x.record.moser_ub,
                    dyadic_ub: x.record.dyadic_ub,
                    separated_lb: x.record.separated_lb,
                    slack: x.record.slack,
                    ratio_inf: x.record.ratio_inf,
                    ratio_one: x.record.ratio_one,
                }),
            )?;
            let pts = r.rows.iter().map(|x| (x.record.besov_inf, x.record.exact));
            write_tsv(&plot.join("sandwich_besov_inf.tsv"), ("log_besov_inf", "log_exact"), pts)?;
            let pts = r.rows.iter().map(|x| (x.record.besov_one, x.record.exact));
            write_tsv(&plot.join("sandwich_besov_one.tsv"), ("log_besov_one", "log_exact"), pts)?;
        }
        ExperimentOutput::Notnorm(r) => {
            write_csv(&results, &r.rows)?;
            for f in &r.fits {
                let pts = r.rows.iter().filter(|x| x.p == f.p).map(|x| (x.lambda, x.ratio));
                write_tsv(&plot.join(format!("notnorm_p{}.tsv", f.p)), ("log_lambda", "log_ratio"), pts)?;
            }
        }
    }
    let report = Report { schema_version: SCHEMA_VERSION, experiment: cfg.experiment.name(), config: cfg, report: out };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    write_csv(&dir.join("timings.csv"), out.timings())?;
    Ok(())
}
