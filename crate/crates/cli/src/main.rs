//! `smoothot` command line: runs experiments from JSON configs and computes
//! single distances or resamples.
//!
//! Exit status is 0 on success, 2 when a certified inequality fails and 1 for
//! every other error, including usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use smoothot::density::{DensityFamilySpec, GridDensity};
use smoothot::estimators::{histogram_estimator, select_level, DiscreteMeasure, LevelRule, Regime};
use smoothot::harness::{self, ExperimentConfig, ExperimentKind};
use smoothot::resample::{choose_m, resample_distribution, Source};
use smoothot::transport::{self, MeasureRef, DEFAULT_CAP};
use smoothot::{Error, Result};

#[derive(Parser)]
#[command(name = "smoothot", version, about = "Wasserstein density estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out` or the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Rate experiment (estimators against the truth, or resampled histograms).
    Rate(Common),
    /// Precision against Sinkhorn work as the resample size grows.
    Tradeoff(Common),
    /// Exact distance between bounds and Besov norms over a family sweep.
    Sandwich(Common),
    /// Ratio of W_p to the L1 distance for two-bump pairs.
    Notnorm(Common),
    /// Distance between the measures `mu` and `nu` of the config.
    Distance(DistanceArgs),
    /// Sample from the truth, fit a histogram and resample M atoms from it.
    Resample(ResampleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    Sinkhorn,
    Dyadic,
    Moser,
    #[value(name = "1d")]
    OneD,
    Auto,
}

#[derive(Args)]
struct DistanceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
    /// Additive accuracy on W_p^p for Sinkhorn.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Common lower bound of both densities (flow bound).
    #[arg(long)]
    m: Option<f64>,
    /// Finest level of the dyadic bound; all levels for two grids when omitted.
    #[arg(long)]
    j_max: Option<u32>,
}

#[derive(Args)]
struct ResampleArgs {
    #[command(flatten)]
    common: Common,
    /// Sample size drawn from the truth.
    #[arg(long)]
    n: usize,
    /// Number of atoms in the resample.
    #[arg(long = "M", conflicts_with = "gamma", required_unless_present = "gamma")]
    big_m: Option<usize>,
    /// Resample `M = n^gamma` atoms.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Measure {
    Atoms(DiscreteMeasure),
    Grid(GridDensity),
}

impl Measure {
    fn as_ref(&self) -> MeasureRef<'_> {
        match self {
            Measure::Atoms(a) => MeasureRef::Atoms(a),
            Measure::Grid(g) => MeasureRef::Grid(g.function()),
        }
    }

    fn atoms(&self) -> Result<DiscreteMeasure> {
        match self {
            Measure::Atoms(a) => Ok(a.clone()),
            Measure::Grid(g) => DiscreteMeasure::from_grid(g.function()),
        }
    }

    fn len(&self) -> usize {
        match self {
            Measure::Atoms(a) => a.len(),
            Measure::Grid(g) => g.values().iter().filter(|&&v| v > 0.0).count(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistanceConfig {
    mu: Measure,
    nu: Measure,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Argument(format!("cannot read {}: {e}", path.display())))
}

fn out_dir(common: &Common, cfg_out: Option<&str>) -> PathBuf {
    common.out.clone().or_else(|| cfg_out.map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."))
}

fn experiment(common: &Common, allowed: &[ExperimentKind]) -> Result<()> {
    let mut cfg = ExperimentConfig::from_json(&read(&common.config)?)?;
    if !allowed.contains(&cfg.experiment) {
        return Err(Error::Argument(format!(
            "config describes a {} experiment, which this subcommand does not run",
            cfg.experiment.name()
        )));
    }
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    let dir = out_dir(common, cfg.out.as_deref());
    let out = harness::run(&cfg)?;
    harness::write_outputs(&out, &cfg, &dir)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn distance(args: &DistanceArgs) -> Result<()> {
    let cfg: DistanceConfig = serde_json::from_str(&read(&args.common.config)?)?;
    let (mu, nu, p) = (&cfg.mu, &cfg.nu, args.p);
    let method = match args.method {
        Method::Auto => match (mu, nu) {
            (Measure::Grid(_), Measure::Grid(_)) if args.m.is_some() => Method::Moser,
            _ if mu.as_ref().d() == 1 => Method::OneD,
            _ if mu.len().saturating_mul(nu.len()) <= DEFAULT_CAP => Method::Exact,
            _ => Method::Sinkhorn,
        },
        m => m,
    };
    let report = match method {
        Method::Exact => json!({ "method": "exact", "wp": transport::exact_wp(&mu.atoms()?, &nu.atoms()?, p)?.0 }),
        Method::OneD => json!({ "method": "1d", "wp": transport::wp_1d(&mu.atoms()?, &nu.atoms()?, p)? }),
        Method::Sinkhorn => {
            let r = transport::sinkhorn_wp(&mu.atoms()?, &nu.atoms()?, p, args.eps)?;
            json!({
                "method": "sinkhorn", "eps": args.eps, "wpp": r.value, "wpp_lower": r.lower,
                "wp": r.value.max(0.0).powf(1.0 / p), "iterations": r.iterations,
            })
        }
        Method::Dyadic => json!({
            "method": "dyadic", "j_max": args.j_max,
            "wp_upper": transport::dyadic_bound(mu.as_ref(), nu.as_ref(), p, args.j_max)?,
        }),
        Method::Moser => {
            let (Measure::Grid(f), Measure::Grid(g)) = (mu, nu) else {
                return Err(Error::Argument("the flow bound needs two grid densities".into()));
            };
            let level = f.level().max(g.level());
            let (f, g) = (f.refine(level)?, g.refine(level)?);
            let m = args.m.unwrap_or_else(|| f.min().min(g.min()));
            let ub = transport::moser_upper_bound(&f.coefficients(), &g.coefficients(), m, p)?;
            json!({ "method": "moser", "m": m, "wp_upper": ub })
        }
        Method::Auto => unreachable!(),
    };
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(dir) = &args.common.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), text + "\n")?;
    }
    Ok(())
}

fn resample(args: &ResampleArgs) -> Result<()> {
    let text = read(&args.common.config)?;
    let (spec, seed) = match ExperimentConfig::from_json(&text) {
        Ok(cfg) => (cfg.truth()?.clone(), cfg.base_seed),
        Err(_) => (serde_json::from_str::<DensityFamilySpec>(&text)?, 0),
    };
    let seed = args.common.seed.unwrap_or(seed);
    let truth = spec.build()?.swap_remove(0);
    let (m, warning) = match (args.big_m, args.gamma) {
        (Some(m), _) => (m, None),
        (None, Some(g)) => choose_m(args.n, g, args.p, spec.d)?,
        (None, None) => unreachable!("clap requires one of --M and --gamma"),
    };
    if let Some(w) = &warning {
        eprintln!("warning: {w}");
    }
    let level = select_level(&LevelRule { regime: Regime::UnboundedThm5, d: spec.d, s: 0.0, p: args.p, n: args.n });
    let hist = histogram_estimator(&smoothot::density::sample(&truth, args.n, seed), level)?;
    let atoms = resample_distribution(Source::Grid(&hist), m, seed.wrapping_add(1))?;
    let dir = out_dir(&args.common, None);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("resample.json"), serde_json::to_string(&atoms)? + "\n")?;
    let report = json!({ "n": args.n, "M": m, "level": level, "seed": seed, "warning": warning });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let ok = matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    let result = match &cli.command {
        Command::Rate(c) => experiment(c, &[ExperimentKind::Rate, ExperimentKind::ResampleRate]),
        Command::Tradeoff(c) => experiment(c, &[ExperimentKind::Tradeoff]),
        Command::Sandwich(c) => experiment(c, &[ExperimentKind::Sandwich]),
        Command::Notnorm(c) => experiment(c, &[ExperimentKind::Notnorm]),
        Command::Distance(a) => distance(a),
        Command::Resample(a) => resample(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if matches!(e, Error::Certificate(_)) {
        2
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificate_failures_exit_with_two() {
        assert_eq!(exit_code(&Error::Certificate("exact above bound".into())), 2);
        assert_eq!(exit_code(&Error::Argument("bad".into())), 1);
        assert_eq!(exit_code(&Error::Resource("big".into())), 1);
    }
}
