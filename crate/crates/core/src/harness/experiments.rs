use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

use super::config::{EstimatorKind, ExperimentConfig, ExperimentKind, SandwichSweep};
use super::output::{ExperimentOutput, Timing};
use super::{fit_loglog, mean_se, theoretical_exponent, ExponentRegime, SlopeFit};
use crate::density::{perturbed_uniform, sample, two_bump_pair, Box, GridDensity};
use crate::error::{Error, Result};
use crate::estimators::{
    bounded_estimator, empirical, histogram_estimator, oracle_distance_to_truth, select_level, DiscreteMeasure,
    Estimate, LevelRule, OracleMethod,
};
use crate::haar::level_len;
use crate::resample::{choose_m, resample_distribution, Source};
use crate::rng;
use crate::transport::{exact_wp, sandwich_report, sinkhorn_wp, wp_1d, SandwichRecord};

/// Runs `f` over `items` on a small thread pool; results keep the input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn with_n(e: Error, n: usize) -> Error {
    match e {
        Error::Resource(msg) => Error::Resource(format!("n = {n}: {msg}")),
        Error::Argument(msg) => Error::Argument(format!("n = {n}: {msg}")),
        other => other,
    }
}

/// Extra additive error of the oracle: the truncation term of a finite dyadic sum.
fn oracle_bias(method: OracleMethod, d: usize) -> f64 {
    match method {
        OracleMethod::DyadicUb { j_max: Some(j) } => (d as f64).sqrt() * (-(j as f64)).exp2(),
        _ => 0.0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub estimator: &'static str,
    pub n: usize,
    pub level: u32,
    pub mean: f64,
    pub se: f64,
    pub reps: usize,
    pub bias_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimatorFit {
    pub estimator: &'static str,
    pub fit: Option<SlopeFit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fits: Vec<EstimatorFit>,
    pub regime: ExponentRegime,
    /// The rate is `n^{-exponent}`, so the expected slope is its negative.
    pub theoretical_exponent: f64,
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

impl RateReport {
    pub fn fit(&self, estimator: EstimatorKind) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.estimator == estimator.name()).and_then(|f| f.fit.as_ref())
    }

    pub fn rows_for(&self, estimator: EstimatorKind) -> impl Iterator<Item = &RateRow> {
        self.rows.iter().filter(move |r| r.estimator == estimator.name())
    }
}

pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    let truth = cfg.truth()?.build()?.swap_remove(0);
    let (d, p) = (cfg.d, cfg.p);
    let levels: Vec<u32> = cfg
        .n_grid
        .iter()
        .map(|&n| select_level(&LevelRule { regime: cfg.level_regime, d, s: cfg.s, p, n }))
        .collect();
    let tasks: Vec<(usize, usize)> =
        (0..cfg.n_grid.len()).flat_map(|i| (0..cfg.replications).map(move |r| (i, r))).collect();
    let results = parallel_map(&tasks, |&(i, r)| -> Result<Vec<(f64, f64)>> {
        let n = cfg.n_grid[i];
        let xs = sample(&truth, n, cfg.base_seed + r as u64);
        cfg.estimators
            .iter()
            .map(|&kind| {
                let (dist, secs) = timed(|| -> Result<f64> {
                    match kind {
                        EstimatorKind::Empirical => {
                            let e = empirical(&xs)?;
                            oracle_distance_to_truth(Estimate::Atoms(&e), &truth, p, cfg.method)
                        }
                        EstimatorKind::Histogram => {
                            let h = histogram_estimator(&xs, levels[i])?;
                            oracle_distance_to_truth(Estimate::Grid(&h), &truth, p, cfg.method)
                        }
                        EstimatorKind::Bounded => {
                            let b = bounded_estimator(&xs, levels[i], cfg.m, p)?;
                            oracle_distance_to_truth(Estimate::Grid(&b.density), &truth, p, cfg.method)
                        }
                    }
                });
                Ok((dist.map_err(|e| with_n(e, n))?, secs))
            })
            .collect()
    });
    let results: Vec<Vec<(f64, f64)>> = results.into_iter().collect::<Result<_>>()?;

    let bias = oracle_bias(cfg.method, d);
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (k, &kind) in cfg.estimators.iter().enumerate() {
        for (i, &n) in cfg.n_grid.iter().enumerate() {
            let per_rep: Vec<f64> = (0..cfg.replications).map(|r| results[i * cfg.replications + r][k].0).collect();
            let secs: f64 = (0..cfg.replications).map(|r| results[i * cfg.replications + r][k].1).sum();
            let (mean, se) = mean_se(&per_rep);
            rows.push(RateRow { estimator: kind.name(), n, level: levels[i], mean, se, reps: cfg.replications, bias_bound: bias });
            timings.push(Timing { label: format!("{} n={n}", kind.name()), x: n as f64, seconds: secs });
        }
    }
    let fits = cfg
        .estimators
        .iter()
        .map(|&kind| {
            let (x, y): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|r| r.estimator == kind.name()).map(|r| (r.n as f64, r.mean)).unzip();
            EstimatorFit { estimator: kind.name(), fit: fit_loglog(&x, &y) }
        })
        .collect();
    Ok(RateReport {
        rows,
        fits,
        regime: cfg.exponent_regime,
        theoretical_exponent: theoretical_exponent(cfg.exponent_regime, d, cfg.s, p),
        timings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ResampleRow {
    pub source_n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub mean: f64,
    pub se: f64,
    pub reps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResampleReport {
    pub source_level: u32,
    pub rows: Vec<ResampleRow>,
    pub fit: Option<SlopeFit>,
    /// `M^{-1/d}` for `d > 2p`, `M^{-1/2p}` below.
    pub theoretical_exponent: f64,
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

/// Distance between a fixed histogram and the empirical measure of `M` draws from it.
pub fn run_resample_experiment(cfg: &ExperimentConfig) -> Result<ResampleReport> {
    let truth = cfg.truth()?.build()?.swap_remove(0);
    let (d, p) = (cfg.d, cfg.p);
    let n = cfg.source_n.expect("validated");
    let level = select_level(&LevelRule { regime: cfg.level_regime, d, s: cfg.s, p, n });
    let src = histogram_estimator(&sample(&truth, n, cfg.base_seed), level)?;
    let tasks: Vec<(usize, usize)> =
        (0..cfg.m_grid.len()).flat_map(|i| (0..cfg.replications).map(move |r| (i, r))).collect();
    let results = parallel_map(&tasks, |&(i, r)| {
        let m = cfg.m_grid[i];
        timed(|| -> Result<f64> {
            let bar = resample_distribution(Source::Grid(&src), m, cfg.base_seed + 1 + r as u64)?;
            oracle_distance_to_truth(Estimate::Atoms(&bar), &src, p, cfg.method).map_err(|e| with_n(e, m))
        })
    });
    let results: Vec<(f64, f64)> = results.into_iter().map(|(v, t)| v.map(|v| (v, t))).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (i, &m) in cfg.m_grid.iter().enumerate() {
        let chunk = &results[i * cfg.replications..(i + 1) * cfg.replications];
        let vals: Vec<f64> = chunk.iter().map(|c| c.0).collect();
        let (mean, se) = mean_se(&vals);
        rows.push(ResampleRow { source_n: n, m, mean, se, reps: cfg.replications });
        timings.push(Timing { label: format!("resample M={m}"), x: m as f64, seconds: chunk.iter().map(|c| c.1).sum() });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.m as f64, r.mean)).unzip();
    Ok(ResampleReport {
        source_level: level,
        fit: fit_loglog(&x, &y),
        rows,
        theoretical_exponent: theoretical_exponent(ExponentRegime::UnboundedUb, d, 0.0, p),
        timings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TradeoffRow {
    pub gamma: f64,
    #[serde(rename = "M")]
    pub m: usize,
    /// Mean `|W_p estimate - W_p(mu, nu)|` with `nu = mu`, so the reference value is 0.
    pub precision: f64,
    pub precision_se: f64,
    pub reps: usize,
    /// Mean Sinkhorn iterations times problem size: a deterministic proxy for time.
    pub work: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TradeoffReport {
    pub n: usize,
    pub gamma_star: f64,
    pub rows: Vec<TradeoffRow>,
    pub warnings: Vec<String>,
    /// Log-log slope of `work` against `M`.
    pub work_fit: Option<SlopeFit>,
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

impl TradeoffReport {
    /// Log-log slope of wall time against `M`; not deterministic.
    pub fn time_fit(&self) -> Option<SlopeFit> {
        let (x, y): (Vec<f64>, Vec<f64>) = self.timings.iter().map(|t| (t.x, t.seconds.max(1e-9))).unzip();
        fit_loglog(&x, &y)
    }
}

/// Known reference measure with about `m` atoms: the truth's cell masses at
/// the level whose cell count is closest to `m`.
fn reference_measure(truth: &GridDensity, m: usize) -> Result<DiscreteMeasure> {
    let d = truth.d() as f64;
    let level = ((m as f64).log2() / d).round().max(0.0) as u32;
    let level = level.min(truth.level());
    DiscreteMeasure::from_grid(&truth.function().coarsen(level)?)
}

pub fn run_tradeoff_experiment(cfg: &ExperimentConfig) -> Result<TradeoffReport> {
    let truth = cfg.truth()?.build()?.swap_remove(0);
    let (d, p) = (cfg.d, cfg.p);
    let n = cfg.n_grid[0];
    let level = select_level(&LevelRule { regime: cfg.level_regime, d, s: cfg.s, p, n });
    let mut warnings = Vec::new();
    let mut sizes = Vec::new();
    for &g in &cfg.gamma {
        let (m, warn) = choose_m(n, g, p, d)?;
        warnings.extend(warn);
        sizes.push(m);
    }
    let eps_of = |m: usize| cfg.eps_scale * (m as f64).powf(-p / d as f64);
    let tasks: Vec<(usize, usize)> =
        (0..cfg.gamma.len()).flat_map(|i| (0..cfg.replications).map(move |r| (i, r))).collect();
    let results = parallel_map(&tasks, |&(i, r)| {
        let m = sizes[i];
        let xs = sample(&truth, n, cfg.base_seed + r as u64);
        // M = n keeps the plain empirical pipeline
        let atoms = if m == n {
            empirical(&xs)
        } else {
            histogram_estimator(&xs, level)
                .and_then(|h| resample_distribution(Source::Grid(&h), m, cfg.base_seed + 1_000_003 + r as u64))
        };
        let nu = reference_measure(&truth, m);
        let (res, secs) = timed(|| -> Result<(f64, f64)> {
            let (atoms, nu) = (atoms?, nu?);
            let res = sinkhorn_wp(&atoms, &nu, p, eps_of(m)).map_err(|e| with_n(e, m))?;
            let work = res.iterations as f64 * (atoms.len() * nu.len()) as f64;
            Ok((res.value.max(0.0).powf(1.0 / p), work))
        });
        res.map(|(v, w)| (v, w, secs))
    });
    let results: Vec<(f64, f64, f64)> = results.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (i, &gamma) in cfg.gamma.iter().enumerate() {
        let chunk = &results[i * cfg.replications..(i + 1) * cfg.replications];
        let vals: Vec<f64> = chunk.iter().map(|c| c.0).collect();
        let (precision, precision_se) = mean_se(&vals);
        let work = chunk.iter().map(|c| c.1).sum::<f64>() / chunk.len() as f64;
        let m = sizes[i];
        rows.push(TradeoffRow { gamma, m, precision, precision_se, reps: cfg.replications, work, eps: eps_of(m) });
        let secs = chunk.iter().map(|c| c.2).sum::<f64>() / chunk.len() as f64;
        timings.push(Timing { label: format!("tradeoff gamma={gamma} M={m}"), x: m as f64, seconds: secs });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.m as f64, r.work)).unzip();
    Ok(TradeoffReport {
        n,
        gamma_star: crate::resample::gamma_star(p, d),
        work_fit: fit_loglog(&x, &y),
        rows,
        warnings,
        timings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichRow {
    pub family: String,
    pub param: String,
    pub d: usize,
    #[serde(flatten)]
    pub record: SandwichRecord,
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    pub max_ratio_inf: Option<f64>,
    pub max_ratio_one: Option<f64>,
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

/// Grid resolution used for each dimension of the sandwich suite.
fn sandwich_level(d: usize) -> u32 {
    match d {
        1 => 6,
        2 => 4,
        _ => 3,
    }
}

/// One pair of densities with the constants needed by the sandwich report.
struct Instance {
    family: &'static str,
    param: String,
    f: GridDensity,
    g: GridDensity,
    m: f64,
    separation: Option<(Vec<Box>, Vec<Box>)>,
}

fn random_signs(stream: &mut rng::Stream, count: usize) -> Vec<i8> {
    (0..count).map(|_| if rng::unit(stream) < 0.5 { -1 } else { 1 }).collect()
}

fn sandwich_instances(sw: &SandwichSweep, seed: u64) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for &d in &sw.dims {
        let r = sandwich_level(d);
        let mut stream = rng::stream(seed.wrapping_add(d as u64));
        for j in 0..2u32.min(r) {
            // each cell sees at most 2^d - 1 wavelets of height 2^{dj/2}
            let amplitude = 0.4 * (-(d as f64 * j as f64) / 2.0).exp2() / ((1usize << d) - 1) as f64;
            let count = level_len(d, j);
            for k in 0..sw.pairs {
                let eps = random_signs(&mut stream, count);
                let other = if k % 2 == 0 {
                    let mut flipped = eps.clone();
                    let at = rng::index(&mut stream, count);
                    flipped[at] = -flipped[at];
                    flipped
                } else {
                    let mut other = random_signs(&mut stream, count);
                    if other == eps {
                        other[0] = -other[0];
                    }
                    other
                };
                let f = perturbed_uniform(&eps, amplitude, j, d, r)?;
                let g = perturbed_uniform(&other, amplitude, j, d, r)?;
                let m = f.min().min(g.min());
                out.push(Instance { family: "perturbed_uniform", param: format!("j={j} pair={k}"), f, g, m, separation: None });
            }
        }
        let uniform = GridDensity::uniform(d, r);
        for &w in &sw.mixture_weights {
            let f = uniform.mix(1.0 - w, &crate::density::bump(d, r)?, w)?;
            out.push(Instance {
                family: "bump_mixture",
                param: format!("weight={w}"),
                m: f.min(),
                f,
                g: uniform.clone(),
                separation: None,
            });
        }
        for &lambda in &sw.lambdas {
            let (f, g) = two_bump_pair(lambda, d, r)?;
            let s = vec![Box { lo: vec![0.0; d], hi: vec![1.0 / 3.0; d] }.snap_out(r)];
            let t = vec![Box { lo: vec![2.0 / 3.0; d], hi: vec![1.0; d] }.snap_out(r)];
            out.push(Instance { family: "two_bump", param: format!("lambda={lambda}"), f, g, m: 0.0, separation: Some((s, t)) });
        }
    }
    Ok(out)
}

/// Batch sandwich reports; a violated certified ordering aborts with a certificate error.
pub fn run_sandwich_experiment(cfg: &ExperimentConfig) -> Result<SandwichReport> {
    let sw = cfg.sandwich.as_ref().expect("validated");
    let instances = sandwich_instances(sw, cfg.base_seed)?;
    let tasks: Vec<(usize, f64)> =
        (0..instances.len()).flat_map(|i| sw.p.iter().map(move |&p| (i, p))).collect();
    let results = parallel_map(&tasks, |&(i, p)| {
        let inst = &instances[i];
        let ub = inst.f.max().max(inst.g.max());
        let sep = inst.separation.as_ref().map(|(s, t)| (s.as_slice(), t.as_slice()));
        timed(|| sandwich_report(&inst.f, &inst.g, inst.m, ub, p, sep))
    });
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (&(i, p), (rec, secs)) in tasks.iter().zip(results) {
        let inst = &instances[i];
        let record = rec?;
        timings.push(Timing { label: format!("{} {} d={} p={p}", inst.family, inst.param, inst.f.d()), x: i as f64, seconds: secs });
        rows.push(SandwichRow { family: inst.family.into(), param: inst.param.clone(), d: inst.f.d(), record });
    }
    let max = |f: fn(&SandwichRow) -> Option<f64>| rows.iter().filter_map(f).reduce(f64::max);
    Ok(SandwichReport {
        max_ratio_inf: max(|r| r.record.ratio_inf),
        max_ratio_one: max(|r| r.record.ratio_one),
        rows,
        timings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NotNormRow {
    pub lambda: f64,
    pub p: f64,
    pub wp: f64,
    pub l1: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NotNormFit {
    pub p: f64,
    /// `1/p - 1`.
    pub expected_slope: f64,
    pub fit: Option<SlopeFit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NotNormReport {
    pub rows: Vec<NotNormRow>,
    pub fits: Vec<NotNormFit>,
    #[serde(skip)]
    pub timings: Vec<Timing>,
}

impl NotNormReport {
    pub fn fit(&self, p: f64) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.p == p).and_then(|f| f.fit.as_ref())
    }
}

/// `W_p(f_lambda, f_{-lambda}) / ||f_lambda - f_{-lambda}||_1` across `lambda`.
pub fn run_notnorm_experiment(cfg: &ExperimentConfig) -> Result<NotNormReport> {
    let level = cfg.resolution.unwrap_or(8);
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let mut fits = Vec::new();
    for &p in &cfg.p_list {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &lambda in &cfg.lambdas {
            let (row, secs) = timed(|| -> Result<NotNormRow> {
                let (f, g) = two_bump_pair(lambda, cfg.d, level)?;
                let mu = DiscreteMeasure::from_grid(f.function())?;
                let nu = DiscreteMeasure::from_grid(g.function())?;
                let wp = if cfg.d == 1 { wp_1d(&mu, &nu, p)? } else { exact_wp(&mu, &nu, p)?.0 };
                let l1 = f.l1_distance(g.function())?;
                Ok(NotNormRow { lambda, p, wp, l1, ratio: wp / l1 })
            });
            let row = row?;
            x.push(lambda);
            y.push(row.ratio);
            timings.push(Timing { label: format!("notnorm p={p} lambda={lambda}"), x: lambda, seconds: secs });
            rows.push(row);
        }
        fits.push(NotNormFit { p, expected_slope: 1.0 / p - 1.0, fit: fit_loglog(&x, &y) });
    }
    Ok(NotNormReport { rows, fits, timings })
}

/// Runs whichever experiment the config names.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        ExperimentKind::Rate => ExperimentOutput::Rate(run_rate_experiment(cfg)?),
        ExperimentKind::ResampleRate => ExperimentOutput::Resample(run_resample_experiment(cfg)?),
        ExperimentKind::Tradeoff => ExperimentOutput::Tradeoff(run_tradeoff_experiment(cfg)?),
        ExperimentKind::Sandwich => ExperimentOutput::Sandwich(run_sandwich_experiment(cfg)?),
        ExperimentKind::Notnorm => ExperimentOutput::Notnorm(run_notnorm_experiment(cfg)?),
    })
}
