//! Synthetic data and the timing / approximation-error harness.
//!
//! Randomness comes from ChaCha8 generators seeded by [`stream_seed`], a
//! SplitMix64 hash of `(seed, label, n, trial)`. Data for a given size and
//! trial is shared by all methods, and adding a method never changes the
//! streams of the others.

use std::io::Write;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::cpcc::{point_set_distance, Backend, RhoParams};
use crate::error::{Error, Result};
use crate::io::format_sig;
use crate::measures::{euclidean, WeightedPointSet};
use crate::ot_exact::emd_exact;

pub const CSV_HEADER: &str = "method,n,seed,seconds,value,abs_error";
pub const TIMING_DIM: usize = 128;
pub const ERROR_DIM: usize = 2;
pub const DEFAULT_BUDGET: Duration = Duration::from_secs(60);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream for `(seed, label, n, trial)`.
pub fn stream_seed(seed: u64, label: &str, n: usize, trial: usize) -> u64 {
    // FNV-1a of the label
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mut s = splitmix64(seed);
    for part in [h, n as u64, trial as u64] {
        s = splitmix64(s ^ part);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Two isotropic Gaussians with different means.
    Gaussian,
    /// Two equal-weight two-component Gaussian mixtures.
    Mixture,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "mixture" => Ok(Self::Mixture),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scenario `{s}` (expected gaussian or mixture)"
            ))),
        }
    }
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Gaussian => "gaussian",
            Scenario::Mixture => "mixture",
        }
    }
}

/// Parameters of a synthetic pair of datasets. Every coordinate of a
/// component mean takes the listed value.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub scenario: Scenario,
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Component means of the first and second dataset; one entry for a
    /// Gaussian, two for a mixture.
    pub means_a: Vec<f64>,
    pub means_b: Vec<f64>,
    pub std: f64,
}

impl SyntheticSpec {
    pub fn gaussian(dim: usize) -> Self {
        Self {
            scenario: Scenario::Gaussian,
            dim,
            sizes: vec![500],
            seeds: vec![0],
            means_a: vec![1.0],
            means_b: vec![4.0],
            std: 1.0,
        }
    }

    pub fn mixture(dim: usize) -> Self {
        Self {
            scenario: Scenario::Mixture,
            dim,
            sizes: vec![500],
            seeds: vec![0],
            means_a: vec![0.0, 5.0],
            means_b: vec![2.0, 3.0],
            std: 1.0,
        }
    }

    pub fn for_scenario(scenario: Scenario, dim: usize) -> Self {
        match scenario {
            Scenario::Gaussian => Self::gaussian(dim),
            Scenario::Mixture => Self::mixture(dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let components = match self.scenario {
            Scenario::Gaussian => 1,
            Scenario::Mixture => 2,
        };
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::InvalidParameter("sizes must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one seed is required".into(),
            ));
        }
        if self.means_a.len() != components || self.means_b.len() != components {
            return Err(Error::InvalidParameter(format!(
                "the {} scenario needs {components} component mean(s) per dataset",
                self.scenario.name()
            )));
        }
        if !(self.std >= 0.0 && self.std.is_finite())
            || self
                .means_a
                .iter()
                .chain(&self.means_b)
                .any(|m| !m.is_finite())
        {
            return Err(Error::InvalidParameter(
                "means must be finite and the standard deviation finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn sample_dataset(
    means: &[f64],
    std: f64,
    n: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let noise = Normal::new(0.0, std).expect("validated std");
    let mut out = Array2::zeros((n, dim));
    for mut row in out.rows_mut() {
        let mean = if means.len() == 1 {
            means[0]
        } else {
            means[rng.random_range(0..means.len())]
        };
        for x in row.iter_mut() {
            *x = mean + noise.sample(rng);
        }
    }
    out
}

/// Two uniform-weight datasets of `n` points each, deterministic in `seed`.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    n: usize,
    seed: u64,
) -> Result<(WeightedPointSet, WeightedPointSet)> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let a = sample_dataset(&spec.means_a, spec.std, n, spec.dim, &mut rng);
    rng.set_stream(1);
    rng.set_word_pos(0);
    let b = sample_dataset(&spec.means_b, spec.std, n, spec.dim, &mut rng);
    Ok((WeightedPointSet::uniform(a)?, WeightedPointSet::uniform(b)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub method: String,
    pub n: usize,
    pub seed: u64,
    pub seconds: f64,
    pub value: f64,
    /// `|value - exact EMD|`; absent in timing runs.
    pub abs_error: Option<f64>,
    pub timed_out: bool,
}

impl BenchRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method,
            self.n,
            self.seed,
            format_sig(self.seconds),
            format_sig(self.value),
            self.abs_error.map(format_sig).unwrap_or_default()
        )
    }
}

/// Writes `# key=value` metadata lines, the header and one line per record.
pub fn write_records<W: Write>(
    mut w: W,
    records: &[BenchRecord],
    metadata: &[(String, String)],
) -> Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}={v}")?;
    }
    let timeouts: Vec<String> = records
        .iter()
        .filter(|r| r.timed_out)
        .map(|r| format!("{}:{}:{}", r.method, r.n, r.seed))
        .collect();
    if !timeouts.is_empty() {
        writeln!(w, "# timed_out={}", timeouts.join(";"))?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TimingConfig {
    pub methods: Vec<Backend>,
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub dim: usize,
    /// A trial slower than this is flagged and larger sizes are skipped
    /// for that method.
    pub budget: Duration,
    pub params: RhoParams,
}

impl TimingConfig {
    pub fn new(methods: Vec<Backend>, sizes: Vec<usize>, repeats: usize, seed: u64) -> Self {
        Self {
            methods,
            sizes,
            repeats,
            seed,
            dim: TIMING_DIM,
            budget: DEFAULT_BUDGET,
            params: RhoParams::default(),
        }
    }
}

fn method_params(
    base: &RhoParams,
    seed: u64,
    method: Backend,
    n: usize,
    trial: usize,
) -> RhoParams {
    RhoParams {
        seed: stream_seed(seed, method.name(), n, trial),
        ..*base
    }
}

/// Wall-clock time of single distance computations on Gaussian data.
///
/// Runs on one thread: every method gets one untimed warm-up call, then
/// `repeats` timed trials per size. Records carry the per-trial data seed.
pub fn bench_timing(cfg: &TimingConfig) -> Result<Vec<BenchRecord>> {
    if cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("no methods given".into()));
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be positive".into()));
    }
    let mut spec = SyntheticSpec::gaussian(cfg.dim);
    spec.sizes = cfg.sizes.clone();
    spec.seeds = vec![cfg.seed];
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Solver(e.to_string()))?;
    pool.install(|| {
        let mut records = Vec::new();
        let smallest = *cfg.sizes.iter().min().expect("validated");
        let warm_seed = stream_seed(cfg.seed, "warmup", smallest, 0);
        let (wa, wb) = generate_synthetic(&spec, smallest, warm_seed)?;
        for &method in &cfg.methods {
            let params = method_params(&cfg.params, cfg.seed, method, smallest, 0);
            point_set_distance(method, &wa, &wb, &params)?;
            'sizes: for &n in &cfg.sizes {
                for trial in 0..cfg.repeats {
                    let data_seed = stream_seed(cfg.seed, "data", n, trial);
                    let (a, b) = generate_synthetic(&spec, n, data_seed)?;
                    let params = method_params(&cfg.params, cfg.seed, method, n, trial);
                    let start = Instant::now();
                    let d = point_set_distance(method, &a, &b, &params)?;
                    let elapsed = start.elapsed();
                    let timed_out = elapsed > cfg.budget;
                    records.push(BenchRecord {
                        method: method.name().to_string(),
                        n,
                        seed: data_seed,
                        seconds: elapsed.as_secs_f64(),
                        value: d.value,
                        abs_error: None,
                        timed_out,
                    });
                    if timed_out {
                        break 'sizes;
                    }
                }
            }
        }
        Ok(records)
    })
}

#[derive(Debug, Clone)]
pub struct ErrorConfig {
    pub scenario: Scenario,
    pub methods: Vec<Backend>,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub dim: usize,
    /// Exact EMD calls slower than this drop that size and larger ones.
    pub budget: Duration,
    pub params: RhoParams,
}

impl ErrorConfig {
    pub fn new(
        scenario: Scenario,
        methods: Vec<Backend>,
        sizes: Vec<usize>,
        seeds: Vec<u64>,
    ) -> Self {
        Self {
            scenario,
            methods,
            sizes,
            seeds,
            dim: ERROR_DIM,
            budget: DEFAULT_BUDGET,
            params: RhoParams::default(),
        }
    }
}

/// Approximation error against exact EMD on identical inputs.
///
/// Every (seed, size) instance also gets an `l2` row (distance between
/// the two dataset means). Seeds run in parallel; methods within an
/// instance run in order.
pub fn bench_error(cfg: &ErrorConfig) -> Result<Vec<BenchRecord>> {
    if cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("no methods given".into()));
    }
    let mut spec = SyntheticSpec::for_scenario(cfg.scenario, cfg.dim);
    spec.sizes = cfg.sizes.clone();
    spec.seeds = cfg.seeds.clone();
    spec.validate()?;
    let mut methods = vec![Backend::L2];
    methods.extend(cfg.methods.iter().copied().filter(|m| *m != Backend::L2));

    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<BenchRecord>> {
            let mut out = Vec::new();
            for &n in &cfg.sizes {
                let data_seed = stream_seed(seed, "data", n, 0);
                let (a, b) = generate_synthetic(&spec, n, data_seed)?;
                let start = Instant::now();
                let exact = emd_exact(&a, &b)?.value;
                if start.elapsed() > cfg.budget {
                    break;
                }
                for &method in &methods {
                    let params = method_params(&cfg.params, seed, method, n, 0);
                    let start = Instant::now();
                    let d = point_set_distance(method, &a, &b, &params)?;
                    let elapsed = start.elapsed();
                    out.push(BenchRecord {
                        method: method.name().to_string(),
                        n,
                        seed,
                        seconds: elapsed.as_secs_f64(),
                        value: d.value,
                        abs_error: Some((d.value - exact).abs()),
                        timed_out: elapsed > cfg.budget,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// Aggregate over the non-timed-out records of one `(method, n)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: String,
    pub n: usize,
    pub trials: usize,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    pub mean_value: f64,
    pub mean_abs_error: Option<f64>,
}

pub fn summarize(records: &[BenchRecord]) -> Vec<Summary> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in records {
        let k = (r.method.clone(), r.n);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .filter_map(|(method, n)| {
            let cell: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| r.method == method && r.n == n && !r.timed_out)
                .collect();
            if cell.is_empty() {
                return None;
            }
            let k = cell.len() as f64;
            let mut secs: Vec<f64> = cell.iter().map(|r| r.seconds).collect();
            secs.sort_by(f64::total_cmp);
            let median_seconds = if secs.len() % 2 == 1 {
                secs[secs.len() / 2]
            } else {
                0.5 * (secs[secs.len() / 2 - 1] + secs[secs.len() / 2])
            };
            let errors: Option<Vec<f64>> = cell.iter().map(|r| r.abs_error).collect();
            Some(Summary {
                method,
                n,
                trials: cell.len(),
                mean_seconds: secs.iter().sum::<f64>() / k,
                median_seconds,
                mean_value: cell.iter().map(|r| r.value).sum::<f64>() / k,
                mean_abs_error: errors.map(|e| e.iter().sum::<f64>() / k),
            })
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "slope needs at least two points".into(),
        ));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidParameter(
            "log-log slope needs positive values".into(),
        ));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("sizes must differ".into()));
    }
    Ok(sxy / sxx)
}

/// `||mean(A) - mean(B)||`, the value of the `l2` row.
pub fn centroid_distance(a: &WeightedPointSet, b: &WeightedPointSet) -> f64 {
    euclidean(a.mean().view(), b.mean().view())
}
