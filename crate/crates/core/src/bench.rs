//! Wall-clock comparison of α-k-NN (a whole α × k grid), KLD and log-ratio
//! OLS on linear-link data.
//!
//! Each cell generates its data first, then times fit plus prediction of a
//! fixed set of query rows. Data generation is never timed. One percent of
//! the timed predictions are checked against the simplex constraints so a
//! broken fast path cannot produce a fast number.

use std::sync::Arc;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::datagen::{gen_polynomial, SimSpec};
use crate::error::{Error, Result};
use crate::regressors::{AlphaKnnGrid, KldModel, KldOptions, LogRatio, LogRatioOlsModel, Regressor};
use crate::rng::{derive_seed, rng_from_seed};
use crate::simplex::{CompositionMatrix, PredictorMatrix};
use crate::transforms::Alpha;
use crate::selection::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchScenario {
    pub ns: Vec<usize>,
    pub ds: Vec<usize>,
    /// Number of predictors.
    pub p: usize,
    pub queries: usize,
    pub alphas: Vec<f64>,
    pub ks: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    /// Cells whose estimated footprint exceeds this are skipped. `None`
    /// reads the available memory from the OS when it can.
    pub memory_limit_bytes: Option<u64>,
}

impl Default for BenchScenario {
    fn default() -> Self {
        Self {
            ns: vec![100_000, 200_000, 400_000, 800_000, 1_000_000],
            ds: vec![3, 5, 7, 10],
            p: 1,
            queries: 1000,
            alphas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            ks: (2..=100).collect(),
            repeats: 3,
            seed: 1,
            memory_limit_bytes: None,
        }
    }
}

impl BenchScenario {
    pub fn validate(&self) -> Result<()> {
        if self.queries == 0 || self.repeats == 0 {
            return Err(Error::validation("queries and repeats must be >= 1"));
        }
        if self.ns.is_empty() || self.ds.is_empty() || self.alphas.is_empty() || self.ks.is_empty() {
            return Err(Error::validation("bench grids must be non-empty"));
        }
        if self.ds.iter().any(|&d| d < 2) || self.p == 0 {
            return Err(Error::validation("bench needs D >= 2 and p >= 1"));
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n <= self.p + 1) {
            return Err(Error::validation(format!("n = {n} is too small for regression")));
        }
        if self.ks.contains(&0) {
            return Err(Error::validation("k values must be >= 1"));
        }
        for &a in &self.alphas {
            Alpha::new(a)?;
        }
        Ok(())
    }
}

/// Timings of one (n, D) cell. Seconds are medians over repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchCell {
    pub n: usize,
    pub d: usize,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub ols_seconds: Option<f64>,
    pub kld_seconds: Option<f64>,
    pub aknn_seconds: Option<f64>,
    pub kld_ratio: Option<f64>,
    pub aknn_ratio: Option<f64>,
    pub ols_runs: Vec<f64>,
    pub kld_runs: Vec<f64>,
    pub aknn_runs: Vec<f64>,
    pub aknn_grid_predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub hardware: String,
    pub threads: usize,
    pub scenario: BenchScenario,
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    pub fn cell(&self, n: usize, d: usize) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.n == n && c.d == d)
    }
}

/// CPU model, logical CPU count, OS and architecture.
pub fn hardware_descriptor() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|v| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let cpus = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("{cpu}; {cpus} logical cpus; {} {}", std::env::consts::OS, std::env::consts::ARCH)
}

fn available_memory() -> Option<u64> {
    let s = std::fs::read_to_string("/proc/meminfo").ok()?;
    let line = s.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Rough peak bytes for one cell: the data and its copies, the k-d tree,
/// KLD's per-iteration work arrays and the grid outputs kept per thread.
fn footprint(n: usize, d: usize, p: usize, queries: usize) -> u64 {
    let (n, d, p) = (n as u64, d as u64, p as u64);
    let per_row = 8 * (3 * (p + d) + 2 * d + 2);
    n * per_row + queries as u64 * 8 * (p + d)
}

/// Least-squares slope of `ln t` against `ln n`.
pub fn log_log_slope(ns: &[usize], times: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn check_rows(u: &CompositionMatrix<f64>, what: &str) -> Result<()> {
    let step = (u.nrows() / 100).max(1);
    for i in (0..u.nrows()).step_by(step) {
        check_simplex(u.row(i), what)?;
    }
    Ok(())
}

fn check_simplex(r: &[f64], what: &str) -> Result<()> {
    let s: f64 = r.iter().sum();
    if r.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
        return Err(Error::Degenerate(format!("{what} produced a non-composition")));
    }
    Ok(())
}

fn time<R>(f: impl FnOnce() -> Result<R>) -> Result<(f64, R)> {
    let t = Instant::now();
    let r = f()?;
    Ok((t.elapsed().as_secs_f64(), r))
}

struct CellData {
    x: Arc<PredictorMatrix<f64>>,
    u: Arc<CompositionMatrix<f64>>,
    q: PredictorMatrix<f64>,
}

fn cell_data(s: &BenchScenario, n: usize, d: usize, rep: usize) -> Result<CellData> {
    let seed = derive_seed(s.seed, (n as u64) << 16 ^ (d as u64) << 8 ^ rep as u64);
    let spec = SimSpec::polynomial(n, d, s.p, 1, seed);
    let data = gen_polynomial::<f64>(&spec)?;
    let mut rng = rng_from_seed(derive_seed(seed, 99));
    let q: Vec<f64> = (0..s.queries * s.p).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(CellData {
        x: Arc::new(data.x),
        u: Arc::new(data.u),
        q: PredictorMatrix::from_flat(q, s.queries, s.p)?,
    })
}

fn run_cell(s: &BenchScenario, n: usize, d: usize, alphas: &[Alpha<f64>]) -> Result<BenchCell> {
    use rayon::prelude::*;
    let mut cell = BenchCell {
        n,
        d,
        status: "ok",
        reason: None,
        ols_seconds: None,
        kld_seconds: None,
        aknn_seconds: None,
        kld_ratio: None,
        aknn_ratio: None,
        ols_runs: Vec::new(),
        kld_runs: Vec::new(),
        aknn_runs: Vec::new(),
        aknn_grid_predictions: alphas.len() * s.ks.iter().filter(|&&k| k <= n).count(),
    };
    for rep in 0..s.repeats {
        let data = cell_data(s, n, d, rep)?;
        let (t, pred) = time(|| LogRatioOlsModel::fit(&data.x, &data.u, LogRatio::Alr)?.predict(&data.q))?;
        check_rows(&pred, "ols")?;
        cell.ols_runs.push(t);
        let (t, pred) = time(|| KldModel::fit(&data.x, &data.u, KldOptions::default())?.predict(&data.q))?;
        check_rows(&pred, "kld")?;
        cell.kld_runs.push(t);
        let (t, checksum) = time(|| {
            let grid = AlphaKnnGrid::fit(data.x.clone(), data.u.clone(), alphas.to_vec(), s.ks.clone())?;
            let step = (s.queries / 100).max(1);
            (0..s.queries)
                .into_par_iter()
                .map(|i| {
                    let mut sum = 0.0;
                    let mut bad = false;
                    grid.visit(data.q.row(i), |_, _, m| {
                        sum += m.values()[0];
                        if i % step == 0 {
                            bad |= check_simplex(m.values(), "alpha-k-NN").is_err();
                        }
                    })?;
                    if bad {
                        return Err(Error::Degenerate("alpha-k-NN produced a non-composition".into()));
                    }
                    Ok(sum)
                })
                .try_reduce(|| 0.0, |a, b| Ok(a + b))
        })?;
        if !checksum.is_finite() {
            return Err(Error::Degenerate("alpha-k-NN grid produced non-finite values".into()));
        }
        cell.aknn_runs.push(t);
    }
    let ols = median(&cell.ols_runs);
    let kld = median(&cell.kld_runs);
    let aknn = median(&cell.aknn_runs);
    cell.ols_seconds = Some(ols);
    cell.kld_seconds = Some(kld);
    cell.aknn_seconds = Some(aknn);
    cell.kld_ratio = Some(kld / ols);
    cell.aknn_ratio = Some(aknn / ols);
    Ok(cell)
}

/// Runs every (n, D) cell in sequence. Cells that would not fit in memory
/// or whose fits fail are reported with a reason instead of aborting.
pub fn run_bench(s: &BenchScenario) -> Result<BenchReport> {
    s.validate()?;
    let alphas: Vec<Alpha<f64>> = s.alphas.iter().map(|&a| Alpha::new(a)).collect::<Result<_>>()?;
    let limit = s.memory_limit_bytes.or_else(available_memory);
    let mut cells = Vec::new();
    for &d in &s.ds {
        for &n in &s.ns {
            let need = footprint(n, d, s.p, s.queries);
            let cell = match limit {
                Some(l) if need > l => skipped(n, d, format!("needs about {need} bytes, {l} available")),
                _ => run_cell(s, n, d, &alphas).unwrap_or_else(|e| skipped(n, d, e.to_string())),
            };
            cells.push(cell);
        }
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        hardware: hardware_descriptor(),
        threads: rayon::current_num_threads(),
        scenario: s.clone(),
        cells,
    })
}

fn skipped(n: usize, d: usize, reason: String) -> BenchCell {
    BenchCell {
        n,
        d,
        status: "skipped",
        reason: Some(reason),
        ols_seconds: None,
        kld_seconds: None,
        aknn_seconds: None,
        kld_ratio: None,
        aknn_ratio: None,
        ols_runs: Vec::new(),
        kld_runs: Vec::new(),
        aknn_runs: Vec::new(),
        aknn_grid_predictions: 0,
    }
}
