//! Divergence scores and cross-validated tuning of (α, k) or (α, h).
//!
//! Folds come from a seeded permutation dealt round-robin, so every model
//! family scored with the same seed sees the same train/test splits and
//! per-fold ratios between families are paired. A cell's score is the mean
//! divergence over all held-out rows pooled across folds.

use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frechet::{centred_row, FrechetAccumulator};
use crate::regressors::AlphaKnnGrid;
use crate::regressors::{check_aligned, Kernel, ModelSpec};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;
use crate::simplex::{CompositionMatrix, PredictorMatrix};
use crate::sum::ExactSum;
use crate::transforms::Alpha;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_CLAMP: f64 = 1e-12;

const FOLD_STREAM: u64 = 0;
const BANDWIDTH_STREAM: u64 = 1;
const BANDWIDTH_PAIRS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Kl,
    Js,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(Metric::Kl),
            "js" => Ok(Metric::Js),
            other => Err(Error::validation(format!("unknown metric '{other}'"))),
        }
    }
}

/// Which divergence to minimize and the prediction floor used by KL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scoring {
    pub metric: Metric,
    pub clamp: f64,
}

impl Default for Scoring {
    fn default() -> Self {
        Self { metric: Metric::Kl, clamp: DEFAULT_CLAMP }
    }
}

impl Scoring {
    pub fn new(metric: Metric, clamp: f64) -> Result<Self> {
        if !(clamp >= 0.0) || !clamp.is_finite() {
            return Err(Error::validation(format!("clamp must be finite and >= 0, got {clamp}")));
        }
        Ok(Self { metric, clamp })
    }

    fn row<T: Scalar>(&self, y: &[T], yhat: &[T]) -> T {
        match self.metric {
            Metric::Kl => kl_terms(y, yhat, T::lit(self.clamp)),
            Metric::Js => js_terms(y, yhat),
        }
    }
}

fn check_dims<T>(y: &[T], yhat: &[T]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::validation(format!(
            "compositions have {} and {} parts",
            y.len(),
            yhat.len()
        )));
    }
    Ok(())
}

fn kl_terms<T: Scalar>(y: &[T], yhat: &[T], clamp: T) -> T {
    let mut s = T::zero();
    for (&a, &b) in y.iter().zip(yhat) {
        if a > T::zero() {
            s = s + a * (a / b.max(clamp)).ln();
        }
    }
    s.max(T::zero())
}

fn js_terms<T: Scalar>(y: &[T], yhat: &[T]) -> T {
    let two = T::lit(2.0);
    let mut s = T::zero();
    for (&a, &b) in y.iter().zip(yhat) {
        let m = a + b;
        let ta = if a > T::zero() { a * (two * a / m).ln() } else { T::zero() };
        let tb = if b > T::zero() { b * (two * b / m).ln() } else { T::zero() };
        s = s + (ta + tb);
    }
    s.max(T::zero())
}

/// Kullback-Leibler divergence `Σ y_i log(y_i / ŷ_i)`.
///
/// Parts with `y_i = 0` contribute nothing. `ŷ_i` is floored at `clamp`
/// first; with `clamp = 0` a zero prediction against a positive truth gives
/// `+∞`. Tiny negative values from rounding are reported as 0.
pub fn kl_divergence<T: Scalar>(y: &[T], yhat: &[T], clamp: T) -> Result<T> {
    check_dims(y, yhat)?;
    if !(clamp >= T::zero()) {
        return Err(Error::validation("clamp must be >= 0"));
    }
    Ok(kl_terms(y, yhat, clamp))
}

/// Jensen-Shannon divergence in the unhalved form, bounded by `2 log 2`.
pub fn js_divergence<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check_dims(y, yhat)?;
    Ok(js_terms(y, yhat))
}

/// Mean divergences over a set of evaluation rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceScore {
    pub kl: f64,
    pub js: f64,
    pub rows: usize,
}

/// Row-mean KL and JS between matched truth and prediction rows.
pub fn score_predictions<T: Scalar>(
    truth: &CompositionMatrix<T>,
    pred: &CompositionMatrix<T>,
    clamp: f64,
) -> Result<DivergenceScore> {
    if truth.nrows() != pred.nrows() || truth.dim() != pred.dim() {
        return Err(Error::validation("truth and prediction shapes differ"));
    }
    let mut acc = PairSum::default();
    for (y, p) in truth.rows().zip(pred.rows()) {
        acc.add(kl_terms(y, p, T::lit(clamp)), js_terms(y, p));
    }
    Ok(acc.score())
}

#[derive(Default)]
struct PairSum {
    kl: ExactSum<f64>,
    js: ExactSum<f64>,
    rows: usize,
}

impl PairSum {
    fn add<T: Scalar>(&mut self, kl: T, js: T) {
        self.kl.add(kl.as_f64());
        self.js.add(js.as_f64());
        self.rows += 1;
    }

    fn score(&self) -> DivergenceScore {
        let n = self.rows as f64;
        DivergenceScore { kl: self.kl.value() / n, js: self.js.value() / n, rows: self.rows }
    }
}

/// Assignment of rows to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Folds {
    assignment: Vec<usize>,
    count: usize,
}

impl Folds {
    /// Folds from an explicit assignment; every fold must be non-empty.
    pub fn from_assignment(assignment: Vec<usize>, count: usize) -> Result<Self> {
        let mut sizes = vec![0usize; count];
        for &f in &assignment {
            if f >= count {
                return Err(Error::validation(format!("fold {f} out of range for {count} folds")));
            }
            sizes[f] += 1;
        }
        if count < 2 || sizes.contains(&0) {
            return Err(Error::validation("need at least two non-empty folds"));
        }
        Ok(Self { assignment, count })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.count];
        for &f in &self.assignment {
            s[f] += 1;
        }
        s
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }
}

/// Seeded shuffle of `0..n` dealt round-robin into `folds` groups.
pub fn make_folds(n: usize, folds: usize, seed: u64) -> Result<Folds> {
    if folds < 2 {
        return Err(Error::validation(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::validation(format!("{n} rows cannot fill {folds} folds")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(derive_seed(seed, FOLD_STREAM)));
    let mut assignment = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    Folds::from_assignment(assignment, folds)
}

/// Cross-validated score of a single configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvScore {
    pub overall: DivergenceScore,
    pub folds: Vec<DivergenceScore>,
}

pub fn cross_validated_score<T: Scalar>(
    x: &PredictorMatrix<T>,
    u: &CompositionMatrix<T>,
    spec: &ModelSpec<T>,
    folds: &Folds,
    clamp: f64,
) -> Result<CvScore> {
    check_aligned(x, u)?;
    if folds.assignment().len() != u.nrows() {
        return Err(Error::validation("fold assignment length differs from row count"));
    }
    let mut overall = PairSum::default();
    let mut per_fold = Vec::with_capacity(folds.count());
    for f in 0..folds.count() {
        let test = folds.test_indices(f);
        let train = folds.train_indices(f);
        let model = spec.fit(Arc::new(x.select(&train)), Arc::new(u.select(&train)))?;
        let truth = u.select(&test);
        let pred = model.predict(&x.select(&test))?;
        let mut fold = PairSum::default();
        for (y, p) in truth.rows().zip(pred.rows()) {
            let kl = kl_terms(y, p, T::lit(clamp));
            let js = js_terms(y, p);
            fold.add(kl, js);
            overall.add(kl, js);
        }
        per_fold.push(fold.score());
    }
    Ok(CvScore { overall: overall.score(), folds: per_fold })
}

/// Model family searched by [`tune`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    AlphaKnn,
    AlphaKernel(Kernel),
}

/// Second grid axis: neighbor counts or bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub enum Axis<T> {
    K(Vec<usize>),
    H(Vec<T>),
}

impl<T> Axis<T> {
    pub fn len(&self) -> usize {
        match self {
            Axis::K(v) => v.len(),
            Axis::H(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid<T> {
    alphas: Vec<Alpha<T>>,
    axis: Axis<T>,
    folds: usize,
    seed: u64,
}

impl<T: Scalar> TuningGrid<T> {
    pub fn new(alphas: Vec<Alpha<T>>, axis: Axis<T>, folds: usize, seed: u64) -> Result<Self> {
        if alphas.is_empty() || axis.is_empty() {
            return Err(Error::validation("tuning grid axes must be non-empty"));
        }
        match &axis {
            Axis::K(ks) if ks.contains(&0) => return Err(Error::validation("k grid values must be >= 1")),
            Axis::H(hs) if hs.iter().any(|h| !(*h > T::zero()) || !h.is_finite()) => {
                return Err(Error::validation("bandwidths must be positive and finite"))
            }
            _ => {}
        }
        if folds < 2 {
            return Err(Error::validation("need at least 2 folds"));
        }
        Ok(Self { alphas, axis, folds, seed })
    }

    pub fn alphas(&self) -> &[Alpha<T>] {
        &self.alphas
    }

    pub fn axis(&self) -> &Axis<T> {
        &self.axis
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Rejects grids with α ≤ 0 when `u` has zero components.
    pub fn check_against(&self, u: &CompositionMatrix<T>) -> Result<()> {
        let zero_rows = u.zero_report().zero_rows;
        if zero_rows == 0 {
            return Ok(());
        }
        if let Some(a) = self.alphas.iter().find(|a| !a.is_positive()) {
            return Err(Error::validation(format!(
                "responses contain zeros in {zero_rows} rows, so every alpha must be strictly positive; grid contains alpha = {}",
                a.value()
            )));
        }
        Ok(())
    }
}

/// −1, −0.9, …, 1 for zero-free data, 0.1, …, 1 otherwise.
pub fn default_alpha_grid<T: Scalar>(has_zeros: bool) -> Vec<Alpha<T>> {
    let start = if has_zeros { 1 } else { -10 };
    (start..=10)
        .map(|i| Alpha::new(T::lit(i as f64 / 10.0)).expect("grid within [-1, 1]"))
        .collect()
}

/// 2, …, 10, 15, 20, …, 50.
pub fn default_k_grid() -> Vec<usize> {
    (2..=10).chain((15..=50).step_by(5)).collect()
}

/// Ten log-spaced bandwidths between the 1st and 50th percentile of the
/// predictor distances of (up to) 1,000 sampled row pairs.
pub fn default_bandwidth_grid<T: Scalar>(x: &PredictorMatrix<T>, seed: u64) -> Result<Vec<T>> {
    let n = x.nrows();
    if n < 2 || x.ncols() == 0 {
        return Err(Error::validation("bandwidth grid needs at least 2 rows and 1 predictor"));
    }
    let dist = |i: usize, j: usize| {
        x.row(i)
            .iter()
            .zip(x.row(j))
            .fold(0.0, |acc, (&a, &b)| acc + (a - b).as_f64().powi(2))
            .sqrt()
    };
    let mut d: Vec<f64> = if n * (n - 1) / 2 <= BANDWIDTH_PAIRS {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dist(i, j)).collect()
    } else {
        let mut rng = rng_from_seed(derive_seed(seed, BANDWIDTH_STREAM));
        (0..BANDWIDTH_PAIRS)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                dist(i, j)
            })
            .collect()
    };
    d.sort_by(f64::total_cmp);
    let positive: Vec<f64> = d.into_iter().filter(|v| *v > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::validation("all sampled predictor rows coincide; cannot derive bandwidths"));
    }
    let lo = quantile(&positive, 0.01);
    let hi = quantile(&positive, 0.5).max(lo);
    Ok((0..10)
        .map(|i| T::lit(lo * (hi / lo).powf(i as f64 / 9.0)))
        .collect())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// The chosen cell of a tuning grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub alpha_index: usize,
    pub param_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfeasibleCell {
    pub alpha_index: usize,
    pub param_index: usize,
    pub reason: String,
}

/// Outcome of [`tune`]. Scores are indexed `[alpha][param]` and are `null`
/// in JSON for infeasible cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningReport {
    pub schema_version: u32,
    pub family: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    pub metric: Metric,
    pub clamp: f64,
    pub seed: u64,
    pub folds: usize,
    pub rows: usize,
    pub alphas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hs: Option<Vec<f64>>,
    pub scores: Vec<Vec<Option<f64>>>,
    pub selected: Selection,
    pub fold_sizes: Vec<usize>,
    pub fold_assignment: Vec<usize>,
    /// `[alpha][param][fold]` mean divergence of each held-out fold.
    pub fold_scores: Vec<Vec<Vec<Option<f64>>>>,
    pub infeasible: Vec<InfeasibleCell>,
}

impl TuningReport {
    /// Model specification of the selected cell.
    pub fn selected_spec<T: Scalar>(&self) -> Result<ModelSpec<T>> {
        let alpha = Alpha::new(T::lit(self.selected.alpha))?;
        Ok(match (self.selected.k, self.selected.h) {
            (Some(k), _) => ModelSpec::AlphaKnn { alpha, k },
            (_, Some(h)) => ModelSpec::AlphaKernel {
                alpha,
                h: T::lit(h),
                kernel: self.kernel.unwrap_or_default(),
            },
            _ => unreachable!("selection always carries k or h"),
        })
    }
}

/// Per held-out row, one score per grid cell (`None` when the cell cannot
/// produce a prediction for that row).
type RowScores<T> = Vec<Option<T>>;

/// Grid search by K-fold cross-validation.
///
/// For each fold every cell is fitted on the remaining folds and scored on
/// the held-out rows. The selected cell has the smallest pooled mean
/// divergence; ties go to the smaller α, then the smaller k or h.
pub fn tune<T: Scalar>(
    x: &PredictorMatrix<T>,
    u: &CompositionMatrix<T>,
    family: Family,
    grid: &TuningGrid<T>,
    scoring: Scoring,
) -> Result<TuningReport> {
    check_aligned(x, u)?;
    grid.check_against(u)?;
    Scoring::new(scoring.metric, scoring.clamp)?;
    let kernel = match (family, grid.axis()) {
        (Family::AlphaKnn, Axis::K(_)) => None,
        (Family::AlphaKernel(k), Axis::H(_)) => Some(k),
        _ => return Err(Error::validation("alpha-knn needs a k grid and alpha-kernel an h grid")),
    };
    if x.ncols() == 0 {
        return Err(Error::validation("tuning needs at least one predictor"));
    }
    let folds = make_folds(u.nrows(), grid.folds(), grid.seed())?;
    let na = grid.alphas().len();
    let np = grid.axis().len();
    let cells = na * np;

    let mut totals = vec![ExactSum::<f64>::new(); cells];
    let mut feasible = vec![true; cells];
    let mut fold_means = vec![vec![None; folds.count()]; cells];
    for f in 0..folds.count() {
        let test = folds.test_indices(f);
        let train = folds.train_indices(f);
        let xtr = Arc::new(x.select(&train));
        let utr = u.select(&train);
        let rows = match grid.axis() {
            Axis::K(ks) => knn_fold(x, u, &test, xtr, utr, grid.alphas(), ks, scoring)?,
            Axis::H(hs) => kernel_fold(x, u, &test, &xtr, &utr, grid.alphas(), hs, kernel.unwrap(), scoring),
        };
        for c in 0..cells {
            let mut fold_sum = ExactSum::<f64>::new();
            for r in &rows {
                match r[c] {
                    Some(v) if v.is_finite() => {
                        fold_sum.add(v.as_f64());
                        totals[c].add(v.as_f64());
                    }
                    _ => feasible[c] = false,
                }
            }
            fold_means[c][f] = feasible[c].then(|| fold_sum.value() / rows.len() as f64);
        }
    }

    let n = u.nrows() as f64;
    let alphas: Vec<f64> = grid.alphas().iter().map(|a| a.value().as_f64()).collect();
    let params: Vec<f64> = match grid.axis() {
        Axis::K(ks) => ks.iter().map(|&k| k as f64).collect(),
        Axis::H(hs) => hs.iter().map(|h| h.as_f64()).collect(),
    };
    let mut scores = vec![vec![None; np]; na];
    let mut fold_scores = vec![vec![Vec::new(); np]; na];
    let mut infeasible = Vec::new();
    let mut best: Option<(f64, usize, usize)> = None;
    for ai in 0..na {
        for pi in 0..np {
            let c = ai * np + pi;
            if !feasible[c] {
                fold_scores[ai][pi] = vec![None; folds.count()];
                infeasible.push(InfeasibleCell {
                    alpha_index: ai,
                    param_index: pi,
                    reason: infeasible_reason(grid.axis(), pi, &folds),
                });
                continue;
            }
            let s = totals[c].value() / n;
            scores[ai][pi] = Some(s);
            fold_scores[ai][pi] = fold_means[c].clone();
            let better = match best {
                None => true,
                Some((bs, ba, bp)) => {
                    s < bs
                        || (s == bs
                            && (alphas[ai] < alphas[ba] || (alphas[ai] == alphas[ba] && params[pi] < params[bp])))
                }
            };
            if better {
                best = Some((s, ai, pi));
            }
        }
    }
    let (score, ai, pi) = best.ok_or_else(|| Error::TuningFailed("every grid cell is infeasible".into()))?;
    let (ks, hs, k, h) = match grid.axis() {
        Axis::K(ks) => (Some(ks.clone()), None, Some(ks[pi]), None),
        Axis::H(_) => (None, Some(params.clone()), None, Some(params[pi])),
    };
    Ok(TuningReport {
        schema_version: SCHEMA_VERSION,
        family: match family {
            Family::AlphaKnn => "alpha-knn",
            Family::AlphaKernel(_) => "alpha-kernel",
        },
        kernel,
        metric: scoring.metric,
        clamp: scoring.clamp,
        seed: grid.seed(),
        folds: folds.count(),
        rows: u.nrows(),
        alphas: alphas.clone(),
        ks,
        hs,
        scores,
        selected: Selection { alpha: alphas[ai], k, h, alpha_index: ai, param_index: pi, score },
        fold_sizes: folds.sizes(),
        fold_assignment: folds.assignment().to_vec(),
        fold_scores,
        infeasible,
    })
}

fn infeasible_reason<T>(axis: &Axis<T>, pi: usize, folds: &Folds) -> String {
    match axis {
        Axis::K(ks) => {
            let min_train = folds.assignment().len() - folds.sizes().into_iter().max().unwrap_or(0);
            if ks[pi] > min_train {
                format!("k = {} exceeds the smallest training fold ({min_train} rows)", ks[pi])
            } else {
                "non-finite divergence".into()
            }
        }
        Axis::H(_) => "kernel weights underflow or divergence is non-finite".into(),
    }
}

#[allow(clippy::too_many_arguments)]
fn knn_fold<T: Scalar>(
    x: &PredictorMatrix<T>,
    u: &CompositionMatrix<T>,
    test: &[usize],
    xtr: Arc<PredictorMatrix<T>>,
    utr: CompositionMatrix<T>,
    alphas: &[Alpha<T>],
    ks: &[usize],
    scoring: Scoring,
) -> Result<Vec<RowScores<T>>> {
    let np = ks.len();
    let grid = AlphaKnnGrid::fit(xtr, Arc::new(utr), alphas.to_vec(), ks.to_vec())?;
    test.par_iter()
        .map(|&i| {
            let y = u.row(i);
            let mut out = vec![None; alphas.len() * np];
            grid.visit(x.row(i), |ai, pi, m| out[ai * np + pi] = Some(scoring.row(y, m.values())))?;
            Ok(out)
        })
        .collect()
}

/// Kernel weights are shared across α and the per-row centred power
/// vectors across bandwidths.
#[allow(clippy::too_many_arguments)]
fn kernel_fold<T: Scalar>(
    x: &PredictorMatrix<T>,
    u: &CompositionMatrix<T>,
    test: &[usize],
    xtr: &PredictorMatrix<T>,
    utr: &CompositionMatrix<T>,
    alphas: &[Alpha<T>],
    hs: &[T],
    kernel: Kernel,
    scoring: Scoring,
) -> Vec<RowScores<T>> {
    let ntr = utr.nrows();
    let d = utr.dim();
    let np = hs.len();
    let logs: Vec<T> = utr.as_flat().iter().map(|v| v.ln()).collect();
    let centred: Vec<Vec<T>> = alphas
        .iter()
        .map(|a| {
            let mut t = vec![T::zero(); ntr * d];
            for r in 0..ntr {
                centred_row(&logs[r * d..(r + 1) * d], a.value(), &mut t[r * d..(r + 1) * d]);
            }
            t
        })
        .collect();
    test.par_iter()
        .map(|&i| {
            let q = x.row(i);
            let y = u.row(i);
            let sq: Vec<T> = xtr
                .rows()
                .map(|r| r.iter().zip(q).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b)))
                .collect();
            let mut out = vec![None; alphas.len() * np];
            for (pi, &h) in hs.iter().enumerate() {
                let w: Vec<T> = sq.iter().map(|&s| kernel.weight(s, h)).collect();
                for (ai, a) in alphas.iter().enumerate() {
                    let mut acc = FrechetAccumulator::new(a.value(), d);
                    for (r, &wr) in w.iter().enumerate() {
                        acc.add_centred(utr.row(r), &centred[ai][r * d..(r + 1) * d], wr);
                    }
                    out[ai * np + pi] = acc.mean().map(|m| scoring.row(y, m.values()));
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::KldOptions;
    use approx::assert_abs_diff_eq;

    fn a(v: f64) -> Alpha<f64> {
        Alpha::new(v).unwrap()
    }

    fn wavy(n: usize) -> (PredictorMatrix<f64>, CompositionMatrix<f64>) {
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
        let rows: Vec<Vec<f64>> = xs
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let e = ((i * 31) % 7) as f64 * 0.02;
                vec![1.0, (t.sin() + e).exp(), (0.5 * t * t - e).exp()]
            })
            .collect();
        (PredictorMatrix::from_column(xs).unwrap(), CompositionMatrix::from_unclosed_rows(&rows).unwrap())
    }

    #[test]
    fn kl_examples() {
        let v = kl_divergence(&[0.5, 0.5], &[0.25, 0.75], 0.0).unwrap();
        assert_abs_diff_eq!(v, 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.1438, epsilon = 1e-4);
        let v = kl_divergence(&[0.0, 1.0], &[0.3, 0.7], 0.0).unwrap();
        assert_abs_diff_eq!(v, (1.0f64 / 0.7).ln(), epsilon = 1e-12);
        assert_eq!(kl_divergence(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5], 0.0).unwrap(), 0.0);
        assert!(kl_divergence(&[0.5, 0.5], &[0.0, 1.0], 0.0f64).unwrap().is_infinite());
        assert!(kl_divergence(&[0.5, 0.5], &[0.0, 1.0], 1e-12f64).unwrap().is_finite());
        assert!(kl_divergence(&[0.5, 0.5], &[1.0], 0.0).is_err());
    }

    #[test]
    fn js_examples() {
        assert_eq!(js_divergence(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_abs_diff_eq!(js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-12);
        let p = [0.1, 0.6, 0.3];
        let q = [0.5, 0.25, 0.25];
        assert_eq!(js_divergence(&p, &q).unwrap(), js_divergence(&q, &p).unwrap());
    }

    #[test]
    fn fold_sizes_and_determinism() {
        let f = make_folds(100, 10, 3).unwrap();
        assert_eq!(f.sizes(), vec![10; 10]);
        let f = make_folds(103, 10, 3).unwrap();
        let s = f.sizes();
        assert_eq!(s.iter().sum::<usize>(), 103);
        assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        assert_eq!(f, make_folds(103, 10, 3).unwrap());
        assert_ne!(f, make_folds(103, 10, 4).unwrap());
        assert!(make_folds(9, 10, 0).is_err());
    }

    #[test]
    fn single_cell_grid() {
        let (x, u) = wavy(60);
        let g = TuningGrid::new(vec![a(0.5)], Axis::K(vec![3]), 10, 1).unwrap();
        let r = tune(&x, &u, Family::AlphaKnn, &g, Scoring::default()).unwrap();
        assert_eq!((r.selected.alpha, r.selected.k), (0.5, Some(3)));
        let folds = make_folds(60, 10, 1).unwrap();
        let cv = cross_validated_score(&x, &u, &ModelSpec::AlphaKnn { alpha: a(0.5), k: 3 }, &folds, DEFAULT_CLAMP).unwrap();
        assert_eq!(r.selected.score, cv.overall.kl);
    }

    #[test]
    fn grid_scores_match_direct_cross_validation() {
        let (x, u) = wavy(80);
        let g = TuningGrid::new(vec![a(-0.5), a(0.0), a(1.0)], Axis::K(vec![5, 1, 9]), 10, 9).unwrap();
        let r = tune(&x, &u, Family::AlphaKnn, &g, Scoring::default()).unwrap();
        let folds = make_folds(80, 10, 9).unwrap();
        for (ai, al) in [-0.5, 0.0, 1.0].into_iter().enumerate() {
            for (pi, k) in [5, 1, 9].into_iter().enumerate() {
                let cv = cross_validated_score(&x, &u, &ModelSpec::AlphaKnn { alpha: a(al), k }, &folds, DEFAULT_CLAMP)
                    .unwrap();
                assert_eq!(r.scores[ai][pi], Some(cv.overall.kl));
            }
        }
        let min = r.scores.iter().flatten().flatten().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(r.selected.score, min);
    }

    #[test]
    fn kernel_grid_matches_direct_cross_validation() {
        let (x, u) = wavy(50);
        let g = TuningGrid::new(vec![a(0.0), a(0.7)], Axis::H(vec![0.1, 0.5]), 5, 2).unwrap();
        let s = Scoring::new(Metric::Js, 0.0).unwrap();
        let r = tune(&x, &u, Family::AlphaKernel(Kernel::Gaussian), &g, s).unwrap();
        let folds = make_folds(50, 5, 2).unwrap();
        for (ai, al) in [0.0, 0.7].into_iter().enumerate() {
            for (pi, h) in [0.1, 0.5].into_iter().enumerate() {
                let spec = ModelSpec::AlphaKernel { alpha: a(al), h, kernel: Kernel::Gaussian };
                let cv = cross_validated_score(&x, &u, &spec, &folds, 0.0).unwrap();
                assert_eq!(r.scores[ai][pi], Some(cv.overall.js));
            }
        }
    }

    #[test]
    fn memorizable_data_selects_k_one() {
        // duplicated design points with identical responses: the nearest
        // neighbor of every held-out row is its exact twin
        let xs: Vec<f64> = (0..40).flat_map(|i| [i as f64, i as f64]).collect();
        let rows: Vec<[f64; 3]> = (0..40)
            .flat_map(|i| {
                let t = i as f64 * 0.3;
                let r = [1.0 + t.sin().abs(), 1.0 + t.cos().abs(), 0.5 + (i % 5) as f64];
                [r, r]
            })
            .collect();
        let x = PredictorMatrix::from_column(xs).unwrap();
        let u = CompositionMatrix::from_unclosed_rows(&rows).unwrap();
        let g = TuningGrid::new(vec![a(0.5), a(1.0)], Axis::K(vec![1, 2, 3, 5]), 10, 5).unwrap();
        let r = tune(&x, &u, Family::AlphaKnn, &g, Scoring::default()).unwrap();
        assert_eq!(r.selected.k, Some(1));
        assert!(r.selected.score < 0.02);
    }

    #[test]
    fn zeros_with_nonpositive_alpha_rejected() {
        let (x, _) = wavy(20);
        let rows: Vec<[f64; 2]> = (0..20).map(|i| if i == 3 { [0.0, 1.0] } else { [0.4, 0.6] }).collect();
        let u = CompositionMatrix::from_unclosed_rows(&rows).unwrap();
        let g = TuningGrid::new(vec![a(0.0), a(0.5)], Axis::K(vec![2]), 10, 0).unwrap();
        let e = tune(&x, &u, Family::AlphaKnn, &g, Scoring::default()).unwrap_err();
        assert!(matches!(&e, Error::Validation(m) if m.contains("strictly positive")));
    }

    #[test]
    fn oversized_k_is_infeasible_not_selected() {
        let (x, u) = wavy(20);
        let g = TuningGrid::new(vec![a(1.0)], Axis::K(vec![19, 2]), 10, 0).unwrap();
        let r = tune(&x, &u, Family::AlphaKnn, &g, Scoring::default()).unwrap();
        assert_eq!(r.scores[0][0], None);
        assert_eq!(r.selected.k, Some(2));
        assert_eq!(r.infeasible.len(), 1);
        let g = TuningGrid::new(vec![a(1.0)], Axis::K(vec![19]), 10, 0).unwrap();
        assert!(matches!(tune(&x, &u, Family::AlphaKnn, &g, Scoring::default()), Err(Error::TuningFailed(_))));
    }

    #[test]
    fn ties_prefer_smaller_alpha_then_k() {
        // constant responses: every cell scores exactly zero
        let (x, _) = wavy(30);
        let u = CompositionMatrix::from_rows(&[[0.2, 0.3, 0.5]; 30]).unwrap();
        let g = TuningGrid::new(vec![a(0.9), a(-0.2), a(0.4)], Axis::K(vec![7, 3, 4]), 10, 0).unwrap();
        let r = tune(&x, &u, Family::AlphaKnn, &g, Scoring::default()).unwrap();
        assert_eq!((r.selected.alpha, r.selected.k), (-0.2, Some(3)));
    }

    #[test]
    fn perfect_predictor_scores_zero_and_relabeling_is_harmless() {
        let (x, u) = wavy(40);
        let folds = make_folds(40, 10, 11).unwrap();
        let relabeled =
            Folds::from_assignment(folds.assignment().iter().map(|f| 9 - f).collect(), 10).unwrap();
        let spec = ModelSpec::Kld(KldOptions::default());
        let s1 = cross_validated_score(&x, &u, &spec, &folds, DEFAULT_CLAMP).unwrap();
        let s2 = cross_validated_score(&x, &u, &spec, &relabeled, DEFAULT_CLAMP).unwrap();
        assert_eq!(s1.overall, s2.overall);
        let s = score_predictions(&u, &u, 0.0).unwrap();
        assert_eq!((s.kl, s.js), (0.0, 0.0));
    }

    #[test]
    fn default_grids() {
        let g = default_alpha_grid::<f64>(false);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0].value(), -1.0);
        assert_eq!(g[10].value(), 0.0);
        let g = default_alpha_grid::<f64>(true);
        assert_eq!(g.len(), 10);
        assert!(g.iter().all(|a| a.is_positive()));
        assert_eq!(default_k_grid(), vec![2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
        let (x, _) = wavy(200);
        let h = default_bandwidth_grid(&x, 1).unwrap();
        assert_eq!(h.len(), 10);
        assert!(h.windows(2).all(|w| w[1] >= w[0]) && h[0] > 0.0);
        assert_eq!(h, default_bandwidth_grid(&x, 1).unwrap());
    }

    #[test]
    fn selected_spec_round_trips() {
        let (x, u) = wavy(40);
        let g = TuningGrid::new(vec![a(0.3)], Axis::H(vec![0.4]), 4, 0).unwrap();
        let r = tune(&x, &u, Family::AlphaKernel(Kernel::Laplacian), &g, Scoring::default()).unwrap();
        let spec = r.selected_spec::<f64>().unwrap();
        assert_eq!(spec, ModelSpec::AlphaKernel { alpha: a(0.3), h: 0.4, kernel: Kernel::Laplacian });
        let m = spec.fit(Arc::new(x.clone()), Arc::new(u.clone())).unwrap();
        assert_eq!(m.predict(&x).unwrap().nrows(), 40);
    }
}
