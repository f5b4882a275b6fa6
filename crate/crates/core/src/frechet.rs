//! Sample Fréchet means under the power transformation.
//!
//! For α ≠ 0 the mean of `n` compositions is `C{(Σ_j w_{α,j})^{1/α}}`, with
//! `w_{α,j}` the closed power transform of row `j`. At α = 0 it is the closed
//! geometric mean, which is also the α → 0 limit. Sums are correctly
//! rounded, so results do not depend on row order.
//!
//! Internally the mean is computed from `t = D·w − 1` and `ln(1 + mean t)/α`,
//! which keeps full precision for α close to zero.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::{Composition, CompositionMatrix};
use crate::sum::ExactSum;
use crate::transforms::{centred_power_from_logs, close_exp, Alpha};

/// Non-negative observation weights with at least one positive entry.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T> {
    weights: Vec<T>,
}

impl<T: Scalar> WeightVector<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::validation(format!(
                "weight {i} is {}; weights must be finite and non-negative",
                weights[i]
            )));
        }
        if weights.iter().all(|w| *w == T::zero()) {
            return Err(Error::Degenerate("all weights are zero".into()));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![T::one(); n])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Streaming weighted Fréchet mean for one α.
#[derive(Debug, Clone)]
pub(crate) struct FrechetAccumulator<T> {
    alpha: T,
    sums: Vec<ExactSum<T>>,
    weight: ExactSum<T>,
    scratch: Vec<T>,
    logs: Vec<T>,
    positive: usize,
    single: Vec<T>,
}

impl<T: Scalar> FrechetAccumulator<T> {
    pub(crate) fn new(alpha: T, d: usize) -> Self {
        Self {
            alpha,
            sums: vec![ExactSum::new(); d],
            weight: ExactSum::new(),
            scratch: vec![T::zero(); d],
            logs: vec![T::zero(); d],
            positive: 0,
            single: Vec::new(),
        }
    }

    /// Adds a row. Rows with zero weight are ignored.
    pub(crate) fn add(&mut self, row: &[T], weight: T) {
        if weight == T::zero() {
            return;
        }
        for (l, &u) in self.logs.iter_mut().zip(row) {
            *l = u.ln();
        }
        let logs = std::mem::take(&mut self.logs);
        self.add_logs(row, &logs, weight);
        self.logs = logs;
    }

    /// Adds a row whose component logarithms are already known.
    pub(crate) fn add_logs(&mut self, row: &[T], logs: &[T], weight: T) {
        if weight == T::zero() {
            return;
        }
        let mut t = std::mem::take(&mut self.scratch);
        centred_row(logs, self.alpha, &mut t);
        self.add_centred(row, &t, weight);
        self.scratch = t;
    }

    /// Adds a row together with its precomputed [`centred_row`] vector.
    pub(crate) fn add_centred(&mut self, row: &[T], t: &[T], weight: T) {
        if weight == T::zero() {
            return;
        }
        self.positive += 1;
        if self.positive == 1 {
            self.single.clear();
            self.single.extend_from_slice(row);
        }
        self.weight.add(weight);
        for (s, &ti) in self.sums.iter_mut().zip(t) {
            s.add(weight * ti);
        }
    }

    /// Mean of the rows added so far. `None` when no row had positive weight.
    pub(crate) fn mean(&self) -> Option<Composition<T>> {
        match self.positive {
            0 => None,
            1 => Some(Composition::from_closed(self.single.clone())),
            _ => {
                let w = self.weight.value();
                let logs: Vec<T> = if self.alpha == T::zero() {
                    self.sums.iter().map(|s| s.value() / w).collect()
                } else {
                    self.sums
                        .iter()
                        .map(|s| {
                            let tau = (s.value() / w).max(-T::one());
                            tau.ln_1p() / self.alpha
                        })
                        .collect()
                };
                Some(Composition::from_closed(close_exp(&logs)))
            }
        }
    }
}

/// The per-row quantity the accumulator averages: `D·w − 1` for α ≠ 0 and
/// the logs themselves at α = 0.
pub(crate) fn centred_row<T: Scalar>(logs: &[T], alpha: T, out: &mut [T]) {
    if alpha == T::zero() {
        out.copy_from_slice(logs);
    } else {
        centred_power_from_logs(logs, alpha, out);
    }
}

pub(crate) fn check_alpha_against(data: &CompositionMatrix<impl Scalar>, alpha_positive: bool, what: &'static str) -> Result<()> {
    if !alpha_positive {
        if let Some(row) = data.first_zero_row() {
            return Err(Error::ZeroNotAllowed { transform: what, row });
        }
    }
    Ok(())
}

/// Fréchet mean of all rows of `data` at `alpha`.
pub fn frechet_mean<T: Scalar>(data: &CompositionMatrix<T>, alpha: Alpha<T>) -> Result<Composition<T>> {
    check_alpha_against(data, alpha.is_positive(), "frechet mean")?;
    let mut acc = FrechetAccumulator::new(alpha.value(), data.dim());
    for r in data.rows() {
        acc.add(r, T::one());
    }
    acc.mean()
        .ok_or_else(|| Error::validation("frechet mean of an empty sample"))
}

/// Weighted Fréchet mean `C{(Σ_j ω_j w_{α,j})^{1/α}}`; at α = 0 the weighted
/// geometric mean `C{Π_j u_j^{ω_j}}` with normalized weights.
pub fn weighted_frechet_mean<T: Scalar>(
    data: &CompositionMatrix<T>,
    weights: &WeightVector<T>,
    alpha: Alpha<T>,
) -> Result<Composition<T>> {
    if weights.len() != data.nrows() {
        return Err(Error::validation(format!(
            "{} weights for {} rows",
            weights.len(),
            data.nrows()
        )));
    }
    check_alpha_against(data, alpha.is_positive(), "frechet mean")?;
    let mut acc = FrechetAccumulator::new(alpha.value(), data.dim());
    for (r, &w) in data.rows().zip(weights.as_slice()) {
        acc.add(r, w);
    }
    acc.mean()
        .ok_or_else(|| Error::Degenerate("all weights are zero".into()))
}

/// Fréchet means along a grid of α values, in grid order.
pub fn frechet_path<T: Scalar>(
    data: &CompositionMatrix<T>,
    alphas: &[Alpha<T>],
) -> Result<Vec<(Alpha<T>, Composition<T>)>> {
    alphas
        .iter()
        .map(|&a| frechet_mean(data, a).map(|m| (a, m)))
        .collect()
}
