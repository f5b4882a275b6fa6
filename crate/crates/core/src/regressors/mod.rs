//! Regression models for compositional responses with a shared
//! fit/predict contract.
//!
//! The two non-parametric models ([`AlphaKnnModel`], [`AlphaKernelModel`])
//! are lazy learners: fitting only validates inputs (and builds a neighbor
//! index) and keeps shared references to the training data. [`KldModel`]
//! and [`LogRatioOlsModel`] are the parametric baselines.

mod kernel;
mod kld;
mod knn;
mod ols;

use std::sync::Arc;

use rayon::prelude::*;

pub use kernel::{AlphaKernelModel, Kernel};
pub use kld::{KldModel, KldOptions};
pub use knn::{AlphaKnnGrid, AlphaKnnModel};
pub use ols::{LogRatio, LogRatioOlsModel};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::{Composition, CompositionMatrix, PredictorMatrix};
use crate::transforms::Alpha;

/// A fitted model mapping predictor rows to compositions.
pub trait Regressor<T: Scalar>: Send + Sync {
    /// Width `p` of the predictor rows the model was trained on.
    fn predictor_width(&self) -> usize;

    /// Number of response parts `D`.
    fn dim(&self) -> usize;

    /// One prediction per row of `x`, in row order.
    fn predict(&self, x: &PredictorMatrix<T>) -> Result<CompositionMatrix<T>>;
}

/// A model family together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec<T> {
    AlphaKnn { alpha: Alpha<T>, k: usize },
    AlphaKernel { alpha: Alpha<T>, h: T, kernel: Kernel },
    Kld(KldOptions),
    LogRatioOls(LogRatio),
}

impl<T: Scalar> ModelSpec<T> {
    pub fn fit(
        &self,
        x: Arc<PredictorMatrix<T>>,
        u: Arc<CompositionMatrix<T>>,
    ) -> Result<Box<dyn Regressor<T>>> {
        Ok(match *self {
            ModelSpec::AlphaKnn { alpha, k } => Box::new(AlphaKnnModel::fit(x, u, alpha, k)?),
            ModelSpec::AlphaKernel { alpha, h, kernel } => {
                Box::new(AlphaKernelModel::fit(x, u, alpha, h, kernel)?)
            }
            ModelSpec::Kld(opts) => Box::new(KldModel::fit(&x, &u, opts)?),
            ModelSpec::LogRatioOls(t) => Box::new(LogRatioOlsModel::fit(&x, &u, t)?),
        })
    }
}

pub(crate) fn check_aligned<T: Scalar>(x: &PredictorMatrix<T>, u: &CompositionMatrix<T>) -> Result<()> {
    if x.nrows() != u.nrows() {
        return Err(Error::validation(format!(
            "{} predictor rows but {} response rows",
            x.nrows(),
            u.nrows()
        )));
    }
    Ok(())
}

pub(crate) fn check_width<T: Scalar>(x: &PredictorMatrix<T>, p: usize) -> Result<()> {
    if x.ncols() != p {
        return Err(Error::validation(format!(
            "query predictors have width {}, model expects {p}",
            x.ncols()
        )));
    }
    Ok(())
}

/// Runs `f` on every query row in parallel and stacks the results.
pub(crate) fn predict_rows<T, F>(x: &PredictorMatrix<T>, d: usize, f: F) -> Result<CompositionMatrix<T>>
where
    T: Scalar,
    F: Fn(usize, &[T]) -> Result<Composition<T>> + Sync,
{
    let rows: Vec<Composition<T>> = (0..x.nrows())
        .into_par_iter()
        .map(|i| f(i, x.row(i)))
        .collect::<Result<_>>()?;
    let mut flat = Vec::with_capacity(rows.len() * d);
    for r in &rows {
        flat.extend_from_slice(r.values());
    }
    Ok(CompositionMatrix::from_closed_flat(flat, rows.len(), d))
}
