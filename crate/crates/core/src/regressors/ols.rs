use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::{check_aligned, check_width, predict_rows, Regressor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::{CompositionMatrix, PredictorMatrix};
use crate::transforms::{alr, alr_inverse, ilr, ilr_inverse, TransformKind, TransformedMatrix};

/// Log-ratio space used by [`LogRatioOlsModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LogRatio {
    #[default]
    Alr,
    Ilr,
}

impl FromStr for LogRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alr" => Ok(LogRatio::Alr),
            "ilr" => Ok(LogRatio::Ilr),
            other => Err(Error::validation(format!("unknown log-ratio transform '{other}'"))),
        }
    }
}

/// Multivariate least squares on alr or ilr transformed responses,
/// back-transformed to the simplex on prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRatioOlsModel<T> {
    /// `(p+1) x (D-1)` row-major, intercept row first.
    coefficients: Vec<T>,
    transform: LogRatio,
    p: usize,
    d: usize,
}

const RANK_TOL: f64 = 1e-12;

impl<T: Scalar> LogRatioOlsModel<T> {
    pub fn fit(x: &PredictorMatrix<T>, u: &CompositionMatrix<T>, transform: LogRatio) -> Result<Self> {
        check_aligned(x, u)?;
        let n = x.nrows();
        let p = x.ncols();
        let d = u.dim();
        if n <= p + 1 {
            return Err(Error::validation(format!(
                "log-ratio regression needs n > p + 1 (n = {n}, p = {p})"
            )));
        }
        let kind = match transform {
            LogRatio::Alr => TransformKind::Alr,
            LogRatio::Ilr => TransformKind::Ilr,
        };
        let v = TransformedMatrix::new(kind, u)?;
        let p1 = p + 1;
        let dm = d - 1;
        let mut xtx = DMatrix::<f64>::zeros(p1, p1);
        let mut xtv = DMatrix::<f64>::zeros(p1, dm);
        let mut row = vec![0.0; p1];
        for i in 0..n {
            row[0] = 1.0;
            for (r, xv) in row[1..].iter_mut().zip(x.row(i)) {
                *r = xv.as_f64();
            }
            for a in 0..p1 {
                for b in a..p1 {
                    xtx[(a, b)] += row[a] * row[b];
                }
                for (c, vc) in v.row(i).iter().enumerate() {
                    xtv[(a, c)] += row[a] * vc.as_f64();
                }
            }
        }
        for a in 0..p1 {
            for b in 0..a {
                xtx[(a, b)] = xtx[(b, a)];
            }
        }
        let eig = SymmetricEigen::new(xtx.clone());
        let hi = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(lo > RANK_TOL * hi) {
            return Err(Error::validation("design matrix is rank deficient"));
        }
        let ch = xtx
            .cholesky()
            .ok_or_else(|| Error::validation("design matrix is rank deficient"))?;
        let b = ch.solve(&xtv);
        let mut coefficients = Vec::with_capacity(p1 * dm);
        for j in 0..p1 {
            for c in 0..dm {
                coefficients.push(T::lit(b[(j, c)]));
            }
        }
        Ok(Self { coefficients, transform, p, d })
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn transform(&self) -> LogRatio {
        self.transform
    }

    /// Fitted values in log-ratio space for one predictor row.
    pub fn linear_prediction(&self, q: &[T]) -> Vec<T> {
        let dm = self.d - 1;
        (0..dm)
            .map(|c| {
                q.iter()
                    .enumerate()
                    .fold(self.coefficients[c], |acc, (j, &xj)| acc + self.coefficients[(j + 1) * dm + c] * xj)
            })
            .collect()
    }

    /// Residuals `V - X B` in log-ratio space, row-major `n x (D-1)`.
    pub fn residuals(&self, x: &PredictorMatrix<T>, u: &CompositionMatrix<T>) -> Result<Vec<T>> {
        check_aligned(x, u)?;
        check_width(x, self.p)?;
        let mut out = Vec::with_capacity(u.nrows() * (self.d - 1));
        for i in 0..u.nrows() {
            let comp = u.composition(i);
            let v = match self.transform {
                LogRatio::Alr => alr(&comp)?,
                LogRatio::Ilr => ilr(&comp)?,
            };
            let fit = self.linear_prediction(x.row(i));
            out.extend(v.iter().zip(&fit).map(|(a, b)| *a - *b));
        }
        Ok(out)
    }
}

impl<T: Scalar> Regressor<T> for LogRatioOlsModel<T> {
    fn predictor_width(&self) -> usize {
        self.p
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn predict(&self, x: &PredictorMatrix<T>) -> Result<CompositionMatrix<T>> {
        check_width(x, self.p)?;
        predict_rows(x, self.d, |_, q| {
            let v = self.linear_prediction(q);
            match self.transform {
                LogRatio::Alr => alr_inverse(&v),
                LogRatio::Ilr => ilr_inverse(&v),
            }
        })
    }
}
