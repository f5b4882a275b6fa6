//! Compositional data types, validation and the closure operation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sum::exact_sum;

/// A point of the simplex: `D >= 2` non-negative parts summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition<T> {
    values: Vec<T>,
}

impl<T: Scalar> Composition<T> {
    /// Validates `values` as a simplex point. Rows whose sum is within
    /// [`Scalar::SUM_TOLERANCE`] of one are re-closed; others are rejected.
    pub fn new(values: Vec<T>) -> Result<Self> {
        check_row(&values, None)?;
        Ok(Self {
            values: close_slice(&values),
        })
    }

    pub(crate) fn from_closed(values: Vec<T>) -> Self {
        debug_assert!(values.len() >= 2);
        Self { values }
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::validation(format!("composition needs D >= 2, got {d}")));
        }
        let v = T::one() / T::from_usize_lossy(d);
        Ok(Self { values: vec![v; d] })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn has_zero(&self) -> bool {
        self.values.iter().any(|v| *v == T::zero())
    }
}

impl<T> AsRef<[T]> for Composition<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

/// Normalizes a non-negative vector to unit sum.
pub fn closure<T: Scalar>(raw: &[T]) -> Result<Composition<T>> {
    if raw.len() < 2 {
        return Err(Error::validation(format!(
            "composition needs D >= 2, got {}",
            raw.len()
        )));
    }
    for (i, &x) in raw.iter().enumerate() {
        if !x.is_finite() || x < T::zero() {
            return Err(Error::validation(format!(
                "entry {i} is {x}; closure needs finite non-negative values"
            )));
        }
    }
    if raw.iter().all(|&x| x == T::zero()) {
        return Err(Error::Degenerate("closure of an all-zero vector".into()));
    }
    Ok(Composition {
        values: close_slice(raw),
    })
}

/// Closure without validation. Vectors already closed to within rounding are
/// returned untouched, which makes closure idempotent bit for bit.
pub(crate) fn close_slice<T: Scalar>(raw: &[T]) -> Vec<T> {
    let s = exact_sum(raw.iter().copied());
    let slack = T::lit(4.0) * T::from_usize_lossy(raw.len()) * T::epsilon();
    if (s - T::one()).abs() <= slack {
        return raw.to_vec();
    }
    raw.iter().map(|&x| x / s).collect()
}

fn check_row<T: Scalar>(values: &[T], row: Option<usize>) -> Result<()> {
    let at = || row.map(|r| format!("row {r}: ")).unwrap_or_default();
    if values.len() < 2 {
        return Err(Error::validation(format!(
            "{}composition needs D >= 2, got {}",
            at(),
            values.len()
        )));
    }
    for (j, &x) in values.iter().enumerate() {
        if !x.is_finite() || x < T::zero() {
            return Err(Error::validation(format!(
                "{}component {j} is {x}; must be finite and non-negative",
                at()
            )));
        }
    }
    let s = exact_sum(values.iter().copied());
    if (s - T::one()).abs() > T::SUM_TOLERANCE {
        return Err(Error::validation(format!(
            "{}components sum to {s}, not 1 within {}",
            at(),
            T::SUM_TOLERANCE
        )));
    }
    Ok(())
}

/// `n` compositions sharing a common `D`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionMatrix<T> {
    data: Vec<T>,
    n: usize,
    d: usize,
}

impl<T: Scalar> CompositionMatrix<T> {
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::validation("composition matrix needs at least one row"));
        };
        let d = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::validation(format!(
                    "row {i} has {} components, expected {d}",
                    r.len()
                )));
            }
            check_row(r, Some(i))?;
            data.extend(close_slice(r));
        }
        Ok(Self {
            data,
            n: rows.len(),
            d,
        })
    }

    /// Closes every row of non-negative data, whatever its sum.
    pub fn from_unclosed_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let closed = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                closure(r.as_ref()).map_err(|e| Error::validation(format!("row {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&closed)
    }

    pub(crate) fn from_closed_flat(data: Vec<T>, n: usize, d: usize) -> Self {
        debug_assert_eq!(data.len(), n * d);
        Self { data, n, d }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn composition(&self, i: usize) -> Composition<T> {
        Composition::from_closed(self.row(i).to_vec())
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            n: idx.len(),
            d: self.d,
        }
    }

    pub fn has_zeros(&self) -> bool {
        self.data.iter().any(|v| *v == T::zero())
    }

    /// Index of the first row containing a zero, if any.
    pub fn first_zero_row(&self) -> Option<usize> {
        self.rows().position(|r| r.iter().any(|v| *v == T::zero()))
    }

    pub fn zero_report(&self) -> ZeroReport {
        let mut zero_rows = 0;
        let mut per_column = vec![0; self.d];
        for r in self.rows() {
            let mut any = false;
            for (j, v) in r.iter().enumerate() {
                if *v == T::zero() {
                    per_column[j] += 1;
                    any = true;
                }
            }
            zero_rows += usize::from(any);
        }
        ZeroReport {
            rows: self.n,
            zero_rows,
            zeros_per_column: per_column,
        }
    }
}

/// Zero pattern of a response matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZeroReport {
    pub rows: usize,
    /// Rows containing at least one zero component.
    pub zero_rows: usize,
    pub zeros_per_column: Vec<usize>,
}

/// Checks raw rows against the simplex invariants and reports their zeros.
/// Never mutates the input.
pub fn validate_composition_matrix<T: Scalar, R: AsRef<[T]>>(rows: &[R]) -> Result<ZeroReport> {
    Ok(CompositionMatrix::from_rows(rows)?.zero_report())
}

/// `n x p` matrix of finite predictor values, row-major. `p` may be zero
/// (intercept-only models).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorMatrix<T> {
    data: Vec<T>,
    n: usize,
    p: usize,
    names: Option<Vec<String>>,
}

impl<T: Scalar> PredictorMatrix<T> {
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != p {
                return Err(Error::validation(format!(
                    "predictor row {i} has width {}, expected {p}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, rows.len(), p)
    }

    pub fn from_flat(data: Vec<T>, n: usize, p: usize) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::validation(format!(
                "predictor data has {} values, expected {n}x{p}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "predictor row {} column {} is not finite",
                pos / p.max(1),
                pos % p.max(1)
            )));
        }
        Ok(Self {
            data,
            n,
            p,
            names: None,
        })
    }

    /// A column vector (`p = 1`).
    pub fn from_column(col: Vec<T>) -> Result<Self> {
        let n = col.len();
        Self::from_flat(col, n, 1)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::validation(format!(
                "{} column names for {} predictors",
                names.len(),
                self.p
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            n: idx.len(),
            p: self.p,
            names: self.names.clone(),
        }
    }
}
