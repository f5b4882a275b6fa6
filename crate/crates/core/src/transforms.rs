//! Log-ratio, power and α-transformations together with their inverses.
//!
//! Every map here sends a composition in the simplex to a Euclidean vector
//! (or back). The α-transformation is the one-parameter family that tends
//! to the isometric log-ratio map as α → 0 and, for α > 0, accepts
//! compositions with zero parts.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::{close_slice, Composition, CompositionMatrix};

/// Power parameter α, restricted to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Alpha<T>(T);

impl<T: Scalar> Alpha<T> {
    pub fn new(value: T) -> Result<Self> {
        if !value.is_finite() || value.abs() > T::one() {
            return Err(Error::validation(format!("alpha must lie in [-1, 1], got {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == T::zero()
    }

    pub fn is_positive(self) -> bool {
        self.0 > T::zero()
    }

    /// Fails unless this α may be applied to data that does (or does not)
    /// contain zeros.
    pub fn check_zeros(self, has_zeros: bool, transform: &'static str, row: usize) -> Result<()> {
        if has_zeros && !self.is_positive() {
            return Err(Error::ZeroNotAllowed { transform, row });
        }
        Ok(())
    }
}

/// The `(D-1) x D` Helmert sub-matrix: the standard Helmert matrix with its
/// constant first row removed.
///
/// Row `i` (1-based) holds `i` entries `1/sqrt(i(i+1))`, then
/// `-i/sqrt(i(i+1))`, then zeros. Rows are orthonormal and orthogonal to
/// the vector of ones.
#[derive(Debug, Clone, PartialEq)]
pub struct HelmertMatrix<T> {
    d: usize,
    entries: Vec<T>,
}

impl<T: Scalar> HelmertMatrix<T> {
    fn build(d: usize) -> Self {
        let mut entries = vec![T::zero(); (d - 1) * d];
        for i in 1..d {
            let ii = T::from_usize_lossy(i);
            let norm = (ii * (ii + T::one())).sqrt();
            let row = &mut entries[(i - 1) * d..i * d];
            for x in row.iter_mut().take(i) {
                *x = T::one() / norm;
            }
            row[i] = -ii / norm;
        }
        Self { d, entries }
    }

    /// Number of columns `D`.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    /// `H y` for `y` of width `D`.
    pub fn apply(&self, y: &[T]) -> Vec<T> {
        debug_assert_eq!(y.len(), self.d);
        (0..self.d - 1)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(y)
                    .fold(T::zero(), |acc, (&h, &v)| acc + h * v)
            })
            .collect()
    }

    /// `Hᵀ z` for `z` of width `D-1`.
    pub fn apply_transpose(&self, z: &[T]) -> Vec<T> {
        debug_assert_eq!(z.len(), self.d - 1);
        let mut out = vec![T::zero(); self.d];
        for (i, &zi) in z.iter().enumerate() {
            for (o, &h) in out.iter_mut().zip(self.row(i)) {
                *o = *o + h * zi;
            }
        }
        out
    }
}

type Memo = Mutex<HashMap<(TypeId, usize), Arc<dyn Any + Send + Sync>>>;

/// Helmert sub-matrix for `D` parts, memoized per `(scalar type, D)`.
pub fn helmert_submatrix<T: Scalar>(d: usize) -> Result<Arc<HelmertMatrix<T>>> {
    if d < 2 {
        return Err(Error::validation(format!("Helmert sub-matrix needs D >= 2, got {d}")));
    }
    static MEMO: OnceLock<Memo> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = memo.lock().unwrap_or_else(|e| e.into_inner());
    let entry = map
        .entry((TypeId::of::<T>(), d))
        .or_insert_with(|| Arc::new(HelmertMatrix::<T>::build(d)) as Arc<dyn Any + Send + Sync>)
        .clone();
    drop(map);
    Ok(entry
        .downcast::<HelmertMatrix<T>>()
        .expect("memo keyed by scalar type"))
}

fn require_positive<T: Scalar>(u: &[T], transform: &'static str) -> Result<()> {
    if u.iter().any(|&x| x <= T::zero()) {
        return Err(Error::ZeroNotAllowed { transform, row: 0 });
    }
    Ok(())
}

fn require_finite<T: Scalar>(v: &[T]) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::validation(format!("entry {i} is not finite")));
    }
    Ok(())
}

/// Closure of `exp(logs)` with a max shift so large logs do not overflow.
pub(crate) fn close_exp<T: Scalar>(logs: &[T]) -> Vec<T> {
    let m = logs
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let e: Vec<T> = logs.iter().map(|&l| (l - m).exp()).collect();
    close_slice(&e)
}

/// Additive log-ratio with the first part as reference.
pub fn alr<T: Scalar>(u: &Composition<T>) -> Result<Vec<T>> {
    let v = u.values();
    require_positive(v, "alr")?;
    let l0 = v[0].ln();
    Ok(v[1..].iter().map(|&x| x.ln() - l0).collect())
}

pub fn alr_inverse<T: Scalar>(v: &[T]) -> Result<Composition<T>> {
    require_finite(v)?;
    if v.is_empty() {
        return Err(Error::validation("alr vector must have width >= 1"));
    }
    let mut logs = Vec::with_capacity(v.len() + 1);
    logs.push(T::zero());
    logs.extend_from_slice(v);
    Ok(Composition::from_closed(close_exp(&logs)))
}

/// Centred log-ratio: `log(u_i / g(u))` with `g` the geometric mean.
pub fn clr<T: Scalar>(u: &Composition<T>) -> Result<Vec<T>> {
    let v = u.values();
    require_positive(v, "clr")?;
    Ok(clr_unchecked(v))
}

fn clr_unchecked<T: Scalar>(v: &[T]) -> Vec<T> {
    let logs: Vec<T> = v.iter().map(|x| x.ln()).collect();
    let mean = logs.iter().fold(T::zero(), |a, &b| a + b) / T::from_usize_lossy(v.len());
    logs.into_iter().map(|l| l - mean).collect()
}

pub fn clr_inverse<T: Scalar>(y: &[T]) -> Result<Composition<T>> {
    require_finite(y)?;
    if y.len() < 2 {
        return Err(Error::validation("clr vector must have width >= 2"));
    }
    Ok(Composition::from_closed(close_exp(y)))
}

/// Isometric log-ratio: the Helmert sub-matrix applied to the clr vector.
pub fn ilr<T: Scalar>(u: &Composition<T>) -> Result<Vec<T>> {
    let v = u.values();
    require_positive(v, "ilr")?;
    let h = helmert_submatrix::<T>(v.len())?;
    Ok(h.apply(&clr_unchecked(v)))
}

pub fn ilr_inverse<T: Scalar>(z: &[T]) -> Result<Composition<T>> {
    require_finite(z)?;
    let h = helmert_submatrix::<T>(z.len() + 1)?;
    Ok(Composition::from_closed(close_exp(&h.apply_transpose(z))))
}

/// Power transformation `C{u_i^α}`.
///
/// At exactly α = 0 this is the literal value of the formula, the uniform
/// composition, and not the α → 0 limit used by [`alpha_transform`] and the
/// Fréchet mean.
pub fn power_transform<T: Scalar>(u: &Composition<T>, alpha: Alpha<T>) -> Result<Composition<T>> {
    let a = alpha.value();
    alpha.check_zeros(u.has_zero(), "power transform", 0)?;
    if a == T::one() {
        return Ok(u.clone());
    }
    if a == T::zero() {
        return Composition::uniform(u.dim());
    }
    let logs: Vec<T> = u.values().iter().map(|&x| a * x.ln()).collect();
    Ok(Composition::from_closed(close_exp(&logs)))
}

/// Writes `D·w_α(u) − 1` into `out`, where `w_α` is the power transform,
/// given `logs[i] = ln u_i`.
///
/// Uses `e^x − e^y = expm1(x) − expm1(y)` so the result keeps full relative
/// precision when α is tiny and every `w_i` is close to `1/D`.
pub(crate) fn centred_power_from_logs<T: Scalar>(logs: &[T], alpha: T, out: &mut [T]) {
    let d = T::from_usize_lossy(logs.len());
    let mut esum = T::zero();
    for (o, &l) in out.iter_mut().zip(logs) {
        let e = (alpha * l).exp_m1();
        *o = e;
        esum = esum + e;
    }
    let total = d + esum;
    for o in out.iter_mut() {
        *o = (d * *o - esum) / total;
    }
}

/// α-transformation `(1/α) H (D w_α − 1)`; α = 0 dispatches to [`ilr`].
pub fn alpha_transform<T: Scalar>(u: &Composition<T>, alpha: Alpha<T>) -> Result<Vec<T>> {
    if alpha.is_zero() {
        return ilr(u);
    }
    alpha.check_zeros(u.has_zero(), "alpha transform", 0)?;
    let a = alpha.value();
    let v = u.values();
    let logs: Vec<T> = v.iter().map(|x| x.ln()).collect();
    let mut t = vec![T::zero(); v.len()];
    centred_power_from_logs(&logs, a, &mut t);
    let h = helmert_submatrix::<T>(v.len())?;
    Ok(h.apply(&t).into_iter().map(|x| x / a).collect())
}

/// Inverse α-transformation `C{(α Hᵀz + 1)^{1/α}}`; α = 0 dispatches to
/// [`ilr_inverse`].
///
/// Fails with [`Error::OutOfRange`] when `α Hᵀz + 1` has a negative part,
/// i.e. `z` is not the image of any composition under this α. Negative
/// parts within rounding noise of zero are treated as zero.
pub fn alpha_inverse<T: Scalar>(z: &[T], alpha: Alpha<T>) -> Result<Composition<T>> {
    if alpha.is_zero() {
        return ilr_inverse(z);
    }
    require_finite(z)?;
    let a = alpha.value();
    let h = helmert_submatrix::<T>(z.len() + 1)?;
    let base: Vec<T> = h
        .apply_transpose(z)
        .into_iter()
        .map(|x| a * x + T::one())
        .collect();
    let noise = T::lit(1e3) * T::epsilon();
    let mut logs = Vec::with_capacity(base.len());
    for (i, &b) in base.iter().enumerate() {
        let b = if b < T::zero() && b >= -noise { T::zero() } else { b };
        if b < T::zero() || (b == T::zero() && a < T::zero()) {
            return Err(Error::OutOfRange(format!(
                "component {i} of alpha*H'z + 1 is {b}; z is outside the image for alpha = {a}"
            )));
        }
        logs.push(b.ln() / a);
    }
    if logs.iter().all(|l| *l == T::neg_infinity()) {
        return Err(Error::OutOfRange("alpha*H'z + 1 vanishes everywhere".into()));
    }
    Ok(Composition::from_closed(close_exp(&logs)))
}

/// Which map produced a [`TransformedMatrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformKind<T> {
    Alr,
    Clr,
    Ilr,
    Power(Alpha<T>),
    Alpha(Alpha<T>),
}

impl<T> TransformKind<T> {
    pub fn width(&self, d: usize) -> usize {
        match self {
            TransformKind::Clr | TransformKind::Power(_) => d,
            _ => d - 1,
        }
    }
}

/// Row-wise image of a composition matrix under one transform.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedMatrix<T> {
    pub kind: TransformKind<T>,
    data: Vec<T>,
    n: usize,
    width: usize,
}

impl<T: Scalar> TransformedMatrix<T> {
    pub fn new(kind: TransformKind<T>, data: &CompositionMatrix<T>) -> Result<Self> {
        let width = kind.width(data.dim());
        let mut out = Vec::with_capacity(data.nrows() * width);
        for i in 0..data.nrows() {
            let u = data.composition(i);
            let r = match kind {
                TransformKind::Alr => alr(&u),
                TransformKind::Clr => clr(&u),
                TransformKind::Ilr => ilr(&u),
                TransformKind::Power(a) => power_transform(&u, a).map(Composition::into_values),
                TransformKind::Alpha(a) => alpha_transform(&u, a),
            };
            let r = r.map_err(|e| match e {
                Error::ZeroNotAllowed { transform, .. } => Error::ZeroNotAllowed { transform, row: i },
                other => other,
            })?;
            out.extend(r);
        }
        Ok(Self {
            kind,
            data: out,
            n: data.nrows(),
            width,
        })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}
