//! Synthetic regression problems with compositional responses.
//!
//! A link `f: z ↦ ℝ^{D−1}` plus Gaussian noise is mapped to the simplex by
//! the inverse alr transform (first part as reference). Two links are
//! available: a polynomial in the predictors and a segmented function of
//! one predictor on an even grid over [−1, 1]. Coefficients and data draw
//! from separate seeds, so repeats can redraw the data under fixed
//! coefficients.

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::scalar::Scalar;
use crate::simplex::{CompositionMatrix, PredictorMatrix};

const NOISE_STREAM: u64 = 0;
const ZERO_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Link {
    /// `f_i = β_{0i} + Σ_j β_{ji} z_j^degree`
    Polynomial { degree: u32 },
    /// `f_i = β_{1i} z²` for `z ≥ 0`, `β_{2i} z³` for `z < 0`
    Segmented,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSpec {
    pub n: usize,
    pub d: usize,
    /// Number of predictors.
    pub p: usize,
    pub link: Link,
    /// Standard deviation of the noise added to each `f_i`.
    pub noise_sd: f64,
    pub coef_seed: u64,
    pub data_seed: u64,
    pub zero_fraction: f64,
}

impl SimSpec {
    pub fn polynomial(n: usize, d: usize, p: usize, degree: u32, seed: u64) -> Self {
        Self {
            n,
            d,
            p,
            link: Link::Polynomial { degree },
            noise_sd: 0.1,
            coef_seed: derive_seed(seed, 0),
            data_seed: derive_seed(seed, 1),
            zero_fraction: 0.0,
        }
    }

    pub fn segmented(n: usize, d: usize, seed: u64) -> Self {
        Self { link: Link::Segmented, ..Self::polynomial(n, d, 1, 1, seed) }
    }

    /// The spec for repeat `r`: fresh data, and fresh coefficients too when
    /// `redraw_coefficients` is set.
    pub fn repeat(&self, r: u64, redraw_coefficients: bool) -> Self {
        let mut s = self.clone();
        s.data_seed = derive_seed(self.data_seed, r);
        if redraw_coefficients {
            s.coef_seed = derive_seed(self.coef_seed, r);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d < 2 || self.p == 0 {
            return Err(Error::validation("simulation needs n >= 1, D >= 2 and p >= 1"));
        }
        match self.link {
            Link::Polynomial { degree } if !(1..=3).contains(&degree) => {
                return Err(Error::validation(format!("polynomial degree must be 1, 2 or 3, got {degree}")))
            }
            Link::Segmented if self.p != 1 => {
                return Err(Error::validation("the segmented link takes exactly one predictor"))
            }
            Link::Segmented if self.n < 2 => return Err(Error::validation("the segmented link needs n >= 2")),
            _ => {}
        }
        if !(0.0..1.0).contains(&self.zero_fraction) {
            return Err(Error::validation(format!("zero fraction must lie in [0, 1), got {}", self.zero_fraction)));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::validation("noise sd must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Generating parameters of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTruth {
    pub spec: SimSpec,
    /// Polynomial: `(p+1) x (D−1)`, intercept row first. Segmented: two rows,
    /// the `z ≥ 0` coefficients then the `z < 0` ones.
    pub coefficients: Vec<Vec<f64>>,
    /// Rows that received injected zeros, ascending.
    pub zero_rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SimData<T> {
    pub x: PredictorMatrix<T>,
    pub u: CompositionMatrix<T>,
    pub truth: SimTruth,
}

/// Row-wise inverse alr of an `n x (D−1)` matrix, computed with a max-shift
/// so large entries cannot overflow.
pub fn simplex_link<T: Scalar>(f: &[T], n: usize, dm: usize) -> Result<CompositionMatrix<T>> {
    if dm == 0 || f.len() != n * dm {
        return Err(Error::validation("link matrix shape does not match n x (D-1)"));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("link values must be finite"));
    }
    let mut rows = Vec::with_capacity(n);
    for r in f.chunks(dm) {
        let m = r.iter().fold(T::zero(), |a, &b| a.max(b));
        let mut e = Vec::with_capacity(dm + 1);
        e.push((-m).exp());
        e.extend(r.iter().map(|&v| (v - m).exp()));
        rows.push(e);
    }
    CompositionMatrix::from_unclosed_rows(&rows)
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite positive sd")
}

fn noise(rng: &mut Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        0.0
    } else {
        let e: f64 = StandardNormal.sample(rng);
        sd * e
    }
}

fn finish<T: Scalar>(spec: &SimSpec, z: Vec<f64>, f: Vec<f64>, coefficients: Vec<Vec<f64>>) -> Result<SimData<T>> {
    let dm = spec.d - 1;
    let f: Vec<T> = f.into_iter().map(T::lit).collect();
    let u = simplex_link(&f, spec.n, dm)?;
    let (u, zero_rows) = inject_zeros_with_rows(&u, spec.zero_fraction, derive_seed(spec.data_seed, ZERO_STREAM))?;
    let x = PredictorMatrix::from_flat(z.into_iter().map(T::lit).collect(), spec.n, spec.p)?;
    Ok(SimData { x, u, truth: SimTruth { spec: spec.clone(), coefficients, zero_rows } })
}

/// Standard normal predictors raised elementwise to `degree`; intercepts
/// from N(−3, 1) and slopes from N(2, 0.5) (second argument a standard
/// deviation).
pub fn gen_polynomial<T: Scalar>(spec: &SimSpec) -> Result<SimData<T>> {
    spec.validate()?;
    let Link::Polynomial { degree } = spec.link else {
        return Err(Error::validation("gen_polynomial needs a polynomial link"));
    };
    let (n, p, dm) = (spec.n, spec.p, spec.d - 1);
    let mut crng = rng_from_seed(spec.coef_seed);
    let (icpt, slope) = (normal(-3.0, 1.0), normal(2.0, 0.5));
    let mut beta = vec![vec![0.0; dm]; p + 1];
    for c in 0..dm {
        beta[0][c] = icpt.sample(&mut crng);
        for row in beta.iter_mut().skip(1) {
            row[c] = slope.sample(&mut crng);
        }
    }
    let mut rng = rng_from_seed(spec.data_seed);
    let z: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut nrng = rng_from_seed(derive_seed(spec.data_seed, NOISE_STREAM));
    let mut f = Vec::with_capacity(n * dm);
    for i in 0..n {
        let zi = &z[i * p..(i + 1) * p];
        for c in 0..dm {
            let lin = zi.iter().enumerate().fold(beta[0][c], |acc, (j, &v)| acc + beta[j + 1][c] * v.powi(degree as i32));
            f.push(lin + noise(&mut nrng, spec.noise_sd));
        }
    }
    finish(spec, z, f, beta)
}

/// `z` evenly spaced on [−1, 1]; `z = 0` takes the `z ≥ 0` branch.
/// Coefficients `β₁ ~ N(−1, 0.3)`, `β₂ ~ N(1, 0.2)`.
pub fn gen_segmented<T: Scalar>(spec: &SimSpec) -> Result<SimData<T>> {
    spec.validate()?;
    if spec.link != Link::Segmented {
        return Err(Error::validation("gen_segmented needs the segmented link"));
    }
    let (n, dm) = (spec.n, spec.d - 1);
    let mut crng = rng_from_seed(spec.coef_seed);
    let (b1, b2) = (normal(-1.0, 0.3), normal(1.0, 0.2));
    let pos: Vec<f64> = (0..dm).map(|_| b1.sample(&mut crng)).collect();
    let neg: Vec<f64> = (0..dm).map(|_| b2.sample(&mut crng)).collect();
    let z: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
    let mut nrng = rng_from_seed(derive_seed(spec.data_seed, NOISE_STREAM));
    let mut f = Vec::with_capacity(n * dm);
    for &zi in &z {
        for c in 0..dm {
            let base = if zi >= 0.0 { zi * zi * pos[c] } else { zi * zi * zi * neg[c] };
            f.push(base + noise(&mut nrng, spec.noise_sd));
        }
    }
    finish(spec, z, f, vec![pos, neg])
}

/// Dispatches on the spec's link.
pub fn generate<T: Scalar>(spec: &SimSpec) -> Result<SimData<T>> {
    match spec.link {
        Link::Polynomial { .. } => gen_polynomial(spec),
        Link::Segmented => gen_segmented(spec),
    }
}

/// Zeroes `max(1, ⌊D/3⌋)` random parts in `⌊fraction·n⌋` random rows and
/// re-closes those rows. Other rows are copied unchanged.
pub fn inject_zeros<T: Scalar>(u: &CompositionMatrix<T>, fraction: f64, seed: u64) -> Result<CompositionMatrix<T>> {
    inject_zeros_with_rows(u, fraction, seed).map(|(m, _)| m)
}

fn inject_zeros_with_rows<T: Scalar>(
    u: &CompositionMatrix<T>,
    fraction: f64,
    seed: u64,
) -> Result<(CompositionMatrix<T>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::validation(format!("zero fraction must lie in [0, 1), got {fraction}")));
    }
    let (n, d) = (u.nrows(), u.dim());
    let count = (fraction * n as f64).floor() as usize;
    if count == 0 {
        return Ok((u.clone(), Vec::new()));
    }
    let per_row = (d / 3).max(1);
    let mut rng = rng_from_seed(seed);
    let mut chosen = sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let mut rows: Vec<Vec<T>> = u.rows().map(<[T]>::to_vec).collect();
    for &i in &chosen {
        let row = &mut rows[i];
        let mut parts = sample(&mut rng, d, per_row).into_vec();
        let mut attempts = 0;
        while (0..d).all(|j| parts.contains(&j) || row[j] == T::zero()) {
            attempts += 1;
            if attempts > 64 {
                // keep the largest part and zero others deterministically
                let keep = (0..d).fold(0, |b, j| if row[j] > row[b] { j } else { b });
                parts = (0..d).filter(|&j| j != keep).take(per_row).collect();
                break;
            }
            parts = sample(&mut rng, d, per_row).into_vec();
        }
        for j in parts {
            row[j] = T::zero();
        }
        let s = row.iter().fold(T::zero(), |a, &b| a + b);
        for v in row.iter_mut() {
            *v = *v / s;
        }
    }
    Ok((CompositionMatrix::from_rows(&rows)?, chosen))
}
