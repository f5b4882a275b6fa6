//! Multinomial-logit regression fitted by minimizing the Kullback-Leibler
//! divergence of the observed compositions from the fitted ones.
//!
//! `μ_1 ∝ 1` and `μ_i ∝ exp(xᵀβ_i)` for `i = 2..D`. The log-likelihood
//! `Σ_n y_nᵀ log μ_n` is concave in the stacked coefficients and is
//! maximized by Newton-Raphson with an analytic gradient and Hessian and a
//! step-halving line search. Zeros in the responses need no special care.
//!
//! Accumulation and the linear solves run in `f64` regardless of `T`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{check_aligned, check_width, predict_rows, Regressor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simplex::{Composition, CompositionMatrix, PredictorMatrix};
use crate::transforms::close_exp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KldOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KldOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 100 }
    }
}

const RIDGE: f64 = 1e-8;
const MIN_STEP: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct KldModel<T> {
    /// `(p+1) x (D-1)` row-major, intercept row first.
    coefficients: Vec<T>,
    p: usize,
    d: usize,
    iterations: usize,
    /// Total KL divergence `Σ_n KL(y_n, μ_n)` before the first and after
    /// every accepted step. Non-increasing.
    objective_trace: Vec<f64>,
    ridge_damped: bool,
}

struct Problem {
    x: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    p1: usize,
    d: usize,
    /// Σ y log y, so the objective is reported in KL form.
    entropy: f64,
}

impl Problem {
    fn dm(&self) -> usize {
        self.d - 1
    }

    fn xrow(&self, i: usize) -> &[f64] {
        &self.x[i * self.p1..(i + 1) * self.p1]
    }

    fn yrow(&self, i: usize) -> &[f64] {
        &self.y[i * self.d..(i + 1) * self.d]
    }

    /// Fills `eta` with the linear predictors (reference part first, fixed
    /// at 0) and returns log Σ exp(eta).
    fn linear(&self, beta: &[f64], i: usize, eta: &mut [f64]) -> f64 {
        let x = self.xrow(i);
        eta[0] = 0.0;
        let mut mx = 0.0f64;
        for c in 0..self.dm() {
            let b = &beta[c * self.p1..(c + 1) * self.p1];
            let v: f64 = x.iter().zip(b).map(|(a, b)| a * b).sum();
            eta[c + 1] = v;
            mx = mx.max(v);
        }
        mx + eta.iter().map(|e| (e - mx).exp()).sum::<f64>().ln()
    }

    fn objective(&self, beta: &[f64], eta: &mut [f64]) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.n {
            let lse = self.linear(beta, i, eta);
            for (y, e) in self.yrow(i).iter().zip(eta.iter()) {
                if *y > 0.0 {
                    ll += y * (e - lse);
                }
            }
        }
        self.entropy - ll
    }

    /// Gradient of the log-likelihood and the observed information (minus
    /// the Hessian), in coefficient order `c * (p+1) + j`.
    fn derivatives(&self, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dm = self.dm();
        let m = dm * self.p1;
        let mut grad = vec![0.0; m];
        let mut info = vec![0.0; m * m];
        let mut eta = vec![0.0; self.d];
        let mut mu = vec![0.0; dm];
        for i in 0..self.n {
            let lse = self.linear(beta, i, &mut eta);
            for c in 0..dm {
                mu[c] = (eta[c + 1] - lse).exp();
            }
            let x = self.xrow(i);
            let y = self.yrow(i);
            let s: f64 = y.iter().sum();
            for c in 0..dm {
                let r = y[c + 1] - s * mu[c];
                for (j, xj) in x.iter().enumerate() {
                    grad[c * self.p1 + j] += r * xj;
                }
                for c2 in c..dm {
                    let w = s * mu[c] * (if c == c2 { 1.0 } else { 0.0 } - mu[c2]);
                    for (j, xj) in x.iter().enumerate() {
                        let wx = w * xj;
                        let row = (c * self.p1 + j) * m + c2 * self.p1;
                        for (j2, xj2) in x.iter().enumerate() {
                            info[row + j2] += wx * xj2;
                        }
                    }
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                info[a * m + b] = info[b * m + a];
            }
        }
        (grad, info)
    }
}

/// Solves `info · δ = grad`, adding a growing ridge when `info` is not
/// numerically positive definite. Returns whether a ridge was needed.
fn newton_direction(info: &[f64], grad: &[f64]) -> (Vec<f64>, bool) {
    let m = grad.len();
    let g = DVector::from_column_slice(grad);
    let base = DMatrix::from_row_slice(m, m, info);
    if let Some(ch) = base.clone().cholesky() {
        return (ch.solve(&g).iter().copied().collect(), false);
    }
    let scale = (0..m).map(|i| info[i * m + i].abs()).fold(1.0, f64::max);
    let mut lambda = RIDGE;
    loop {
        let mut a = base.clone();
        for i in 0..m {
            a[(i, i)] += lambda * scale;
        }
        if let Some(ch) = a.cholesky() {
            return (ch.solve(&g).iter().copied().collect(), true);
        }
        lambda *= 10.0;
        assert!(lambda.is_finite(), "ridge escalation diverged");
    }
}

impl<T: Scalar> KldModel<T> {
    pub fn fit(x: &PredictorMatrix<T>, u: &CompositionMatrix<T>, opts: KldOptions) -> Result<Self> {
        check_aligned(x, u)?;
        let n = x.nrows();
        let p = x.ncols();
        if n <= p + 1 {
            return Err(Error::validation(format!(
                "KLD regression needs n > p + 1 (n = {n}, p = {p})"
            )));
        }
        let p1 = p + 1;
        let d = u.dim();
        let mut xf = Vec::with_capacity(n * p1);
        for r in x.rows() {
            xf.push(1.0);
            xf.extend(r.iter().map(|v| v.as_f64()));
        }
        let yf: Vec<f64> = u.as_flat().iter().map(|v| v.as_f64()).collect();
        let entropy = yf.iter().filter(|y| **y > 0.0).map(|y| y * y.ln()).sum();
        let prob = Problem { x: xf, y: yf, n, p1, d, entropy };

        let m = (d - 1) * p1;
        let mut beta = vec![0.0; m];
        let mut eta = vec![0.0; d];
        let mut obj = prob.objective(&beta, &mut eta);
        let mut trace = vec![obj];
        let mut ridge_damped = false;

        for iter in 1..=opts.max_iter {
            let (grad, info) = prob.derivatives(&beta);
            let (dir, ridged) = newton_direction(&info, &grad);
            ridge_damped |= ridged;

            let mut step = 1.0;
            let mut cand: Vec<f64>;
            let mut cand_obj;
            loop {
                cand = beta.iter().zip(&dir).map(|(b, d)| b + step * d).collect();
                cand_obj = prob.objective(&cand, &mut eta);
                if cand_obj <= obj || step < MIN_STEP {
                    break;
                }
                step *= 0.5;
            }
            if !(cand_obj <= obj) {
                // No ascent direction left: already at the optimum to working precision.
                return Ok(Self::finish(beta, p, d, iter, trace, ridge_damped));
            }
            let max_change = dir.iter().map(|v| (v * step).abs()).fold(0.0, f64::max);
            let rel_change = (obj - cand_obj) / obj.abs().max(f64::MIN_POSITIVE);
            beta = cand;
            obj = cand_obj;
            trace.push(obj);
            if max_change < opts.tol || rel_change < opts.tol {
                return Ok(Self::finish(beta, p, d, iter, trace, ridge_damped));
            }
        }
        Err(Error::NonConvergence {
            iterations: opts.max_iter,
            last: to_row_major(&beta, p1, d - 1),
        })
    }

    fn finish(beta: Vec<f64>, p: usize, d: usize, iterations: usize, trace: Vec<f64>, ridge_damped: bool) -> Self {
        let coefficients = to_row_major(&beta, p + 1, d - 1)
            .into_iter()
            .map(T::lit)
            .collect();
        Self { coefficients, p, d, iterations, objective_trace: trace, ridge_damped }
    }

    /// Builds a model from known coefficients, `(p+1) x (D-1)` row-major.
    pub fn from_coefficients(coefficients: Vec<T>, p: usize, d: usize) -> Result<Self> {
        if d < 2 || coefficients.len() != (p + 1) * (d - 1) {
            return Err(Error::validation(format!(
                "expected {} coefficients for p = {p}, D = {d}",
                (p + 1) * d.saturating_sub(1)
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("coefficients must be finite"));
        }
        Ok(Self { coefficients, p, d, iterations: 0, objective_trace: Vec::new(), ridge_damped: false })
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    /// Coefficient of predictor row `j` (0 = intercept) for part `c + 2`.
    pub fn coefficient(&self, j: usize, c: usize) -> T {
        self.coefficients[j * (self.d - 1) + c]
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    pub fn ridge_damped(&self) -> bool {
        self.ridge_damped
    }

    fn predict_one(&self, q: &[T]) -> Composition<T> {
        let dm = self.d - 1;
        let mut logs = vec![T::zero(); self.d];
        for c in 0..dm {
            let mut v = self.coefficient(0, c);
            for (j, &xj) in q.iter().enumerate() {
                v = v + self.coefficient(j + 1, c) * xj;
            }
            logs[c + 1] = v;
        }
        Composition::from_closed(close_exp(&logs))
    }
}

fn to_row_major(beta: &[f64], p1: usize, dm: usize) -> Vec<f64> {
    let mut out = vec![0.0; p1 * dm];
    for c in 0..dm {
        for j in 0..p1 {
            out[j * dm + c] = beta[c * p1 + j];
        }
    }
    out
}

impl<T: Scalar> Regressor<T> for KldModel<T> {
    fn predictor_width(&self) -> usize {
        self.p
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn predict(&self, x: &PredictorMatrix<T>) -> Result<CompositionMatrix<T>> {
        check_width(x, self.p)?;
        predict_rows(x, self.d, |_, q| Ok(self.predict_one(q)))
    }
}
