use std::sync::Arc;

use super::{check_aligned, check_width, predict_rows, Regressor};
use crate::error::{Error, Result};
use crate::frechet::{check_alpha_against, FrechetAccumulator};
use crate::neighbors::{NeighborIndex, Strategy};
use crate::scalar::Scalar;
use crate::simplex::{Composition, CompositionMatrix, PredictorMatrix};
use crate::transforms::Alpha;

/// α-k-NN regression: the prediction at `x` is the Fréchet mean, at α, of
/// the responses of the `k` training rows nearest to `x`.
///
/// At α = 0 this is the closed geometric mean of the neighbors, the same
/// as averaging their clr vectors and mapping back.
#[derive(Debug, Clone)]
pub struct AlphaKnnModel<T> {
    index: NeighborIndex<T>,
    responses: Arc<CompositionMatrix<T>>,
    alpha: Alpha<T>,
    k: usize,
}

impl<T: Scalar> AlphaKnnModel<T> {
    pub fn fit(
        x: Arc<PredictorMatrix<T>>,
        u: Arc<CompositionMatrix<T>>,
        alpha: Alpha<T>,
        k: usize,
    ) -> Result<Self> {
        Self::fit_with_strategy(x, u, alpha, k, Strategy::Auto)
    }

    pub fn fit_with_strategy(
        x: Arc<PredictorMatrix<T>>,
        u: Arc<CompositionMatrix<T>>,
        alpha: Alpha<T>,
        k: usize,
        strategy: Strategy,
    ) -> Result<Self> {
        check_aligned(&x, &u)?;
        if k == 0 || k > u.nrows() {
            return Err(Error::validation(format!(
                "k = {k} must lie in 1..={}",
                u.nrows()
            )));
        }
        check_alpha_against(&u, alpha.is_positive(), "alpha-k-NN")?;
        let index = NeighborIndex::build(x, strategy)?;
        Ok(Self { index, responses: u, alpha, k })
    }

    pub fn alpha(&self) -> Alpha<T> {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn index(&self) -> &NeighborIndex<T> {
        &self.index
    }
}

impl<T: Scalar> Regressor<T> for AlphaKnnModel<T> {
    fn predictor_width(&self) -> usize {
        self.index.width()
    }

    fn dim(&self) -> usize {
        self.responses.dim()
    }

    fn predict(&self, x: &PredictorMatrix<T>) -> Result<CompositionMatrix<T>> {
        check_width(x, self.index.width())?;
        let d = self.dim();
        predict_rows(x, d, |_, q| {
            let nn = self.index.query(q, self.k)?;
            let mut acc = FrechetAccumulator::new(self.alpha.value(), d);
            for n in &nn {
                acc.add(self.responses.row(n.index), T::one());
            }
            Ok(acc.mean().expect("k >= 1 neighbors"))
        })
    }
}

/// α-k-NN predictions for a whole (α, k) grid.
///
/// Each query asks the index once for the largest k; the neighbor list for
/// any smaller k is a prefix of it, so every cell is a snapshot of one
/// running Fréchet mean per α. Results equal [`AlphaKnnModel`] cell by cell.
#[derive(Debug, Clone)]
pub struct AlphaKnnGrid<T> {
    index: NeighborIndex<T>,
    responses: Arc<CompositionMatrix<T>>,
    logs: Vec<T>,
    alphas: Vec<Alpha<T>>,
    ks: Vec<usize>,
    /// `(k, position in ks)` sorted by k.
    order: Vec<(usize, usize)>,
    kmax: usize,
}

impl<T: Scalar> AlphaKnnGrid<T> {
    /// Cells with `k` above the training size are never visited.
    pub fn fit(
        x: Arc<PredictorMatrix<T>>,
        u: Arc<CompositionMatrix<T>>,
        alphas: Vec<Alpha<T>>,
        ks: Vec<usize>,
    ) -> Result<Self> {
        check_aligned(&x, &u)?;
        if alphas.is_empty() || ks.is_empty() || ks.contains(&0) {
            return Err(Error::validation("grid needs at least one alpha and k values >= 1"));
        }
        if let Some(a) = alphas.iter().find(|a| !a.is_positive()) {
            check_alpha_against(&u, a.is_positive(), "alpha-k-NN")?;
        }
        let n = u.nrows();
        let kmax = ks.iter().copied().max().unwrap_or(1).min(n);
        let mut order: Vec<(usize, usize)> = ks.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        order.sort_unstable();
        let index = NeighborIndex::build(x, Strategy::Auto)?;
        let logs = u.as_flat().iter().map(|v| v.ln()).collect();
        Ok(Self { index, responses: u, logs, alphas, ks, order, kmax })
    }

    pub fn alphas(&self) -> &[Alpha<T>] {
        &self.alphas
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    /// Calls `f(alpha_index, k_index, prediction)` for every feasible cell.
    pub fn visit<F>(&self, q: &[T], mut f: F) -> Result<()>
    where
        F: FnMut(usize, usize, Composition<T>),
    {
        let nn = self.index.query(q, self.kmax)?;
        let d = self.responses.dim();
        for (ai, a) in self.alphas.iter().enumerate() {
            let mut acc = FrechetAccumulator::new(a.value(), d);
            let mut next = 0;
            for (j, nb) in nn.iter().enumerate() {
                let r = nb.index;
                acc.add_logs(self.responses.row(r), &self.logs[r * d..(r + 1) * d], T::one());
                while next < self.order.len() && self.order[next].0 == j + 1 {
                    f(ai, self.order[next].1, acc.mean().expect("at least one neighbor"));
                    next += 1;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::frechet_mean;
    use crate::transforms::{clr, clr_inverse};
    use approx::assert_abs_diff_eq;

    fn a(x: f64) -> Alpha<f64> {
        Alpha::new(x).unwrap()
    }

    fn toy() -> (Arc<PredictorMatrix<f64>>, Arc<CompositionMatrix<f64>>) {
        let x = PredictorMatrix::from_column(vec![0.0, 1.0, 2.0]).unwrap();
        let u = CompositionMatrix::from_rows(&[[0.2, 0.8], [0.4, 0.6], [0.8, 0.2]]).unwrap();
        (Arc::new(x), Arc::new(u))
    }

    #[test]
    fn two_nearest_at_alpha_one() {
        let (x, u) = toy();
        let m = AlphaKnnModel::fit(x, u, a(1.0), 2).unwrap();
        let p = m.predict(&PredictorMatrix::from_column(vec![0.1]).unwrap()).unwrap();
        assert_abs_diff_eq!(p.row(0), &[0.3, 0.7][..], epsilon = 1e-15);
    }

    #[test]
    fn k_equals_n_gives_global_mean() {
        let (x, u) = toy();
        let m = AlphaKnnModel::fit(x, u.clone(), a(1.0), 3).unwrap();
        let q = PredictorMatrix::from_column(vec![-5.0, 0.7, 9.0]).unwrap();
        let p = m.predict(&q).unwrap();
        let g = frechet_mean(&u, a(1.0)).unwrap();
        for r in p.rows() {
            assert_eq!(r, g.values());
        }
    }

    #[test]
    fn k_one_echoes_training_rows() {
        let (x, u) = toy();
        let m = AlphaKnnModel::fit(x.clone(), u.clone(), a(0.5), 1).unwrap();
        let p = m.predict(&x).unwrap();
        assert_eq!(p, *u);
    }

    #[test]
    fn duplicate_queries_identical() {
        let (x, u) = toy();
        let m = AlphaKnnModel::fit(x, u, a(-0.3), 2).unwrap();
        let p = m.predict(&PredictorMatrix::from_column(vec![1.3, 1.3]).unwrap()).unwrap();
        assert_eq!(p.row(0), p.row(1));
    }

    #[test]
    fn zero_gate_and_k_bounds() {
        let x = Arc::new(PredictorMatrix::from_column((0..10).map(f64::from).collect()).unwrap());
        let rows: Vec<[f64; 3]> = (0..10)
            .map(|i| if i % 5 == 0 { [0.0, 0.5, 0.5] } else { [0.2, 0.3, 0.5] })
            .collect();
        let u = Arc::new(CompositionMatrix::from_rows(&rows).unwrap());
        assert!(AlphaKnnModel::fit(x.clone(), u.clone(), a(0.5), 3).is_ok());
        assert!(matches!(
            AlphaKnnModel::fit(x.clone(), u.clone(), a(-0.5), 3),
            Err(Error::ZeroNotAllowed { .. })
        ));
        assert!(AlphaKnnModel::fit(x.clone(), u.clone(), a(0.5), 11).is_err());
        assert!(AlphaKnnModel::fit(x, u, a(0.5), 0).is_err());
    }

    #[test]
    fn small_alpha_matches_clr_mean() {
        let x = Arc::new(PredictorMatrix::from_column((0..20).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap());
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64;
                crate::simplex::closure(&[1.0 + t.cos().abs(), 0.5 + (t * 0.3).sin().abs(), 0.2 + t / 20.0])
                    .unwrap()
                    .into_values()
            })
            .collect();
        let u = Arc::new(CompositionMatrix::from_rows(&rows).unwrap());
        let m = AlphaKnnModel::fit(x.clone(), u.clone(), a(1e-6), 4).unwrap();
        let q = PredictorMatrix::from_column(vec![0.05, -0.4, 0.9]).unwrap();
        let p = m.predict(&q).unwrap();
        for (i, qr) in q.rows().enumerate() {
            let nn = m.index().query(qr, 4).unwrap();
            let mut mean = vec![0.0; 3];
            for n in &nn {
                for (s, v) in mean.iter_mut().zip(clr(&u.composition(n.index)).unwrap()) {
                    *s += v / 4.0;
                }
            }
            let want = clr_inverse(&mean).unwrap();
            assert_abs_diff_eq!(p.row(i), want.values(), epsilon = 1e-5);
        }
    }

    #[test]
    fn width_mismatch() {
        let (x, u) = toy();
        let m = AlphaKnnModel::fit(x, u, a(1.0), 1).unwrap();
        let q = PredictorMatrix::from_rows(&[[0.0, 1.0]]).unwrap();
        assert!(m.predict(&q).is_err());
    }

    #[test]
    fn grid_matches_single_models() {
        let xs: Vec<f64> = (0..30).map(|i| ((i * 7) % 30) as f64 * 0.1).collect();
        let rows: Vec<[f64; 3]> = (0..30).map(|i| [1.0 + i as f64, 2.0 + (i % 4) as f64, 3.0]).collect();
        let x = Arc::new(PredictorMatrix::from_column(xs).unwrap());
        let u = Arc::new(CompositionMatrix::from_unclosed_rows(&rows).unwrap());
        let alphas = vec![a(-1.0), a(0.0), a(0.4)];
        let ks = vec![4, 1, 30, 31];
        let g = AlphaKnnGrid::fit(x.clone(), u.clone(), alphas.clone(), ks.clone()).unwrap();
        let q = [1.234];
        let mut seen = 0;
        g.visit(&q, |ai, ki, m| {
            let single = AlphaKnnModel::fit(x.clone(), u.clone(), alphas[ai], ks[ki]).unwrap();
            let p = single.predict(&PredictorMatrix::from_column(vec![q[0]]).unwrap()).unwrap();
            assert_eq!(p.row(0), m.values());
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, 9);
    }
}
