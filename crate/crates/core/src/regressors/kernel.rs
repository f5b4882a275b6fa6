use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use super::{check_aligned, check_width, predict_rows, Regressor};
use crate::error::{Error, Result};
use crate::frechet::{check_alpha_against, FrechetAccumulator};
use crate::scalar::Scalar;
use crate::simplex::{CompositionMatrix, PredictorMatrix};
use crate::transforms::Alpha;

/// Distance-decaying kernels. `d` is the Euclidean distance, `h` the bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-d² / 2h²)`
    #[default]
    Gaussian,
    /// `exp(-d / 2h²)`
    Exponential,
    /// `exp(-d / h)`
    Laplacian,
}

impl Kernel {
    /// Weight for a squared distance `sq`.
    pub fn weight<T: Scalar>(self, sq: T, h: T) -> T {
        let two = T::lit(2.0);
        match self {
            Kernel::Gaussian => (-sq / (two * h * h)).exp(),
            Kernel::Exponential => (-sq.sqrt() / (two * h * h)).exp(),
            Kernel::Laplacian => (-sq.sqrt() / h).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Exponential => "exponential",
            Kernel::Laplacian => "laplacian",
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Kernel::Gaussian),
            "exponential" => Ok(Kernel::Exponential),
            "laplacian" => Ok(Kernel::Laplacian),
            other => Err(Error::validation(format!("unknown kernel '{other}'"))),
        }
    }
}

/// α-kernel regression: a Nadaraya-Watson weighted Fréchet mean over all
/// training responses, with weights `K_h(x_j - x)`.
#[derive(Debug, Clone)]
pub struct AlphaKernelModel<T> {
    x: Arc<PredictorMatrix<T>>,
    responses: Arc<CompositionMatrix<T>>,
    alpha: Alpha<T>,
    h: T,
    kernel: Kernel,
}

impl<T: Scalar> AlphaKernelModel<T> {
    pub fn fit(
        x: Arc<PredictorMatrix<T>>,
        u: Arc<CompositionMatrix<T>>,
        alpha: Alpha<T>,
        h: T,
        kernel: Kernel,
    ) -> Result<Self> {
        check_aligned(&x, &u)?;
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::validation(format!("bandwidth must be positive and finite, got {h}")));
        }
        check_alpha_against(&u, alpha.is_positive(), "alpha-kernel")?;
        Ok(Self { x, responses: u, alpha, h, kernel })
    }

    pub fn bandwidth(&self) -> T {
        self.h
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Kernel weights of every training row for query `q`.
    pub fn weights(&self, q: &[T]) -> Vec<T> {
        self.x
            .rows()
            .map(|r| {
                let sq = r.iter().zip(q).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
                self.kernel.weight(sq, self.h)
            })
            .collect()
    }
}

impl<T: Scalar> Regressor<T> for AlphaKernelModel<T> {
    fn predictor_width(&self) -> usize {
        self.x.ncols()
    }

    fn dim(&self) -> usize {
        self.responses.dim()
    }

    fn predict(&self, x: &PredictorMatrix<T>) -> Result<CompositionMatrix<T>> {
        check_width(x, self.x.ncols())?;
        let d = self.dim();
        predict_rows(x, d, |i, q| {
            let w = self.weights(q);
            let mut acc = FrechetAccumulator::new(self.alpha.value(), d);
            for (r, &wj) in self.responses.rows().zip(&w) {
                acc.add(r, wj);
            }
            acc.mean().ok_or(Error::DegenerateWeights { query: i })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::frechet_mean;
    use crate::regressors::AlphaKnnModel;
    use approx::assert_abs_diff_eq;

    fn a(x: f64) -> Alpha<f64> {
        Alpha::new(x).unwrap()
    }

    fn data() -> (Arc<PredictorMatrix<f64>>, Arc<CompositionMatrix<f64>>) {
        let x: Vec<f64> = (0..15).map(|i| (i as f64 * 1.7).sin() * 3.0).collect();
        let rows: Vec<Vec<f64>> = x
            .iter()
            .map(|&v| crate::simplex::closure(&[1.0 + v.abs(), 2.0 + v.sin(), 0.5 + v * v / 10.0]).unwrap().into_values())
            .collect();
        (
            Arc::new(PredictorMatrix::from_column(x).unwrap()),
            Arc::new(CompositionMatrix::from_rows(&rows).unwrap()),
        )
    }

    #[test]
    fn kernel_values() {
        assert_eq!(Kernel::Gaussian.weight(0.0, 0.7), 1.0);
        assert_abs_diff_eq!(Kernel::Gaussian.weight(4.0, 1.0), (-2.0f64).exp());
        assert_abs_diff_eq!(Kernel::Exponential.weight(4.0, 1.0), (-1.0f64).exp());
        assert_abs_diff_eq!(Kernel::Laplacian.weight(4.0, 2.0), (-1.0f64).exp());
        assert_eq!("laplacian".parse::<Kernel>().unwrap(), Kernel::Laplacian);
        assert!("box".parse::<Kernel>().is_err());
    }

    #[test]
    fn huge_bandwidth_gives_global_mean_and_matches_knn() {
        let (x, u) = data();
        let m = AlphaKernelModel::fit(x.clone(), u.clone(), a(1.0), 1e9 * 6.0, Kernel::Gaussian).unwrap();
        let q = PredictorMatrix::from_column(vec![-2.0, 0.0, 2.5]).unwrap();
        let p = m.predict(&q).unwrap();
        let g = frechet_mean(&u, a(1.0)).unwrap();
        let knn = AlphaKnnModel::fit(x, u.clone(), a(1.0), u.nrows()).unwrap().predict(&q).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(p.row(i), g.values(), epsilon = 1e-6);
            assert_abs_diff_eq!(p.row(i), knn.row(i), epsilon = 1e-6);
        }
    }

    #[test]
    fn tiny_bandwidth_concentrates_on_training_point() {
        let (x, u) = data();
        let m = AlphaKernelModel::fit(x.clone(), u.clone(), a(0.5), 1e-3, Kernel::Laplacian).unwrap();
        let q = PredictorMatrix::from_column(vec![x.row(3)[0]]).unwrap();
        let p = m.predict(&q).unwrap();
        assert_abs_diff_eq!(p.row(0), u.row(3), epsilon = 1e-9);
    }

    #[test]
    fn single_row_and_symmetry() {
        let x = Arc::new(PredictorMatrix::from_column(vec![1.0]).unwrap());
        let u = Arc::new(CompositionMatrix::from_rows(&[[0.1, 0.9]]).unwrap());
        let m = AlphaKernelModel::fit(x, u, a(0.2), 0.5, Kernel::Gaussian).unwrap();
        let p = m.predict(&PredictorMatrix::from_column(vec![0.0, 1.5]).unwrap()).unwrap();
        assert_eq!(p.row(0), &[0.1, 0.9]);
        assert_eq!(p.row(1), &[0.1, 0.9]);

        let x = Arc::new(PredictorMatrix::from_column(vec![-1.0, 1.0]).unwrap());
        let u = Arc::new(CompositionMatrix::from_rows(&[[0.2, 0.8], [0.8, 0.2]]).unwrap());
        let m = AlphaKernelModel::fit(x, u, a(0.7), 0.8, Kernel::Gaussian).unwrap();
        let p = m.predict(&PredictorMatrix::from_column(vec![0.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(p.row(0), &[0.5, 0.5][..], epsilon = 1e-15);
    }

    #[test]
    fn degenerate_weights_name_the_query() {
        let (x, u) = data();
        let m = AlphaKernelModel::fit(x, u, a(1.0), 1e-6, Kernel::Gaussian).unwrap();
        let q = PredictorMatrix::from_column(vec![0.123456, 1000.0]).unwrap();
        let err = m.predict(&q).unwrap_err();
        assert!(matches!(err, Error::DegenerateWeights { query: _ }));
    }

    #[test]
    fn bandwidth_validation() {
        let (x, u) = data();
        assert!(AlphaKernelModel::fit(x.clone(), u.clone(), a(1.0), 0.0, Kernel::Gaussian).is_err());
        assert!(AlphaKernelModel::fit(x, u, a(1.0), -1.0, Kernel::Gaussian).is_err());
    }

    #[test]
    fn gaussian_predictions_are_smooth() {
        let (x, u) = data();
        let m = AlphaKernelModel::fit(x, u, a(0.5), 0.8, Kernel::Gaussian).unwrap();
        for &q0 in &[-2.0, -0.3, 0.4, 1.9] {
            let slope = |delta: f64| {
                let p = m.predict(&PredictorMatrix::from_column(vec![q0, q0 + delta]).unwrap()).unwrap();
                p.row(0).iter().zip(p.row(1)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / delta
            };
            let s1 = slope(1e-4);
            let s2 = slope(5e-5);
            assert!(s1.is_finite() && (s1 - s2).abs() <= 0.01 * s1.max(1e-8) + 1e-9, "{s1} vs {s2}");
        }
    }
}
