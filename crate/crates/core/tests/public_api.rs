use std::sync::Arc;

use alphareg::{
    alpha_transform, closure, frechet_mean, generate, ilr, inject_zeros, tune, validate_composition_matrix, Alpha,
    Alpha64, Axis, CompositionMatrix, CompositionMatrix32, CompositionMatrix64, Family, Kernel, LogRatio,
    LogRatioOlsModel, ModelSpec64, PredictorMatrix32, PredictorMatrix64, Regressor, Scoring, SimSpec, TuningGrid,
};
use approx::assert_abs_diff_eq;

fn grid_rows(n: usize) -> (PredictorMatrix64, CompositionMatrix64) {
    let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let rows: Vec<Vec<f64>> = x.iter().map(|&t| vec![1.0, (2.0 * t).exp(), (1.0 - t).exp()]).collect();
    (PredictorMatrix64::from_column(x).unwrap(), CompositionMatrix::from_unclosed_rows(&rows).unwrap())
}

#[test]
fn glacial_style_zero_count() {
    // 92 rows, 42 of them with at least one zero
    let rows: Vec<Vec<f64>> = (0..92)
        .map(|i| if i % 2 == 0 && i < 84 { vec![0.5, 0.5, 0.0, 0.0] } else { vec![0.25; 4] })
        .collect();
    let report = validate_composition_matrix(&rows).unwrap();
    assert_eq!(report.rows, 92);
    assert_eq!(report.zero_rows, 42);
}

#[test]
fn twenty_percent_zero_injection() {
    let u = generate::<f64>(&SimSpec::polynomial(100, 6, 1, 1, 3)).unwrap().u;
    let z = inject_zeros(&u, 0.2, 9).unwrap();
    assert_eq!(z.zero_report().zero_rows, 20);
    for r in z.rows() {
        assert_abs_diff_eq!(r.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn alr_and_ilr_regressions_fit_the_same_values() {
    let d = generate::<f64>(&SimSpec::polynomial(200, 4, 2, 1, 21)).unwrap();
    let q = PredictorMatrix64::from_flat(vec![0.1, -0.3, 1.2, 0.4, -2.0, 0.0], 3, 2).unwrap();
    let a = LogRatioOlsModel::fit(&d.x, &d.u, LogRatio::Alr).unwrap().predict(&q).unwrap();
    let b = LogRatioOlsModel::fit(&d.x, &d.u, LogRatio::Ilr).unwrap().predict(&q).unwrap();
    for (x, y) in a.as_flat().iter().zip(b.as_flat()) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-10);
    }
}

#[test]
fn two_part_alpha_transform_by_hand() {
    let u = closure(&[0.6, 0.4]).unwrap();
    let z = alpha_transform(&u, Alpha64::new(1.0).unwrap()).unwrap();
    assert_abs_diff_eq!(z[0], 0.4 / 2f64.sqrt(), epsilon = 1e-15);
    let z0 = alpha_transform(&u, Alpha64::new(0.0).unwrap()).unwrap();
    assert_eq!(z0, ilr(&u).unwrap());
}

#[test]
fn frechet_mean_at_one_is_arithmetic() {
    let (_, u) = grid_rows(50);
    let m = frechet_mean(&u, Alpha::new(1.0).unwrap()).unwrap();
    for j in 0..3 {
        let mean = u.rows().map(|r| r[j]).sum::<f64>() / 50.0;
        assert_abs_diff_eq!(m.values()[j], mean, epsilon = 1e-14);
    }
}

#[test]
fn every_model_spec_predicts_on_the_simplex() {
    let (x, u) = grid_rows(80);
    let (x, u) = (Arc::new(x), Arc::new(u));
    let q = PredictorMatrix64::from_column(vec![0.05, 0.5, 0.95]).unwrap();
    let specs = [
        ModelSpec64::AlphaKnn { alpha: Alpha::new(0.4).unwrap(), k: 5 },
        ModelSpec64::AlphaKernel { alpha: Alpha::new(-0.5).unwrap(), h: 0.1, kernel: Kernel::Laplacian },
        ModelSpec64::Kld(Default::default()),
        ModelSpec64::LogRatioOls(LogRatio::Ilr),
    ];
    for s in specs {
        let m = s.fit(x.clone(), u.clone()).unwrap();
        assert_eq!((m.predictor_width(), m.dim()), (1, 3));
        let p = m.predict(&q).unwrap();
        for r in p.rows() {
            assert!(r.iter().all(|v| *v > 0.0));
            assert_abs_diff_eq!(r.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn single_precision_pipeline() {
    let x = PredictorMatrix32::from_column((0..40).map(|i| i as f32 / 40.0).collect()).unwrap();
    let rows: Vec<Vec<f32>> = (0..40).map(|i| vec![1.0, 1.0 + i as f32 / 10.0, 2.0]).collect();
    let u = CompositionMatrix32::from_unclosed_rows(&rows).unwrap();
    let grid = TuningGrid::new(
        vec![Alpha::new(0.0f32).unwrap(), Alpha::new(0.5).unwrap(), Alpha::new(1.0).unwrap()],
        Axis::K(vec![2, 3, 5]),
        5,
        4,
    )
    .unwrap();
    let r = tune(&x, &u, Family::AlphaKnn, &grid, Scoring::default()).unwrap();
    assert!(r.selected.score.is_finite());
    assert!(r.selected.k.is_some());
}
