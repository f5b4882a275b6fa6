use std::sync::Arc;

use alphareg::{
    alpha_inverse, alpha_transform, clr, closure, frechet_mean, js_divergence, kl_divergence, weighted_frechet_mean,
    Alpha, AlphaKnnModel, CompositionMatrix, NeighborIndex, PredictorMatrix, Regressor, Strategy as Search, WeightVector,
};
use proptest::prelude::*;

fn comp(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3..1.0f64, d).prop_map(|v| closure(&v).unwrap().into_values())
}

fn sample(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(comp(d), n)
}

proptest! {
    #[test]
    fn closure_ignores_scale(v in prop::collection::vec(1e-3..10.0f64, 2..8), s in 1e-3..1e3f64) {
        let a = closure(&v).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * s).collect();
        let b = closure(&scaled).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_round_trip(u in (2usize..9).prop_flat_map(comp), al in -1.0..1.0f64) {
        let u = closure(&u).unwrap();
        let a = Alpha::new(al).unwrap();
        let back = alpha_inverse(&alpha_transform(&u, a).unwrap(), a).unwrap();
        for (x, y) in back.values().iter().zip(u.values()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn clr_sums_to_zero(u in (2usize..9).prop_flat_map(comp)) {
        let c = clr(&closure(&u).unwrap()).unwrap();
        prop_assert!(c.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn frechet_mean_ignores_row_order(rows in sample(12, 4), al in -1.0..1.0f64, seed in any::<u64>()) {
        let a = Alpha::new(al).unwrap();
        let m1 = frechet_mean(&CompositionMatrix::from_rows(&rows).unwrap(), a).unwrap();
        let mut shuffled = rows.clone();
        let len = shuffled.len();
        shuffled.rotate_left((seed % len as u64) as usize);
        shuffled.reverse();
        let m2 = frechet_mean(&CompositionMatrix::from_rows(&shuffled).unwrap(), a).unwrap();
        prop_assert_eq!(m1.values(), m2.values());
    }

    #[test]
    fn uniform_weights_match_plain_mean(rows in sample(9, 3), al in -1.0..1.0f64) {
        let u = CompositionMatrix::from_rows(&rows).unwrap();
        let a = Alpha::new(al).unwrap();
        let w = WeightVector::new(vec![2.5; 9]).unwrap();
        let m1 = frechet_mean(&u, a).unwrap();
        let m2 = weighted_frechet_mean(&u, &w, a).unwrap();
        for (x, y) in m1.values().iter().zip(m2.values()) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn divergences_are_nonnegative(y in comp(5), z in comp(5)) {
        prop_assert!(kl_divergence(&y, &z, 1e-12).unwrap() >= 0.0);
        let js = js_divergence(&y, &z).unwrap();
        prop_assert!(js >= 0.0 && js <= 2.0 * 2f64.ln() + 1e-12);
    }

    #[test]
    fn kdtree_matches_brute_force(
        pts in prop::collection::vec(prop::collection::vec(-5i32..5, 2), 1..300),
        q in prop::collection::vec(-6i32..6, 2),
        k in 1usize..20,
    ) {
        let rows: Vec<Vec<f64>> = pts.iter().map(|r| r.iter().map(|v| *v as f64).collect()).collect();
        let x = Arc::new(PredictorMatrix::from_rows(&rows).unwrap());
        let q: Vec<f64> = q.iter().map(|v| *v as f64).collect();
        let a = NeighborIndex::build(x.clone(), Search::KdTree).unwrap().query(&q, k).unwrap();
        let b = NeighborIndex::build(x, Search::Brute).unwrap().query(&q, k).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn knn_predictions_stay_in_the_simplex(rows in sample(30, 4), al in -1.0..1.0f64, k in 1usize..30) {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let m = AlphaKnnModel::fit(
            Arc::new(PredictorMatrix::from_column(x).unwrap()),
            Arc::new(CompositionMatrix::from_rows(&rows).unwrap()),
            Alpha::new(al).unwrap(),
            k,
        ).unwrap();
        let p = m.predict(&PredictorMatrix::from_column(vec![-1.0, 0.0, 0.9]).unwrap()).unwrap();
        for r in p.rows() {
            prop_assert!(r.iter().all(|v| *v >= 0.0));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
