//! α-k-NN and α-kernel regression for compositional responses.
//!
//! Responses live on the simplex; predictors are Euclidean. The crate
//! provides the log-ratio and α-transformations, Fréchet means, an exact
//! nearest-neighbor index, the non-parametric regressors together with
//! multinomial-logit (KLD) and log-ratio OLS baselines, cross-validated
//! tuning, synthetic data generators and a timing harness.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the common `f64` case.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod datagen;
pub mod error;
pub mod frechet;
pub mod ingestion;
pub mod neighbors;
pub mod regressors;
pub mod rng;
pub mod scalar;
pub mod selection;
pub mod simplex;
mod sum;
pub mod transforms;

pub use bench::{run_bench, BenchReport, BenchScenario};
pub use datagen::{gen_polynomial, gen_segmented, generate, inject_zeros, simplex_link, Link, SimData, SimSpec, SimTruth};
pub use error::{Error, Result};
pub use ingestion::{csv_header, latlon_to_euclidean, load_csv, load_predictors, load_responses, standardize, Dataset, DatasetSchema, Standardization};
pub use frechet::{frechet_mean, frechet_path, weighted_frechet_mean, WeightVector};
pub use neighbors::{Neighbor, NeighborIndex, Strategy};
pub use regressors::{
    AlphaKernelModel, AlphaKnnGrid, AlphaKnnModel, Kernel, KldModel, KldOptions, LogRatio, LogRatioOlsModel, ModelSpec,
    Regressor,
};
pub use scalar::Scalar;
pub use selection::{
    cross_validated_score, js_divergence, kl_divergence, make_folds, tune, Axis, CvScore, DivergenceScore, Family,
    Folds, Metric, Scoring, TuningGrid, TuningReport,
};
pub use simplex::{closure, validate_composition_matrix, Composition, CompositionMatrix, PredictorMatrix, ZeroReport};
pub use sum::{exact_sum, ExactSum};
pub use transforms::{
    alpha_inverse, alpha_transform, alr, alr_inverse, clr, clr_inverse, helmert_submatrix, ilr, ilr_inverse,
    power_transform, Alpha, HelmertMatrix, TransformKind, TransformedMatrix,
};

pub type Composition64 = Composition<f64>;
pub type CompositionMatrix64 = CompositionMatrix<f64>;
pub type PredictorMatrix64 = PredictorMatrix<f64>;
pub type Alpha64 = Alpha<f64>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type Composition32 = Composition<f32>;
pub type CompositionMatrix32 = CompositionMatrix<f32>;
pub type PredictorMatrix32 = PredictorMatrix<f32>;
