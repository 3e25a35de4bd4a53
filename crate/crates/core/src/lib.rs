//! Bankruptcy prediction from balance-sheet and income figures, comparing
//! standard financial ratios with pairwise log-ratios of the same figures.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.

// `!(a > b)` is used on purpose where NaN must take the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coda;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod linalg;
pub mod models;
pub mod ratios;
pub mod scalar;

pub use coda::{Part, PlrGraph, SpanningPlrGraph, PARTS};
pub use error::{Error, ErrorCategory, Result};
pub use scalar::Real;

pub type Composition64 = coda::Composition<f64>;
pub type AccountingRecord64 = ingest::AccountingRecord<f64>;
pub type Dataset64 = ingest::Dataset<f64>;
pub type FeatureMatrix64 = features::FeatureMatrix<f64>;
pub type StandardRatioVector64 = ratios::StandardRatioVector<f64>;
pub type LogisticModel64 = models::logistic::LogisticModel<f64>;
pub type KnnModel64 = models::knn::KnnModel<f64>;
pub type Forest64 = models::forest::Forest<f64>;
pub type GridConfig64 = evaluation::GridConfig<f64>;
pub type GridResult64 = evaluation::GridResult<f64>;
