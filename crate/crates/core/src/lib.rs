//! Random decision tree ensembles whose predictions are combined by
//! uncertainty-aware strategies: probability averaging, Laplace smoothing,
//! plausibility, confidence bounds, voting, pooling, Dempster's rule, the
//! cautious rule and evidence accumulation.
//!
//! The pipeline is: [`data`] loads a dataset and plans the 5x2 folds,
//! [`rdt`] grows random trees and routes instances to per-tree leaf counts,
//! [`combine`] turns the leaf counts into a score, and [`eval`] measures AUC
//! and accuracy over the method × leaf-size grid. [`sim`] reproduces the
//! growing-leaf simulations used to compare the methods' behavior.

pub mod belief;
pub mod combine;
pub mod data;
pub mod error;
pub mod eval;
pub mod rdt;
pub mod scoring;
pub mod seed;
pub mod sim;
pub mod uncertainty;

pub use combine::{combine, CombineContext, Method};
pub use data::{load_csv, Class, CsvOptions, Dataset};
pub use error::{Error, Result};
pub use rdt::{build_ensemble, EnsembleModel, LeafStats, LeafVector, TreeParams};
