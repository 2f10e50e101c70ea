//! Multi-layer CNN activation features: per-layer reduction, one linear SVM per
//! (layer, method), sum-rule fusion, floating forward selection and cross-validated
//! evaluation.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod reducers;
pub mod report;
pub mod sidecar;
pub mod svm;
pub mod synthetic;
pub mod tensor_store;

pub use error::{Error, Result};
