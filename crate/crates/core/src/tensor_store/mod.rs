//! Activation tensor data model, the `.actv` file format, dataset manifests and
//! stratified fold construction.

mod folds;
mod manifest;
mod tensor;

pub use folds::{stratified_folds, stratified_holdout, FoldSpec};
pub use manifest::{DatasetManifest, Diagnostic, LayerInfo, SampleEntry};
pub use tensor::{read_tensor, write_tensor, ActivationTensor, HEADER_LEN};
