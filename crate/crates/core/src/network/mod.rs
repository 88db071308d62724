//! Model forward computations: activations, the convolutional model and a
//! plain multilayer perceptron.

pub mod activation;
pub mod mlp;
pub mod rvtdcnn;

pub use activation::{activation, ActivationKind};
pub use mlp::{mlp_forward, DenseLayer, Mlp, MlpInput, MlpPreset};
pub use rvtdcnn::{
    conv_forward, flatten, forward, init_params, unflatten, FeatureMaps, Rvtdcnn, RvtdcnnArch, RvtdcnnParams,
};

use crate::dataset::FeatureGraph;
use crate::error::Result;

/// A trainable map from a feature graph to an `(I, Q)` pair.
///
/// `accumulate_gradient` adds the gradient of `0.5 * |out - label|^2` into
/// `grad` and returns the squared residual norm.
pub trait Regressor: Sync {
    type Scratch: Send;

    fn scratch(&self) -> Self::Scratch;
    fn param_count(&self) -> usize;
    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, flat: &[f64]);
    fn check_input(&self, graph: &FeatureGraph) -> Result<()>;
    fn predict_with(&self, graph: &FeatureGraph, scratch: &mut Self::Scratch) -> [f64; 2];
    fn accumulate_gradient(
        &self,
        graph: &FeatureGraph,
        label: [f64; 2],
        grad: &mut [f64],
        scratch: &mut Self::Scratch,
    ) -> f64;

    fn predict(&self, graph: &FeatureGraph) -> [f64; 2] {
        let mut s = self.scratch();
        self.predict_with(graph, &mut s)
    }
}
