//! Feedforward classifier trained by Levenberg–Marquardt.

mod lm;
mod model_io;
mod network;

pub use lm::{
    apply_step, jacobian, jacobian_with, lm_step, lm_step_problem, mse, mse_with, train,
    EpochRecord, LeastSquares, LinearizedSystem, NetworkProblem, StopReason, TrainConfig,
    TrainHistory,
};
pub use model_io::{read_model, write_model, MODEL_FORMAT_VERSION};
pub use network::{default_shape, layer_chain, Activation, LayerSpec, Network};

use crate::fault::FaultLabel;

/// Dense input/target pairs, stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    pub in_dim: usize,
    pub out_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl LabeledSet {
    pub fn new(in_dim: usize, out_dim: usize) -> Self {
        LabeledSet {
            in_dim,
            out_dim,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn push(&mut self, input: &[f64], target: &[f64]) {
        assert_eq!(input.len(), self.in_dim);
        assert_eq!(target.len(), self.out_dim);
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
    }

    pub fn len(&self) -> usize {
        if self.in_dim == 0 {
            0
        } else {
            self.inputs.len() / self.in_dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.in_dim..(i + 1) * self.in_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.out_dim..(i + 1) * self.out_dim]
    }

    /// Targets packed MSB-first after thresholding at 0.5.
    pub fn target_code(&self, i: usize) -> u8 {
        FaultLabel::from_outputs(self.target(i), 0.5).code()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledSet {
        let mut out = LabeledSet::new(self.in_dim, self.out_dim);
        for &i in idx {
            out.push(self.input(i), self.target(i));
        }
        out
    }
}
