use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Normalizer;
use crate::error::{Error, Result};
use crate::fault::FaultLabel;
use crate::wavelet::FeatureVector;

/// Pre-activations beyond this magnitude saturate log-sigmoid to the last
/// representable value below 1 (or its mirror above 0).
const LOGSIG_CLAMP: f64 = 36.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// Hyperbolic tangent sigmoid.
    TanSig,
    /// Logistic sigmoid, range (0, 1).
    LogSig,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::TanSig => z.tanh(),
            Activation::LogSig => 1.0 / (1.0 + (-z.clamp(-LOGSIG_CLAMP, LOGSIG_CLAMP)).exp()),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::TanSig => 1.0 - y * y,
            Activation::LogSig => y * (1.0 - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::TanSig => "tansig",
            Activation::LogSig => "logsig",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tansig" => Some(Activation::TanSig),
            "logsig" => Some(Activation::LogSig),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// Layer chain `inputs -> hidden... -> outputs`, tanh hidden layers and a
/// log-sigmoid output layer.
pub fn layer_chain(inputs: usize, hidden: &[usize], outputs: usize) -> Vec<LayerSpec> {
    let mut dims = vec![inputs];
    dims.extend_from_slice(hidden);
    dims.push(outputs);
    let last = dims.len() - 2;
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec {
            in_dim: w[0],
            out_dim: w[1],
            activation: if i == last {
                Activation::LogSig
            } else {
                Activation::TanSig
            },
        })
        .collect()
}

/// The 4-50-50-4 classifier shape.
pub fn default_shape() -> Vec<LayerSpec> {
    layer_chain(4, &[50, 50], 4)
}

/// Feedforward network with all parameters in one flat vector.
///
/// Layout per layer, in order: weights row-major (`out_dim x in_dim`), then
/// biases. Jacobian columns follow the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    specs: Vec<LayerSpec>,
    params: Vec<f64>,
    pub normalizer: Option<Normalizer>,
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig(
            "network needs at least one layer".into(),
        ));
    }
    for w in specs.windows(2) {
        if w[0].out_dim != w[1].in_dim {
            return Err(Error::DimensionMismatch {
                expected: w[0].out_dim,
                got: w[1].in_dim,
            });
        }
    }
    if specs.iter().any(|s| s.in_dim == 0 || s.out_dim == 0) {
        return Err(Error::InvalidConfig(
            "layer dimensions must be positive".into(),
        ));
    }
    if specs.last().map(|s| s.activation) != Some(Activation::LogSig) {
        return Err(Error::InvalidConfig(
            "output layer must be log-sigmoid".into(),
        ));
    }
    Ok(())
}

impl Network {
    /// All-zero network.
    pub fn zeros(specs: Vec<LayerSpec>) -> Result<Self> {
        validate_specs(&specs)?;
        let n = specs.iter().map(LayerSpec::param_count).sum();
        Ok(Network {
            specs,
            params: vec![0.0; n],
            normalizer: None,
        })
    }

    /// Weights and biases uniform in [-0.5, 0.5] / sqrt(in_dim), seeded.
    pub fn init_random(specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut off = 0;
        for s in &net.specs {
            let scale = 1.0 / (s.in_dim as f64).sqrt();
            for p in &mut net.params[off..off + s.param_count()] {
                *p = rng.random_range(-0.5..0.5) * scale;
            }
            off += s.param_count();
        }
        Ok(net)
    }

    pub fn from_parts(
        specs: Vec<LayerSpec>,
        params: Vec<f64>,
        normalizer: Option<Normalizer>,
    ) -> Result<Self> {
        validate_specs(&specs)?;
        let n: usize = specs.iter().map(LayerSpec::param_count).sum();
        if params.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: params.len(),
            });
        }
        if normalizer.is_some() && specs[0].in_dim != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: specs[0].in_dim,
            });
        }
        Ok(Network {
            specs,
            params,
            normalizer,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn in_dim(&self) -> usize {
        self.specs[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.specs[self.specs.len() - 1].out_dim
    }

    /// (weights, biases) of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        layer_slices(&self.specs, &self.params, l)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let off: usize = self.specs[..l].iter().map(LayerSpec::param_count).sum();
        let s = self.specs[l];
        let (w, rest) = self.params[off..off + s.param_count()].split_at_mut(s.in_dim * s.out_dim);
        (w, rest)
    }

    /// Forward pass on an already-normalized input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let mut ws = Workspace::new(&self.specs);
        forward_with(&self.specs, &self.params, x, &mut ws);
        Ok(ws.output().to_vec())
    }

    /// Normalizes raw features (if the network carries a normalizer) and
    /// forwards them.
    pub fn outputs(&self, f: &FeatureVector) -> Result<Vec<f64>> {
        if !f.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        match &self.normalizer {
            Some(n) => self.forward(&n.apply(f)),
            None => self.forward(f.as_array()),
        }
    }

    /// Thresholds each output with a strict `>` comparison.
    pub fn classify(&self, f: &FeatureVector, threshold: f64) -> Result<FaultLabel> {
        let y = self.outputs(f)?;
        Ok(FaultLabel::from_outputs(&y, threshold))
    }
}

pub(crate) fn layer_slices<'a>(
    specs: &[LayerSpec],
    params: &'a [f64],
    l: usize,
) -> (&'a [f64], &'a [f64]) {
    let off: usize = specs[..l].iter().map(LayerSpec::param_count).sum();
    let s = specs[l];
    params[off..off + s.param_count()].split_at(s.in_dim * s.out_dim)
}

/// Per-layer activation buffers, reusable across samples.
pub(crate) struct Workspace {
    pub acts: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(specs: &[LayerSpec]) -> Self {
        let mut acts = vec![vec![0.0; specs[0].in_dim]];
        acts.extend(specs.iter().map(|s| vec![0.0; s.out_dim]));
        Workspace { acts }
    }

    pub fn output(&self) -> &[f64] {
        &self.acts[self.acts.len() - 1]
    }
}

pub(crate) fn forward_with(specs: &[LayerSpec], params: &[f64], x: &[f64], ws: &mut Workspace) {
    ws.acts[0].copy_from_slice(x);
    let mut off = 0;
    for (l, s) in specs.iter().enumerate() {
        let (w, b) = params[off..off + s.param_count()].split_at(s.in_dim * s.out_dim);
        off += s.param_count();
        let (prev, next) = ws.acts.split_at_mut(l + 1);
        let input = &prev[l];
        let out = &mut next[0];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &w[i * s.in_dim..(i + 1) * s.in_dim];
            let z = b[i] + row.iter().zip(input).map(|(a, v)| a * v).sum::<f64>();
            *o = s.activation.apply(z);
        }
    }
}

/// Writes the `out_dim` Jacobian rows of one sample into `rows`
/// (row-major, `out_dim x params.len()`), for residual `target - output`.
/// Expects `ws` to hold the forward pass of that sample.
pub(crate) fn sample_jacobian(
    specs: &[LayerSpec],
    params: &[f64],
    ws: &Workspace,
    deltas: &mut [Vec<f64>],
    rows: &mut [f64],
) {
    let n_params = params.len();
    let n_layers = specs.len();
    let out_dim = specs[n_layers - 1].out_dim;
    let offsets: Vec<usize> = specs
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.param_count();
            Some(o)
        })
        .collect();
    for o in 0..out_dim {
        let row = &mut rows[o * n_params..(o + 1) * n_params];
        let last = &specs[n_layers - 1];
        let y = ws.acts[n_layers][o];
        deltas[n_layers - 1].iter_mut().for_each(|d| *d = 0.0);
        deltas[n_layers - 1][o] = -last.activation.derivative_from_output(y);
        for l in (0..n_layers).rev() {
            let s = &specs[l];
            let input = &ws.acts[l];
            let off = offsets[l];
            let (wrow, brow) = row[off..off + s.param_count()].split_at_mut(s.in_dim * s.out_dim);
            let delta = &deltas[l];
            for i in 0..s.out_dim {
                let d = delta[i];
                let dst = &mut wrow[i * s.in_dim..(i + 1) * s.in_dim];
                if d == 0.0 {
                    dst.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    for (v, a) in dst.iter_mut().zip(input) {
                        *v = d * a;
                    }
                }
                brow[i] = d;
            }
            if l > 0 {
                let w = &params[off..off + s.in_dim * s.out_dim];
                let prev_act = specs[l - 1].activation;
                let (lo, hi) = deltas.split_at_mut(l);
                let cur = &hi[0];
                let prev = &mut lo[l - 1];
                prev.iter_mut().for_each(|v| *v = 0.0);
                for (i, &d) in cur.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let wr = &w[i * s.in_dim..(i + 1) * s.in_dim];
                    for (p, wv) in prev.iter_mut().zip(wr) {
                        *p += wv * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= prev_act.derivative_from_output(*a);
                }
            }
        }
    }
}

pub(crate) fn delta_buffers(specs: &[LayerSpec]) -> Vec<Vec<f64>> {
    specs.iter().map(|s| vec![0.0; s.out_dim]).collect()
}
