//! Fully connected feedforward networks used as baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::ActivationKind;
use super::rvtdcnn::glorot_bound;
use super::Regressor;
use crate::dataset::{FeatureGraph, GRAPH_ROWS};
use crate::error::{Error, Result};

/// Weights are stored output-major: `weights[o * inputs + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: ActivationKind,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: ActivationKind) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn check(&self) -> Result<()> {
        if self.weights.len() != self.inputs * self.outputs || self.biases.len() != self.outputs {
            return Err(Error::Shape(format!(
                "dense layer {}x{} has {} weights and {} biases",
                self.inputs,
                self.outputs,
                self.weights.len(),
                self.biases.len()
            )));
        }
        self.activation.validate()
    }

    fn preact(&self, input: &[f64], out: &mut [f64]) {
        for (o, z) in out.iter_mut().enumerate() {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *z = self.biases[o] + w.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

pub fn mlp_forward(layers: &[DenseLayer], input: &[f64]) -> Result<Vec<f64>> {
    let mut cur = input.to_vec();
    for (k, layer) in layers.iter().enumerate() {
        layer.check()?;
        if layer.inputs != cur.len() {
            return Err(Error::Shape(format!(
                "layer {k} expects {} inputs, got {}",
                layer.inputs,
                cur.len()
            )));
        }
        let mut next = vec![0.0; layer.outputs];
        layer.preact(&cur, &mut next);
        next.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
        cur = next;
    }
    if cur.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("mlp output".into()));
    }
    Ok(cur)
}

/// Which part of the feature graph feeds the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpInput {
    /// Every row of the graph, row-major: `5 * (M + 1)` inputs.
    Graph,
    /// The I and Q rows only: `2 * (M + 1)` inputs.
    Iq,
}

impl MlpInput {
    pub fn width(self, memory_depth: usize) -> usize {
        match self {
            MlpInput::Graph => GRAPH_ROWS * (memory_depth + 1),
            MlpInput::Iq => 2 * (memory_depth + 1),
        }
    }

    fn extract(self, graph: &FeatureGraph) -> &[f64] {
        let s = graph.as_slice();
        match self {
            MlpInput::Graph => s,
            MlpInput::Iq => &s[..2 * graph.cols()],
        }
    }
}

/// Baseline network shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpPreset {
    /// I/Q plus envelope powers, one hidden tanh layer of 17.
    Arvtdnn,
    /// I/Q only, one hidden tanh layer of 35.
    Rvtdnn,
    /// I/Q only, three sigmoid hidden layers of 17.
    Dnn,
}

impl MlpPreset {
    pub fn input(self) -> MlpInput {
        match self {
            MlpPreset::Arvtdnn => MlpInput::Graph,
            MlpPreset::Rvtdnn | MlpPreset::Dnn => MlpInput::Iq,
        }
    }

    pub fn hidden(self) -> (Vec<usize>, ActivationKind) {
        match self {
            MlpPreset::Arvtdnn => (vec![17], ActivationKind::Tanh),
            MlpPreset::Rvtdnn => (vec![35], ActivationKind::Tanh),
            MlpPreset::Dnn => (vec![17, 17, 17], ActivationKind::Sigmoid),
        }
    }

    /// Layer widths from input to output.
    pub fn widths(self, memory_depth: usize) -> Vec<usize> {
        let mut w = vec![self.input().width(memory_depth)];
        w.extend(self.hidden().0);
        w.push(2);
        w
    }

    pub fn name(self) -> &'static str {
        match self {
            MlpPreset::Arvtdnn => "arvtdnn",
            MlpPreset::Rvtdnn => "rvtdnn",
            MlpPreset::Dnn => "dnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input: MlpInput,
    pub memory_depth: usize,
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Glorot-initialized network with a linear two-neuron output layer.
    pub fn init(input: MlpInput, memory_depth: usize, hidden: &[usize], act: ActivationKind, seed: u64) -> Result<Self> {
        act.validate()?;
        if hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![input.width(memory_depth)];
        widths.extend_from_slice(hidden);
        widths.push(2);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let a = if k + 2 == widths.len() { ActivationKind::Linear } else { act };
                let mut layer = DenseLayer::zeros(w[0], w[1], a);
                let bound = glorot_bound(w[0], w[1]);
                layer.weights.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
                layer
            })
            .collect();
        Ok(Self {
            input,
            memory_depth,
            layers,
        })
    }

    pub fn preset(preset: MlpPreset, memory_depth: usize, seed: u64) -> Result<Self> {
        let (hidden, act) = preset.hidden();
        Self::init(preset.input(), memory_depth, &hidden, act, seed)
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        w.extend(self.layers.last().map(|l| l.outputs));
        w
    }
}

pub struct MlpScratch {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Mlp {
    fn run(&self, graph: &FeatureGraph, s: &mut MlpScratch) {
        let input = self.input.extract(graph);
        for (k, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = s.act.split_at_mut(k);
            let inp: &[f64] = if k == 0 { input } else { &prev[k - 1] };
            layer.preact(inp, &mut s.pre[k]);
            for (a, &z) in rest[0].iter_mut().zip(&s.pre[k]) {
                *a = layer.activation.apply(z);
            }
        }
    }
}

impl Regressor for Mlp {
    type Scratch = MlpScratch;

    fn scratch(&self) -> MlpScratch {
        let sizes: Vec<usize> = self.layers.iter().map(|l| l.outputs).collect();
        let mk = || sizes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        MlpScratch {
            pre: mk(),
            act: mk(),
            delta: mk(),
        }
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
    }

    fn check_input(&self, graph: &FeatureGraph) -> Result<()> {
        for l in &self.layers {
            l.check()?;
        }
        if self.layers.last().map(|l| l.outputs) != Some(2) {
            return Err(Error::Shape("mlp must end in two outputs".into()));
        }
        let w = self.input.width(graph.memory_depth());
        if graph.memory_depth() != self.memory_depth || self.layers[0].inputs != w {
            return Err(Error::Shape(format!(
                "mlp input width {} vs graph width {w}",
                self.layers[0].inputs
            )));
        }
        Ok(())
    }

    fn predict_with(&self, graph: &FeatureGraph, s: &mut MlpScratch) -> [f64; 2] {
        self.run(graph, s);
        let out = s.act.last().expect("at least one layer");
        [out[0], out[1]]
    }

    fn accumulate_gradient(&self, graph: &FeatureGraph, label: [f64; 2], grad: &mut [f64], s: &mut MlpScratch) -> f64 {
        self.run(graph, s);
        let nl = self.layers.len();
        let out = &s.act[nl - 1];
        let d = [out[0] - label[0], out[1] - label[1]];

        let mut offsets = Vec::with_capacity(nl);
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.param_count();
        }

        for k in (0..nl).rev() {
            let layer = &self.layers[k];
            let (lower, upper) = s.delta.split_at_mut(k);
            let delta = &mut upper[0];
            if k == nl - 1 {
                for o in 0..2 {
                    delta[o] = d[o] * layer.activation.derivative(s.pre[k][o], s.act[k][o]);
                }
            }
            let input = if k == 0 { self.input.extract(graph) } else { &s.act[k - 1][..] };
            let base = offsets[k];
            let nw = layer.weights.len();
            for o in 0..layer.outputs {
                let g = &mut grad[base + o * layer.inputs..base + (o + 1) * layer.inputs];
                for (gi, &x) in g.iter_mut().zip(input) {
                    *gi += delta[o] * x;
                }
                grad[base + nw + o] += delta[o];
            }
            if k > 0 {
                let prev = &self.layers[k - 1];
                let below = &mut lower[k - 1];
                for (i, b) in below.iter_mut().enumerate().take(layer.inputs) {
                    let acc: f64 = delta
                        .iter()
                        .enumerate()
                        .map(|(o, d)| layer.weights[o * layer.inputs + i] * d)
                        .sum();
                    *b = acc * prev.activation.derivative(s.pre[k - 1][i], s.act[k - 1][i]);
                }
            }
        }
        d[0] * d[0] + d[1] * d[1]
    }
}
