//! The convolutional model: one valid, stride-1 convolution layer over the
//! feature graph, a fully connected layer and a linear two-neuron output.
//!
//! Convolution is cross-correlation (kernels are not flipped):
//! `h_l(b, c) = sum_{i<r, j<s} X(b+i, c+j) w_l(i, j)`, `u_l = f_c(h_l + b_l)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::ActivationKind;
use super::Regressor;
use crate::dataset::{FeatureGraph, GRAPH_ROWS};
use crate::error::{Error, Result};

pub const OUTPUTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RvtdcnnArch {
    pub memory_depth: usize,
    pub kernels: usize,
    pub kernel_rows: usize,
    pub kernel_cols: usize,
    pub kernel_depth: usize,
    pub fc_neurons: usize,
    pub conv_activation: ActivationKind,
    pub fc_activation: ActivationKind,
}

impl Default for RvtdcnnArch {
    fn default() -> Self {
        Self {
            memory_depth: 3,
            kernels: 3,
            kernel_rows: 3,
            kernel_cols: 3,
            kernel_depth: 1,
            fc_neurons: 6,
            conv_activation: ActivationKind::Tanh,
            fc_activation: ActivationKind::Tanh,
        }
    }
}

impl RvtdcnnArch {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_depth != 1 {
            return Err(Error::Unsupported(format!("kernel depth {}", self.kernel_depth)));
        }
        if self.kernels == 0 || self.kernel_rows == 0 || self.kernel_cols == 0 {
            return Err(Error::Config("kernel count and size must be >= 1".into()));
        }
        if self.kernel_rows > GRAPH_ROWS {
            return Err(Error::Config(format!(
                "kernel rows {} exceed graph rows {GRAPH_ROWS}",
                self.kernel_rows
            )));
        }
        if self.kernel_cols > self.memory_depth + 1 {
            return Err(Error::Config(format!(
                "kernel cols {} exceed graph cols {}",
                self.kernel_cols,
                self.memory_depth + 1
            )));
        }
        self.conv_activation.validate()?;
        self.fc_activation.validate()
    }

    /// Feature-map rows `B = 5 - r + 1`.
    pub fn map_rows(&self) -> usize {
        GRAPH_ROWS - self.kernel_rows + 1
    }

    /// Feature-map cols `C = (M + 1) - s + 1`.
    pub fn map_cols(&self) -> usize {
        self.memory_depth + 1 - self.kernel_cols + 1
    }

    pub fn map_len(&self) -> usize {
        self.map_rows() * self.map_cols()
    }

    /// Length of the flattened feature vector, `L * B * C`.
    pub fn feature_len(&self) -> usize {
        self.kernels * self.map_len()
    }

    pub fn kernel_len(&self) -> usize {
        self.kernel_rows * self.kernel_cols * self.kernel_depth
    }

    pub fn conv_param_count(&self) -> usize {
        self.kernels * self.kernel_len() + self.kernels
    }

    /// Parameters of the fully connected and output layers.
    pub fn head_param_count(&self) -> usize {
        self.feature_len() * self.fc_neurons + self.fc_neurons + self.fc_neurons * OUTPUTS + OUTPUTS
    }

    pub fn param_count(&self) -> usize {
        self.conv_param_count() + self.head_param_count()
    }
}

/// All trainable parameters.
///
/// Layouts: `conv_kernels[l][i][j]`, `fc_weights[feature][neuron]`,
/// `out_weights[neuron][output]`, all row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvtdcnnParams {
    pub conv_kernels: Vec<f64>,
    pub conv_biases: Vec<f64>,
    pub fc_weights: Vec<f64>,
    pub fc_biases: Vec<f64>,
    pub out_weights: Vec<f64>,
    pub out_biases: Vec<f64>,
}

impl RvtdcnnParams {
    pub fn zeros(arch: &RvtdcnnArch) -> Self {
        Self {
            conv_kernels: vec![0.0; arch.kernels * arch.kernel_len()],
            conv_biases: vec![0.0; arch.kernels],
            fc_weights: vec![0.0; arch.feature_len() * arch.fc_neurons],
            fc_biases: vec![0.0; arch.fc_neurons],
            out_weights: vec![0.0; arch.fc_neurons * OUTPUTS],
            out_biases: vec![0.0; OUTPUTS],
        }
    }

    pub fn check(&self, arch: &RvtdcnnArch) -> Result<()> {
        let z = Self::zeros(arch);
        let pairs = [
            ("conv_kernels", self.conv_kernels.len(), z.conv_kernels.len()),
            ("conv_biases", self.conv_biases.len(), z.conv_biases.len()),
            ("fc_weights", self.fc_weights.len(), z.fc_weights.len()),
            ("fc_biases", self.fc_biases.len(), z.fc_biases.len()),
            ("out_weights", self.out_weights.len(), z.out_weights.len()),
            ("out_biases", self.out_biases.len(), z.out_biases.len()),
        ];
        for (name, got, want) in pairs {
            if got != want {
                return Err(Error::Shape(format!("{name}: expected {want}, got {got}")));
            }
        }
        if self.blocks().iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric("network parameters".into()));
        }
        Ok(())
    }

    fn blocks(&self) -> [&Vec<f64>; 6] {
        [
            &self.conv_kernels,
            &self.conv_biases,
            &self.fc_weights,
            &self.fc_biases,
            &self.out_weights,
            &self.out_biases,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut Vec<f64>; 6] {
        [
            &mut self.conv_kernels,
            &mut self.conv_biases,
            &mut self.fc_weights,
            &mut self.fc_biases,
            &mut self.out_weights,
            &mut self.out_biases,
        ]
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Conv kernels, conv biases, FC weights, FC biases, output weights, output biases.
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().iter().flat_map(|b| b.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length");
        let mut offset = 0;
        for block in self.blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }

    /// Offset of the first head (FC + output) parameter in the flat layout.
    pub fn head_offset(&self) -> usize {
        self.conv_kernels.len() + self.conv_biases.len()
    }

    pub fn head_flat(&self) -> Vec<f64> {
        self.to_flat()[self.head_offset()..].to_vec()
    }

    pub fn set_head_flat(&mut self, head: &[f64]) {
        let mut flat = self.to_flat();
        let off = self.head_offset();
        flat[off..].copy_from_slice(head);
        self.set_flat(&flat);
    }

    pub fn scale_output(&mut self, factor: f64) {
        self.out_weights.iter_mut().for_each(|w| *w *= factor);
        self.out_biases.iter_mut().for_each(|b| *b *= factor);
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(arch: &RvtdcnnArch, seed: u64) -> Result<RvtdcnnParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = RvtdcnnParams::zeros(arch);
    let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
        let bound = glorot_bound(fan_in, fan_out);
        w.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
    };
    fill(&mut p.conv_kernels, arch.kernel_len(), arch.kernels * arch.kernel_len());
    fill(&mut p.fc_weights, arch.feature_len(), arch.fc_neurons);
    fill(&mut p.out_weights, arch.fc_neurons, OUTPUTS);
    Ok(p)
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Activated feature maps, `L x B x C`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    pub kernels: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMaps {
    pub fn get(&self, l: usize, b: usize, c: usize) -> f64 {
        self.data[(l * self.rows + b) * self.cols + c]
    }
}

fn check_graph(graph: &FeatureGraph, arch: &RvtdcnnArch) -> Result<()> {
    if graph.memory_depth() != arch.memory_depth {
        return Err(Error::Shape(format!(
            "graph depth {} vs architecture depth {}",
            graph.memory_depth(),
            arch.memory_depth
        )));
    }
    Ok(())
}

/// Pre-activation convolution sums `h_l(b, c) + b_l`, kernel-major then row-major.
fn conv_preact(graph: &FeatureGraph, params: &RvtdcnnParams, arch: &RvtdcnnArch, out: &mut [f64]) {
    let (r, s) = (arch.kernel_rows, arch.kernel_cols);
    let (rows, cols) = (arch.map_rows(), arch.map_cols());
    let x = graph.as_slice();
    let gcols = graph.cols();
    for l in 0..arch.kernels {
        let kernel = &params.conv_kernels[l * r * s..(l + 1) * r * s];
        for b in 0..rows {
            for c in 0..cols {
                let mut acc = params.conv_biases[l];
                for i in 0..r {
                    let xrow = &x[(b + i) * gcols + c..(b + i) * gcols + c + s];
                    let krow = &kernel[i * s..(i + 1) * s];
                    for j in 0..s {
                        acc += xrow[j] * krow[j];
                    }
                }
                out[(l * rows + b) * cols + c] = acc;
            }
        }
    }
}

pub fn conv_forward(graph: &FeatureGraph, params: &RvtdcnnParams, arch: &RvtdcnnArch) -> Result<FeatureMaps> {
    arch.validate()?;
    params.check(arch)?;
    check_graph(graph, arch)?;
    let mut data = vec![0.0; arch.feature_len()];
    conv_preact(graph, params, arch, &mut data);
    data.iter_mut().for_each(|v| *v = arch.conv_activation.apply(*v));
    Ok(FeatureMaps {
        kernels: arch.kernels,
        rows: arch.map_rows(),
        cols: arch.map_cols(),
        data,
    })
}

/// `u_1(1,1), u_1(1,2), ..., u_1(B,C), u_2(1,1), ..., u_L(B,C)`.
pub fn flatten(maps: &FeatureMaps) -> Vec<f64> {
    maps.data.clone()
}

pub fn unflatten(m: &[f64], kernels: usize, rows: usize, cols: usize) -> Result<FeatureMaps> {
    if m.len() != kernels * rows * cols {
        return Err(Error::Shape(format!(
            "{} features cannot form {kernels}x{rows}x{cols} maps",
            m.len()
        )));
    }
    Ok(FeatureMaps {
        kernels,
        rows,
        cols,
        data: m.to_vec(),
    })
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    pub conv_pre: Vec<f64>,
    pub features: Vec<f64>,
    pub fc_pre: Vec<f64>,
    pub fc_out: Vec<f64>,
    pub output: [f64; 2],
    fc_delta: Vec<f64>,
}

impl Trace {
    pub fn new(arch: &RvtdcnnArch) -> Self {
        Self {
            conv_pre: vec![0.0; arch.feature_len()],
            features: vec![0.0; arch.feature_len()],
            fc_pre: vec![0.0; arch.fc_neurons],
            fc_out: vec![0.0; arch.fc_neurons],
            output: [0.0; 2],
            fc_delta: vec![0.0; arch.fc_neurons],
        }
    }
}

/// Forward pass into a reusable trace. Shapes are assumed checked.
pub fn forward_trace(params: &RvtdcnnParams, arch: &RvtdcnnArch, graph: &FeatureGraph, t: &mut Trace) {
    conv_preact(graph, params, arch, &mut t.conv_pre);
    for (f, &h) in t.features.iter_mut().zip(&t.conv_pre) {
        *f = arch.conv_activation.apply(h);
    }
    let tn = arch.fc_neurons;
    t.fc_pre.copy_from_slice(&params.fc_biases);
    for (i, &m) in t.features.iter().enumerate() {
        let row = &params.fc_weights[i * tn..(i + 1) * tn];
        for (z, &w) in t.fc_pre.iter_mut().zip(row) {
            *z += m * w;
        }
    }
    for (a, &z) in t.fc_out.iter_mut().zip(&t.fc_pre) {
        *a = arch.fc_activation.apply(z);
    }
    let mut out = [params.out_biases[0], params.out_biases[1]];
    for (ti, &a) in t.fc_out.iter().enumerate() {
        out[0] += a * params.out_weights[ti * OUTPUTS];
        out[1] += a * params.out_weights[ti * OUTPUTS + 1];
    }
    t.output = out;
}

/// Predicted `(I, Q)` for one graph.
pub fn forward(params: &RvtdcnnParams, arch: &RvtdcnnArch, graph: &FeatureGraph) -> Result<(f64, f64)> {
    arch.validate()?;
    params.check(arch)?;
    check_graph(graph, arch)?;
    let mut t = Trace::new(arch);
    forward_trace(params, arch, graph, &mut t);
    if !(t.output[0].is_finite() && t.output[1].is_finite()) {
        return Err(Error::Numeric("network output".into()));
    }
    Ok((t.output[0], t.output[1]))
}

/// Parameters bundled with their architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rvtdcnn {
    pub arch: RvtdcnnArch,
    #[serde(flatten)]
    pub params: RvtdcnnParams,
}

impl Rvtdcnn {
    pub fn new(arch: RvtdcnnArch, params: RvtdcnnParams) -> Result<Self> {
        arch.validate()?;
        params.check(&arch)?;
        Ok(Self { arch, params })
    }

    pub fn init(arch: RvtdcnnArch, seed: u64) -> Result<Self> {
        let params = init_params(&arch, seed)?;
        Ok(Self { arch, params })
    }

    /// Backward pass from output sensitivities `dout` given a completed trace.
    /// Adds into `grad` (flat layout).
    pub fn backward(&self, graph: &FeatureGraph, t: &mut Trace, dout: [f64; 2], grad: &mut [f64]) {
        let arch = &self.arch;
        let p = &self.params;
        let tn = arch.fc_neurons;
        let kl = arch.kernel_len();
        let n_conv_k = arch.kernels * kl;
        let off_cb = n_conv_k;
        let off_fw = off_cb + arch.kernels;
        let off_fb = off_fw + arch.feature_len() * tn;
        let off_ow = off_fb + tn;
        let off_ob = off_ow + tn * OUTPUTS;

        grad[off_ob] += dout[0];
        grad[off_ob + 1] += dout[1];
        let mut dz = std::mem::take(&mut t.fc_delta);
        for ti in 0..tn {
            let a = t.fc_out[ti];
            grad[off_ow + ti * OUTPUTS] += a * dout[0];
            grad[off_ow + ti * OUTPUTS + 1] += a * dout[1];
            let da = p.out_weights[ti * OUTPUTS] * dout[0] + p.out_weights[ti * OUTPUTS + 1] * dout[1];
            dz[ti] = da * arch.fc_activation.derivative(t.fc_pre[ti], a);
            grad[off_fb + ti] += dz[ti];
        }

        let (r, s) = (arch.kernel_rows, arch.kernel_cols);
        let (rows, cols) = (arch.map_rows(), arch.map_cols());
        let x = graph.as_slice();
        let gcols = graph.cols();
        for (i, &m) in t.features.iter().enumerate() {
            let wrow = &p.fc_weights[i * tn..(i + 1) * tn];
            let grow = &mut grad[off_fw + i * tn..off_fw + (i + 1) * tn];
            let mut dm = 0.0;
            for ti in 0..tn {
                grow[ti] += m * dz[ti];
                dm += wrow[ti] * dz[ti];
            }
            let dh = dm * arch.conv_activation.derivative(t.conv_pre[i], m);
            if dh == 0.0 {
                continue;
            }
            let l = i / (rows * cols);
            let b = (i / cols) % rows;
            let c = i % cols;
            grad[off_cb + l] += dh;
            let gk = &mut grad[l * kl..(l + 1) * kl];
            for ki in 0..r {
                for kj in 0..s {
                    gk[ki * s + kj] += dh * x[(b + ki) * gcols + c + kj];
                }
            }
        }
        t.fc_delta = dz;
    }
}

impl Rvtdcnn {
    /// Rows `d out_I / d theta_f` and `d out_Q / d theta_f` over the head
    /// parameters, written into `jac` as two consecutive rows.
    pub fn head_jacobian(&self, t: &Trace, jac: &mut [f64]) {
        let arch = &self.arch;
        let p = &self.params;
        let tn = arch.fc_neurons;
        let nf = arch.feature_len();
        let width = arch.head_param_count();
        let off_fb = nf * tn;
        let off_ow = off_fb + tn;
        let off_ob = off_ow + tn * OUTPUTS;
        let (row_i, row_q) = jac[..2 * width].split_at_mut(width);
        for (o, row) in [row_i, row_q].into_iter().enumerate() {
            row.fill(0.0);
            for ti in 0..tn {
                let dz = p.out_weights[ti * OUTPUTS + o] * arch.fc_activation.derivative(t.fc_pre[ti], t.fc_out[ti]);
                row[off_fb + ti] = dz;
                row[off_ow + ti * OUTPUTS + o] = t.fc_out[ti];
                for (i, &m) in t.features.iter().enumerate() {
                    row[i * tn + ti] = m * dz;
                }
            }
            row[off_ob + o] = 1.0;
        }
    }
}

impl Regressor for Rvtdcnn {
    type Scratch = Trace;

    fn scratch(&self) -> Trace {
        Trace::new(&self.arch)
    }

    fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.params.to_flat()
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        self.params.set_flat(flat);
    }

    fn check_input(&self, graph: &FeatureGraph) -> Result<()> {
        check_graph(graph, &self.arch)
    }

    fn predict_with(&self, graph: &FeatureGraph, t: &mut Trace) -> [f64; 2] {
        forward_trace(&self.params, &self.arch, graph, t);
        t.output
    }

    fn accumulate_gradient(&self, graph: &FeatureGraph, label: [f64; 2], grad: &mut [f64], t: &mut Trace) -> f64 {
        forward_trace(&self.params, &self.arch, graph, t);
        let d = [t.output[0] - label[0], t.output[1] - label[1]];
        self.backward(graph, t, d, grad);
        d[0] * d[0] + d[1] * d[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_feature_graph;
    use crate::signal::ComplexSeq;
    use num_complex::Complex64;

    fn random_graph(m: usize, seed: u64) -> FeatureGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<_> = (0..m + 1)
            .map(|_| Complex64::new(rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)))
            .collect();
        build_feature_graph(&ComplexSeq::new(x, 1.0).unwrap(), m, m).unwrap()
    }

    #[test]
    fn default_shapes() {
        let arch = RvtdcnnArch::default();
        assert_eq!((arch.map_rows(), arch.map_cols()), (3, 2));
        assert_eq!(arch.param_count(), 158);
        assert_eq!(arch.head_param_count(), 128);
        let p = init_params(&arch, 0).unwrap();
        assert_eq!(p.len(), 158);
        let maps = conv_forward(&random_graph(3, 1), &p, &arch).unwrap();
        assert_eq!((maps.kernels, maps.rows, maps.cols), (3, 3, 2));
    }

    #[test]
    fn invalid_arch() {
        let bad = RvtdcnnArch {
            kernel_rows: 6,
            ..RvtdcnnArch::default()
        };
        assert!(bad.validate().is_err());
        let bad = RvtdcnnArch {
            kernel_cols: 5,
            ..RvtdcnnArch::default()
        };
        assert!(bad.validate().is_err());
        let bad = RvtdcnnArch {
            kernel_depth: 2,
            ..RvtdcnnArch::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn identity_kernel_reproduces_graph() {
        let arch = RvtdcnnArch {
            kernels: 1,
            kernel_rows: 1,
            kernel_cols: 1,
            conv_activation: ActivationKind::Linear,
            ..RvtdcnnArch::default()
        };
        let mut p = RvtdcnnParams::zeros(&arch);
        p.conv_kernels[0] = 1.0;
        let g = random_graph(3, 2);
        let maps = conv_forward(&g, &p, &arch).unwrap();
        assert_eq!(maps.data, g.as_slice());
    }

    #[test]
    fn zero_kernel_gives_activated_bias() {
        let arch = RvtdcnnArch::default();
        let mut p = RvtdcnnParams::zeros(&arch);
        p.conv_biases = vec![0.3, -0.2, 1.1];
        let maps = conv_forward(&random_graph(3, 3), &p, &arch).unwrap();
        for l in 0..3 {
            for b in 0..3 {
                for c in 0..2 {
                    assert_eq!(maps.get(l, b, c), p.conv_biases[l].tanh());
                }
            }
        }
    }

    #[test]
    fn conv_matches_direct_sum() {
        let arch = RvtdcnnArch {
            kernel_rows: 2,
            kernel_cols: 3,
            kernels: 2,
            conv_activation: ActivationKind::Linear,
            ..RvtdcnnArch::default()
        };
        let p = init_params(&arch, 9).unwrap();
        let g = random_graph(3, 4);
        let maps = conv_forward(&g, &p, &arch).unwrap();
        for l in 0..2 {
            for b in 0..arch.map_rows() {
                for c in 0..arch.map_cols() {
                    let mut acc = p.conv_biases[l];
                    for i in 0..2 {
                        for j in 0..3 {
                            acc += g.get(b + i, c + j) * p.conv_kernels[l * 6 + i * 3 + j];
                        }
                    }
                    assert!((maps.get(l, b, c) - acc).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn flatten_order() {
        let maps = unflatten(&[1.0, 2.0], 1, 1, 2).unwrap();
        assert_eq!(flatten(&maps), vec![1.0, 2.0]);
        let maps = FeatureMaps {
            kernels: 2,
            rows: 2,
            cols: 2,
            data: (0..8).map(f64::from).collect(),
        };
        let flat = flatten(&maps);
        assert_eq!(flat[..4], [maps.get(0, 0, 0), maps.get(0, 0, 1), maps.get(0, 1, 0), maps.get(0, 1, 1)]);
        assert_eq!(flat[4], maps.get(1, 0, 0));
        assert_eq!(unflatten(&flat, 2, 2, 2).unwrap(), maps);
        assert!(unflatten(&flat, 3, 2, 2).is_err());
    }

    #[test]
    fn zero_params_give_zero_output() {
        let arch = RvtdcnnArch::default();
        let p = RvtdcnnParams::zeros(&arch);
        assert_eq!(forward(&p, &arch, &random_graph(3, 5)).unwrap(), (0.0, 0.0));
        let mut p = init_params(&arch, 1).unwrap();
        p.fc_weights.iter_mut().for_each(|w| *w = 0.0);
        p.out_biases = vec![0.25, -0.5];
        assert_eq!(forward(&p, &arch, &random_graph(3, 6)).unwrap(), (0.25, -0.5));
    }

    #[test]
    fn output_layer_is_linear() {
        let arch = RvtdcnnArch::default();
        let mut p = init_params(&arch, 2).unwrap();
        p.out_biases = vec![0.1, -0.2];
        let g = random_graph(3, 7);
        let (i1, q1) = forward(&p, &arch, &g).unwrap();
        p.scale_output(2.0);
        let (i2, q2) = forward(&p, &arch, &g).unwrap();
        assert_eq!((i2, q2), (2.0 * i1, 2.0 * q1));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let arch = RvtdcnnArch::default();
        let a = init_params(&arch, 7).unwrap();
        assert_eq!(a, init_params(&arch, 7).unwrap());
        assert_ne!(a, init_params(&arch, 8).unwrap());
        let conv_bound = glorot_bound(9, 27);
        assert!(a.conv_kernels.iter().all(|w| w.abs() <= conv_bound));
        assert!(a.fc_weights.iter().all(|w| w.abs() <= glorot_bound(18, 6)));
        assert!(a.out_weights.iter().all(|w| w.abs() <= glorot_bound(6, 2)));
        assert!(a.conv_biases.iter().chain(&a.fc_biases).chain(&a.out_biases).all(|&b| b == 0.0));
        let zero = FeatureGraph::from_row_major(3, vec![0.0; 20]).unwrap();
        assert_eq!(forward(&a, &arch, &zero).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn tanh_output_bound() {
        let arch = RvtdcnnArch::default();
        for seed in 0..10 {
            let mut p = init_params(&arch, seed).unwrap();
            p.out_biases = vec![0.3, -0.1];
            let bound = |o: usize| (0..6).map(|t| p.out_weights[t * 2 + o].abs()).sum::<f64>() + p.out_biases[o].abs();
            let (i, q) = forward(&p, &arch, &random_graph(3, seed + 50)).unwrap();
            assert!(i.abs() <= bound(0) && q.abs() <= bound(1));
        }
    }

    #[test]
    fn flat_roundtrip_and_head() {
        let arch = RvtdcnnArch::default();
        let p = init_params(&arch, 3).unwrap();
        let mut q = RvtdcnnParams::zeros(&arch);
        q.set_flat(&p.to_flat());
        assert_eq!(p, q);
        assert_eq!(p.head_offset(), 30);
        let head: Vec<f64> = (0..128).map(|i| i as f64).collect();
        q.set_head_flat(&head);
        assert_eq!(q.conv_kernels, p.conv_kernels);
        assert_eq!(q.head_flat(), head);
    }

    #[test]
    fn checkpoint_json_roundtrip() {
        let net = Rvtdcnn::init(RvtdcnnArch::default(), 4).unwrap();
        let s = serde_json::to_string(&net).unwrap();
        let back: Rvtdcnn = serde_json::from_str(&s).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn shape_mismatch_errors() {
        let arch = RvtdcnnArch::default();
        let p = RvtdcnnParams::zeros(&arch);
        assert!(forward(&p, &arch, &random_graph(2, 1)).is_err());
        let mut bad = p.clone();
        bad.fc_biases.pop();
        assert!(matches!(forward(&bad, &arch, &random_graph(3, 1)), Err(Error::Shape(_))));
    }
}
