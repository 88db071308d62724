//! Coefficient counts and per-sample FLOPs for each model family.

use serde::{Deserialize, Serialize};

use crate::baselines::GmpConfig;
use crate::error::{Error, Result};
use crate::network::RvtdcnnArch;

/// FLOPs charged per evaluation of a smooth activation function.
pub const DEFAULT_ACT_COST: u64 = 13;

fn default_act_cost() -> u64 {
    DEFAULT_ACT_COST
}

pub fn rvtdcnn_coeff_count(arch: &RvtdcnnArch) -> u64 {
    let (r, s, z, l, t) = (
        arch.kernel_rows as u64,
        arch.kernel_cols as u64,
        arch.kernel_depth as u64,
        arch.kernels as u64,
        arch.fc_neurons as u64,
    );
    let bc = arch.map_len() as u64;
    (r * s * z * l + l) + (bc * l * t + t) + (t * 2 + 2)
}

pub fn rvtdcnn_flops(arch: &RvtdcnnArch) -> u64 {
    rvtdcnn_flops_with(arch, DEFAULT_ACT_COST)
}

pub fn rvtdcnn_flops_with(arch: &RvtdcnnArch, act_cost: u64) -> u64 {
    let (r, s, z, l, t) = (
        arch.kernel_rows as u64,
        arch.kernel_cols as u64,
        arch.kernel_depth as u64,
        arch.kernels as u64,
        arch.fc_neurons as u64,
    );
    let bc = arch.map_len() as u64;
    (2 * r * s * z * bc * l + act_cost * bc * l) + (2 * bc * l * t + act_cost * t) + 4 * t
}

pub fn gmp_coeff_count(cfg: &GmpConfig) -> u64 {
    2 * cfg.term_count() as u64
}

/// `8 * terms - 2`; zero for an empty configuration.
pub fn gmp_flops(cfg: &GmpConfig) -> u64 {
    (8 * cfg.term_count() as u64).saturating_sub(2)
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::Config(format!(
            "layer widths {widths:?} need at least two entries, all >= 1"
        )));
    }
    Ok(())
}

pub fn mlp_coeff_count(widths: &[usize]) -> Result<u64> {
    check_widths(widths)?;
    Ok(widths.windows(2).map(|w| (w[0] as u64 + 1) * w[1] as u64).sum())
}

/// Multiply-adds for every layer plus `act_cost` per hidden neuron. The output
/// layer is linear.
pub fn mlp_flops(widths: &[usize], act_cost: u64) -> Result<u64> {
    check_widths(widths)?;
    let last = widths.len() - 2;
    Ok(widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i == last { 0 } else { act_cost * w[1] as u64 };
            2 * w[0] as u64 * w[1] as u64 + act
        })
        .sum())
}

/// One LSTM layer followed by a fully connected tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmSpec {
    /// Inputs per time step.
    pub n_in: usize,
    pub units: usize,
    /// Hidden widths of the fully connected tail.
    pub fc_hidden: Vec<usize>,
    pub outputs: usize,
    /// Time steps unrolled per output sample (memory depth plus one).
    pub steps: usize,
    /// FLOPs per activation in the tail. Rectifiers are a comparison, so 0.
    pub fc_act_cost: u64,
}

impl Default for LstmSpec {
    /// The baseline LSTM: I/Q in, 8 units, ReLU tail of 7 and 5, four steps.
    fn default() -> Self {
        Self {
            n_in: 2,
            units: 8,
            fc_hidden: vec![7, 5],
            outputs: 2,
            steps: 4,
            fc_act_cost: 0,
        }
    }
}

impl LstmSpec {
    fn tail(&self) -> Vec<usize> {
        let mut w = vec![self.units];
        w.extend(&self.fc_hidden);
        w.push(self.outputs);
        w
    }
}

/// `4 I (N_in + I + 1)`.
pub fn lstm_layer_coeff_count(n_in: usize, units: usize) -> u64 {
    4 * units as u64 * (n_in as u64 + units as u64 + 1)
}

/// `I (8 N_in + 8 I + 71)` for one time step.
pub fn lstm_layer_flops(n_in: usize, units: usize) -> u64 {
    units as u64 * (8 * n_in as u64 + 8 * units as u64 + 71)
}

pub fn lstm_coeff_count(spec: &LstmSpec) -> Result<u64> {
    if spec.units == 0 {
        return Ok(0);
    }
    Ok(lstm_layer_coeff_count(spec.n_in, spec.units) + mlp_coeff_count(&spec.tail())?)
}

pub fn lstm_flops(spec: &LstmSpec) -> Result<u64> {
    if spec.units == 0 {
        return Ok(0);
    }
    Ok(spec.steps as u64 * lstm_layer_flops(spec.n_in, spec.units) + mlp_flops(&spec.tail(), spec.fc_act_cost)?)
}

/// Model description accepted by the complexity calculator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComplexityInput {
    Rvtdcnn {
        #[serde(flatten)]
        arch: RvtdcnnArch,
        #[serde(default = "default_act_cost")]
        act_cost: u64,
    },
    Gmp {
        #[serde(flatten)]
        config: GmpConfig,
    },
    Mlp {
        widths: Vec<usize>,
        #[serde(default = "default_act_cost")]
        act_cost: u64,
    },
    Lstm {
        #[serde(flatten)]
        spec: LstmSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    pub coefficients: u64,
    pub flops: u64,
}

pub fn complexity(input: &ComplexityInput) -> Result<Complexity> {
    Ok(match input {
        ComplexityInput::Rvtdcnn { arch, act_cost } => {
            arch.validate()?;
            Complexity {
                coefficients: rvtdcnn_coeff_count(arch),
                flops: rvtdcnn_flops_with(arch, *act_cost),
            }
        }
        ComplexityInput::Gmp { config } => {
            config.validate()?;
            Complexity {
                coefficients: gmp_coeff_count(config),
                flops: gmp_flops(config),
            }
        }
        ComplexityInput::Mlp { widths, act_cost } => Complexity {
            coefficients: mlp_coeff_count(widths)?,
            flops: mlp_flops(widths, *act_cost)?,
        },
        ComplexityInput::Lstm { spec } => Complexity {
            coefficients: lstm_coeff_count(spec)?,
            flops: lstm_flops(spec)?,
        },
    })
}
