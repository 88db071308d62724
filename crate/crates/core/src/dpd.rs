//! Indirect-learning predistortion: fit a post-inverse of the amplifier on
//! gain-normalized output to input, then run it ahead of the amplifier.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{dpd_dataset, graph_at, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{nmse_db_slices, signal_acpr_db, ChannelPlan};
use crate::network::rvtdcnn::{forward_trace, Trace};
use crate::network::{Rvtdcnn, RvtdcnnArch};
use crate::pa_sim::Transmitter;
use crate::signal::ComplexSeq;
use crate::training::{mse_cost, train_two_stage, AdamConfig, LmConfig, TwoStageOutcome};

/// `|g|` for the least-squares scalar `g` minimizing `|y - g x|^2`.
pub fn estimate_linear_gain(x: &ComplexSeq, y: &ComplexSeq) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let energy: f64 = x.samples().iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::Degenerate("all-zero input for gain estimate".into()));
    }
    let cross: Complex64 = x.samples().iter().zip(y.samples()).map(|(a, b)| a.conj() * b).sum();
    let g = (cross / energy).norm();
    if g == 0.0 {
        return Err(Error::Degenerate("output uncorrelated with input".into()));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpdConfig {
    /// Peak amplitude the drive is scaled to before it reaches the amplifier.
    pub drive_peak: f64,
    /// Largest predistorted amplitude considered safe for the amplifier.
    pub clip_ceiling: f64,
    pub count: usize,
    pub split_seed: u64,
    pub init_seed: u64,
}

impl Default for DpdConfig {
    fn default() -> Self {
        Self {
            drive_peak: 0.7,
            clip_ceiling: 1.2,
            count: 7000,
            split_seed: 0,
            init_seed: 0,
        }
    }
}

impl DpdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.drive_peak > 0.0 && self.clip_ceiling > 0.0) {
            return Err(Error::Config("drive peak and clip ceiling must be > 0".into()));
        }
        if self.count == 0 {
            return Err(Error::Config("dpd training count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpdResult {
    pub acpr_before: (f64, f64),
    pub acpr_after: (f64, f64),
    pub nmse_inverse_db: f64,
    pub gain_estimate: f64,
    /// Peak amplitude of the predistorted drive.
    pub predistorted_peak: f64,
    /// Samples of the predistorted drive above the clip ceiling.
    pub clip_violations: usize,
    /// NMSE of the linearized output against `gain * drive`.
    pub nmse_linearized_db: f64,
}

impl DpdResult {
    pub fn improvement_db(&self) -> (f64, f64) {
        (
            self.acpr_before.0 - self.acpr_after.0,
            self.acpr_before.1 - self.acpr_after.1,
        )
    }
}

/// A trained post-inverse and its training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedInverse {
    pub net: Rvtdcnn,
    pub gain: f64,
    pub nmse_train_db: f64,
    pub nmse_test_db: f64,
    pub training: TwoStageOutcome,
}

fn dataset_nmse_db(net: &Rvtdcnn, data: &Dataset) -> Result<f64> {
    let mse = mse_cost(net, data)?;
    let ratio = 2.0 * data.len() as f64 * mse / data.label_energy();
    Ok(if ratio > 0.0 { (10.0 * ratio.log10()).max(-300.0) } else { -300.0 })
}

/// Scale the drive to the configured peak.
pub fn scaled_drive(drive: &ComplexSeq, cfg: &DpdConfig) -> Result<ComplexSeq> {
    let peak = drive.peak();
    if peak == 0.0 {
        return Err(Error::Degenerate("all-zero drive".into()));
    }
    drive.scaled(cfg.drive_peak / peak)
}

/// Fit the post-inverse on `(PA(drive) / G) -> drive`.
pub fn train_dpd(
    tx: &Transmitter,
    drive: &ComplexSeq,
    arch: &RvtdcnnArch,
    adam: &AdamConfig,
    lm: Option<&LmConfig>,
    cfg: &DpdConfig,
) -> Result<TrainedInverse> {
    cfg.validate()?;
    let x = scaled_drive(drive, cfg)?;
    let y = tx.transmit(&x)?;
    let gain = estimate_linear_gain(&x, &y)?;
    let (train, test) = dpd_dataset(&y, &x, gain, arch.memory_depth, cfg.count, cfg.split_seed)?;
    let mut net = Rvtdcnn::init(arch.clone(), cfg.init_seed)?;
    let training = train_two_stage(&mut net, &train, Some(&test), adam, lm, false)?;
    Ok(TrainedInverse {
        nmse_train_db: dataset_nmse_db(&net, &train)?,
        nmse_test_db: dataset_nmse_db(&net, &test)?,
        net,
        gain,
        training,
    })
}

/// Run the inverse model over `x`. The first `M` samples pass through.
pub fn apply_dpd(net: &Rvtdcnn, x: &ComplexSeq) -> Result<ComplexSeq> {
    let m = net.arch.memory_depth;
    let xs = x.samples();
    if xs.len() <= m {
        return x.with_samples(xs.to_vec());
    }
    const CHUNK: usize = 4096;
    let idx: Vec<usize> = (m..xs.len()).collect();
    let parts: Vec<Vec<Complex64>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut t = Trace::new(&net.arch);
            chunk
                .iter()
                .map(|&n| {
                    let g = graph_at(xs, n, m);
                    forward_trace(&net.params, &net.arch, &g, &mut t);
                    Complex64::new(t.output[0], t.output[1])
                })
                .collect()
        })
        .collect();
    let mut out = xs[..m].to_vec();
    for p in parts {
        out.extend(p);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("predistorted signal".into()));
    }
    x.with_samples(out)
}

/// ACPR of `PA(drive)` against `PA(DPD(drive))` on one channel plan.
pub fn evaluate_linearization(
    tx: &Transmitter,
    drive: &ComplexSeq,
    inverse: &TrainedInverse,
    plan: &ChannelPlan,
    cfg: &DpdConfig,
) -> Result<DpdResult> {
    let x = scaled_drive(drive, cfg)?;
    let before = tx.transmit(&x)?;
    let u = apply_dpd(&inverse.net, &x)?;
    let after = tx.transmit(&u)?;
    let m = inverse.net.arch.memory_depth;
    let aligned = aligned_gain(&x, &after)?;
    let lin: Vec<Complex64> = after.samples().iter().map(|v| v / aligned).collect();
    Ok(DpdResult {
        acpr_before: signal_acpr_db(&before, plan)?,
        acpr_after: signal_acpr_db(&after, plan)?,
        nmse_inverse_db: inverse.nmse_test_db,
        gain_estimate: inverse.gain,
        predistorted_peak: u.peak(),
        clip_violations: u.samples().iter().filter(|v| v.norm() > cfg.clip_ceiling).count(),
        nmse_linearized_db: nmse_db_slices(&lin[m..], &x.samples()[m..])?,
    })
}

/// Complex least-squares gain from `x` to `y`.
fn aligned_gain(x: &ComplexSeq, y: &ComplexSeq) -> Result<Complex64> {
    let energy: f64 = x.samples().iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::Degenerate("all-zero drive".into()));
    }
    Ok(x.samples().iter().zip(y.samples()).map(|(a, b)| a.conj() * b).sum::<Complex64>() / energy)
}
