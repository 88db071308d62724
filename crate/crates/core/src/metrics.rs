//! NMSE, Welch spectra, adjacent channel power and AM/AM, AM/PM extraction.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ComplexSeq, OfdmConfig};

pub const NMSE_FLOOR_DB: f64 = -300.0;

/// `10 log10(sum |pred - ref|^2 / sum |ref|^2)`, floored.
pub fn nmse_db(pred: &ComplexSeq, reference: &ComplexSeq) -> Result<f64> {
    nmse_db_slices(pred.samples(), reference.samples())
}

pub fn nmse_db_slices(pred: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: reference.len(),
        });
    }
    let energy: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::Degenerate("zero reference energy".into()));
    }
    let err: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r).norm_sqr()).sum();
    Ok(db_floor(err / energy))
}

fn db_floor(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        NMSE_FLOOR_DB
    } else {
        (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WelchConfig {
    pub segment: usize,
    pub overlap_frac: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment: 1024,
            overlap_frac: 0.5,
        }
    }
}

/// Two-sided power spectral density in power per Hz, frequencies ascending
/// over `[-fs/2, fs/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub bin_hz: f64,
}

impl Psd {
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.bin_hz
    }

    /// Power in bins whose centres fall in `[lo, hi)`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p)
            .sum::<f64>()
            * self.bin_hz
    }

    pub fn peak_freq(&self) -> f64 {
        let (i, _) = self
            .psd
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        self.freqs[i]
    }

    /// `freq_hz,psd_db` with the density in dB relative to 1 per Hz.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_hz,psd_db")?;
        for (f, p) in self.freqs.iter().zip(&self.psd) {
            writeln!(w, "{f},{}", 10.0 * p.max(1e-300).log10())?;
        }
        Ok(())
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Welch average of Hann-windowed periodograms.
pub fn psd_welch(x: &ComplexSeq, cfg: &WelchConfig) -> Result<Psd> {
    let seg = cfg.segment;
    if seg < 2 {
        return Err(Error::Config("welch segment must be >= 2".into()));
    }
    if !(0.0..1.0).contains(&cfg.overlap_frac) {
        return Err(Error::Config(format!("overlap {} outside [0, 1)", cfg.overlap_frac)));
    }
    if x.len() < seg {
        return Err(Error::Size {
            needed: seg,
            available: x.len(),
        });
    }
    let step = ((seg as f64 * (1.0 - cfg.overlap_frac)).round() as usize).max(1);
    let n_seg = (x.len() - seg) / step + 1;
    let w = hann(seg);
    let w_energy: f64 = w.iter().map(|v| v * v).sum();
    let fs = x.sample_rate_hz();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let mut acc = vec![0.0; seg];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    for s in 0..n_seg {
        let chunk = &x.samples()[s * step..s * step + seg];
        for ((b, v), wi) in buf.iter_mut().zip(chunk).zip(&w) {
            *b = v * wi;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (n_seg as f64 * fs * w_energy);
    let half = seg / 2;
    let bin_hz = fs / seg as f64;
    let (freqs, psd) = (0..seg)
        .map(|i| {
            let k = (i + seg - half) % seg;
            (bin_hz * (i as f64 - half as f64), acc[k] * scale)
        })
        .unzip();
    Ok(Psd { freqs, psd, bin_hz })
}

/// Main and adjacent channel placement for ACPR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelPlan {
    pub main_bw_hz: f64,
    pub adj_offset_hz: f64,
    pub adj_bw_hz: f64,
    pub center_hz: f64,
}

impl Default for ChannelPlan {
    fn default() -> Self {
        Self::for_signal(&OfdmConfig::default())
    }
}

impl ChannelPlan {
    /// Main channel over the occupied bandwidth, adjacent channels of the same
    /// width one channel spacing away.
    pub fn for_signal(cfg: &OfdmConfig) -> Self {
        let bw = cfg.occupied_bandwidth_hz();
        Self {
            main_bw_hz: bw,
            adj_offset_hz: bw,
            adj_bw_hz: bw,
            center_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.main_bw_hz > 0.0 && self.adj_bw_hz > 0.0 && self.adj_offset_hz > 0.0) {
            return Err(Error::Config("channel bandwidths and offset must be > 0".into()));
        }
        Ok(())
    }

    /// Whether the adjacent bands overlap the main channel.
    pub fn overlaps(&self) -> bool {
        self.adj_offset_hz < (self.main_bw_hz + self.adj_bw_hz) / 2.0
    }
}

/// `(lower, upper)` adjacent-to-main power ratios in dB.
pub fn acpr_db(psd: &Psd, plan: &ChannelPlan) -> Result<(f64, f64)> {
    plan.validate()?;
    let lo_edge = psd.freqs[0] - psd.bin_hz / 2.0;
    let hi_edge = psd.freqs[psd.freqs.len() - 1] + psd.bin_hz / 2.0;
    let band = |centre: f64, bw: f64| -> Result<f64> {
        let (lo, hi) = (centre - bw / 2.0, centre + bw / 2.0);
        if lo < lo_edge - 1e-9 || hi > hi_edge + 1e-9 {
            return Err(Error::Config(format!(
                "band [{lo}, {hi}] Hz outside spectrum [{lo_edge}, {hi_edge}]"
            )));
        }
        Ok(psd.band_power(lo, hi))
    };
    let main = band(plan.center_hz, plan.main_bw_hz)?;
    if main <= 0.0 {
        return Err(Error::Degenerate("no power in main channel".into()));
    }
    let lower = band(plan.center_hz - plan.adj_offset_hz, plan.adj_bw_hz)?;
    let upper = band(plan.center_hz + plan.adj_offset_hz, plan.adj_bw_hz)?;
    Ok((db_floor(lower / main), db_floor(upper / main)))
}

/// ACPR straight from a signal with default Welch settings.
pub fn signal_acpr_db(x: &ComplexSeq, plan: &ChannelPlan) -> Result<(f64, f64)> {
    acpr_db(&psd_welch(x, &WelchConfig::default())?, plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmPoint {
    pub amplitude: f64,
    pub gain_db: f64,
    pub phase_deg: f64,
}

/// Instantaneous gain and phase shift per sample. Samples with `|x| < 1e-6`
/// are skipped.
pub fn am_characteristics(x: &ComplexSeq, y: &ComplexSeq) -> Result<Vec<AmPoint>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(x
        .samples()
        .iter()
        .zip(y.samples())
        .filter(|(a, _)| a.norm() >= 1e-6)
        .map(|(a, b)| {
            let r = b / a;
            AmPoint {
                amplitude: a.norm(),
                gain_db: 20.0 * r.norm().log10(),
                phase_deg: r.arg().to_degrees(),
            }
        })
        .collect())
}

/// Mean within-bin standard deviation of gain over `bins` equal amplitude
/// bins. Zero for a memoryless characteristic.
pub fn gain_scatter_db(points: &[AmPoint], bins: usize) -> f64 {
    let max = points.iter().map(|p| p.amplitude).fold(0.0, f64::max);
    if points.is_empty() || bins == 0 || max == 0.0 {
        return 0.0;
    }
    let mut groups = vec![Vec::new(); bins];
    for p in points {
        let b = ((p.amplitude / max * bins as f64) as usize).min(bins - 1);
        groups[b].push(p.gain_db);
    }
    let stds: Vec<f64> = groups
        .iter()
        .filter(|g| g.len() >= 2)
        .map(|g| {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            (g.iter().map(|v| (v - m).powi(2)).sum::<f64>() / g.len() as f64).sqrt()
        })
        .collect();
    if stds.is_empty() {
        0.0
    } else {
        stds.iter().sum::<f64>() / stds.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nmse_db: f64,
    pub acpr_lower_db: f64,
    pub acpr_upper_db: f64,
    pub papr_db: f64,
    pub coeff_count: u64,
    pub flops: u64,
}
