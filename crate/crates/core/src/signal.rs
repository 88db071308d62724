//! Complex baseband signals and the OFDM test-signal generator.
//!
//! The generator maps QAM symbols onto `n_subcarriers` bins centred on DC
//! inside an FFT grid of `n_subcarriers * oversampling` bins, concatenates
//! the symbols without a cyclic prefix and applies a raised-cosine spectral
//! mask over the whole record. The record is then peak-normalized.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty run of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeq {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexSeq {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Degenerate("empty sequence".into()));
        }
        if let Some(n) = samples.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::Numeric(format!("sample {n}")));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Config(format!("sample rate {sample_rate_hz}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Build a sequence sharing this one's sample rate.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of `i^2 + q^2`.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.with_samples(self.samples.iter().map(|s| s * factor).collect())
    }

    /// Contiguous sub-range `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::Size {
                needed: start + len,
                available: self.len(),
            });
        }
        self.with_samples(self.samples[start..start + len].to_vec())
    }
}

pub(crate) fn mean_power(x: &[Complex64]) -> f64 {
    x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub qam_order: usize,
    pub n_symbols: usize,
    pub oversampling: usize,
    pub rolloff: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 64,
            qam_order: 16,
            n_symbols: 2000,
            oversampling: 5,
            rolloff: 0.1,
            sample_rate_hz: 500e6,
            seed: 0,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if !is_power_of_four(self.qam_order) {
            return Err(Error::Config(format!(
                "QAM order {} is not a power of 4",
                self.qam_order
            )));
        }
        if self.n_subcarriers == 0 {
            return Err(Error::Config("no subcarriers".into()));
        }
        if self.n_symbols == 0 {
            return Err(Error::Config("zero OFDM symbols".into()));
        }
        if self.oversampling == 0 {
            return Err(Error::Config("oversampling must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Config(format!("rolloff {} outside [0, 1]", self.rolloff)));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Config(format!("sample rate {}", self.sample_rate_hz)));
        }
        Ok(())
    }

    pub fn fft_size(&self) -> usize {
        self.n_subcarriers * self.oversampling
    }

    /// Nominal occupied bandwidth `n_subcarriers * subcarrier spacing`.
    pub fn nominal_bandwidth_hz(&self) -> f64 {
        self.sample_rate_hz / self.oversampling as f64
    }

    /// Bandwidth including the raised-cosine excess band.
    pub fn occupied_bandwidth_hz(&self) -> f64 {
        self.nominal_bandwidth_hz() * (1.0 + self.rolloff)
    }

    /// Signed subcarrier indices, centred on DC.
    pub fn subcarrier_indices(&self) -> impl Iterator<Item = i64> {
        let n = self.n_subcarriers as i64;
        let lo = -(n / 2);
        lo..lo + n
    }
}

fn is_power_of_four(m: usize) -> bool {
    m >= 4 && m.is_power_of_two() && m.trailing_zeros().is_multiple_of(2)
}

/// Unit-average-power square QAM constellation.
pub fn qam_constellation(order: usize) -> Result<Vec<Complex64>> {
    if !is_power_of_four(order) {
        return Err(Error::Config(format!("QAM order {order} is not a power of 4")));
    }
    let side = (order as f64).sqrt().round() as usize;
    let norm = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
    let level = |k: usize| (2.0 * k as f64 - (side as f64 - 1.0)) / norm;
    Ok((0..side)
        .flat_map(|a| (0..side).map(move |b| Complex64::new(level(a), level(b))))
        .collect())
}

/// Frequency grid and unshaped time record of an OFDM burst.
#[derive(Debug, Clone)]
pub struct OfdmFrame {
    /// `n_symbols * fft_size` bins, symbol-major.
    pub grid: Vec<Complex64>,
    /// Unitary IFFT of each symbol, concatenated.
    pub time: Vec<Complex64>,
}

pub fn modulate_ofdm(cfg: &OfdmConfig) -> Result<OfdmFrame> {
    cfg.validate()?;
    let constellation = qam_constellation(cfg.qam_order)?;
    let n_fft = cfg.fft_size();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut grid = vec![Complex64::new(0.0, 0.0); n_fft * cfg.n_symbols];
    for sym in grid.chunks_mut(n_fft) {
        for k in cfg.subcarrier_indices() {
            let bin = k.rem_euclid(n_fft as i64) as usize;
            sym[bin] = constellation[rng.random_range(0..constellation.len())];
        }
    }

    let ifft = FftPlanner::new().plan_fft_inverse(n_fft);
    let scale = 1.0 / (n_fft as f64).sqrt();
    let mut time = grid.clone();
    ifft.process(&mut time);
    time.iter_mut().for_each(|s| *s *= scale);
    Ok(OfdmFrame { grid, time })
}

/// Raised-cosine magnitude response with nominal bandwidth `bw` (Hz) and
/// roll-off `beta`, evaluated at frequency `f`.
pub fn raised_cosine_response(f: f64, bw: f64, beta: f64) -> f64 {
    let af = f.abs();
    let f1 = 0.5 * bw * (1.0 - beta);
    let f2 = 0.5 * bw * (1.0 + beta);
    if af <= f1 {
        1.0
    } else if af >= f2 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (af - f1) / (beta * bw)).cos())
    }
}

/// Filter `x` by the raised-cosine mask over the whole record (circular).
pub fn raised_cosine_shape(x: &[Complex64], sample_rate_hz: f64, bw: f64, beta: f64) -> Vec<Complex64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf = x.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = bin_frequency(k, n, sample_rate_hz);
        *v *= raised_cosine_response(f, bw, beta) / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Signed frequency of FFT bin `k` for an `n`-point transform.
pub(crate) fn bin_frequency(k: usize, n: usize, fs: f64) -> f64 {
    let k = k as i64;
    let n_i = n as i64;
    let signed = if k >= (n_i + 1) / 2 { k - n_i } else { k };
    signed as f64 * fs / n as f64
}

/// Generate a peak-normalized, raised-cosine shaped OFDM signal.
pub fn generate_ofdm(cfg: &OfdmConfig) -> Result<ComplexSeq> {
    let frame = modulate_ofdm(cfg)?;
    let shaped = raised_cosine_shape(
        &frame.time,
        cfg.sample_rate_hz,
        cfg.nominal_bandwidth_hz(),
        cfg.rolloff,
    );
    let seq = ComplexSeq::new(shaped, cfg.sample_rate_hz)?;
    normalize_peak(&seq, 1.0)
}

/// `10 log10(peak |x|^2 / mean |x|^2)`.
pub fn papr_db(x: &ComplexSeq) -> Result<f64> {
    let power = x.power();
    if power == 0.0 {
        return Err(Error::Degenerate("all-zero signal has no PAPR".into()));
    }
    let peak = x.samples().iter().map(|s| s.norm_sqr()).fold(0.0, f64::max);
    Ok((10.0 * (peak / power).log10()).max(0.0))
}

pub fn normalize_peak(x: &ComplexSeq, target_peak: f64) -> Result<ComplexSeq> {
    if !(target_peak.is_finite() && target_peak > 0.0) {
        return Err(Error::Config(format!("target peak {target_peak}")));
    }
    let peak = x.peak();
    if peak == 0.0 {
        return Err(Error::Degenerate("cannot normalize an all-zero signal".into()));
    }
    x.scaled(target_peak / peak)
}
