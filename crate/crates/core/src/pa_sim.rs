//! Synthetic transmitter: modulator impairments followed by a baseband
//! memory-polynomial power amplifier.
//!
//! The amplifier is
//!
//! ```text
//! y(n) = sum_{k=0}^{K-1} a_k x(n) |x(n)|^k
//!      + sum_{k=1}^{K-1} sum_{q=1}^{Q-1} c_kq x(n) |x(n-q)|^k
//! ```
//!
//! with zero history before the first sample.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ComplexSeq;

/// Memory-polynomial PA. `c` is stored row-major as `(K-1) x (Q-1)`,
/// `c[(k-1)*(Q-1) + (q-1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyPaModel {
    #[serde(rename = "K")]
    pub order: usize,
    #[serde(rename = "Q")]
    pub lags: usize,
    pub a: Vec<Complex64>,
    pub c: Vec<Complex64>,
}

impl PolyPaModel {
    pub fn new(a: Vec<Complex64>, c: Vec<Complex64>, lags: usize) -> Result<Self> {
        let model = Self {
            order: a.len(),
            lags,
            a,
            c,
        };
        model.validate()?;
        Ok(model)
    }

    /// Memoryless `y = g x`.
    pub fn linear(gain: Complex64) -> Self {
        Self {
            order: 1,
            lags: 1,
            a: vec![gain],
            c: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.lags == 0 {
            return Err(Error::Config("PA order and lag count must be >= 1".into()));
        }
        if self.a.len() != self.order {
            return Err(Error::Shape(format!(
                "expected {} static coefficients, got {}",
                self.order,
                self.a.len()
            )));
        }
        let expected = (self.order - 1) * (self.lags - 1);
        if self.c.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} cross-term coefficients, got {}",
                self.c.len()
            )));
        }
        if self.a[0] == Complex64::new(0.0, 0.0) {
            return Err(Error::Config("linear gain a_0 must be nonzero".into()));
        }
        if self.a.iter().chain(&self.c).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric("PA coefficients".into()));
        }
        Ok(())
    }

    pub fn cross(&self, k: usize, q: usize) -> Complex64 {
        self.c[(k - 1) * (self.lags - 1) + (q - 1)]
    }

    pub fn cross_mut(&mut self, k: usize, q: usize) -> &mut Complex64 {
        let stride = self.lags - 1;
        &mut self.c[(k - 1) * stride + (q - 1)]
    }

    pub fn small_signal_gain(&self) -> f64 {
        self.a[0].norm()
    }

    /// Complex gain under a constant-envelope drive of amplitude `r`
    /// (all past envelopes equal to `r`).
    pub fn static_gain(&self, r: f64) -> Complex64 {
        let mut g = Complex64::new(0.0, 0.0);
        let mut rk = 1.0;
        for k in 0..self.order {
            g += self.a[k] * rk;
            if k >= 1 {
                for q in 1..self.lags {
                    g += self.cross(k, q) * rk;
                }
            }
            rk *= r;
        }
        g
    }
}

pub fn pa_forward(model: &PolyPaModel, x: &ComplexSeq) -> Result<ComplexSeq> {
    model.validate()?;
    let xs = x.samples();
    let env: Vec<f64> = xs.iter().map(|s| s.norm()).collect();
    let mut out = Vec::with_capacity(xs.len());
    for (n, &xn) in xs.iter().enumerate() {
        let mut g = Complex64::new(0.0, 0.0);
        let mut rk = 1.0;
        for a in &model.a {
            g += a * rk;
            rk *= env[n];
        }
        for q in 1..model.lags {
            let past = if n >= q { env[n - q] } else { 0.0 };
            let mut pk = past;
            for k in 1..model.order {
                g += model.cross(k, q) * pk;
                pk *= past;
            }
        }
        out.push(xn * g);
    }
    x.with_samples(out)
}

/// `20 log10(|small-signal gain| / |gain at |x| = 1|)` on a constant-envelope sweep.
pub fn gain_compression_db(model: &PolyPaModel) -> f64 {
    let g1 = model.static_gain(1.0).norm();
    20.0 * (model.small_signal_gain() / g1).log10()
}

const DEFAULT_ORDER: usize = 5;
const DEFAULT_LAGS: usize = 4;
const TARGET_COMPRESSION_DB: f64 = 3.0;

/// Seeded K=5, Q=4 amplifier with 3 dB gain compression at `|x| = 1`.
///
/// Static nonlinear terms follow a compressive template perturbed by the
/// seed and are then rescaled by a common factor found by bisection. Draws
/// whose AM/AM curve folds over below `|x| = 1.2` are discarded.
pub fn default_pa(seed: u64) -> Result<PolyPaModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        let model = draw_compressed_pa(&mut rng)?;
        if am_am_monotone(&model, 1.2) {
            return Ok(model);
        }
    }
    Err(Error::Construction("no monotone 3 dB amplifier found for this seed".into()))
}

/// Constant-envelope output amplitude `r |G(r)|` strictly increases on `(0, r_max]`.
pub fn am_am_monotone(model: &PolyPaModel, r_max: f64) -> bool {
    let steps = 240;
    let mut last = 0.0;
    for i in 1..=steps {
        let r = r_max * i as f64 / steps as f64;
        let out = r * model.static_gain(r).norm();
        if out <= last {
            return false;
        }
        last = out;
    }
    true
}

fn draw_compressed_pa(rng: &mut ChaCha8Rng) -> Result<PolyPaModel> {
    let template = [-0.26, -0.05, -0.015, -0.005];
    let mut a = vec![Complex64::new(1.0, 0.0)];
    for base in template {
        let mag = base * (1.0 + 0.2 * rng.random_range(-1.0..1.0));
        let phase = rng.random_range(-0.35..0.35);
        a.push(Complex64::from_polar(1.0, phase) * mag);
    }
    let mut c = Vec::with_capacity((DEFAULT_ORDER - 1) * (DEFAULT_LAGS - 1));
    for k in 1..DEFAULT_ORDER {
        for q in 1..DEFAULT_LAGS {
            let mag = 0.06 * rng.random_range(0.2..1.0) * 0.6f64.powi((q - 1 + k - 1) as i32);
            let phase = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            c.push(Complex64::from_polar(mag, phase));
        }
    }
    let base = PolyPaModel::new(a, c, DEFAULT_LAGS)?;

    let scaled = |s: f64| {
        let mut m = base.clone();
        for ak in m.a.iter_mut().skip(1) {
            *ak *= s;
        }
        m
    };
    let excess = |s: f64| gain_compression_db(&scaled(s)) - TARGET_COMPRESSION_DB;

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while excess(hi) < 0.0 {
        lo = hi;
        hi *= 1.5;
        grow += 1;
        if grow > 40 {
            return Err(Error::Construction("could not bracket 3 dB compression".into()));
        }
    }
    if excess(lo) > 0.0 {
        return Err(Error::Construction("memory terms alone exceed target compression".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    if excess(s).abs() > 1e-6 {
        return Err(Error::Construction("compression rescaling did not converge".into()));
    }
    Ok(scaled(s))
}

/// Modulator impairments applied ahead of the amplifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpairmentConfig {
    pub iq_gain_imbalance_db: f64,
    pub iq_phase_imbalance_deg: f64,
    pub dc_offset_i_frac: f64,
    pub dc_offset_q_frac: f64,
    pub iq_imbalance_enabled: bool,
    pub dc_offset_enabled: bool,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        Self::case(1).expect("case 1 exists")
    }
}

impl ImpairmentConfig {
    /// Transmitter cases: 1 = PA only, 2 = adds I/Q imbalance, 3 = adds DC offset.
    pub fn case(n: u8) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Config(format!("impairment case {n} (expected 1, 2 or 3)")));
        }
        Ok(Self {
            iq_gain_imbalance_db: 1.0,
            iq_phase_imbalance_deg: 3.0,
            dc_offset_i_frac: 0.03,
            dc_offset_q_frac: 0.05,
            iq_imbalance_enabled: n >= 2,
            dc_offset_enabled: n >= 3,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("I", self.dc_offset_i_frac), ("Q", self.dc_offset_q_frac)] {
            if !(0.0..=0.2).contains(&v) {
                return Err(Error::Config(format!("DC offset fraction {name} = {v} outside [0, 0.2]")));
            }
        }
        if !(self.iq_gain_imbalance_db.abs() <= 3.0) {
            return Err(Error::Config(format!(
                "gain imbalance {} dB exceeds 3 dB",
                self.iq_gain_imbalance_db
            )));
        }
        if !(self.iq_phase_imbalance_deg.abs() <= 10.0) {
            return Err(Error::Config(format!(
                "phase imbalance {} deg exceeds 10 deg",
                self.iq_phase_imbalance_deg
            )));
        }
        Ok(())
    }

    /// `(mu, nu)` of `x' = mu x + nu conj(x)`.
    pub fn iq_coefficients(&self) -> (Complex64, Complex64) {
        let g = 10f64.powf(self.iq_gain_imbalance_db / 20.0);
        let ge = Complex64::from_polar(g, self.iq_phase_imbalance_deg.to_radians());
        ((1.0 + ge) / 2.0, (1.0 - ge) / 2.0)
    }

    /// `10 log10(|nu / mu|^2)`.
    pub fn image_rejection_db(&self) -> f64 {
        let (mu, nu) = self.iq_coefficients();
        20.0 * (nu.norm() / mu.norm()).log10()
    }
}

pub fn apply_impairments(x: &ComplexSeq, cfg: &ImpairmentConfig) -> Result<ComplexSeq> {
    cfg.validate()?;
    let rms = x.rms();
    let (mu, nu) = if cfg.iq_imbalance_enabled {
        cfg.iq_coefficients()
    } else {
        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    };
    let dc = if cfg.dc_offset_enabled {
        Complex64::new(cfg.dc_offset_i_frac, cfg.dc_offset_q_frac) * rms
    } else {
        Complex64::new(0.0, 0.0)
    };
    x.with_samples(x.samples().iter().map(|&s| mu * s + nu * s.conj() + dc).collect())
}

/// Impairments followed by the amplifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmitter {
    pub pa: PolyPaModel,
    pub impairments: ImpairmentConfig,
}

impl Transmitter {
    pub fn transmit(&self, x: &ComplexSeq) -> Result<ComplexSeq> {
        let impaired = apply_impairments(x, &self.impairments)?;
        pa_forward(&self.pa, &impaired)
    }
}
