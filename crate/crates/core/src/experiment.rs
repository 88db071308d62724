//! End-to-end pipelines driven by a single JSON config: signal generation,
//! forward modeling with baselines, predistortion and memory sweeps.
//!
//! Every pipeline is deterministic given its config. Reports carry no
//! timings so repeated runs serialize to identical bytes.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{fit_gmp_on_split, train_mlp_baseline, GmpConfig};
use crate::complexity::{complexity, rvtdcnn_coeff_count, rvtdcnn_flops, ComplexityInput, DEFAULT_ACT_COST};
use crate::dataset::{build_dataset, joint_normalize};
use crate::dpd::{apply_dpd, evaluate_linearization, scaled_drive, train_dpd, DpdConfig, DpdResult};
use crate::error::{Error, Result};
use crate::metrics::{psd_welch, signal_acpr_db, ChannelPlan, MetricsReport, Psd, WelchConfig};
use crate::network::{MlpPreset, Rvtdcnn, RvtdcnnArch};
use crate::pa_sim::{default_pa, ImpairmentConfig, PolyPaModel, Transmitter};
use crate::signal::{generate_ofdm, papr_db, ComplexSeq, OfdmConfig};
use crate::training::{mse_cost, train_two_stage, AdamConfig, LmConfig, StopReason, TrainingHistory};

pub const SCHEMA_VERSION: u32 = 1;

/// Iteration cap used instead of the optimizer's own default so a full run
/// fits in a few minutes on one core.
pub const DESK_ADAM_ITERS: usize = 5000;

/// Which amplifier to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PaSpec {
    /// The seeded synthetic amplifier.
    Default { seed: u64 },
    /// A distortion-free amplifier with real gain.
    Linear { gain: f64 },
    /// Explicit coefficients.
    Model(PolyPaModel),
}

impl Default for PaSpec {
    fn default() -> Self {
        PaSpec::Default { seed: 0 }
    }
}

impl PaSpec {
    pub fn build(&self) -> Result<PolyPaModel> {
        match self {
            PaSpec::Default { seed } => default_pa(*seed),
            PaSpec::Linear { gain } => {
                if !(gain.is_finite() && *gain > 0.0) {
                    return Err(Error::Config(format!("linear PA gain {gain} must be > 0")));
                }
                Ok(PolyPaModel::linear(Complex64::new(*gain, 0.0)))
            }
            PaSpec::Model(m) => {
                m.validate()?;
                Ok(m.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Entries drawn from the start of the signal, split 3:2.
    pub count: usize,
    pub split_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 7000,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub gmp: Option<GmpConfig>,
    pub gmp_ridge: f64,
    pub mlp: Vec<MlpPreset>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            gmp: Some(GmpConfig::default()),
            gmp_ridge: 0.0,
            mlp: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub signal: OfdmConfig,
    pub pa: PaSpec,
    pub impairment_case: u8,
    pub arch: RvtdcnnArch,
    pub adam: AdamConfig,
    /// `None` skips the second training stage.
    pub lm: Option<LmConfig>,
    /// Defaults to the plan derived from the signal bandwidth.
    pub channel: Option<ChannelPlan>,
    pub welch: WelchConfig,
    pub dataset: DatasetConfig,
    pub init_seed: u64,
    pub baselines: BaselineConfig,
    pub dpd: DpdConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            signal: OfdmConfig::default(),
            pa: PaSpec::default(),
            impairment_case: 1,
            arch: RvtdcnnArch::default(),
            adam: AdamConfig {
                max_iters: DESK_ADAM_ITERS,
                ..AdamConfig::default()
            },
            lm: Some(LmConfig::default()),
            channel: None,
            welch: WelchConfig::default(),
            dataset: DatasetConfig::default(),
            init_seed: 0,
            baselines: BaselineConfig::default(),
            dpd: DpdConfig::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        ImpairmentConfig::case(self.impairment_case)?.validate()?;
        self.arch.validate()?;
        self.adam.validate()?;
        if let Some(lm) = &self.lm {
            lm.validate()?;
        }
        self.plan().validate()?;
        if self.dataset.count == 0 {
            return Err(Error::Config("dataset count must be >= 1".into()));
        }
        if let Some(g) = &self.baselines.gmp {
            g.validate()?;
        }
        if !(self.baselines.gmp_ridge >= 0.0) {
            return Err(Error::Config("gmp ridge must be >= 0".into()));
        }
        self.dpd.validate()
    }

    pub fn plan(&self) -> ChannelPlan {
        self.channel.unwrap_or_else(|| ChannelPlan::for_signal(&self.signal))
    }

    pub fn transmitter(&self) -> Result<Transmitter> {
        Ok(Transmitter {
            pa: self.pa.build()?,
            impairments: ImpairmentConfig::case(self.impairment_case)?,
        })
    }

    /// Hex SHA-256 of the compact JSON form. The output directory is not
    /// part of the experiment and is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("experiment config", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Generated drive with its PAPR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub papr_db: f64,
    pub peak: f64,
    pub rms: f64,
}

pub fn gen_signal(cfg: &ExperimentConfig) -> Result<(ComplexSeq, SignalReport)> {
    let x = stage("signal", generate_ofdm(&cfg.signal))?;
    let report = SignalReport {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        samples: x.len(),
        sample_rate_hz: x.sample_rate_hz(),
        papr_db: papr_db(&x)?,
        peak: x.peak(),
        rms: x.rms(),
    };
    Ok((x, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingSummary {
    pub adam_iterations: usize,
    pub adam_stop: StopReason,
    pub lm_iterations: Option<usize>,
    pub lm_stop: Option<StopReason>,
    /// Whether every accepted LM step kept or lowered the training cost.
    pub lm_monotone: Option<bool>,
    pub final_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport {
    pub model: String,
    pub coefficients: u64,
    pub flops: u64,
    pub nmse_train_db: f64,
    pub nmse_test_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub impairment_case: u8,
    pub memory_depth: usize,
    pub nmse_train_db: f64,
    pub nmse_test_db: f64,
    /// Test NMSE, ACPR of the modeled output, PAPR of the drive and model cost.
    pub metrics: MetricsReport,
    pub pa_acpr_db: (f64, f64),
    pub training: TrainingSummary,
    pub baselines: Vec<BaselineReport>,
}

/// Everything a forward-modeling run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub net: Rvtdcnn,
    pub history: TrainingHistory,
    pub output_psd: Psd,
    pub error_psd: Psd,
}

fn nmse_from_cost(mse: f64, n: usize, label_energy: f64) -> f64 {
    let ratio = 2.0 * n as f64 * mse / label_energy;
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(crate::metrics::NMSE_FLOOR_DB)
    } else {
        crate::metrics::NMSE_FLOOR_DB
    }
}

/// generate, impair, amplify, build the dataset, train both stages and
/// evaluate on the held-out split.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    stage("config", cfg.validate())?;
    let m = cfg.arch.memory_depth;
    let x = stage("signal", generate_ofdm(&cfg.signal))?;
    let tx = stage("pa", cfg.transmitter())?;
    let y = stage("transmit", tx.transmit(&x))?;
    let (xn, yn, _) = stage("dataset", joint_normalize(&x, &y))?;
    let (train, test) = stage(
        "dataset",
        build_dataset(&xn, &yn, m, cfg.dataset.count, cfg.dataset.split_seed),
    )?;

    let mut net = stage("init", Rvtdcnn::init(cfg.arch.clone(), cfg.init_seed))?;
    let outcome = stage(
        "training",
        train_two_stage(&mut net, &train, Some(&test), &cfg.adam, cfg.lm.as_ref(), false),
    )?;
    let nmse_train_db = nmse_from_cost(stage("metrics", mse_cost(&net, &train))?, train.len(), train.label_energy());
    let nmse_test_db = nmse_from_cost(stage("metrics", mse_cost(&net, &test))?, test.len(), test.label_energy());

    // The inverse-model runner is a plain sequence forward pass.
    let yhat = stage("metrics", apply_dpd(&net, &xn))?;
    let err: Vec<Complex64> = yn.samples().iter().zip(yhat.samples()).map(|(a, b)| a - b).collect();
    let err = stage("metrics", yn.with_samples(err))?;
    let plan = cfg.plan();
    let output_psd = stage("metrics", psd_welch(&yhat, &cfg.welch))?;
    let error_psd = stage("metrics", psd_welch(&err, &cfg.welch))?;
    let acpr = stage("metrics", signal_acpr_db(&yhat, &plan))?;
    let pa_acpr_db = stage("metrics", signal_acpr_db(&yn, &plan))?;

    let mut baselines = Vec::new();
    if let Some(gcfg) = &cfg.baselines.gmp {
        // Only the dataset's span is needed; the full basis would not fit in memory.
        let span = (m + cfg.dataset.count + gcfg.max_lead()).min(xn.len());
        let xs = stage("baseline-gmp", xn.slice(0, span))?;
        let ys = stage("baseline-gmp", yn.slice(0, span))?;
        let fit = stage(
            "baseline-gmp",
            fit_gmp_on_split(&xs, &ys, gcfg, &train, &test, cfg.baselines.gmp_ridge),
        )?;
        let c = complexity(&ComplexityInput::Gmp { config: *gcfg })?;
        baselines.push(BaselineReport {
            model: "gmp".into(),
            coefficients: c.coefficients,
            flops: c.flops,
            nmse_train_db: fit.nmse_train_db,
            nmse_test_db: fit.nmse_test_db,
        });
    }
    for &preset in &cfg.baselines.mlp {
        let b = stage(
            "baseline-mlp",
            train_mlp_baseline(preset, &train, Some(&test), &cfg.adam, cfg.init_seed),
        )?;
        let c = complexity(&ComplexityInput::Mlp {
            widths: preset.widths(m),
            act_cost: DEFAULT_ACT_COST,
        })?;
        baselines.push(BaselineReport {
            model: preset.name().into(),
            coefficients: c.coefficients,
            flops: c.flops,
            nmse_train_db: nmse_from_cost(mse_cost(&b.net, &train)?, train.len(), train.label_energy()),
            nmse_test_db: nmse_from_cost(mse_cost(&b.net, &test)?, test.len(), test.label_energy()),
        });
    }

    let lm = outcome.lm.as_ref();
    let training = TrainingSummary {
        adam_iterations: outcome.adam.iterations,
        adam_stop: outcome.adam.stop,
        lm_iterations: lm.map(|l| l.iterations),
        lm_stop: lm.map(|l| l.stop),
        lm_monotone: lm.map(|l| l.accepted_costs.windows(2).all(|w| w[1] <= w[0])),
        final_mse: outcome.final_mse(),
    };
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        impairment_case: cfg.impairment_case,
        memory_depth: m,
        nmse_train_db,
        nmse_test_db,
        metrics: MetricsReport {
            nmse_db: nmse_test_db,
            acpr_lower_db: acpr.0,
            acpr_upper_db: acpr.1,
            papr_db: papr_db(&x)?,
            coeff_count: rvtdcnn_coeff_count(&cfg.arch),
            flops: rvtdcnn_flops(&cfg.arch),
        },
        pa_acpr_db,
        training,
        baselines,
    };
    Ok(RunOutcome {
        report,
        net,
        history: outcome.history(),
        output_psd,
        error_psd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpdReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub result: DpdResult,
    pub improvement_db: (f64, f64),
    pub nmse_inverse_train_db: f64,
    pub training: TrainingSummary,
}

#[derive(Debug, Clone)]
pub struct DpdOutcome {
    pub report: DpdReport,
    pub history: TrainingHistory,
    pub before_psd: Psd,
    pub after_psd: Psd,
}

/// Train a post-inverse on the configured transmitter and measure the
/// linearized cascade.
pub fn run_dpd(cfg: &ExperimentConfig) -> Result<DpdOutcome> {
    stage("config", cfg.validate())?;
    let x = stage("signal", generate_ofdm(&cfg.signal))?;
    let tx = stage("pa", cfg.transmitter())?;
    let dcfg = DpdConfig {
        count: cfg.dataset.count,
        split_seed: cfg.dataset.split_seed,
        init_seed: cfg.init_seed,
        ..cfg.dpd.clone()
    };
    let inverse = stage(
        "dpd-train",
        train_dpd(&tx, &x, &cfg.arch, &cfg.adam, cfg.lm.as_ref(), &dcfg),
    )?;
    let plan = cfg.plan();
    let result = stage("dpd-eval", evaluate_linearization(&tx, &x, &inverse, &plan, &dcfg))?;
    let drive = stage("dpd-eval", scaled_drive(&x, &dcfg))?;
    let before = stage("dpd-eval", tx.transmit(&drive))?;
    let after = stage("dpd-eval", apply_dpd(&inverse.net, &drive).and_then(|u| tx.transmit(&u)))?;
    let lm = inverse.training.lm.as_ref();
    let training = TrainingSummary {
        adam_iterations: inverse.training.adam.iterations,
        adam_stop: inverse.training.adam.stop,
        lm_iterations: lm.map(|l| l.iterations),
        lm_stop: lm.map(|l| l.stop),
        lm_monotone: lm.map(|l| l.accepted_costs.windows(2).all(|w| w[1] <= w[0])),
        final_mse: inverse.training.final_mse(),
    };
    Ok(DpdOutcome {
        report: DpdReport {
            schema_version: SCHEMA_VERSION,
            config_hash: cfg.hash(),
            improvement_db: result.improvement_db(),
            result,
            nmse_inverse_train_db: inverse.nmse_train_db,
            training,
        },
        history: inverse.training.history(),
        before_psd: stage("dpd-eval", psd_welch(&before, &cfg.welch))?,
        after_psd: stage("dpd-eval", psd_welch(&after, &cfg.welch))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub memory_depth: usize,
    pub coefficients: u64,
    pub flops: u64,
    pub nmse_train_db: f64,
    pub nmse_test_db: f64,
}

/// Repeat the forward-modeling run for each memory depth. Baselines are skipped.
pub fn sweep_memory(cfg: &ExperimentConfig, depths: &[usize]) -> Result<Vec<SweepRow>> {
    if depths.is_empty() {
        return Err(Error::Config("memory sweep needs at least one depth".into()).in_stage("config"));
    }
    depths
        .iter()
        .map(|&m| {
            let mut c = cfg.clone();
            c.arch.memory_depth = m;
            c.baselines = BaselineConfig {
                gmp: None,
                mlp: Vec::new(),
                ..c.baselines
            };
            let r = run_experiment(&c)?.report;
            Ok(SweepRow {
                memory_depth: m,
                coefficients: r.metrics.coeff_count,
                flops: r.metrics.flops,
                nmse_train_db: r.nmse_train_db,
                nmse_test_db: r.nmse_test_db,
            })
        })
        .collect()
}

/// Writes artifacts under one directory, stamping every CSV with the config hash.
pub struct ArtifactWriter {
    dir: PathBuf,
    hash: String,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>, config_hash: &str) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        Ok(Self {
            dir,
            hash: config_hash.to_string(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn open(&self, name: &str) -> Result<(PathBuf, BufWriter<fs::File>)> {
        let path = self.path(name);
        let f = fs::File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        Ok((path, BufWriter::new(f)))
    }

    /// A CSV whose first line is `# config_hash=<hex>`; `body` writes the header and rows.
    pub fn csv<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let (path, mut w) = self.open(name)?;
        writeln!(w, "# config_hash={}", self.hash)
            .and_then(|_| body(&mut w))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let (path, mut w) = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::json(format!("writing {}", path.display()), e))?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(path)
    }
}

pub fn write_signal_csv(w: &mut dyn Write, x: &ComplexSeq) -> std::io::Result<()> {
    writeln!(w, "n,i,q")?;
    for (n, v) in x.samples().iter().enumerate() {
        writeln!(w, "{n},{:e},{:e}", v.re, v.im)?;
    }
    Ok(())
}

/// Two spectra on a shared frequency axis, in dB.
pub fn write_psd_pair_csv(w: &mut dyn Write, names: (&str, &str), a: &Psd, b: &Psd) -> std::io::Result<()> {
    writeln!(w, "freq_hz,{}_db,{}_db", names.0, names.1)?;
    let db = |p: f64| 10.0 * p.max(1e-300).log10();
    for ((f, pa), pb) in a.freqs.iter().zip(&a.psd).zip(&b.psd) {
        writeln!(w, "{f},{},{}", db(*pa), db(*pb))?;
    }
    Ok(())
}

pub fn write_sweep_csv(w: &mut dyn Write, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "memory_depth,coefficients,flops,nmse_train_db,nmse_test_db")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.memory_depth, r.coefficients, r.flops, r.nmse_train_db, r.nmse_test_db
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small enough to train in a couple of seconds.
    pub(crate) fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            signal: OfdmConfig {
                n_symbols: 20,
                ..OfdmConfig::default()
            },
            adam: AdamConfig {
                max_iters: 60,
                ..AdamConfig::default()
            },
            lm: Some(LmConfig {
                max_iters: 10,
                ..LmConfig::default()
            }),
            dataset: DatasetConfig {
                count: 500,
                split_seed: 1,
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), cfg);
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert_eq!(cfg.adam.max_iters, DESK_ADAM_ITERS);
    }

    #[test]
    fn hash_tracks_content_not_output_dir() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("/tmp/elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.init_seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn pa_specs() {
        assert!(PaSpec::Linear { gain: 0.0 }.build().is_err());
        let lin = PaSpec::Linear { gain: 2.0 }.build().unwrap();
        assert_eq!(lin.small_signal_gain(), 2.0);
        let json = serde_json::to_string(&PaSpec::Default { seed: 3 }).unwrap();
        assert_eq!(json, r#"{"default":{"seed":3}}"#);
    }

    #[test]
    fn invalid_case_is_a_config_error() {
        let cfg = ExperimentConfig {
            impairment_case: 4,
            ..tiny()
        };
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("config:"), "{err}");
    }

    #[test]
    fn oversized_dataset_is_tagged() {
        let cfg = ExperimentConfig {
            dataset: DatasetConfig {
                count: 10_000_000,
                split_seed: 0,
            },
            ..tiny()
        };
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("dataset:"), "{err}");
    }

    #[test]
    fn tiny_run_reports_everything() {
        let cfg = ExperimentConfig {
            baselines: BaselineConfig {
                mlp: vec![MlpPreset::Rvtdnn],
                ..BaselineConfig::default()
            },
            ..tiny()
        };
        let out = run_experiment(&cfg).unwrap();
        let r = &out.report;
        assert_eq!(r.schema_version, SCHEMA_VERSION);
        assert_eq!(r.metrics.coeff_count, 158);
        assert_eq!(r.metrics.flops, 876);
        assert_eq!(r.baselines[0].model, "gmp");
        assert_eq!(r.baselines[0].coefficients, 214);
        assert_eq!(r.baselines[1].coefficients, 387);
        assert!(r.nmse_test_db.is_finite() && r.nmse_test_db < 0.0);
        assert_eq!(r.training.adam_iterations, 60);
        assert_eq!(r.training.lm_monotone, Some(true));
        assert_eq!(out.history.rows.len(), r.training.adam_iterations + r.training.lm_iterations.unwrap());
        assert_eq!(out.error_psd.freqs.len(), cfg.welch.segment);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let err = sweep_memory(&tiny(), &[]).unwrap_err();
        assert!(err.to_string().starts_with("config:"));
    }

    #[test]
    fn artifacts_carry_hash_line() {
        let dir = tempfile::tempdir().unwrap();
        let w = ArtifactWriter::new(dir.path().join("out"), "abc123").unwrap();
        let x = ComplexSeq::new(vec![Complex64::new(0.5, -0.25)], 1.0).unwrap();
        let p = w.csv("sig.csv", |w| write_signal_csv(w, &x)).unwrap();
        let text = fs::read_to_string(p).unwrap();
        assert_eq!(text, "# config_hash=abc123\nn,i,q\n0,5e-1,-2.5e-1\n");
        let p = w.json("r.json", &SCHEMA_VERSION).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "1\n");
    }
}
