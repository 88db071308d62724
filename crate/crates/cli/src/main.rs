mod error;

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rvtdcnn::basis_check::basis_check;
use rvtdcnn::complexity::{complexity, ComplexityInput};
use rvtdcnn::experiment::{
    gen_signal, run_dpd, run_experiment, sweep_memory, write_psd_pair_csv, write_signal_csv, write_sweep_csv,
    ArtifactWriter, ExperimentConfig, PaSpec,
};
use rvtdcnn::network::MlpPreset;

use error::{CliError, CliResult};

/// Output verbosity: 0 prints only errors and requested data, 1 adds
/// summaries (default), 2 adds progress notes on stderr.
const VERBOSITY_ENV: &str = "RVTDCNN_VERBOSITY";

#[derive(Parser)]
#[command(name = "rvtdcnn", version, about = "Convolutional PA behavioral modeling and predistortion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the OFDM drive and report its PAPR.
    GenSignal(Common),
    /// Forward-model the transmitter and evaluate on the held-out split.
    Run {
        #[command(flatten)]
        common: Common,
        /// Skip the GMP baseline.
        #[arg(long)]
        no_gmp: bool,
        /// MLP baselines to train alongside (arvtdnn, rvtdnn, dnn).
        #[arg(long, value_delimiter = ',', value_parser = parse_preset)]
        mlp: Vec<MlpPreset>,
    },
    /// Train a predistorter by indirect learning and measure ACPR before/after.
    Dpd {
        #[command(flatten)]
        common: Common,
        /// Peak amplitude of the drive at the amplifier input.
        #[arg(long)]
        drive_peak: Option<f64>,
    },
    /// Coefficient and FLOP counts for a model spec (JSON file, or `-` for stdin).
    Complexity { spec: PathBuf },
    /// Repeat the forward-modeling run over several memory depths.
    SweepMemory {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
        depths: Vec<usize>,
    },
    /// Check which amplifier basis terms the tanh filter expansion contains.
    BasisCheck {
        #[arg(long, default_value_t = 3)]
        order: u32,
        #[arg(long, default_value_t = 2)]
        memory_depth: usize,
        #[arg(long, default_value_t = 2)]
        max_power: u32,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

/// Config file plus per-field overrides.
#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config JSON; omitted fields take their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Directory for artifacts (default: config `output_dir`, else `out`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    signal_seed: Option<u64>,
    #[arg(long)]
    symbols: Option<usize>,
    /// Seed of the synthetic amplifier.
    #[arg(long)]
    pa_seed: Option<u64>,
    /// Use a distortion-free amplifier with this gain.
    #[arg(long, conflicts_with = "pa_seed")]
    linear_pa: Option<f64>,
    /// Transmitter impairment case: 1, 2 or 3.
    #[arg(long)]
    case: Option<u8>,
    #[arg(long)]
    memory_depth: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    init_seed: Option<u64>,
    #[arg(long)]
    adam_iters: Option<usize>,
    #[arg(long)]
    lm_iters: Option<usize>,
    /// Skip the Levenberg-Marquardt stage.
    #[arg(long)]
    no_lm: bool,
}

impl Common {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.signal_seed {
            cfg.signal.seed = v;
        }
        if let Some(v) = self.symbols {
            cfg.signal.n_symbols = v;
        }
        if let Some(seed) = self.pa_seed {
            cfg.pa = PaSpec::Default { seed };
        }
        if let Some(gain) = self.linear_pa {
            cfg.pa = PaSpec::Linear { gain };
        }
        if let Some(v) = self.case {
            cfg.impairment_case = v;
        }
        if let Some(v) = self.memory_depth {
            cfg.arch.memory_depth = v;
        }
        if let Some(v) = self.count {
            cfg.dataset.count = v;
        }
        if let Some(v) = self.split_seed {
            cfg.dataset.split_seed = v;
        }
        if let Some(v) = self.init_seed {
            cfg.init_seed = v;
        }
        if let Some(v) = self.adam_iters {
            cfg.adam.max_iters = v;
        }
        if self.no_lm {
            cfg.lm = None;
        } else if let Some(v) = self.lm_iters {
            cfg.lm.get_or_insert_with(Default::default).max_iters = v;
        }
        if let Some(dir) = &self.out {
            cfg.output_dir = Some(dir.clone());
        }
        Ok(cfg)
    }
}

fn parse_preset(s: &str) -> Result<MlpPreset, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown MLP preset `{s}` (expected arvtdnn, rvtdnn or dnn)"))
}

fn verbosity() -> u8 {
    std::env::var(VERBOSITY_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
}

macro_rules! say {
    ($level:expr, $($arg:tt)*) => {
        if verbosity() >= $level {
            if $level >= 2 { eprintln!($($arg)*) } else { println!($($arg)*) }
        }
    };
}

fn writer(cfg: &ExperimentConfig) -> CliResult<ArtifactWriter> {
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    Ok(ArtifactWriter::new(dir, &cfg.hash())?)
}

fn cmd_gen_signal(common: &Common) -> CliResult<()> {
    let cfg = common.resolve()?;
    let (x, report) = gen_signal(&cfg)?;
    let w = writer(&cfg)?;
    let csv = w.csv("signal.csv", |f| write_signal_csv(f, &x))?;
    w.json("signal.json", &report)?;
    println!("PAPR {:.2} dB", report.papr_db);
    say!(1, "{} samples written to {}", report.samples, csv.display());
    Ok(())
}

fn cmd_run(common: &Common, no_gmp: bool, mlp: &[MlpPreset]) -> CliResult<()> {
    let mut cfg = common.resolve()?;
    if no_gmp {
        cfg.baselines.gmp = None;
    }
    if !mlp.is_empty() {
        cfg.baselines.mlp = mlp.to_vec();
    }
    say!(2, "training with config {}", cfg.hash());
    let out = run_experiment(&cfg)?;
    let w = writer(&cfg)?;
    w.json("config.json", &cfg)?;
    w.json("report.json", &out.report)?;
    w.csv("history.csv", |f| out.history.write_csv(f))?;
    w.csv("error_spectrum.csv", |f| {
        write_psd_pair_csv(f, ("output", "error"), &out.output_psd, &out.error_psd)
    })?;
    let r = &out.report;
    say!(1, "NMSE train {:.2} dB, test {:.2} dB", r.nmse_train_db, r.nmse_test_db);
    say!(1, "coefficients {}, FLOPs {}", r.metrics.coeff_count, r.metrics.flops);
    for b in &r.baselines {
        say!(1, "{}: {} coefficients, test NMSE {:.2} dB", b.model, b.coefficients, b.nmse_test_db);
    }
    say!(1, "artifacts in {}", w.path("").display());
    Ok(())
}

fn cmd_dpd(common: &Common, drive_peak: Option<f64>) -> CliResult<()> {
    let mut cfg = common.resolve()?;
    if let Some(p) = drive_peak {
        cfg.dpd.drive_peak = p;
    }
    let out = run_dpd(&cfg)?;
    let w = writer(&cfg)?;
    w.json("config.json", &cfg)?;
    w.json("dpd_report.json", &out.report)?;
    w.csv("dpd_history.csv", |f| out.history.write_csv(f))?;
    w.csv("spectrum_before.csv", |f| out.before_psd.write_csv(f))?;
    w.csv("spectrum_after.csv", |f| out.after_psd.write_csv(f))?;
    let r = &out.report.result;
    say!(1, "ACPR before {:.2} / {:.2} dB", r.acpr_before.0, r.acpr_before.1);
    say!(1, "ACPR after  {:.2} / {:.2} dB", r.acpr_after.0, r.acpr_after.1);
    say!(1, "improvement {:.2} / {:.2} dB", out.report.improvement_db.0, out.report.improvement_db.1);
    if r.clip_violations > 0 {
        eprintln!("warning: {} predistorted samples exceed the clip ceiling", r.clip_violations);
    }
    Ok(())
}

fn cmd_complexity(spec: &PathBuf) -> CliResult<()> {
    let text = if spec.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Usage(format!("reading stdin: {e}")))?;
        s
    } else {
        fs::read_to_string(spec).map_err(|e| CliError::Usage(format!("reading {}: {e}", spec.display())))?
    };
    let input: ComplexityInput =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed model spec: {e}")))?;
    let c = complexity(&input)?;
    println!("{}", serde_json::to_string(&c).expect("plain struct serializes"));
    Ok(())
}

fn cmd_sweep(common: &Common, depths: &[usize]) -> CliResult<()> {
    if depths.is_empty() {
        return Err(CliError::Usage("--depths needs at least one value".into()));
    }
    let cfg = common.resolve()?;
    let rows = sweep_memory(&cfg, depths)?;
    let w = writer(&cfg)?;
    w.csv("sweep_memory.csv", |f| write_sweep_csv(f, &rows))?;
    say!(1, "{:>3} {:>6} {:>6} {:>10}", "M", "coeffs", "flops", "test dB");
    for r in &rows {
        say!(1, "{:>3} {:>6} {:>6} {:>10.2}", r.memory_depth, r.coefficients, r.flops, r.nmse_test_db);
    }
    Ok(())
}

fn cmd_basis_check(order: u32, memory_depth: usize, max_power: u32, json: bool) -> CliResult<()> {
    let report = basis_check(order, memory_depth, max_power).map_err(|e| e.in_stage("basis-check"))?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{report}");
        say!(1, "{}", if report.all_present() { "all terms present" } else { "some terms missing" });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenSignal(c) => cmd_gen_signal(c),
        Command::Run { common, no_gmp, mlp } => cmd_run(common, *no_gmp, mlp),
        Command::Dpd { common, drive_peak } => cmd_dpd(common, *drive_peak),
        Command::Complexity { spec } => cmd_complexity(spec),
        Command::SweepMemory { common, depths } => cmd_sweep(common, depths),
        Command::BasisCheck {
            order,
            memory_depth,
            max_power,
            json,
        } => cmd_basis_check(*order, *memory_depth, *max_power, *json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error {}", e.tagged());
            ExitCode::from(e.exit_code())
        }
    }
}
