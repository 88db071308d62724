//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvtdcnn::baselines::{gmp_basis, gmp_fit_ls, gmp_forward, GmpConfig, GmpModel};
use rvtdcnn::basis_check::{basis_check, expand_power, filter_sum, monomial, Symbol};
use rvtdcnn::complexity::{complexity, rvtdcnn_coeff_count, rvtdcnn_flops, ComplexityInput, DEFAULT_ACT_COST};
use rvtdcnn::dataset::build_dataset;
use rvtdcnn::experiment::{run_dpd, run_experiment, BaselineConfig, ExperimentConfig};
use rvtdcnn::metrics::{nmse_db_slices, psd_welch, WelchConfig};
use rvtdcnn::network::{MlpPreset, Regressor, Rvtdcnn, RvtdcnnArch};
use rvtdcnn::training::{backprop_grads, mse_cost, StopReason};
use rvtdcnn::{generate_ofdm, papr_db, ComplexSeq, OfdmConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn check<F: FnOnce() -> Verdict>(id: u32, name: &str, budget: Duration, f: F) -> bool {
    let t = Instant::now();
    let v = f();
    let elapsed = t.elapsed();
    let in_time = elapsed <= budget;
    let pass = v.pass && in_time;
    let time_note = if in_time { "" } else { " OVER BUDGET" };
    println!(
        "criterion {id:>2} {}: {name} | {} | {:.1} s of {} s{time_note}",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn arch(m: usize, l: usize, r: usize, s: usize, t: usize) -> RvtdcnnArch {
    RvtdcnnArch {
        memory_depth: m,
        kernels: l,
        kernel_rows: r,
        kernel_cols: s,
        fc_neurons: t,
        ..RvtdcnnArch::default()
    }
}

fn complexity_oracles() -> Verdict {
    let mlp = |p: MlpPreset| {
        complexity(&ComplexityInput::Mlp {
            widths: p.widths(3),
            act_cost: DEFAULT_ACT_COST,
        })
        .unwrap()
        .coefficients
    };
    let gmp = complexity(&ComplexityInput::Gmp {
        config: GmpConfig::new(11, 7, 3, 2, 5, 2, 0, 3),
    })
    .unwrap();
    let got = [
        rvtdcnn_coeff_count(&RvtdcnnArch::default()),
        rvtdcnn_flops(&RvtdcnnArch::default()),
        rvtdcnn_coeff_count(&arch(2, 3, 3, 3, 6)),
        rvtdcnn_coeff_count(&arch(5, 3, 3, 3, 6)),
        rvtdcnn_coeff_count(&arch(3, 1, 2, 1, 20)),
        rvtdcnn_coeff_count(&arch(3, 1, 3, 1, 20)),
        rvtdcnn_coeff_count(&arch(3, 3, 3, 3, 20)),
        gmp.coefficients,
        gmp.flops,
        mlp(MlpPreset::Arvtdnn),
        mlp(MlpPreset::Rvtdnn),
    ];
    let want = [158, 876, 104, 266, 385, 306, 452, 214, 854, 393, 387];
    verdict(got == want, format!("{got:?}"))
}

fn gradient_check() -> Verdict {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let v: Vec<Complex64> = (0..40)
            .map(|_| Complex64::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)))
            .collect();
        let w: Vec<Complex64> = (0..40)
            .map(|_| Complex64::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)))
            .collect();
        let x = ComplexSeq::new(v, 1.0).unwrap();
        let y = ComplexSeq::new(w, 1.0).unwrap();
        let (data, _) = build_dataset(&x, &y, 3, 25, seed).unwrap();
        let mut net = Rvtdcnn::init(RvtdcnnArch::default(), seed).unwrap();
        let (_, grad) = backprop_grads(&net, &data).unwrap();
        let theta = net.flat_params();
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += h;
            net.set_flat_params(&t);
            let up = mse_cost(&net, &data).unwrap();
            t[i] -= 2.0 * h;
            net.set_flat_params(&t);
            let down = mse_cost(&net, &data).unwrap();
            let fd = (up - down) / (2.0 * h);
            // Components whose gradient is at round-off level carry no relative information.
            let diff = (grad[i] - fd).abs();
            if diff > 1e-10 {
                worst = worst.max(diff / grad[i].abs().max(fd.abs()));
            }
        }
        net.set_flat_params(&theta);
    }
    verdict(worst < 1e-6, format!("worst relative error {worst:.2e} over 20 instances"))
}

fn gmp_self_recovery() -> Verdict {
    let x = generate_ofdm(&OfdmConfig {
        n_symbols: 40,
        ..OfdmConfig::default()
    })
    .unwrap();
    let cfg = GmpConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let coeffs = (0..cfg.term_count())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 0.1)
        .collect();
    let truth = GmpModel { config: cfg, coeffs };
    let y = gmp_forward(&truth, &x).unwrap();
    let basis = gmp_basis(&x, &cfg).unwrap();
    let fit = gmp_fit_ls(&basis, y.samples(), 0.0).unwrap();
    let nmse = nmse_db_slices(&fit.predict(&basis).unwrap(), y.samples()).unwrap();
    verdict(nmse <= -100.0, format!("NMSE {nmse:.1} dB"))
}

fn basis_terms() -> Verdict {
    let report = basis_check(3, 2, 2).unwrap();
    let cross = report.cross_terms().filter(|e| e.present).count();
    let cube = expand_power(&filter_sum(), 3).unwrap();
    let coeff = cube.coefficient(&monomial(&[(Symbol::Bias, 1), (Symbol::I(0), 1), (Symbol::Abs(0), 1)]));
    let six = coeff == num_rational::BigRational::from_integer(6.into());
    verdict(
        report.all_present() && cross == 12 && six,
        format!("{cross}/12 cross-terms, linear terms present, b*I(n)*|x(n)| coefficient {coeff}"),
    )
}

fn signal_fidelity() -> Verdict {
    let x = generate_ofdm(&OfdmConfig::default()).unwrap();
    let papr = papr_db(&x).unwrap();
    let psd = psd_welch(&x, &WelchConfig::default()).unwrap();
    let ratio = psd.total_power() / x.power();
    verdict(
        (papr - 10.4).abs() <= 1.0 && (ratio - 1.0).abs() <= 0.01,
        format!("PAPR {papr:.2} dB, PSD power / mean power {ratio:.4}"),
    )
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    results.push(check(1, "complexity oracles", Duration::from_secs(1), complexity_oracles));
    results.push(check(2, "backprop vs finite differences", Duration::from_secs(10), gradient_check));
    results.push(check(3, "GMP self-recovery", Duration::from_secs(30), gmp_self_recovery));

    let base = ExperimentConfig::default();
    let mut case1_json = None;
    let mut case1_nmse = f64::NAN;
    let mut case1_report = None;
    results.push(check(4, "forward modeling, case 1", Duration::from_secs(600), || {
        let r = match run_experiment(&base) {
            Ok(o) => o.report,
            Err(e) => return verdict(false, e.to_string()),
        };
        case1_json = Some(serde_json::to_vec(&r).unwrap());
        case1_nmse = r.nmse_test_db;
        let gap = (r.nmse_train_db - r.nmse_test_db).abs();
        let v = verdict(
            r.nmse_test_db <= -30.0 && gap <= 1.0,
            format!("test NMSE {:.2} dB, train/test gap {gap:.2} dB", r.nmse_test_db),
        );
        case1_report = Some(r);
        v
    }));

    results.push(check(5, "two-stage LM behavior", Duration::from_secs(1), || match &case1_report {
        None => verdict(false, "no case-1 run"),
        Some(r) => {
            let t = &r.training;
            let converged = matches!(t.lm_stop, Some(StopReason::GradTol | StopReason::Stall | StopReason::Threshold));
            let within = t.lm_iterations.is_some_and(|n| n <= 200);
            verdict(
                t.lm_monotone == Some(true) && converged && within,
                format!(
                    "monotone {:?}, stop {:?} after {:?} iterations",
                    t.lm_monotone, t.lm_stop, t.lm_iterations
                ),
            )
        }
    }));

    results.push(check(6, "impairment robustness", Duration::from_secs(1800), || {
        let mut worst: f64 = f64::NEG_INFINITY;
        let mut parts = Vec::new();
        for case in [2u8, 3] {
            let cfg = ExperimentConfig {
                impairment_case: case,
                baselines: BaselineConfig {
                    gmp: None,
                    ..BaselineConfig::default()
                },
                ..base.clone()
            };
            match run_experiment(&cfg) {
                Ok(o) => {
                    let d = o.report.nmse_test_db - case1_nmse;
                    worst = worst.max(d);
                    parts.push(format!("case {case} {:.2} dB ({d:+.2})", o.report.nmse_test_db));
                }
                Err(e) => return verdict(false, e.to_string()),
            }
        }
        verdict(
            worst <= 1.5,
            format!("case 1 {case1_nmse:.2} dB, {}", parts.join(", ")),
        )
    }));

    results.push(check(7, "DPD linearization", Duration::from_secs(900), || match run_dpd(&base) {
        Err(e) => verdict(false, e.to_string()),
        Ok(o) => {
            let (lo, hi) = o.report.improvement_db;
            let r = &o.report.result;
            verdict(
                lo >= 10.0 && hi >= 10.0,
                format!(
                    "ACPR {:.1}/{:.1} -> {:.1}/{:.1} dBc, improvement {lo:.1}/{hi:.1} dB, {} clip violations",
                    r.acpr_before.0, r.acpr_before.1, r.acpr_after.0, r.acpr_after.1, r.clip_violations
                ),
            )
        }
    }));

    results.push(check(8, "tanh filter basis terms", Duration::from_secs(5), basis_terms));
    results.push(check(9, "signal fidelity", Duration::from_secs(60), signal_fidelity));

    results.push(check(10, "report determinism", Duration::from_secs(600), || {
        let again = match run_experiment(&base) {
            Ok(o) => serde_json::to_vec(&o.report).unwrap(),
            Err(e) => return verdict(false, e.to_string()),
        };
        match &case1_json {
            None => verdict(false, "no case-1 run"),
            Some(first) => verdict(*first == again, format!("{} report bytes compared", again.len())),
        }
    }));

    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
