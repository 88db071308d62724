//! Cost, gradients and the two training stages: full-batch Adam over every
//! parameter, then Levenberg-Marquardt over the fully connected and output
//! layers with the convolution layer frozen.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::rvtdcnn::{forward_trace, Trace};
use crate::network::{Regressor, Rvtdcnn};

/// Samples per parallel work unit. Fixed so the summation order, and hence
/// every result bit, does not depend on the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub mse_threshold: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iters: 200_000,
            mse_threshold: 1.2e-7,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let open01 = |v: f64| v > 0.0 && v < 1.0;
        if !(self.alpha > 0.0) || !open01(self.beta1) || !open01(self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config(
                "adam needs alpha > 0, betas in (0, 1) and epsilon > 0".into(),
            ));
        }
        if !(self.mse_threshold >= 0.0) {
            return Err(Error::Config("adam mse threshold must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub mu_init: f64,
    pub mu_up: f64,
    pub mu_down: f64,
    /// Damping above which an iteration with no accepted step ends training.
    pub mu_max: f64,
    pub max_iters: usize,
    /// Stop once the cost gradient norm drops below this.
    pub grad_tol: f64,
    /// Stop once the last `stall_window` accepted steps together improved
    /// the cost by less than `stall_db`.
    pub stall_window: usize,
    pub stall_db: f64,
    pub mse_threshold: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            mu_init: 1e-3,
            mu_up: 10.0,
            mu_down: 0.1,
            mu_max: 1e10,
            max_iters: 200,
            grad_tol: 1e-10,
            stall_window: 10,
            stall_db: 0.2,
            mse_threshold: 1.2e-7,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_up > 1.0 && self.mu_down > 0.0 && self.mu_down < 1.0) {
            return Err(Error::Config("lm needs mu_up > 1 > mu_down > 0".into()));
        }
        if !(self.mu_init > 0.0 && self.mu_max >= self.mu_init) {
            return Err(Error::Config("lm needs 0 < mu_init <= mu_max".into()));
        }
        if !(self.grad_tol >= 0.0 && self.stall_db >= 0.0 && self.mse_threshold >= 0.0) {
            return Err(Error::Config("lm tolerances must be >= 0".into()));
        }
        Ok(())
    }
}

fn check_data<R: Regressor>(model: &R, data: &Dataset) -> Result<()> {
    let first = data
        .entries
        .first()
        .ok_or_else(|| Error::Degenerate("empty dataset".into()))?;
    model.check_input(&first.graph)
}

/// `(1/2N) * sum((I' - I)^2 + (Q' - Q)^2)`.
pub fn mse_cost<R: Regressor>(model: &R, data: &Dataset) -> Result<f64> {
    check_data(model, data)?;
    let sums: Vec<f64> = data
        .entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = model.scratch();
            chunk
                .iter()
                .map(|e| {
                    let p = model.predict_with(&e.graph, &mut s);
                    let (di, dq) = (p[0] - e.label[0], p[1] - e.label[1]);
                    di * di + dq * dq
                })
                .sum::<f64>()
        })
        .collect();
    Ok(sums.iter().sum::<f64>() / (2.0 * data.len() as f64))
}

/// Model predictions for every entry, in dataset order.
pub fn predict_all<R: Regressor>(model: &R, data: &Dataset) -> Result<Vec<[f64; 2]>> {
    check_data(model, data)?;
    let parts: Vec<Vec<[f64; 2]>> = data
        .entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = model.scratch();
            chunk.iter().map(|e| model.predict_with(&e.graph, &mut s)).collect()
        })
        .collect();
    Ok(parts.concat())
}

/// Cost and its exact gradient over the flat parameter vector.
pub fn backprop_grads<R: Regressor>(model: &R, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    check_data(model, data)?;
    let np = model.param_count();
    let parts: Vec<(f64, Vec<f64>)> = data
        .entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = model.scratch();
            let mut g = vec![0.0; np];
            let sq: f64 = chunk
                .iter()
                .map(|e| model.accumulate_gradient(&e.graph, e.label, &mut g, &mut s))
                .sum();
            (sq, g)
        })
        .collect();
    let n = data.len() as f64;
    let mut grad = vec![0.0; np];
    let mut sq = 0.0;
    for (s, g) in parts {
        sq += s;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    grad.iter_mut().for_each(|v| *v /= n);
    Ok((sq / (2.0 * n), grad))
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One Adam update at step `k >= 1`.
pub fn adam_step(theta: &mut [f64], state: &mut AdamState, grads: &[f64], cfg: &AdamConfig, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("adam step index starts at 1".into()));
    }
    if theta.len() != grads.len() || state.m.len() != grads.len() {
        return Err(Error::LengthMismatch {
            left: theta.len(),
            right: grads.len(),
        });
    }
    let c1 = 1.0 - cfg.beta1.powi(k as i32);
    let c2 = 1.0 - cfg.beta2.powi(k as i32);
    for i in 0..theta.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        theta[i] -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub mse_train: f64,
    pub mse_test: Option<f64>,
}

/// Per-iteration cost record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub rows: Vec<HistoryRow>,
}

impl TrainingHistory {
    pub fn last_iter(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    pub fn extend(&mut self, other: &TrainingHistory) {
        let base = self.last_iter();
        self.rows.extend(other.rows.iter().map(|r| HistoryRow {
            iter: r.iter + base,
            ..*r
        }));
    }

    /// `iter,mse_train,mse_test`; the test column is empty where not evaluated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,mse_train,mse_test")?;
        for r in &self.rows {
            match r.mse_test {
                Some(t) => writeln!(w, "{},{:e},{:e}", r.iter, r.mse_train, t)?,
                None => writeln!(w, "{},{:e},", r.iter, r.mse_train)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Threshold,
    MaxIters,
    GradTol,
    Stall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub history: TrainingHistory,
    pub stop: StopReason,
    pub iterations: usize,
    pub final_mse: f64,
    /// Train cost after every accepted step (LM only), starting with the initial cost.
    pub accepted_costs: Vec<f64>,
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Training(format!("{what} diverged")))
    }
}

/// Full-batch Adam over all parameters. The parameters with the lowest
/// train cost seen are kept.
pub fn train_stage1_adam<R: Regressor>(
    model: &mut R,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &AdamConfig,
) -> Result<StageOutcome> {
    cfg.validate()?;
    check_data(model, train)?;
    if let Some(t) = test {
        check_data(model, t)?;
    }
    let mut theta = model.flat_params();
    let mut state = AdamState::new(theta.len());
    let mut history = TrainingHistory::default();
    let mut best = (f64::INFINITY, theta.clone());
    let mut stop = StopReason::MaxIters;
    let mut k = 0;
    while k < cfg.max_iters {
        let (cost, grad) = backprop_grads(model, train)?;
        finite(cost, "adam train cost")?;
        if cost < best.0 {
            best = (cost, theta.clone());
        }
        if cost < cfg.mse_threshold {
            stop = StopReason::Threshold;
            break;
        }
        k += 1;
        adam_step(&mut theta, &mut state, &grad, cfg, k)?;
        model.set_flat_params(&theta);
        let mse_train = finite(mse_cost(model, train)?, "adam train cost")?;
        let mse_test = test.map(|t| mse_cost(model, t)).transpose()?;
        history.rows.push(HistoryRow {
            iter: k,
            mse_train,
            mse_test,
        });
        if mse_train < best.0 {
            best = (mse_train, theta.clone());
        }
    }
    model.set_flat_params(&best.1);
    Ok(StageOutcome {
        history,
        stop,
        iterations: k,
        final_mse: best.0,
        accepted_costs: Vec::new(),
    })
}

/// `J^T J`, `J^T e` and the cost over the head parameters, where `e` is
/// label minus prediction and `J` is the prediction Jacobian.
fn normal_equations(net: &Rvtdcnn, data: &Dataset) -> (DMatrix<f64>, DVector<f64>, f64) {
    let width = net.arch.head_param_count();
    let parts: Vec<(DMatrix<f64>, DVector<f64>, f64)> = data
        .entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut t = Trace::new(&net.arch);
            let mut jac = DMatrix::<f64>::zeros(2 * chunk.len(), width);
            let mut err = DVector::<f64>::zeros(2 * chunk.len());
            let mut rows = vec![0.0; 2 * width];
            for (k, e) in chunk.iter().enumerate() {
                forward_trace(&net.params, &net.arch, &e.graph, &mut t);
                net.head_jacobian(&t, &mut rows);
                for c in 0..width {
                    jac[(2 * k, c)] = rows[c];
                    jac[(2 * k + 1, c)] = rows[width + c];
                }
                err[2 * k] = e.label[0] - t.output[0];
                err[2 * k + 1] = e.label[1] - t.output[1];
            }
            (jac.tr_mul(&jac), jac.tr_mul(&err), err.norm_squared())
        })
        .collect();
    let mut jtj = DMatrix::zeros(width, width);
    let mut jte = DVector::zeros(width);
    let mut sq = 0.0;
    for (a, b, s) in parts {
        jtj += a;
        jte += b;
        sq += s;
    }
    (jtj, jte, sq / (2.0 * data.len() as f64))
}

/// Levenberg-Marquardt over the fully connected and output parameters.
/// Convolution kernels and biases are left untouched.
pub fn train_stage2_lm(
    net: &mut Rvtdcnn,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &LmConfig,
) -> Result<StageOutcome> {
    cfg.validate()?;
    check_data(net, train)?;
    if let Some(t) = test {
        check_data(net, t)?;
    }
    let n = train.len() as f64;
    let mut mu = cfg.mu_init;
    let mut history = TrainingHistory::default();
    let mut head = DVector::from_vec(net.params.head_flat());
    let (mut jtj, mut jte, _) = normal_equations(net, train);
    let mut cost = finite(mse_cost(net, train)?, "lm train cost")?;
    let mut accepted_costs = vec![cost];
    let mut stop = StopReason::MaxIters;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if cost < cfg.mse_threshold {
            stop = StopReason::Threshold;
            break;
        }
        if jte.norm() / n < cfg.grad_tol {
            stop = StopReason::GradTol;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        let mut solved_any = false;
        while mu <= cfg.mu_max {
            let mut damped = jtj.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += mu;
            }
            let Some(chol) = damped.cholesky() else {
                mu *= cfg.mu_up;
                continue;
            };
            solved_any = true;
            let candidate = &head + chol.solve(&jte);
            net.params.set_head_flat(candidate.as_slice());
            let trial = mse_cost(net, train)?;
            if trial.is_finite() && trial < cost {
                mu = (mu * cfg.mu_down).max(f64::MIN_POSITIVE);
                accepted = Some((candidate, trial));
                break;
            }
            mu *= cfg.mu_up;
        }
        let Some((candidate, trial)) = accepted else {
            net.params.set_head_flat(head.as_slice());
            if !solved_any {
                return Err(Error::Training("lm normal equations singular at every damping".into()));
            }
            stop = StopReason::Stall;
            break;
        };
        head = candidate;
        (jtj, jte, _) = normal_equations(net, train);
        cost = trial;
        accepted_costs.push(cost);
        let mse_test = test.map(|t| mse_cost(net, t)).transpose()?;
        history.rows.push(HistoryRow {
            iter: iterations,
            mse_train: cost,
            mse_test,
        });
        let w = cfg.stall_window;
        if w > 0 && accepted_costs.len() > w {
            let old = accepted_costs[accepted_costs.len() - 1 - w];
            if 10.0 * (old / cost).log10() < cfg.stall_db {
                stop = StopReason::Stall;
                break;
            }
        }
    }
    Ok(StageOutcome {
        history,
        stop,
        iterations,
        final_mse: cost,
        accepted_costs,
    })
}

/// Gradient of the cost with respect to the head parameters, from the LM
/// normal equations. Exposed for convergence checks.
pub fn head_gradient(net: &Rvtdcnn, data: &Dataset) -> Result<Vec<f64>> {
    check_data(net, data)?;
    let (_, jte, _) = normal_equations(net, data);
    let n = data.len() as f64;
    Ok(jte.iter().map(|v| -v / n).collect())
}

/// Result of Adam followed by Levenberg-Marquardt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOutcome {
    pub adam: StageOutcome,
    pub lm: Option<StageOutcome>,
}

impl TwoStageOutcome {
    /// Both stages on one iteration axis.
    pub fn history(&self) -> TrainingHistory {
        let mut h = self.adam.history.clone();
        if let Some(lm) = &self.lm {
            h.extend(&lm.history);
        }
        h
    }

    pub fn final_mse(&self) -> f64 {
        self.lm.as_ref().map_or(self.adam.final_mse, |l| l.final_mse)
    }
}

/// Adam over all parameters then LM over the head. With `frozen_filter` the
/// Adam stage is skipped and the current convolution layer is used as is.
pub fn train_two_stage(
    net: &mut Rvtdcnn,
    train: &Dataset,
    test: Option<&Dataset>,
    adam: &AdamConfig,
    lm: Option<&LmConfig>,
    frozen_filter: bool,
) -> Result<TwoStageOutcome> {
    let adam_out = if frozen_filter {
        StageOutcome {
            history: TrainingHistory::default(),
            stop: StopReason::MaxIters,
            iterations: 0,
            final_mse: mse_cost(net, train)?,
            accepted_costs: Vec::new(),
        }
    } else {
        train_stage1_adam(net, train, test, adam)?
    };
    let lm_out = lm.map(|cfg| train_stage2_lm(net, train, test, cfg)).transpose()?;
    Ok(TwoStageOutcome {
        adam: adam_out,
        lm: lm_out,
    })
}
