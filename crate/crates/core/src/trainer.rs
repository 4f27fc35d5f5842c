//! Adam, the minibatch training protocol, replicates and log-log slope fits.

use std::time::Instant;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fingerprint;
use crate::network::{ArchSpec, ParamSet};
use crate::pinn::{pinn_loss_gradient, relative_losses, PinnData, Problem, RelativeLosses};
use crate::rng::{derive_seed, seeded_rng};
use crate::sphere::sample_uniform;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub epsilon: f64,
    pub epochs: usize,
    /// Batch size is `max(1, round(train_size · batch_fraction))`; an epoch has
    /// `round(1 / batch_fraction)` iterations.
    pub batch_fraction: f64,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            betas: (0.9, 0.999),
            epsilon: 1e-8,
            epochs: 100,
            batch_fraction: 1.0 / 128.0,
            seed: 0,
            train_size: 256,
            test_size: 5120,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::invalid("betas", "must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be positive"));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(Error::invalid("batch_fraction", "must lie in (0, 1]"));
        }
        if self.train_size == 0 {
            return Err(Error::invalid("train_size", "must be positive"));
        }
        if self.test_size == 0 {
            return Err(Error::invalid("test_size", "must be positive"));
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        ((self.train_size as f64 * self.batch_fraction).round() as usize).max(1)
    }

    pub fn iterations_per_epoch(&self) -> usize {
        ((1.0 / self.batch_fraction).round() as usize).max(1)
    }
}

/// Adam moments and step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grad: &[f64],
    lr: f64,
    betas: (f64, f64),
    epsilon: f64,
) -> Result<()> {
    if grad.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::invalid(
            "grad",
            "shape does not match the parameters",
        ));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::non_finite(format!("gradient entry {i}")));
    }
    state.step += 1;
    let (b1, b2) = betas;
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

/// Outcome of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub train_size: usize,
    pub seed: u64,
    /// Relative losses after every epoch.
    pub history: Vec<RelativeLosses>,
    /// 0-based epoch with the smallest train PINN loss.
    pub best_epoch: Option<usize>,
    pub best: Option<RelativeLosses>,
    pub best_params_fingerprint: Option<String>,
    pub final_params_fingerprint: Option<String>,
    pub config_fingerprint: String,
    /// Set when the run aborted; the history then holds the completed epochs.
    pub failure: Option<String>,
    /// Not serialized, so records of identical runs compare byte-equal.
    #[serde(skip)]
    pub wall_time_s: f64,
    #[serde(skip)]
    pub best_params: Option<ParamSet>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none() && self.best.is_some()
    }

    /// `epoch,train_pinn,test_pinn,train_mse,test_mse,config_fingerprint` rows.
    pub fn write_history_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        use crate::io::format_sig17 as f;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "epoch",
            "train_pinn",
            "test_pinn",
            "train_mse",
            "test_mse",
            "config_fingerprint",
        ])?;
        for (e, h) in self.history.iter().enumerate() {
            w.write_record([
                e.to_string(),
                f(h.train_pinn),
                f(h.test_pinn),
                f(h.train_mse),
                f(h.test_mse),
                self.config_fingerprint.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct RunKey<'a> {
    label: &'a str,
    arch: &'a ArchSpec,
    config: &'a TrainConfig,
    test_seed: u64,
}

/// Fixed test set for an experiment.
pub fn test_data(problem: &Problem, test_size: usize, seed: u64) -> Result<PinnData> {
    PinnData::new(problem, sample_uniform(test_size, problem.d, seed)?)
}

/// Trains from the seeded initialization with per-epoch reshuffled minibatches
/// and keeps the epoch with the lowest train PINN loss.
///
/// Training samples, initialization and shuffling derive from `config.seed`.
/// A non-finite loss or gradient ends the run with `failure` set.
pub fn train(
    arch: &ArchSpec,
    problem: &Problem,
    config: &TrainConfig,
    test: &PinnData,
    test_seed: u64,
) -> Result<RunRecord> {
    config.validate()?;
    arch.validate()?;
    if arch.d != problem.d {
        return Err(Error::invalid(
            "arch.d",
            "does not match the problem dimension",
        ));
    }
    let start = Instant::now();
    let config_fingerprint = fingerprint(&RunKey {
        label: &problem.label,
        arch,
        config,
        test_seed,
    })?;
    let model = arch.model()?;
    let mut params = ParamSet::init_uniform(arch, derive_seed(config.seed, 0))?;
    let train_data = PinnData::new(
        problem,
        sample_uniform(config.train_size, problem.d, derive_seed(config.seed, 1))?,
    )?;
    let mut shuffle = seeded_rng(derive_seed(config.seed, 2));
    let mut adam = AdamState::new(params.len());
    let n = config.train_size;
    let bs = config.batch_size();
    let iters = config.iterations_per_epoch();
    let mut order: Vec<usize> = (0..n).collect();
    let mut record = RunRecord {
        label: problem.label.clone(),
        train_size: n,
        seed: config.seed,
        history: Vec::with_capacity(config.epochs),
        best_epoch: None,
        best: None,
        best_params_fingerprint: None,
        final_params_fingerprint: None,
        config_fingerprint,
        failure: None,
        wall_time_s: 0.0,
        best_params: None,
    };
    let mut batch = Vec::with_capacity(bs);
    'epochs: for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        let mut cursor = 0;
        for _ in 0..iters {
            batch.clear();
            for _ in 0..bs {
                if cursor == n {
                    order.shuffle(&mut shuffle);
                    cursor = 0;
                }
                batch.push(order[cursor]);
                cursor += 1;
            }
            let step = pinn_loss_gradient(problem, &model, params.values(), &train_data, &batch)
                .and_then(|(loss, grad)| {
                    if !loss.is_finite() {
                        return Err(Error::non_finite("training loss"));
                    }
                    adam_step(
                        &mut adam,
                        params.values_mut(),
                        &grad,
                        config.learning_rate,
                        config.betas,
                        config.epsilon,
                    )
                });
            if let Err(e) = step {
                warn!(
                    "{}: n={n} seed={} aborted in epoch {epoch}: {e}",
                    problem.label, config.seed
                );
                record.failure = Some(format!("epoch {epoch}: {e}"));
                break 'epochs;
            }
        }
        let losses = match relative_losses(problem, &model, params.values(), &train_data, test) {
            Ok(l) if l.train_pinn.is_finite() && l.test_pinn.is_finite() => l,
            Ok(_) => {
                record.failure = Some(format!("epoch {epoch}: non-finite evaluation"));
                break;
            }
            Err(e) => {
                record.failure = Some(format!("epoch {epoch}: {e}"));
                break;
            }
        };
        debug!(
            "{} n={n} seed={} epoch {epoch}: train {:.3e} test {:.3e}",
            problem.label, config.seed, losses.train_pinn, losses.test_pinn
        );
        if record.best.is_none_or(|b| losses.train_pinn < b.train_pinn) {
            record.best = Some(losses);
            record.best_epoch = Some(epoch);
            record.best_params = Some(params.clone());
        }
        record.history.push(losses);
    }
    if let Some(bp) = &record.best_params {
        record.best_params_fingerprint = Some(bp.fingerprint()?);
    }
    record.final_params_fingerprint = Some(params.fingerprint()?);
    record.wall_time_s = start.elapsed().as_secs_f64();
    info!(
        "{} n={n} seed={}: best epoch {:?}, test PINN {:.3e}, {:.1} s",
        problem.label,
        config.seed,
        record.best_epoch,
        record.best.map_or(f64::NAN, |b| b.test_pinn),
        record.wall_time_s
    );
    Ok(record)
}

/// OLS fit in log-log coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Decay rate: the negated regression coefficient of `ln loss` on `ln n`.
    pub slope: f64,
    pub r2: f64,
    /// OLS standard error of the slope; absent with fewer than three points.
    pub std_error: Option<f64>,
}

/// Least-squares fit of `ln loss` against `ln n`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if let Some(&(n, l)) = points.iter().find(|&&(n, l)| !(n > 0.0 && l > 0.0)) {
        return Err(Error::invalid(
            "points",
            format!("sizes and losses must be positive, got ({n}, {l})"),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("points", "need at least two distinct sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - alpha - beta * x;
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let std_error = (xs.len() > 2).then(|| (ss_res / (k - 2.0) / sxx).sqrt());
    Ok(SlopeFit {
        slope: -beta,
        r2,
        std_error,
    })
}

/// Seeds to run at one training size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizePlan {
    pub train_size: usize,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub train_size: usize,
    /// Mean of `ln` relative test PINN loss of the best model over successful replicates.
    pub mean_log_loss: f64,
    /// Sample standard deviation of the same (0 for a single replicate).
    pub std_log_loss: f64,
    pub replicates: usize,
    pub successes: usize,
}

impl SizeRow {
    /// At least [`MIN_SUCCESS_FRACTION`] of the replicates succeeded.
    pub fn sufficient(&self) -> bool {
        self.successes > 0 && self.successes as f64 >= MIN_SUCCESS_FRACTION * self.replicates as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub rows: Vec<SizeRow>,
    /// Over the sufficient rows; absent with fewer than two of them.
    pub fit: Option<SlopeFit>,
    pub runs: Vec<RunRecord>,
}

/// Minimum fraction of successful replicates per size.
pub const MIN_SUCCESS_FRACTION: f64 = 0.8;

/// Runs every `(size, seed)` pair (in parallel on the current rayon pool),
/// then aggregates in plan order. Sizes with too few successful replicates
/// stay in the table but are left out of the fit.
pub fn run_replicates(
    plan: &[SizePlan],
    arch: &ArchSpec,
    problem: &Problem,
    config: &TrainConfig,
    test: &PinnData,
    test_seed: u64,
) -> Result<ExperimentTable> {
    if plan.is_empty() || plan.iter().any(|p| p.seeds.is_empty()) {
        return Err(Error::invalid("plan", "every size needs at least one seed"));
    }
    let jobs: Vec<(usize, u64)> = plan
        .iter()
        .flat_map(|p| p.seeds.iter().map(move |&s| (p.train_size, s)))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let cfg = TrainConfig {
                train_size: n,
                seed,
                ..config.clone()
            };
            train(arch, problem, &cfg, test, test_seed)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(plan.len());
    for p in plan {
        let logs: Vec<f64> = runs
            .iter()
            .filter(|r| r.train_size == p.train_size && p.seeds.contains(&r.seed))
            .filter(|r| r.succeeded())
            .map(|r| r.best.unwrap().test_pinn.ln())
            .collect();
        let successes = logs.len();
        let (mean, std) = if successes == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let mean = logs.iter().sum::<f64>() / successes as f64;
            let std = if successes > 1 {
                (logs.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (successes - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            (mean, std)
        };
        rows.push(SizeRow {
            train_size: p.train_size,
            mean_log_loss: mean,
            std_log_loss: std,
            replicates: p.seeds.len(),
            successes,
        });
    }
    let usable: Vec<&SizeRow> = rows.iter().filter(|r| r.sufficient()).collect();
    let distinct = {
        let mut s: Vec<usize> = usable.iter().map(|r| r.train_size).collect();
        s.sort_unstable();
        s.dedup();
        s.len()
    };
    let fit = if distinct >= 2 {
        let pts: Vec<(f64, f64)> = usable
            .iter()
            .map(|r| (r.train_size as f64, r.mean_log_loss.exp()))
            .collect();
        Some(fit_loglog_slope(&pts)?)
    } else {
        None
    };
    Ok(ExperimentTable { rows, fit, runs })
}

impl ExperimentTable {
    pub fn complete(&self) -> bool {
        self.rows.iter().all(SizeRow::sufficient)
    }

    /// `train_size,mean_log_loss,std_log_loss,replicates,successes,config_fingerprint` rows.
    pub fn write_sizes_csv<W: std::io::Write>(&self, writer: W, fingerprint: &str) -> Result<()> {
        use crate::io::format_sig17 as f;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "train_size",
            "mean_log_loss",
            "std_log_loss",
            "replicates",
            "successes",
            "config_fingerprint",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.train_size.to_string(),
                f(r.mean_log_loss),
                f(r.std_log_loss),
                r.replicates.to_string(),
                r.successes.to_string(),
                fingerprint.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
