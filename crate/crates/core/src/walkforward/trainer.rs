use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::dataset::WindowDataset;
use super::plan::{plan_folds, BatchMode, FoldPlan, InputScaling, TrainRunConfig};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::loss::{madl_exact, madl_surrogate};
use crate::models::{load_checkpoint, save_checkpoint, ForecastModel, Mode, ModelConfig};
use crate::optim::AdamState;
use crate::rng::derive_seed;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub fold: usize,
    pub epoch: usize,
    pub train_surrogate: f64,
    pub validation_exact: f64,
    pub wall_ms: f64,
}

/// Result of training one fold: the serialized best-validation weights.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub checkpoint: Vec<u8>,
    pub best_epoch: usize,
    pub best_validation: f64,
    pub history: Vec<EpochRecord>,
}

/// `1/σ` of `values`, or 1 when they carry no spread.
fn inverse_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = var.sqrt().recip();
    if scale.is_finite() && scale > 0.0 {
        scale
    } else {
        1.0
    }
}

/// Called after every optimizer step with `(fold, epoch, model)`.
pub type EpochHook<'a> = &'a (dyn Fn(usize, usize, &mut ForecastModel) + Sync);

/// Initialization seed of the model trained for `fold`.
pub fn fold_seed(run_seed: u64, model: &ModelConfig, fold: usize) -> u64 {
    derive_seed(run_seed, &[u64::from(model.family.code()), fold as u64])
}

pub fn train_fold(
    model_cfg: &ModelConfig,
    fold: &FoldPlan,
    returns: &[f64],
    cfg: &TrainRunConfig,
) -> Result<FoldOutcome> {
    train_fold_with_hook(model_cfg, fold, returns, cfg, None)
}

/// Trains a fresh model for `cfg.epochs` full-batch surrogate steps and keeps
/// the epoch with the lowest exact validation loss (earliest on ties).
///
/// Only `returns[..fold.train.end]` is read.
pub fn train_fold_with_hook(
    model_cfg: &ModelConfig,
    fold: &FoldPlan,
    returns: &[f64],
    cfg: &TrainRunConfig,
    hook: Option<EpochHook<'_>>,
) -> Result<FoldOutcome> {
    cfg.validate()?;
    let BatchMode::Full = cfg.batch_mode;
    let history_only = &returns[..fold.train.end.min(returns.len())];
    let seq_len = model_cfg.sequence_length;
    let fit = WindowDataset::build(history_only, fold.fit_targets(seq_len), seq_len)?;
    let val = WindowDataset::build(history_only, fold.validation.clone(), seq_len)?;

    let mut config = model_cfg.clone();
    config.seed = fold_seed(cfg.seed, model_cfg, fold.index);
    if cfg.input_scaling == InputScaling::TrainStd {
        config.input_scale = inverse_std(&history_only[fold.train.start..fold.validation.start]);
    }
    let mut model = ForecastModel::new(config)?;
    let mut adam = AdamState::new(model.params(), cfg.optimizer, model_cfg.l2_coefficient)?;

    let diverged = |epoch| Error::Divergence {
        fold: fold.index,
        epoch,
    };
    let mut best: Option<(usize, f64, Vec<u8>)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        // non-finite values caught inside an op are reported as divergence too
        let numeric = |e: Error| match e {
            Error::Numeric(_) => diverged(epoch),
            other => other,
        };
        model.set_mode(Mode::Train);
        let mut tape = Tape::new();
        let pass = model.forward(&mut tape, fit.inputs()).map_err(numeric)?;
        let loss =
            madl_surrogate(&mut tape, fit.targets(), pass.prediction, &cfg.surrogate).map_err(numeric)?;
        let train_surrogate = tape.value(loss).data()[0];
        if !train_surrogate.is_finite() {
            return Err(diverged(epoch));
        }
        tape.backward(loss).map_err(numeric)?;
        model.zero_grad();
        model.collect_grads(&tape, &pass)?;
        drop(tape);
        adam.step(model.params_mut())?;
        if let Some(h) = hook {
            h(fold.index, epoch, &mut model);
        }
        if !model.params_finite() {
            return Err(diverged(epoch));
        }

        model.set_mode(Mode::Eval);
        let preds = model.predict_batch(val.inputs()).map_err(numeric)?;
        if preds.iter().any(|p| !p.is_finite()) {
            return Err(diverged(epoch));
        }
        let validation_exact = madl_exact(val.targets(), &preds)?;
        if best.as_ref().is_none_or(|(_, b, _)| validation_exact < *b) {
            best = Some((epoch, validation_exact, save_checkpoint(&model)));
        }
        history.push(EpochRecord {
            fold: fold.index,
            epoch,
            train_surrogate,
            validation_exact,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    let (best_epoch, best_validation, checkpoint) = best.expect("epochs >= 1");
    Ok(FoldOutcome {
        checkpoint,
        best_epoch,
        best_validation,
        history,
    })
}

/// Eval-mode forecasts for every test day with a full input window, in day order.
pub fn predict_fold(checkpoint: &[u8], fold: &FoldPlan, returns: &[f64]) -> Result<Vec<(usize, f64)>> {
    let mut model = load_checkpoint(checkpoint)?;
    model.set_mode(Mode::Eval);
    let seq_len = model.config().sequence_length;
    let test = WindowDataset::build(returns, fold.test.clone(), seq_len)?;
    let preds = model.predict_batch(test.inputs())?;
    Ok(test.days().iter().copied().zip(preds).collect())
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub plan: FoldPlan,
    pub outcome: FoldOutcome,
    pub predictions: Vec<(usize, f64)>,
}

/// Plans, trains and predicts every fold. Folds train in parallel on the
/// current rayon pool; the result, and the first reported error, follow fold order.
pub fn walk_forward(
    model_cfg: &ModelConfig,
    returns: &[f64],
    cfg: &TrainRunConfig,
) -> Result<Vec<FoldResult>> {
    walk_forward_with_hook(model_cfg, returns, cfg, None)
}

pub fn walk_forward_with_hook(
    model_cfg: &ModelConfig,
    returns: &[f64],
    cfg: &TrainRunConfig,
    hook: Option<EpochHook<'_>>,
) -> Result<Vec<FoldResult>> {
    model_cfg.validate()?;
    let plan = plan_folds(returns.len(), model_cfg.sequence_length, cfg)?;
    plan.into_par_iter()
        .map(|fold| {
            let outcome = train_fold_with_hook(model_cfg, &fold, returns, cfg, hook)?;
            let predictions = predict_fold(&outcome.checkpoint, &fold, returns)?;
            Ok(FoldResult {
                plan: fold,
                outcome,
                predictions,
            })
        })
        .collect::<Vec<Result<FoldResult>>>()
        .into_iter()
        .collect()
}
