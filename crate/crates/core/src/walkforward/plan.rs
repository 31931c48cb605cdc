use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::AssetClass;
use crate::error::{Error, Result};
use crate::loss::SurrogateConfig;
use crate::models::Family;
use crate::optim::AdamConfig;

/// What the training window does once it reaches `max_train_window_years`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostCapMode {
    /// Keep the capped width and move the start forward with each fold.
    #[default]
    Sliding,
    /// Keep training on the first capped window for every later fold.
    Frozen,
}

/// How each fold sets the model's input multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// Feed raw returns.
    None,
    /// Divide by the standard deviation of the fold's fit-segment returns.
    #[default]
    TrainStd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// One gradient step per epoch over every training sample.
    #[default]
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    /// First training window and the unit "year" for the cap, in days.
    pub initial_window_days: usize,
    pub test_window_days: usize,
    pub max_train_window_years: usize,
    pub post_cap: PostCapMode,
    /// Share of each training window held out, as its chronological suffix.
    pub validation_fraction: f64,
    pub epochs: usize,
    pub batch_mode: BatchMode,
    #[serde(default)]
    pub input_scaling: InputScaling,
    pub optimizer: AdamConfig,
    pub surrogate: SurrogateConfig,
    pub seed: u64,
}

impl TrainRunConfig {
    /// Default schedule: one-year windows, 4-year cap, 50 transformer or 300 LSTM epochs.
    pub fn for_family(family: Family, asset_class: AssetClass) -> Self {
        let year = asset_class.periods_per_year();
        let (epochs, learning_rate) = match family {
            Family::Transformer => (50, 0.01),
            Family::Lstm => (300, 0.5),
        };
        Self {
            initial_window_days: year,
            test_window_days: year,
            max_train_window_years: 4,
            post_cap: PostCapMode::Sliding,
            validation_fraction: 0.33,
            epochs,
            batch_mode: BatchMode::Full,
            input_scaling: InputScaling::TrainStd,
            optimizer: AdamConfig::with_learning_rate(learning_rate),
            surrogate: SurrogateConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.initial_window_days == 0 || self.test_window_days == 0 {
            return bad("window sizes must be positive".into());
        }
        if self.max_train_window_years == 0 {
            return bad("max_train_window_years must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        self.optimizer.validate()?;
        self.surrogate.validate()
    }

    fn max_train_days(&self) -> usize {
        self.max_train_window_years * self.initial_window_days
    }
}

/// One walk-forward step, in return-series day indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub index: usize,
    pub train: Range<usize>,
    /// Chronological suffix of `train`.
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl FoldPlan {
    /// Days whose targets are fitted: the training range minus the validation suffix
    /// and any day without `seq_len` earlier observations.
    pub fn fit_targets(&self, seq_len: usize) -> Range<usize> {
        self.train.start.max(seq_len)..self.validation.start
    }
}

/// Splits `n_days` returns into expanding (then capped) train windows, each
/// followed by an unseen test window. The test ranges tile `[W, n_days)`.
pub fn plan_folds(n_days: usize, seq_len: usize, cfg: &TrainRunConfig) -> Result<Vec<FoldPlan>> {
    cfg.validate()?;
    let w = cfg.initial_window_days;
    if n_days <= w + seq_len {
        return Err(Error::Planning(format!(
            "{n_days} days cannot cover an initial window of {w} plus {seq_len} input days"
        )));
    }
    let cap = cfg.max_train_days();
    let mut folds = Vec::new();
    let mut test_start = w;
    while test_start < n_days {
        let train = match cfg.post_cap {
            PostCapMode::Sliding => test_start.saturating_sub(cap)..test_start,
            PostCapMode::Frozen => 0..test_start.min(cap),
        };
        let val_len = (cfg.validation_fraction * train.len() as f64).floor() as usize;
        let validation = train.end - val_len..train.end;
        let fold = FoldPlan {
            index: folds.len(),
            train,
            validation,
            test: test_start..(test_start + cfg.test_window_days).min(n_days),
        };
        if val_len == 0 || fold.fit_targets(seq_len).is_empty() {
            return Err(Error::Planning(format!(
                "fold {} has train range {:?}, too short for a validation split and {seq_len}-day inputs",
                fold.index, fold.train
            )));
        }
        test_start = fold.test.end;
        folds.push(fold);
    }
    Ok(folds)
}
