//! Return forecasters: a decoder-style attention stack and a stacked LSTM.
//!
//! Both map a window of the last `L` simple returns to one predicted
//! next-period return. Parameters live in a flat, name-ordered list so that the
//! optimizer and the checkpoint format can treat both families uniformly.

mod attention;
mod checkpoint;
mod config;
mod lstm;
mod transformer;

pub use attention::{
    multi_head_attention, scaled_dot_product_attention, Attention, HeadWeights, MultiHeadAttention,
    MultiHeadWeights,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Family, ModelConfig, OutputActivation, PositionalEncoding};
pub use transformer::sinusoidal_encoding;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::optim::Parameter;
use crate::rng::{derive_seed, seeded};
use crate::tensor::Tensor;

use lstm::LstmLayout;
use transformer::TransformerLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active.
    Train,
    /// Deterministic inference.
    Eval,
}

/// `n` windows of `seq_len` past returns, oldest first, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    seq_len: usize,
    values: Vec<f64>,
}

impl WindowBatch {
    pub fn new(seq_len: usize, values: Vec<f64>) -> Result<Self> {
        if seq_len == 0 || values.is_empty() || !values.len().is_multiple_of(seq_len) {
            return Err(Error::Usage(format!(
                "{} values do not form whole windows of length {seq_len}",
                values.len()
            )));
        }
        Ok(Self { seq_len, values })
    }

    pub fn single(window: &[f64]) -> Result<Self> {
        Self::new(window.len(), window.to_vec())
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.seq_len
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn window(&self, i: usize) -> &[f64] {
        &self.values[i * self.seq_len..(i + 1) * self.seq_len]
    }

    pub(crate) fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.len(), self.seq_len], self.values.clone()).expect("validated batch")
    }
}

/// Handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `[n]` predictions, one per window.
    pub prediction: Var,
    /// Tape handles of the parameters, parallel to [`ForecastModel::params`].
    pub param_vars: Vec<Var>,
    /// Attention weight tensors, layer-major then head (empty for LSTM).
    pub attention: Vec<Var>,
}

#[derive(Debug, Clone)]
enum Layout {
    Transformer(TransformerLayout),
    Lstm(LstmLayout),
}

/// Uniform Glorot initialization for weight matrices, zeros for biases.
pub(crate) struct ParamBuilder {
    rng: ChaCha8Rng,
    params: Vec<Parameter>,
}

impl ParamBuilder {
    fn new(seed: u64) -> Self {
        Self {
            rng: seeded(derive_seed(seed, &[0x1A17])),
            params: Vec::new(),
        }
    }

    pub(crate) fn weight(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| self.rng.gen_range(-limit..=limit))
            .collect();
        let t = Tensor::new(vec![rows, cols], data).expect("positive dims");
        self.push(Parameter::new(name, t, true))
    }

    pub(crate) fn zeros(&mut self, name: String, n: usize) -> usize {
        self.push(Parameter::new(name, Tensor::zeros(&[n]), false))
    }

    pub(crate) fn ones(&mut self, name: String, n: usize) -> usize {
        self.push(Parameter::new(name, Tensor::filled(&[n], 1.0), false))
    }

    fn push(&mut self, p: Parameter) -> usize {
        self.params.push(p);
        self.params.len() - 1
    }
}

/// A parameterized forecaster of either family.
#[derive(Debug, Clone)]
pub struct ForecastModel {
    config: ModelConfig,
    params: Vec<Parameter>,
    layout: Layout,
    mode: Mode,
    dropout_rng: ChaCha8Rng,
}

impl ForecastModel {
    /// Freshly initialized model; the initialization depends only on `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut builder = ParamBuilder::new(config.seed);
        let layout = match config.family {
            Family::Transformer => Layout::Transformer(TransformerLayout::build(&config, &mut builder)),
            Family::Lstm => Layout::Lstm(LstmLayout::build(&config, &mut builder)),
        };
        let dropout_rng = seeded(derive_seed(config.seed, &[0xD209]));
        Ok(Self {
            config,
            params: builder.params,
            layout,
            mode: Mode::Train,
            dropout_rng,
        })
    }

    /// Rebuilds a model from stored parameter values, checking names and shapes.
    pub(crate) fn from_parameters(config: ModelConfig, stored: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = Self::new(config)?;
        if stored.len() != model.params.len() {
            return Err(Error::Usage(format!(
                "expected {} parameters, found {}",
                model.params.len(),
                stored.len()
            )));
        }
        for (p, (name, value)) in model.params.iter_mut().zip(stored) {
            if p.name != name || p.value.shape() != value.shape() {
                return Err(Error::Usage(format!(
                    "parameter '{name}' {:?} does not match expected '{}' {:?}",
                    value.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
            p.value = value;
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn family(&self) -> Family {
        self.config.family
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn params_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(|p| p.grad = None);
    }

    /// Records a forward pass with parameters as gradient-tracked leaves.
    pub fn forward(&mut self, tape: &mut Tape, batch: &WindowBatch) -> Result<ForwardPass> {
        self.forward_with(tape, batch, true)
    }

    fn forward_with(&mut self, tape: &mut Tape, batch: &WindowBatch, track: bool) -> Result<ForwardPass> {
        if batch.seq_len() != self.config.sequence_length {
            return Err(Error::Usage(format!(
                "window length {} does not match sequence_length {}",
                batch.seq_len(),
                self.config.sequence_length
            )));
        }
        let scaled;
        let batch = if self.config.input_scale == 1.0 {
            batch
        } else {
            let s = self.config.input_scale;
            scaled = WindowBatch::new(batch.seq_len, batch.values.iter().map(|v| v * s).collect())?;
            &scaled
        };
        let param_vars: Vec<Var> = self
            .params
            .iter()
            .map(|p| tape.leaf(p.value.clone(), track))
            .collect();
        let dropout = match self.mode {
            Mode::Train if self.config.dropout_rate > 0.0 => Some(&mut self.dropout_rng),
            _ => None,
        };
        let (prediction, attention) = match &self.layout {
            Layout::Transformer(l) => l.forward(&self.config, tape, &param_vars, batch, dropout)?,
            Layout::Lstm(l) => (
                l.forward(&self.config, tape, &param_vars, batch, dropout)?,
                Vec::new(),
            ),
        };
        Ok(ForwardPass {
            prediction,
            param_vars,
            attention,
        })
    }

    /// Adds the tape gradients of a finished backward pass to the parameters.
    /// Parameters the loss did not reach receive a zero gradient.
    pub fn collect_grads(&mut self, tape: &Tape, pass: &ForwardPass) -> Result<()> {
        for (p, &v) in self.params.iter_mut().zip(&pass.param_vars) {
            let g = tape.grad(v).unwrap_or_else(|| Tensor::zeros(p.value.shape()));
            p.accumulate_grad(&g)?;
        }
        Ok(())
    }

    /// Predictions for every window in the current mode, without gradient tracking.
    pub fn predict_batch(&mut self, batch: &WindowBatch) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let pass = self.forward_with(&mut tape, batch, false)?;
        Ok(tape.value(pass.prediction).data().to_vec())
    }

    pub fn predict(&mut self, window: &[f64]) -> Result<f64> {
        Ok(self.predict_batch(&WindowBatch::single(window)?)?[0])
    }
}

/// Final dense neuron plus output activation shared by both families.
pub(crate) fn dense_output(
    config: &ModelConfig,
    tape: &mut Tape,
    features: Var,
    weight: Var,
    bias: Var,
) -> Result<Var> {
    let n = tape.shape(features)[0];
    let y = tape.matmul(features, weight)?;
    let y = tape.add_row(y, bias)?;
    let y = match config.output_activation {
        OutputActivation::Relu => tape.relu(y)?,
        OutputActivation::Linear => y,
    };
    // back to return units
    let y = if config.input_scale == 1.0 {
        y
    } else {
        tape.scale(y, config.input_scale.recip())?
    };
    tape.reshape(y, &[n])
}
