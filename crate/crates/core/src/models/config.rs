use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Transformer,
    Lstm,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Transformer => "transformer",
            Family::Lstm => "lstm",
        }
    }

    /// Row label used in report tables.
    pub fn report_label(self) -> &'static str {
        match self {
            Family::Transformer => "TRANS",
            Family::Lstm => "LSTM",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Family::Transformer => 1,
            Family::Lstm => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionalEncoding {
    Sinusoidal,
    None,
}

/// Architecture and regularization of one forecaster.
///
/// Fields that only apply to the other family are carried but ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    /// Number of past returns fed to the model.
    pub sequence_length: usize,
    pub num_heads: usize,
    pub key_dim: usize,
    pub value_dim: usize,
    pub model_dim: usize,
    pub num_attention_layers: usize,
    pub lstm_layer_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub l2_coefficient: f64,
    pub output_activation: OutputActivation,
    pub positional_encoding: PositionalEncoding,
    pub seed: u64,
    /// Multiplier applied to every input return; the output is divided by it.
    #[serde(default = "unit_scale")]
    pub input_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl ModelConfig {
    /// Transformer profile: 4 heads of key/value width 64, two attention layers,
    /// dropout 0.3, L2 0.02, sequence length 4.
    pub fn transformer_default() -> Self {
        Self {
            family: Family::Transformer,
            sequence_length: 4,
            num_heads: 4,
            key_dim: 64,
            value_dim: 64,
            model_dim: 256,
            num_attention_layers: 2,
            lstm_layer_sizes: vec![512, 256, 128],
            dropout_rate: 0.3,
            l2_coefficient: 0.02,
            output_activation: OutputActivation::Linear,
            positional_encoding: PositionalEncoding::Sinusoidal,
            seed: 0,
            input_scale: 1.0,
        }
    }

    /// LSTM profile: layers of 512/256/128 units, no dropout, L2 1e-6, sequence length 4.
    pub fn lstm_default() -> Self {
        Self {
            family: Family::Lstm,
            dropout_rate: 0.0,
            l2_coefficient: 1e-6,
            ..Self::transformer_default()
        }
    }

    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Transformer => Self::transformer_default(),
            Family::Lstm => Self::lstm_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.sequence_length == 0 {
            return fail("sequence_length must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return fail(format!(
                "input_scale {} must be finite and positive",
                self.input_scale
            ));
        }
        if !(self.l2_coefficient >= 0.0 && self.l2_coefficient.is_finite()) {
            return fail(format!("l2_coefficient {} must be >= 0", self.l2_coefficient));
        }
        match self.family {
            Family::Transformer => {
                let dims = [
                    ("num_heads", self.num_heads),
                    ("key_dim", self.key_dim),
                    ("value_dim", self.value_dim),
                    ("model_dim", self.model_dim),
                    ("num_attention_layers", self.num_attention_layers),
                ];
                if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
                    return fail(format!("{name} must be positive"));
                }
            }
            Family::Lstm => {
                if self.lstm_layer_sizes.is_empty() {
                    return fail("lstm_layer_sizes needs at least one layer".into());
                }
                if self.lstm_layer_sizes.contains(&0) {
                    return fail("lstm layer sizes must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Width of the concatenated heads, the input width of the output projection.
    pub fn concat_width(&self) -> usize {
        self.num_heads * self.value_dim
    }
}
