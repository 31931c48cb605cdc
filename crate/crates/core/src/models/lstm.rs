use rand_chacha::ChaCha8Rng;

use super::{dense_output, ModelConfig, ParamBuilder, WindowBatch};
use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Gate blocks are packed as `[input | forget | cell candidate | output]`, each `hidden` wide.
#[derive(Debug, Clone)]
struct LayerLayout {
    input_weight: usize,
    hidden_weight: usize,
    bias: usize,
    hidden: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LstmLayout {
    layers: Vec<LayerLayout>,
    dense_weight: usize,
    dense_bias: usize,
}

impl LstmLayout {
    pub(crate) fn build(cfg: &ModelConfig, b: &mut ParamBuilder) -> Self {
        let mut input = 1;
        let layers = cfg
            .lstm_layer_sizes
            .iter()
            .enumerate()
            .map(|(i, &hidden)| {
                let layer = LayerLayout {
                    input_weight: b.weight(format!("lstm{i}.input_weight"), input, 4 * hidden),
                    hidden_weight: b.weight(format!("lstm{i}.hidden_weight"), hidden, 4 * hidden),
                    bias: b.zeros(format!("lstm{i}.bias"), 4 * hidden),
                    hidden,
                };
                input = hidden;
                layer
            })
            .collect();
        Self {
            layers,
            dense_weight: b.weight("dense.weight".into(), input, 1),
            dense_bias: b.zeros("dense.bias".into(), 1),
        }
    }

    pub(crate) fn forward(
        &self,
        cfg: &ModelConfig,
        tape: &mut Tape,
        vars: &[Var],
        batch: &WindowBatch,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let (n, steps) = (batch.len(), batch.seq_len());
        let input = tape.constant(batch.to_tensor());
        let mut sequence = (0..steps)
            .map(|t| tape.slice_last(input, t, 1))
            .collect::<Result<Vec<Var>>>()?;

        for layer in &self.layers {
            let h_dim = layer.hidden;
            let mut h = tape.constant(Tensor::zeros(&[n, h_dim]));
            let mut c = tape.constant(Tensor::zeros(&[n, h_dim]));
            let mut outputs = Vec::with_capacity(steps);
            for &x_t in &sequence {
                let from_input = tape.matmul(x_t, vars[layer.input_weight])?;
                let from_hidden = tape.matmul(h, vars[layer.hidden_weight])?;
                let gates = tape.add(from_input, from_hidden)?;
                let gates = tape.add_row(gates, vars[layer.bias])?;
                let i_gate = tape.slice_last(gates, 0, h_dim)?;
                let i_gate = tape.sigmoid(i_gate)?;
                let f_gate = tape.slice_last(gates, h_dim, h_dim)?;
                let f_gate = tape.sigmoid(f_gate)?;
                let candidate = tape.slice_last(gates, 2 * h_dim, h_dim)?;
                let candidate = tape.tanh(candidate)?;
                let o_gate = tape.slice_last(gates, 3 * h_dim, h_dim)?;
                let o_gate = tape.sigmoid(o_gate)?;
                let kept = tape.mul(f_gate, c)?;
                let written = tape.mul(i_gate, candidate)?;
                c = tape.add(kept, written)?;
                let squashed = tape.tanh(c)?;
                h = tape.mul(o_gate, squashed)?;
                outputs.push(h);
            }
            if let Some(rng) = dropout.as_deref_mut() {
                for out in &mut outputs {
                    *out = tape.dropout(*out, cfg.dropout_rate, rng)?;
                }
            }
            sequence = outputs;
        }

        // only the last layer's final hidden state reaches the output neuron
        let last = *sequence.last().expect("sequence_length >= 1");
        dense_output(cfg, tape, last, vars[self.dense_weight], vars[self.dense_bias])
    }
}
