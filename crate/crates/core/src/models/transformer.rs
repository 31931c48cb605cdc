use rand_chacha::ChaCha8Rng;

use super::attention::{multi_head_attention, HeadWeights, MultiHeadWeights};
use super::{dense_output, ModelConfig, ParamBuilder, PositionalEncoding, WindowBatch};
use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
struct BlockLayout {
    heads: Vec<[usize; 3]>,
    output: usize,
    norm_gain: usize,
    norm_bias: usize,
}

/// Parameter indices of the attention forecaster.
///
/// Each return is lifted to `d_model` by a learned `1×d_model` map, optionally
/// shifted by a sinusoidal position code, then passed through blocks of
/// attention → dropout → residual → layer norm. The last time step feeds one
/// dense neuron.
#[derive(Debug, Clone)]
pub(crate) struct TransformerLayout {
    embed_weight: usize,
    embed_bias: usize,
    blocks: Vec<BlockLayout>,
    dense_weight: usize,
    dense_bias: usize,
}

impl TransformerLayout {
    pub(crate) fn build(cfg: &ModelConfig, b: &mut ParamBuilder) -> Self {
        let d = cfg.model_dim;
        let embed_weight = b.weight("embed.weight".into(), 1, d);
        let embed_bias = b.zeros("embed.bias".into(), d);
        let blocks = (0..cfg.num_attention_layers)
            .map(|layer| {
                let heads = (0..cfg.num_heads)
                    .map(|h| {
                        let prefix = format!("block{layer}.head{h}");
                        [
                            b.weight(format!("{prefix}.query"), d, cfg.key_dim),
                            b.weight(format!("{prefix}.key"), d, cfg.key_dim),
                            b.weight(format!("{prefix}.value"), d, cfg.value_dim),
                        ]
                    })
                    .collect();
                BlockLayout {
                    heads,
                    output: b.weight(format!("block{layer}.output"), cfg.concat_width(), d),
                    norm_gain: b.ones(format!("block{layer}.norm.gain"), d),
                    norm_bias: b.zeros(format!("block{layer}.norm.bias"), d),
                }
            })
            .collect();
        Self {
            embed_weight,
            embed_bias,
            blocks,
            dense_weight: b.weight("dense.weight".into(), d, 1),
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
    ) -> Result<(Var, Vec<Var>)> {
        let (n, steps, d) = (batch.len(), batch.seq_len(), cfg.model_dim);
        let input = batch.to_tensor().reshape(&[n * steps, 1])?;
        let input = tape.constant(input);
        let lifted = tape.matmul(input, vars[self.embed_weight])?;
        let lifted = tape.add_row(lifted, vars[self.embed_bias])?;
        let mut x = tape.reshape(lifted, &[n, steps, d])?;
        if cfg.positional_encoding == PositionalEncoding::Sinusoidal {
            let code = sinusoidal_encoding(steps, d);
            let tiled: Vec<f64> = (0..n).flat_map(|_| code.data().iter().copied()).collect();
            let tiled = tape.constant(Tensor::new(vec![n, steps, d], tiled)?);
            x = tape.add(x, tiled)?;
        }

        let mut attention = Vec::new();
        for block in &self.blocks {
            let weights = MultiHeadWeights {
                heads: block
                    .heads
                    .iter()
                    .map(|&[q, k, v]| HeadWeights {
                        query: vars[q],
                        key: vars[k],
                        value: vars[v],
                    })
                    .collect(),
                output: vars[block.output],
            };
            let mha = multi_head_attention(tape, x, &weights)?;
            attention.extend(mha.weights);
            let mut y = mha.output;
            if let Some(rng) = dropout.as_deref_mut() {
                y = tape.dropout(y, cfg.dropout_rate, rng)?;
            }
            let residual = tape.add(x, y)?;
            x = tape.layer_norm(residual, vars[block.norm_gain], vars[block.norm_bias])?;
        }

        let last = tape.select_step(x, steps - 1)?;
        let prediction = dense_output(cfg, tape, last, vars[self.dense_weight], vars[self.dense_bias])?;
        Ok((prediction, attention))
    }
}

/// `[steps, d]` table with `sin(pos / 10000^(2i/d))` in even columns and the matching cosine in odd ones.
pub fn sinusoidal_encoding(steps: usize, d: usize) -> Tensor {
    let mut data = Vec::with_capacity(steps * d);
    for pos in 0..steps {
        for j in 0..d {
            let pair = (j / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / d as f64);
            data.push(if j % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    Tensor::new(vec![steps, d], data).expect("positive dims")
}
