//! Scaled dot-product and multi-head self-attention.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Attention result with the row-stochastic weight matrix kept for inspection.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub output: Var,
    pub weights: Var,
}

/// `softmax(Q Kᵀ / sqrt(d_k)) V` for `[rows, d]` operands or batches `[batch, rows, d]`.
pub fn scaled_dot_product_attention(tape: &mut Tape, q: Var, k: Var, v: Var) -> Result<Attention> {
    let (sq, sk, sv) = (
        tape.shape(q).to_vec(),
        tape.shape(k).to_vec(),
        tape.shape(v).to_vec(),
    );
    let rank = sq.len();
    let compatible = (rank == 2 || rank == 3)
        && sk.len() == rank
        && sv.len() == rank
        && sq[..rank - 2] == sk[..rank - 2]
        && sk[..rank - 2] == sv[..rank - 2]
        && sq[rank - 1] == sk[rank - 1]
        && sk[rank - 2] == sv[rank - 2];
    if !compatible {
        let rhs = if sq.last() != sk.last() { sk } else { sv };
        return Err(Error::shape("scaled_dot_product_attention", &sq, &rhs));
    }
    let d_k = sq[rank - 1] as f64;
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, 1.0 / d_k.sqrt())?;
    let weights = tape.softmax(scores)?;
    let output = tape.matmul(weights, v)?;
    Ok(Attention { output, weights })
}

/// Projections of one head: `W^Q, W^K ∈ [d_model, d_k]`, `W^V ∈ [d_model, d_v]`.
#[derive(Debug, Clone, Copy)]
pub struct HeadWeights {
    pub query: Var,
    pub key: Var,
    pub value: Var,
}

/// All heads of one layer plus the output projection `W^O ∈ [h·d_v, d_model]`.
#[derive(Debug, Clone)]
pub struct MultiHeadWeights {
    pub heads: Vec<HeadWeights>,
    pub output: Var,
}

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub output: Var,
    /// One `[batch, L, L]` weight tensor per head.
    pub weights: Vec<Var>,
}

/// Self-attention over `x` of shape `[L, d_model]` or `[batch, L, d_model]`;
/// the output has the same shape as `x`.
pub fn multi_head_attention(tape: &mut Tape, x: Var, w: &MultiHeadWeights) -> Result<MultiHeadAttention> {
    let shape = tape.shape(x).to_vec();
    let (batch, steps, d_model) = match *shape.as_slice() {
        [l, d] => (1, l, d),
        [b, l, d] => (b, l, d),
        _ => return Err(Error::shape("multi_head_attention", &shape, &[])),
    };
    if w.heads.is_empty() {
        return Err(Error::Config(
            "multi-head attention needs at least one head".into(),
        ));
    }
    let flat = tape.reshape(x, &[batch * steps, d_model])?;
    let mut head_outputs = Vec::with_capacity(w.heads.len());
    let mut weights = Vec::with_capacity(w.heads.len());
    for head in &w.heads {
        for proj in [head.query, head.key, head.value] {
            if tape.shape(proj).len() != 2 || tape.shape(proj)[0] != d_model {
                return Err(Error::shape("multi_head_attention", &shape, tape.shape(proj)));
            }
        }
        let mut project = |p: Var| -> Result<Var> {
            let width = tape.shape(p)[1];
            let y = tape.matmul(flat, p)?;
            tape.reshape(y, &[batch, steps, width])
        };
        let (q, k, v) = (project(head.query)?, project(head.key)?, project(head.value)?);
        let att = scaled_dot_product_attention(tape, q, k, v)?;
        let d_v = tape.shape(att.output)[2];
        head_outputs.push(tape.reshape(att.output, &[batch * steps, d_v])?);
        weights.push(att.weights);
    }
    let concat = tape.concat_last(&head_outputs)?;
    let wo = tape.shape(w.output).to_vec();
    if wo != [tape.shape(concat)[1], d_model] {
        return Err(Error::shape("multi_head_attention", tape.shape(concat), &wo));
    }
    let projected = tape.matmul(concat, w.output)?;
    let output = tape.reshape(projected, &shape)?;
    Ok(MultiHeadAttention { output, weights })
}
