use rand::Rng;

use super::{gemm, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const LAYER_NORM_EPS: f64 = 1e-5;

impl Tape {
    fn derived(&mut self, value: Tensor, inputs: &[Var], op: Op) -> Var {
        let requires_grad = inputs.iter().any(|&v| self.requires_grad(v));
        self.push(value, requires_grad, op)
    }

    /// Matrix product. Rank-3 operands are multiplied batch-wise and must share
    /// their leading dimension.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (batch, m, k, k2, n) = match (sa.as_slice(), sb.as_slice()) {
            (&[m, k], &[k2, n]) => (1, m, k, k2, n),
            (&[b1, m, k], &[b2, k2, n]) if b1 == b2 => (b1, m, k, k2, n),
            _ => return Err(Error::shape("matmul", &sa, &sb)),
        };
        if k != k2 {
            return Err(Error::shape("matmul", &sa, &sb));
        }
        let mut out = vec![0.0; batch * m * n];
        {
            let av = self.value(a).data();
            let bv = self.value(b).data();
            for t in 0..batch {
                gemm(
                    m,
                    k,
                    n,
                    &av[t * m * k..(t + 1) * m * k],
                    false,
                    &bv[t * k * n..(t + 1) * k * n],
                    false,
                    &mut out[t * m * n..(t + 1) * m * n],
                    0.0,
                );
            }
        }
        let shape = if sa.len() == 2 {
            vec![m, n]
        } else {
            vec![batch, m, n]
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.derived(value, &[a, b], Op::MatMul { a, b, batch, m, k, n }))
    }

    /// Swaps the last two axes of a rank-2 or rank-3 tensor.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let s = self.shape(x).to_vec();
        let (batch, rows, cols) = match *s.as_slice() {
            [r, c] => (1, r, c),
            [b, r, c] => (b, r, c),
            _ => return Err(Error::shape("transpose", &s, &[])),
        };
        let xv = self.value(x).data();
        let mut out = vec![0.0; xv.len()];
        for t in 0..batch {
            let off = t * rows * cols;
            for r in 0..rows {
                for c in 0..cols {
                    out[off + c * rows + r] = xv[off + r * cols + c];
                }
            }
        }
        let shape = if s.len() == 2 {
            vec![cols, rows]
        } else {
            vec![batch, cols, rows]
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.derived(value, &[x], Op::TransposeLast { x, batch, rows, cols }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        self.check(x)?;
        let value = self.value(x).reshape(shape)?;
        Ok(self.derived(value, &[x], Op::Reshape { x }))
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.check(a)?;
        self.check(b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(ta.shape().to_vec(), data)
        } else if tb.len() == 1 {
            let y = tb.data()[0];
            let data = ta.data().iter().map(|&x| f(x, y)).collect();
            Tensor::new(ta.shape().to_vec(), data)
        } else {
            Err(Error::shape(name, ta.shape(), tb.shape()))
        }
    }

    /// Elementwise sum; `b` may be a single value broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.derived(value, &[a, b], Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.derived(value, &[a, b], Op::Sub { a, b }))
    }

    /// Elementwise product; `b` may be a single value broadcast over `a`.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.derived(value, &[a, b], Op::Mul { a, b }))
    }

    /// Adds a length-`d` bias to every row of a tensor whose last axis is `d`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        self.check(x)?;
        self.check(bias)?;
        let (tx, tb) = (self.value(x), self.value(bias));
        let d = tx.last_dim();
        if tb.rank() != 1 || tb.len() != d {
            return Err(Error::shape("add_row", tx.shape(), tb.shape()));
        }
        let bv = tb.data();
        let data = tx
            .data()
            .chunks_exact(d)
            .flat_map(|row| row.iter().zip(bv).map(|(a, b)| a + b))
            .collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        Ok(self.derived(value, &[x, bias], Op::AddRow { x, bias }))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let value = self.unary(x, |v| factor * v)?;
        Ok(self.derived(value, &[x], Op::Scale { x, factor }))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        self.check(x)?;
        let t = self.value(x);
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect())
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let value = self.unary(x, f64::tanh)?;
        Ok(self.derived(value, &[x], Op::Tanh { x }))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.unary(x, |v| v.max(0.0))?;
        Ok(self.derived(value, &[x], Op::Relu { x }))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let value = self.unary(x, sigmoid)?;
        Ok(self.derived(value, &[x], Op::Sigmoid { x }))
    }

    /// Inverted dropout: zeroes each entry with probability `rate` and scales
    /// survivors by `1 / (1 - rate)`. A zero rate returns `x` unchanged.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: &mut R) -> Result<Var> {
        self.check(x)?;
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let t = self.value(x);
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.derived(value, &[x], Op::Dropout { x, mask }))
    }

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        if !t.is_finite() {
            return Err(Error::Numeric("softmax input contains NaN or infinity".into()));
        }
        let d = t.last_dim();
        let mut data = Vec::with_capacity(t.len());
        for row in t.data().chunks_exact(d) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = data.len();
            data.extend(row.iter().map(|v| (v - max).exp()));
            let total: f64 = data[start..].iter().sum();
            data[start..].iter_mut().for_each(|v| *v /= total);
        }
        let value = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.derived(value, &[x], Op::Softmax { x }))
    }

    /// Normalizes each row over the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let d = t.last_dim();
        let (g, b) = (self.value(gain), self.value(bias));
        if g.shape() != [d] || b.shape() != [d] {
            return Err(Error::shape("layer_norm", t.shape(), g.shape()));
        }
        let mut normalized = Vec::with_capacity(t.len());
        let mut inv_std = Vec::with_capacity(t.len() / d);
        let mut data = Vec::with_capacity(t.len());
        for row in t.data().chunks_exact(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            for ((v, gj), bj) in row.iter().zip(g.data()).zip(b.data()) {
                let n = (v - mean) * is;
                normalized.push(n);
                data.push(n * gj + bj);
            }
        }
        let value = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.derived(
            value,
            &[x, gain, bias],
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
        ))
    }

    /// Columns `start..start + len` of the last axis.
    pub fn slice_last(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let width = t.last_dim();
        if len == 0 || start + len > width || t.rank() == 0 {
            return Err(Error::shape("slice_last", t.shape(), &[start, len]));
        }
        let data = t
            .data()
            .chunks_exact(width)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let mut shape = t.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let value = Tensor::new(shape, data)?;
        Ok(self.derived(value, &[x], Op::SliceLast { x, start, len }))
    }

    /// Concatenates along the last axis; leading dimensions must agree.
    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Usage("concat of zero tensors".into()))?;
        for &p in parts {
            self.check(p)?;
        }
        let lead = self.shape(first)[..self.shape(first).len() - 1].to_vec();
        let mut width = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != lead.len() + 1 || s[..lead.len()] != lead[..] {
                return Err(Error::shape("concat_last", self.shape(first), s));
            }
            width += s[lead.len()];
        }
        let rows: usize = lead.iter().product();
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                let t = self.value(p);
                let w = t.last_dim();
                data.extend_from_slice(&t.data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(width);
        let value = Tensor::new(shape, data)?;
        Ok(self.derived(
            value,
            parts,
            Op::ConcatLast {
                parts: parts.to_vec(),
            },
        ))
    }

    /// Picks time step `step` out of a `[batch, steps, d]` tensor, giving `[batch, d]`.
    pub fn select_step(&mut self, x: Var, step: usize) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let &[batch, steps, d] = t.shape() else {
            return Err(Error::shape("select_step", t.shape(), &[step]));
        };
        if step >= steps {
            return Err(Error::shape("select_step", t.shape(), &[step]));
        }
        let mut data = Vec::with_capacity(batch * d);
        for b in 0..batch {
            let off = (b * steps + step) * d;
            data.extend_from_slice(&t.data()[off..off + d]);
        }
        let value = Tensor::new(vec![batch, d], data)?;
        Ok(self.derived(value, &[x], Op::SelectStep { x, step }))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let s = self.value(x).data().iter().sum();
        Ok(self.derived(Tensor::scalar(s), &[x], Op::Sum { x }))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        Ok(self.derived(Tensor::scalar(m), &[x], Op::Mean { x }))
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
