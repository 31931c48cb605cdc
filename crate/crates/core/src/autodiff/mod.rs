//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its forward value and the handles of
//! its inputs. Because a node can only reference nodes that already exist, the
//! tape is topologically ordered by construction and [`Tape::backward`] visits
//! each node exactly once by walking it in reverse.

mod gemm;
mod ops;

pub(crate) use gemm::gemm;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    /// Batched `[.., m, k] x [.., k, n]`; batch 1 for plain matrices.
    MatMul {
        a: Var,
        b: Var,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    TransposeLast {
        x: Var,
        batch: usize,
        rows: usize,
        cols: usize,
    },
    Reshape {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    AddRow {
        x: Var,
        bias: Var,
    },
    Scale {
        x: Var,
        factor: f64,
    },
    Tanh {
        x: Var,
    },
    Relu {
        x: Var,
    },
    Sigmoid {
        x: Var,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Softmax {
        x: Var,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    SliceLast {
        x: Var,
        start: usize,
        len: usize,
    },
    ConcatLast {
        parts: Vec<Var>,
    },
    SelectStep {
        x: Var,
        step: usize,
    },
    Sum {
        x: Var,
    },
    Mean {
        x: Var,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
    op: Op,
}

/// Recorded computation graph.
///
/// A tape is single-owner; build one per forward pass.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Input tensor; gradients are accumulated for it when `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    /// Trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        node.grad
            .as_ref()
            .map(|g| Tensor::new(node.value.shape().to_vec(), g.clone()).expect("grad shape"))
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::Usage(format!("variable {} is not on this tape", v.0)))
        }
    }

    /// Propagates `d loss / d node` back to every leaf that requires a gradient.
    ///
    /// Leaf gradients accumulate across calls until [`Tape::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.check(loss)?;
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            if let (Op::Leaf, true, Some(g)) = (&node.op, node.requires_grad, g) {
                match &mut node.grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    None => node.grad = Some(g),
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul { a, b, batch, m, k, n } => {
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                if self.nodes[a.0].requires_grad {
                    let da = slot(grads, a, m * k * batch);
                    for t in 0..batch {
                        // dA = dC · Bᵀ
                        gemm(
                            m,
                            n,
                            k,
                            &g[t * m * n..(t + 1) * m * n],
                            false,
                            &bv[t * k * n..(t + 1) * k * n],
                            true,
                            &mut da[t * m * k..(t + 1) * m * k],
                            1.0,
                        );
                    }
                }
                if self.nodes[b.0].requires_grad {
                    let db = slot(grads, b, k * n * batch);
                    for t in 0..batch {
                        // dB = Aᵀ · dC
                        gemm(
                            k,
                            m,
                            n,
                            &av[t * m * k..(t + 1) * m * k],
                            true,
                            &g[t * m * n..(t + 1) * m * n],
                            false,
                            &mut db[t * k * n..(t + 1) * k * n],
                            1.0,
                        );
                    }
                }
            }
            &Op::TransposeLast { x, batch, rows, cols } => {
                if self.nodes[x.0].requires_grad {
                    let dx = slot(grads, x, batch * rows * cols);
                    for t in 0..batch {
                        let off = t * rows * cols;
                        for r in 0..rows {
                            for c in 0..cols {
                                dx[off + r * cols + c] += g[off + c * rows + r];
                            }
                        }
                    }
                }
            }
            &Op::Reshape { x } => self.accumulate(grads, x, |dx| add_into(dx, g)),
            &Op::Add { a, b } => {
                self.accumulate(grads, a, |da| add_into(da, g));
                self.accumulate(grads, b, |db| {
                    if db.len() == 1 && g.len() != 1 {
                        db[0] += g.iter().sum::<f64>();
                    } else {
                        add_into(db, g);
                    }
                });
            }
            &Op::Sub { a, b } => {
                self.accumulate(grads, a, |da| add_into(da, g));
                self.accumulate(grads, b, |db| {
                    if db.len() == 1 && g.len() != 1 {
                        db[0] -= g.iter().sum::<f64>();
                    } else {
                        db.iter_mut().zip(g).for_each(|(d, gi)| *d -= gi);
                    }
                });
            }
            &Op::Mul { a, b } => {
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                let b_scalar = bv.len() == 1 && av.len() != 1;
                self.accumulate(grads, a, |da| {
                    for (j, d) in da.iter_mut().enumerate() {
                        *d += g[j] * if b_scalar { bv[0] } else { bv[j] };
                    }
                });
                self.accumulate(grads, b, |db| {
                    if b_scalar {
                        db[0] += g.iter().zip(av).map(|(gi, ai)| gi * ai).sum::<f64>();
                    } else {
                        for (j, d) in db.iter_mut().enumerate() {
                            *d += g[j] * av[j];
                        }
                    }
                });
            }
            &Op::AddRow { x, bias } => {
                self.accumulate(grads, x, |dx| add_into(dx, g));
                self.accumulate(grads, bias, |db| {
                    let d = db.len();
                    for row in g.chunks_exact(d) {
                        add_into(db, row);
                    }
                });
            }
            &Op::Scale { x, factor } => self.accumulate(grads, x, |dx| {
                dx.iter_mut().zip(g).for_each(|(d, gi)| *d += factor * gi)
            }),
            &Op::Tanh { x } => self.accumulate(grads, x, |dx| {
                for j in 0..dx.len() {
                    dx[j] += g[j] * (1.0 - out[j] * out[j]);
                }
            }),
            &Op::Sigmoid { x } => self.accumulate(grads, x, |dx| {
                for j in 0..dx.len() {
                    dx[j] += g[j] * out[j] * (1.0 - out[j]);
                }
            }),
            &Op::Relu { x } => {
                let xv = self.nodes[x.0].value.data();
                self.accumulate(grads, x, |dx| {
                    for j in 0..dx.len() {
                        if xv[j] > 0.0 {
                            dx[j] += g[j];
                        }
                    }
                })
            }
            Op::Dropout { x, mask } => self.accumulate(grads, *x, |dx| {
                for j in 0..dx.len() {
                    dx[j] += g[j] * mask[j];
                }
            }),
            &Op::Softmax { x } => {
                let d = node.value.last_dim();
                self.accumulate(grads, x, |dx| {
                    for ((dxr, gr), yr) in dx
                        .chunks_exact_mut(d)
                        .zip(g.chunks_exact(d))
                        .zip(out.chunks_exact(d))
                    {
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for j in 0..d {
                            dxr[j] += yr[j] * (gr[j] - dot);
                        }
                    }
                })
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let d = node.value.last_dim();
                let gv = self.nodes[gain.0].value.data();
                self.accumulate(grads, *gain, |dg| {
                    for (gr, nr) in g.chunks_exact(d).zip(normalized.chunks_exact(d)) {
                        for j in 0..d {
                            dg[j] += gr[j] * nr[j];
                        }
                    }
                });
                self.accumulate(grads, *bias, |db| {
                    for gr in g.chunks_exact(d) {
                        add_into(db, gr);
                    }
                });
                self.accumulate(grads, *x, |dx| {
                    let df = d as f64;
                    for (row, ((dxr, gr), nr)) in dx
                        .chunks_exact_mut(d)
                        .zip(g.chunks_exact(d))
                        .zip(normalized.chunks_exact(d))
                        .enumerate()
                    {
                        let dn: Vec<f64> = (0..d).map(|j| gr[j] * gv[j]).collect();
                        let sum_dn: f64 = dn.iter().sum();
                        let sum_dn_n: f64 = dn.iter().zip(nr).map(|(a, b)| a * b).sum();
                        let s = inv_std[row] / df;
                        for j in 0..d {
                            dxr[j] += s * (df * dn[j] - sum_dn - nr[j] * sum_dn_n);
                        }
                    }
                })
            }
            &Op::SliceLast { x, start, len } => {
                let width = self.nodes[x.0].value.last_dim();
                self.accumulate(grads, x, |dx| {
                    for (dxr, gr) in dx.chunks_exact_mut(width).zip(g.chunks_exact(len)) {
                        add_into(&mut dxr[start..start + len], gr);
                    }
                })
            }
            Op::ConcatLast { parts } => {
                let width = node.value.last_dim();
                let mut offset = 0;
                for &p in parts {
                    let w = self.nodes[p.0].value.last_dim();
                    self.accumulate(grads, p, |dp| {
                        for (dpr, gr) in dp.chunks_exact_mut(w).zip(g.chunks_exact(width)) {
                            add_into(dpr, &gr[offset..offset + w]);
                        }
                    });
                    offset += w;
                }
            }
            &Op::SelectStep { x, step } => {
                let s = self.nodes[x.0].value.shape();
                let (steps, d) = (s[1], s[2]);
                self.accumulate(grads, x, |dx| {
                    for (b, gr) in g.chunks_exact(d).enumerate() {
                        let off = (b * steps + step) * d;
                        add_into(&mut dx[off..off + d], gr);
                    }
                })
            }
            &Op::Sum { x } => self.accumulate(grads, x, |dx| dx.iter_mut().for_each(|d| *d += g[0])),
            &Op::Mean { x } => self.accumulate(grads, x, |dx| {
                let s = g[0] / dx.len() as f64;
                dx.iter_mut().for_each(|d| *d += s)
            }),
        }
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if self.nodes[v.0].requires_grad {
            let len = self.nodes[v.0].value.len();
            f(slot(grads, v, len));
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}
