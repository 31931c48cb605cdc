//! Named parameters and the Adam optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A trainable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Option<Tensor>,
    /// Whether L2 regularization applies (weight matrices yes, biases and norm gains no).
    pub decay: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor, decay: bool) -> Self {
        Self {
            name: name.into(),
            value,
            grad: None,
            decay,
        }
    }

    pub fn accumulate_grad(&mut self, g: &Tensor) -> Result<()> {
        if g.shape() != self.value.shape() {
            return Err(Error::shape("accumulate_grad", self.value.shape(), g.shape()));
        }
        match &mut self.grad {
            Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
            None => self.grad = Some(g.clone()),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for a fixed list of parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    l2: f64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    /// Zero moments shaped like `params`. `l2` is added to each decayed
    /// parameter's gradient as `l2 * value` before the update.
    pub fn new(params: &[Parameter], config: AdamConfig, l2: f64) -> Result<Self> {
        config.validate()?;
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::Config(format!("l2 coefficient {l2} must be >= 0")));
        }
        let zeros = || params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Ok(Self {
            config,
            l2,
            first_moment: zeros(),
            second_moment: zeros(),
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, i: usize) -> &[f64] {
        &self.first_moment[i]
    }

    pub fn second_moment(&self, i: usize) -> &[f64] {
        &self.second_moment[i]
    }

    /// One bias-corrected Adam update over all `params`.
    pub fn step(&mut self, params: &mut [Parameter]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::Usage(format!(
                "optimizer tracks {} parameters, got {}",
                self.first_moment.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if p.grad.is_none() {
                return Err(Error::Usage(format!("parameter '{}' has no gradient", p.name)));
            }
            if p.value.len() != self.first_moment[i].len() {
                return Err(Error::shape(
                    "adam_step",
                    &[self.first_moment[i].len()],
                    p.value.shape(),
                ));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let l2 = if p.decay { self.l2 } else { 0.0 };
            let grad = p.grad.as_ref().expect("checked above").data();
            let (m, v) = (&mut self.first_moment[i], &mut self.second_moment[i]);
            for (j, theta) in p.value.data_mut().iter_mut().enumerate() {
                let g = grad[j] + l2 * *theta;
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
