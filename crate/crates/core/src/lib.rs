pub mod autodiff;
pub mod backtest;
pub mod data;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod orchestrator;
pub mod rng;
pub mod tensor;
pub mod walkforward;

pub use autodiff::{Tape, Var};
pub use error::{Error, Result};
pub use tensor::Tensor;
