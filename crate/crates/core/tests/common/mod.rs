#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::Rng;

use madl_core::rng::seeded;

/// Uniform noise returns in `(-scale, scale)`.
pub fn noise_returns(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Returns whose sign repeats the previous day's sign with probability `persist`,
/// so the lag-1 sign correlation is `2·persist − 1`.
pub fn planted_sign_returns(n: usize, persist: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let mut sign = 1.0;
    (0..n)
        .map(|_| {
            if !rng.gen_bool(persist) {
                sign = -sign;
            }
            sign * rng.gen_range(0.002..0.02)
        })
        .collect()
}

pub fn prices_from_returns(returns: &[f64]) -> Vec<f64> {
    let mut p = vec![100.0];
    for r in returns {
        let last = *p.last().unwrap();
        p.push(last * (1.0 + r));
    }
    p
}

pub fn dates(n: usize) -> Vec<NaiveDate> {
    let base = NaiveDate::from_ymd_opt(2004, 1, 2).unwrap();
    (0..n).map(|i| base + chrono::Days::new(i as u64)).collect()
}

/// Writes a `date,close` file with consecutive calendar dates.
pub fn write_price_csv(path: &Path, closes: &[f64]) {
    let mut text = String::from("date,close\n");
    for (d, c) in dates(closes.len()).iter().zip(closes) {
        writeln!(text, "{d},{c}").unwrap();
    }
    std::fs::write(path, text).unwrap();
}

/// A run config over `symbols` with toy model sizes and a short schedule.
pub fn tiny_config(dir: &Path, symbols: &[&str], model: &str, window: usize, epochs: usize) -> PathBuf {
    let mut text =
        format!("schema_version = 1\nseed = 2024\nmodel = \"{model}\"\noutput_dir = \"out\"\njobs = 2\n");
    for s in symbols {
        write!(
            text,
            "\n[[assets]]\nsymbol = \"{s}\"\npath = \"{s}.csv\"\nasset_class = \"equity\"\n"
        )
        .unwrap();
    }
    write!(
        text,
        "\n[transformer.model]\nmodel_dim = 8\nnum_heads = 2\nkey_dim = 4\nvalue_dim = 4\nnum_attention_layers = 1\n\
         \n[transformer.training]\ninitial_window_days = {window}\ntest_window_days = {window}\nepochs = {epochs}\n\
         \n[lstm.model]\nlstm_layer_sizes = [4, 3]\n\
         \n[lstm.training]\ninitial_window_days = {window}\ntest_window_days = {window}\nepochs = {epochs}\n\
         \n[lstm.training.optimizer]\nlearning_rate = 0.01\n"
    )
    .unwrap();
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}
