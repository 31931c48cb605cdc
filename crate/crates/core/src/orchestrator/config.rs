use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::backtest::StrategyMode;
use crate::data::{AssetClass, CsvSchema};
use crate::error::{Error, Result};
use crate::models::{Family, ModelConfig};
use crate::rng::derive_seed;
use crate::walkforward::TrainRunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Transformer,
    Lstm,
    Both,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSpec {
    pub symbol: String,
    pub path: PathBuf,
    pub asset_class: AssetClass,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default = "default_close_column")]
    pub close_column: String,
}

fn default_date_column() -> String {
    "date".into()
}

fn default_close_column() -> String {
    "close".into()
}

impl AssetSpec {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            symbol: self.symbol.clone(),
            asset_class: self.asset_class,
            date_column: self.date_column.clone(),
            close_column: self.close_column.clone(),
        }
    }
}

/// Partial overrides of the per-family defaults; keys mirror
/// [`ModelConfig`] and [`TrainRunConfig`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyOverrides {
    #[serde(default)]
    pub model: toml::Table,
    #[serde(default)]
    pub training: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Root of every random stream in the run.
    pub seed: u64,
    pub model: ModelChoice,
    #[serde(default)]
    pub strategy_mode: StrategyMode,
    #[serde(default)]
    pub cost_bps: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub assets: Vec<AssetSpec>,
    #[serde(default)]
    pub transformer: FamilyOverrides,
    #[serde(default)]
    pub lstm: FamilyOverrides,
}

impl RunConfig {
    /// Parses a config file; relative asset and output paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.output_dir = base_dir.join(&cfg.output_dir);
        for a in &mut cfg.assets {
            a.path = base_dir.join(&a.path);
        }
        Ok(cfg)
    }

    /// Checks everything that can be checked without reading price files.
    pub fn validate(&self) -> Result<()> {
        if self.assets.is_empty() {
            return Err(Error::Config("at least one [[assets]] entry is required".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &self.assets {
            if a.symbol.is_empty() || a.symbol.contains(['/', '\\']) || a.symbol.starts_with('.') {
                return Err(Error::Config(format!("invalid asset symbol '{}'", a.symbol)));
            }
            if !seen.insert(a.symbol.as_str()) {
                return Err(Error::Config(format!("asset '{}' listed twice", a.symbol)));
            }
            if !a.path.is_file() {
                return Err(Error::Config(format!(
                    "asset '{}' file {} does not exist",
                    a.symbol,
                    a.path.display()
                )));
            }
        }
        if !(self.cost_bps.is_finite() && self.cost_bps >= 0.0) {
            return Err(Error::Config(format!(
                "cost_bps must be non-negative, got {}",
                self.cost_bps
            )));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        for family in self.families() {
            self.model_config(family)?;
            for class in [AssetClass::Equity, AssetClass::Crypto] {
                self.train_config(family, class, "")?;
            }
        }
        Ok(())
    }

    /// Families to train, in report order.
    pub fn families(&self) -> Vec<Family> {
        match self.model {
            ModelChoice::Transformer => vec![Family::Transformer],
            ModelChoice::Lstm => vec![Family::Lstm],
            ModelChoice::Both => vec![Family::Lstm, Family::Transformer],
        }
    }

    fn overrides(&self, family: Family) -> &FamilyOverrides {
        match family {
            Family::Transformer => &self.transformer,
            Family::Lstm => &self.lstm,
        }
    }

    pub fn model_config(&self, family: Family) -> Result<ModelConfig> {
        let cfg: ModelConfig = merge(
            &ModelConfig::default_for(family),
            &self.overrides(family).model,
            &format!("{}.model", family.as_str()),
        )?;
        cfg.validate().map_err(as_config)?;
        Ok(cfg)
    }

    /// Training schedule for one asset; its seed is derived from the run seed and the symbol.
    pub fn train_config(&self, family: Family, class: AssetClass, symbol: &str) -> Result<TrainRunConfig> {
        let mut cfg: TrainRunConfig = merge(
            &TrainRunConfig::for_family(family, class),
            &self.overrides(family).training,
            &format!("{}.training", family.as_str()),
        )?;
        cfg.seed = asset_seed(self.seed, symbol);
        cfg.validate().map_err(as_config)?;
        Ok(cfg)
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

pub fn asset_seed(run_seed: u64, symbol: &str) -> u64 {
    // FNV-1a keeps the stream stable under reordering of [[assets]]
    let hash = symbol.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    });
    derive_seed(run_seed, &[hash])
}

/// Overlays `overrides` on the serialized defaults; unknown keys are rejected.
fn merge<T: Serialize + DeserializeOwned>(base: &T, overrides: &toml::Table, section: &str) -> Result<T> {
    for reserved in ["seed", "family"] {
        if overrides.contains_key(reserved) {
            return Err(Error::Config(format!(
                "[{section}] may not set '{reserved}'; it is fixed by the run"
            )));
        }
    }
    let mut value = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    overlay(&mut value, overrides);
    toml::Value::Table(value)
        .try_into()
        .map_err(|e| Error::Config(format!("[{section}]: {e}")))
}

fn overlay(base: &mut toml::Table, top: &toml::Table) {
    for (k, v) in top {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => overlay(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::OutputActivation;

    const MINIMAL: &str = r#"
        schema_version = 1
        seed = 7
        model = "both"
        output_dir = "out"

        [[assets]]
        symbol = "JPM"
        path = "jpm.csv"
        asset_class = "equity"
    "#;

    #[test]
    fn defaults_follow_the_hyperparameter_table() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.output_dir, Path::new("/cfg/out"));
        assert_eq!(cfg.assets[0].path, Path::new("/cfg/jpm.csv"));
        assert_eq!(cfg.strategy_mode, StrategyMode::LongShort);
        assert_eq!(cfg.families(), [Family::Lstm, Family::Transformer]);
        let t = cfg.model_config(Family::Transformer).unwrap();
        assert_eq!((t.num_heads, t.sequence_length, t.dropout_rate), (4, 4, 0.3));
        let l = cfg.train_config(Family::Lstm, AssetClass::Crypto, "BTC").unwrap();
        assert_eq!(
            (l.epochs, l.initial_window_days, l.optimizer.learning_rate),
            (300, 365, 0.5)
        );
    }

    #[test]
    fn overrides_are_partial_and_nested() {
        let text = format!(
            "{MINIMAL}\n[transformer.model]\nmodel_dim = 8\noutput_activation = \"relu\"\n\
             [transformer.training]\nepochs = 3\n[transformer.training.optimizer]\nlearning_rate = 0.1\n"
        );
        let cfg = RunConfig::parse(&text, Path::new("")).unwrap();
        let m = cfg.model_config(Family::Transformer).unwrap();
        assert_eq!((m.model_dim, m.output_activation), (8, OutputActivation::Relu));
        assert_eq!(m.num_heads, 4);
        let t = cfg
            .train_config(Family::Transformer, AssetClass::Equity, "X")
            .unwrap();
        assert_eq!(
            (t.epochs, t.optimizer.learning_rate, t.optimizer.beta1),
            (3, 0.1, 0.9)
        );
    }

    #[test]
    fn bad_configs_are_config_errors() {
        let cases = [
            MINIMAL.replace("schema_version = 1", "schema_version = 2"),
            MINIMAL.replace("seed = 7", ""),
            MINIMAL.replace("\"both\"", "\"gru\""),
            format!("{MINIMAL}\nunknown = 1\n"),
            format!("{MINIMAL}\n[lstm.model]\nnot_a_field = 1\n"),
            format!("{MINIMAL}\n[lstm.training]\nseed = 3\n"),
            format!("{MINIMAL}\n[lstm.training]\nepochs = 0\n"),
        ];
        for text in &cases {
            let r = RunConfig::parse(text, Path::new(""))
                .and_then(|c| c.train_config(Family::Lstm, AssetClass::Equity, "X").map(|_| c))
                .and_then(|c| c.model_config(Family::Lstm));
            assert!(matches!(r, Err(Error::Config(_))), "{text}: {r:?}");
        }
    }

    #[test]
    fn validate_checks_files_and_symbols() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::parse(MINIMAL, dir.path()).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("does not exist")));
        std::fs::write(dir.path().join("jpm.csv"), "date,close\n").unwrap();
        cfg.validate().unwrap();
        let twice = format!(
            "{MINIMAL}\n[[assets]]\nsymbol = \"JPM\"\npath = \"jpm.csv\"\nasset_class = \"equity\"\n"
        );
        let cfg = RunConfig::parse(&twice, dir.path()).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("twice")));
    }

    #[test]
    fn asset_seeds_depend_on_symbol_only() {
        assert_eq!(asset_seed(1, "BTC"), asset_seed(1, "BTC"));
        assert_ne!(asset_seed(1, "BTC"), asset_seed(1, "ETH"));
        assert_ne!(asset_seed(1, "BTC"), asset_seed(2, "BTC"));
    }
}
