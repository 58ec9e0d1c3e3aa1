//! Run configuration, read from a single TOML file. Every field has a
//! default, so an empty file (or no file) is a valid configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use calibkit::calibrators::{LogisticParams, PlattParams, TreeParams};
use calibkit::synthgen::GeneratorSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable overriding `data_dir`.
pub const DATA_DIR_ENV: &str = "CALIBKIT_DATA_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Directory searched for `<name>.csv` before the bundled datasets.
    pub data_dir: Option<PathBuf>,
    pub experiment: ExperimentConfig,
    pub bias: BiasConfig,
    pub tradeoff: TradeoffConfig,
    pub popcheck: PopcheckConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            data_dir: None,
            experiment: ExperimentConfig::default(),
            bias: BiasConfig::default(),
            tradeoff: TradeoffConfig::default(),
            popcheck: PopcheckConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::from_toml(&std::fs::read_to_string(p)?),
            None => Ok(Self::default()),
        }
    }

    /// `CALIBKIT_DATA_DIR` wins over the config file.
    pub fn resolved_data_dir(&self) -> Option<PathBuf> {
        std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).or_else(|| self.data_dir.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        e.split.to_spec(0)?;
        if e.bins == 0 || e.k == 0 || e.p == 0 || e.repetitions == 0 {
            return Err(CliError::Config("experiment: bins, k, p and repetitions must be positive".into()));
        }
        if e.methods.is_empty() || e.metrics.is_empty() {
            return Err(CliError::Config("experiment: need at least one method and one metric".into()));
        }
        let b = &self.bias;
        if b.repetitions == 0 || b.train_size == 0 || b.test_sizes.contains(&0) || b.bins.contains(&0) {
            return Err(CliError::Config("bias: sizes, bins and repetitions must be positive".into()));
        }
        let t = &self.tradeoff;
        if !(t.train_frac > 0.0 && t.train_frac < 1.0) {
            return Err(CliError::Config(format!("tradeoff: train_frac must be in (0, 1), got {}", t.train_frac)));
        }
        if t.leaf_budgets.contains(&0) {
            return Err(CliError::Config("tradeoff: leaf budgets must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "DT")]
    Tree,
    #[serde(rename = "IR")]
    Isotonic,
    #[serde(rename = "PS")]
    Platt,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tree, Method::Isotonic, Method::Platt];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tree => "DT",
            Method::Isotonic => "IR",
            Method::Platt => "PS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Rmse,
    ZeroOne,
    Auc,
    Ece,
    Pde,
    AucV,
}

impl MetricName {
    pub const ALL: [MetricName; 6] = [
        MetricName::Rmse,
        MetricName::ZeroOne,
        MetricName::Auc,
        MetricName::Ece,
        MetricName::Pde,
        MetricName::AucV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricName::Rmse => "rmse",
            MetricName::ZeroOne => "zero_one",
            MetricName::Auc => "auc",
            MetricName::Ece => "ece",
            MetricName::Pde => "pde",
            MetricName::AucV => "auc_v",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricName::Auc | MetricName::AucV)
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub calib: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.405, calib: 0.495, test: 0.10 }
    }
}

impl SplitFractions {
    pub fn to_spec(&self, seed: u64) -> Result<calibkit::dataset::SplitSpec> {
        Ok(calibkit::dataset::SplitSpec::new(self.train, self.calib, self.test, seed)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset names; empty means every bundled dataset.
    pub datasets: Vec<String>,
    pub methods: Vec<Method>,
    pub metrics: Vec<MetricName>,
    /// Uniform-mass bins for ECE.
    pub bins: usize,
    /// Neighbours for the AUC_V estimate.
    pub k: usize,
    pub theta: f64,
    /// Norm for ECE and PDE.
    pub p: u32,
    pub repetitions: usize,
    pub split: SplitFractions,
    pub label_column: String,
    /// Column holding external base scores for IR/PS (optional).
    pub score_column: Option<String>,
    pub tree: TreeParams,
    pub logistic: LogisticParams,
    pub platt: PlattParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            methods: Method::ALL.to_vec(),
            metrics: MetricName::ALL.to_vec(),
            bins: 32,
            k: 10,
            theta: 0.5,
            p: 1,
            repetitions: 10,
            split: SplitFractions::default(),
            label_column: "label".into(),
            score_column: None,
            tree: TreeParams::default(),
            logistic: LogisticParams::default(),
            platt: PlattParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningName {
    UniformMass,
    Bfsl,
}

impl BinningName {
    pub fn name(self) -> &'static str {
        match self {
            BinningName::UniformMass => "uniform_mass",
            BinningName::Bfsl => "bfsl",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasConfig {
    pub generator: GeneratorSpec,
    pub train_size: usize,
    pub test_sizes: Vec<usize>,
    pub bins: Vec<usize>,
    pub repetitions: usize,
    pub binnings: Vec<BinningName>,
    /// Predictor under evaluation: a tree fitted on `train_size` samples.
    pub tree: TreeParams,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorSpec::Grid { cols: 5, rows: 4, eta_seed: 20 },
            train_size: 5000,
            test_sizes: vec![500, 2000, 8000],
            bins: vec![2, 4, 8, 16, 32, 64],
            repetitions: 10,
            binnings: vec![BinningName::UniformMass, BinningName::Bfsl],
            tree: TreeParams::unpruned(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeoffConfig {
    /// Dataset names; empty means every bundled dataset.
    pub datasets: Vec<String>,
    /// Row count for bundled datasets (CSV datasets are used as they are).
    pub size: Option<usize>,
    pub leaf_budgets: Vec<usize>,
    pub train_frac: f64,
    pub theta: f64,
    pub p: u32,
    /// Parameters of the cost-complexity pruned reference tree.
    pub tree: TreeParams,
    pub label_column: String,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            size: None,
            leaf_budgets: vec![1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256],
            train_frac: 0.5,
            theta: 0.5,
            p: 1,
            tree: TreeParams::default(),
            label_column: "label".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopcheckConfig {
    pub instances: usize,
    pub max_support: usize,
    pub alternative_instances: usize,
}

impl Default for PopcheckConfig {
    fn default() -> Self {
        Self { instances: 1000, max_support: 20, alternative_instances: 200 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!((c.experiment.bins, c.experiment.k, c.experiment.theta), (32, 10, 0.5));
        assert_eq!(c.experiment.repetitions, 10);
    }

    #[test]
    fn nested_tables_parse() {
        let c = Config::from_toml(
            r#"
            seed = 7
            [experiment]
            datasets = ["cells-20"]
            methods = ["DT", "PS"]
            metrics = ["ece", "pde"]
            [experiment.split]
            train = 0.5
            calib = 0.3
            test = 0.2
            [bias]
            generator = { kind = "smooth", dim = 2, coefficient_seed = 3 }
            test_sizes = [100]
            "#,
        )
        .unwrap();
        assert_eq!(c.experiment.methods, [Method::Tree, Method::Platt]);
        assert_eq!(c.experiment.split.calib, 0.3);
        assert!(matches!(c.bias.generator, GeneratorSpec::Smooth(ref s) if s.dim == 2));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(Config::from_toml("[experiment]\nbins = 0").is_err());
        assert!(Config::from_toml("[experiment.split]\ntrain = 0.9").is_err());
        assert!(Config::from_toml("unknown = 1").is_err());
        assert!(Config::from_toml("[tradeoff]\ntrain_frac = 1.0").is_err());
    }
}
