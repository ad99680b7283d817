//! Run configuration, per-round metrics and the output file writers.

use crate::data::{self, SplitSpec, VerticalDataset};
use crate::error::ConfigError;
use crate::fed::Transcript;
use crate::optim::{OptimizerKind, StepSchedule};
use crate::phe::SUPPORTED_KEY_BITS;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

/// How a training run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Three in-process parties exchanging encrypted messages.
    Federated,
    /// Same parties, one thread each, talking over localhost TCP frames.
    FederatedSockets,
    /// Centralized plaintext run of the identical computation.
    Oracle,
    /// Centralized gradient descent on the exact logistic loss.
    OracleExact,
}

impl RunMode {
    pub fn name(&self) -> &'static str {
        match self {
            RunMode::Federated => "federated",
            RunMode::FederatedSockets => "federated-sockets",
            RunMode::Oracle => "oracle",
            RunMode::OracleExact => "oracle-exact",
        }
    }
}

/// Optimizer selector as it appears in config files; `alpha` lives next to
/// it and only applies to the blended update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Gd,
    Dfp,
    Bfgs,
    Bdfl,
}

/// Column indices accepted either as a list (`[0, 1, 2]`) or as a compact
/// range string (`"10-29"` or `"0-4,7,9-11"`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColumnSet(pub Vec<usize>);

impl ColumnSet {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        let mut out = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            if let Some((lo, hi)) = part.split_once('-') {
                let lo: usize = lo.trim().parse().map_err(|_| bad_columns(s))?;
                let hi: usize = hi.trim().parse().map_err(|_| bad_columns(s))?;
                if hi < lo {
                    return Err(bad_columns(s));
                }
                out.extend(lo..=hi);
            } else {
                out.push(part.parse().map_err(|_| bad_columns(s))?);
            }
        }
        Ok(ColumnSet(out))
    }
}

fn bad_columns(s: &str) -> ConfigError {
    ConfigError::Parse(format!("invalid column set {s:?}"))
}

impl Serialize for ColumnSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ColumnSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            List(Vec<usize>),
            Spec(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::List(v) => Ok(ColumnSet(v)),
            Repr::Spec(s) => ColumnSet::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Parameters of the built-in synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub n_a: usize,
    pub n_b: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
}

fn default_separation() -> f64 {
    4.0
}

/// Dataset source and preprocessing options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub label_column: usize,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default = "default_label_mapping")]
    pub label_mapping: BTreeMap<String, i8>,
    #[serde(default)]
    pub party_a_columns: ColumnSet,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default = "default_true")]
    pub shuffle: bool,
}

fn default_true() -> bool {
    true
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_label_mapping() -> BTreeMap<String, i8> {
    BTreeMap::from([("0".to_string(), -1), ("1".to_string(), 1)])
}

/// Rendezvous addresses for the socket transport; port 0 binds ephemeral
/// localhost ports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocketConfig {
    pub host_a: String,
    pub guest_b: String,
    pub arbiter_c: String,
}

impl Default for SocketConfig {
    fn default() -> Self {
        SocketConfig {
            host_a: "127.0.0.1:0".into(),
            guest_b: "127.0.0.1:0".into(),
            arbiter_c: "127.0.0.1:0".into(),
        }
    }
}

/// Everything a run needs: the dataset block plus hyperparameters, crypto
/// sizes and execution mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerName,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default = "default_lr0")]
    pub lr0: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_key_bits")]
    pub key_bits: u32,
    #[serde(default = "default_scale_bits")]
    pub scale_bits: u32,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Mini-batch size; full batch when absent.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Run the in-process parties on their own threads.
    #[serde(default)]
    pub threaded: bool,
    #[serde(default)]
    pub sockets: Option<SocketConfig>,
}

fn default_optimizer() -> OptimizerName {
    OptimizerName::Bfgs
}
fn default_alpha() -> f64 {
    0.5
}
fn default_rounds() -> u32 {
    100
}
fn default_lr0() -> f64 {
    0.1
}
fn default_decay() -> f64 {
    0.05
}
fn default_tol() -> f64 {
    1e-6
}
fn default_seed() -> u64 {
    42
}
fn default_key_bits() -> u32 {
    2048
}
fn default_scale_bits() -> u32 {
    40
}
fn default_mode() -> RunMode {
    RunMode::Federated
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.rounds == 0 {
            return Err(ConfigError::Invalid("rounds must be positive".into()));
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(ConfigError::Invalid(format!("lr0 {} must be positive", self.lr0)));
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return Err(ConfigError::Invalid(format!("decay {} must be non-negative", self.decay)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(ConfigError::Invalid(format!("tol {} must be positive", self.tol)));
        }
        if !self.alpha.is_finite() {
            return Err(ConfigError::Invalid("alpha must be finite".into()));
        }
        if !SUPPORTED_KEY_BITS.contains(&self.key_bits) {
            return Err(ConfigError::Invalid(format!(
                "key_bits {} not in {:?}",
                self.key_bits, SUPPORTED_KEY_BITS
            )));
        }
        if !(8..=128).contains(&self.scale_bits) {
            return Err(ConfigError::Invalid(format!(
                "scale_bits {} outside 8..=128",
                self.scale_bits
            )));
        }
        if !(0.0..1.0).contains(&self.dataset.test_fraction) {
            return Err(ConfigError::Invalid(format!(
                "test_fraction {} outside [0, 1)",
                self.dataset.test_fraction
            )));
        }
        if let Some(b) = self.batch_size {
            if b == 0 {
                return Err(ConfigError::Invalid("batch_size must be positive".into()));
            }
        }
        if self.dataset.path.is_none() && self.dataset.synthetic.is_none() {
            return Err(ConfigError::Invalid(
                "dataset needs either a path or a synthetic block".into(),
            ));
        }
        Ok(())
    }

    pub fn optimizer_kind(&self) -> OptimizerKind {
        match self.optimizer {
            OptimizerName::Gd => OptimizerKind::Gd,
            OptimizerName::Dfp => OptimizerKind::Dfp,
            OptimizerName::Bfgs => OptimizerKind::Bfgs,
            OptimizerName::Bdfl => OptimizerKind::Bdfl(self.alpha),
        }
    }

    pub fn schedule(&self) -> StepSchedule {
        StepSchedule { lr0: self.lr0, decay: self.decay }
    }

    /// Materializes the dataset block (CSV load + vertical split, or the
    /// synthetic generator), seeded from this run's seed.
    pub fn load_dataset(&self) -> Result<VerticalDataset, ConfigError> {
        let ds = &self.dataset;
        if let Some(path) = &ds.path {
            let raw = data::load_csv(path, ds.label_column, &ds.label_mapping, ds.has_header)?;
            let spec = SplitSpec {
                party_a_columns: ds.party_a_columns.0.clone(),
                seed: self.seed,
                shuffle: ds.shuffle,
            };
            Ok(data::split_and_standardize(&raw, &spec, ds.test_fraction, ds.standardize)?)
        } else if let Some(synth) = &ds.synthetic {
            Ok(data::synthetic_dataset(
                synth.rows,
                synth.n_a,
                synth.n_b,
                self.seed,
                synth.separation,
            )?)
        } else {
            Err(ConfigError::Invalid("dataset needs either a path or a synthetic block".into()))
        }
    }
}

/// One completed round of any run mode.
///
/// Losses are evaluated at the weights the round started with (the values
/// the protocol actually decrypts); the test accuracy reflects the weights
/// after the round's update, so the last record agrees with the final model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub round: u32,
    pub taylor_loss: f64,
    pub exact_loss: f64,
    pub test_accuracy: f64,
    pub lr: f64,
    pub curvature_skipped_a: bool,
    pub curvature_skipped_b: bool,
    pub msg_bytes: u64,
    /// Wall time of the round; in-memory diagnostic only, never serialized
    /// into the byte-stable metrics file.
    #[serde(skip)]
    pub wall_ms: f64,
}

/// Everything a run returns.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRecord>,
    /// Post-update weights per round, `(w_a, w_b)`.
    pub weights_per_round: Vec<(DVector<f64>, DVector<f64>)>,
    pub final_w_a: DVector<f64>,
    pub final_w_b: DVector<f64>,
    pub converged: bool,
    pub transcript: Option<Transcript>,
}

impl RunOutput {
    pub fn rounds_executed(&self) -> u32 {
        self.metrics.len() as u32
    }

    pub fn total_message_bytes(&self) -> u64 {
        self.metrics.iter().map(|m| m.msg_bytes).sum()
    }

    pub fn final_test_accuracy(&self) -> f64 {
        self.metrics.last().map(|m| m.test_accuracy).unwrap_or(0.0)
    }
}

/// Renders the metrics CSV; byte-identical for identical runs.
pub fn metrics_to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(
        "round,taylor_loss,exact_loss,test_accuracy,lr,curvature_skipped_A,curvature_skipped_B,msg_bytes\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.round,
            r.taylor_loss,
            r.exact_loss,
            r.test_accuracy,
            r.lr,
            r.curvature_skipped_a as u8,
            r.curvature_skipped_b as u8,
            r.msg_bytes
        );
    }
    out
}

/// Final-state summary serialized to `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub optimizer: String,
    pub seed: u64,
    pub rounds_executed: u32,
    pub converged: bool,
    pub final_test_accuracy: f64,
    pub total_message_bytes: u64,
    pub final_w_a: Vec<f64>,
    pub final_w_b: Vec<f64>,
}

impl RunSummary {
    pub fn new(config: &RunConfig, output: &RunOutput) -> Self {
        RunSummary {
            mode: config.mode.name().to_string(),
            optimizer: config.optimizer_kind().name().to_string(),
            seed: config.seed,
            rounds_executed: output.rounds_executed(),
            converged: output.converged,
            final_test_accuracy: output.final_test_accuracy(),
            total_message_bytes: output.total_message_bytes(),
            final_w_a: output.final_w_a.iter().copied().collect(),
            final_w_b: output.final_w_b.iter().copied().collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [dataset]
        path = "data/breast_cancer.csv"
        label_column = 30
        party_a_columns = "10-29"
    "#;

    #[test]
    fn parses_minimal_toml_with_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.rounds, 100);
        assert_eq!(cfg.key_bits, 2048);
        assert_eq!(cfg.scale_bits, 40);
        assert_eq!(cfg.mode, RunMode::Federated);
        assert_eq!(cfg.dataset.party_a_columns.0, (10..=29).collect::<Vec<_>>());
        assert_eq!(cfg.dataset.test_fraction, 0.2);
        assert!(cfg.dataset.standardize);
        assert_eq!(cfg.optimizer_kind().name(), "bfgs");
    }

    #[test]
    fn column_set_accepts_lists_and_ranges() {
        assert_eq!(ColumnSet::parse("10-12").unwrap().0, vec![10, 11, 12]);
        assert_eq!(ColumnSet::parse("0-2,5,7-8").unwrap().0, vec![0, 1, 2, 5, 7, 8]);
        assert!(ColumnSet::parse("5-2").is_err());
        assert!(ColumnSet::parse("a").is_err());

        let cfg: RunConfig = toml::from_str(
            r#"
            [dataset]
            path = "x.csv"
            party_a_columns = [3, 1]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.dataset.party_a_columns.0, vec![3, 1]);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        cfg.rounds = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        cfg.lr0 = -0.5;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        cfg.key_bits = 777;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        cfg.dataset.path = None;
        assert!(cfg.validate().is_err());

        assert!(RunConfig::from_toml_str("nonsense = ").is_err());
        // unknown keys rejected
        assert!(RunConfig::from_toml_str(&format!("{MINIMAL}\nbogus_key = 1")).is_err());
    }

    #[test]
    fn bdfl_alpha_reaches_the_kind() {
        let toml = format!("{MINIMAL}\noptimizer = \"bdfl\"\nalpha = 0.25");
        let cfg = RunConfig::from_toml_str(&toml).unwrap();
        assert_eq!(cfg.optimizer_kind(), crate::optim::OptimizerKind::Bdfl(0.25));
    }

    #[test]
    fn metrics_csv_has_the_pinned_header_and_stable_bytes() {
        let rec = MetricsRecord {
            round: 1,
            taylor_loss: 0.6931471805599453,
            exact_loss: 0.6931471805599453,
            test_accuracy: 0.5,
            lr: 0.1,
            curvature_skipped_a: false,
            curvature_skipped_b: true,
            msg_bytes: 1234,
            wall_ms: 99.0,
        };
        let csv = metrics_to_csv(&[rec.clone()]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "round,taylor_loss,exact_loss,test_accuracy,lr,curvature_skipped_A,curvature_skipped_B,msg_bytes"
        );
        let row = lines.next().unwrap();
        assert_eq!(row, "1,0.6931471805599453,0.6931471805599453,0.5,0.1,0,1,1234");
        assert!(!csv.contains("99"), "wall time must not leak into the csv");
        assert_eq!(csv, metrics_to_csv(&[rec]));
    }
}
