use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::{Metric, Strategy, Subsample, DEFAULT_SUBSAMPLE};
use crate::task::{ScoreFunction, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    pub d: usize,
    /// Number of latent prototypes.
    pub prototypes: usize,
    pub noise_sigma: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::PrototypeCompletion,
            d: 16,
            prototypes: 5,
            noise_sigma: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub size: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self { size: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueriesConfig {
    pub size: usize,
}

impl Default for QueriesConfig {
    fn default() -> Self {
        Self { size: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Builtin,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Inverse temperature of the built-in oracle.
    pub gamma: f64,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub supports_concurrency: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Builtin,
            endpoint: None,
            gamma: 8.0,
            timeout_ms: 10_000,
            max_retries: 2,
            supports_concurrency: false,
        }
    }
}

/// `subsample = "all"` or `subsample = 100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubsampleSetting {
    Count(usize),
    Named(AllTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllTag {
    All,
}

impl From<SubsampleSetting> for Subsample {
    fn from(s: SubsampleSetting) -> Self {
        match s {
            SubsampleSetting::Count(n) => Subsample::Count(n),
            SubsampleSetting::Named(AllTag::All) => Subsample::All,
        }
    }
}

/// Grid for `bound-sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma: Vec<f64>,
    pub m: Vec<usize>,
    /// Duplicate fraction t/M of the target pattern; t is at least 1.
    pub dup_fraction: Vec<f64>,
    /// Random instances per grid point.
    pub instances: usize,
    /// Largest ‖Δz‖ scale drawn per instance.
    pub delta_z_scale: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gamma: vec![0.5, 2.0, 8.0],
            m: vec![2, 8, 32],
            dup_fraction: vec![0.0, 0.5, 1.0],
            instances: 100,
            delta_z_scale: 0.5,
        }
    }
}

/// Every experiment knob. Missing keys take the defaults below, which define
/// the default benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub strategies: Vec<Strategy>,
    pub k_values: Vec<usize>,
    pub subsample: SubsampleSetting,
    pub score: ScoreFunction,
    pub metric: Metric,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub task: TaskConfig,
    pub pool: PoolConfig,
    pub queries: QueriesConfig,
    pub oracle: OracleConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2023,
            trials: 100,
            strategies: vec![Strategy::Random, Strategy::Active, Strategy::InstanceBest],
            k_values: vec![1, 2, 4, 8, 16],
            subsample: SubsampleSetting::Count(DEFAULT_SUBSAMPLE),
            score: ScoreFunction::CosineScore,
            metric: Metric::Euclidean,
            output: None,
            task: TaskConfig::default(),
            pool: PoolConfig::default(),
            queries: QueriesConfig::default(),
            oracle: OracleConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::Config(format!("bad key {key:?}")));
        }
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{part} in {key:?} is not a table")))?;
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parse config text (TOML, dotted keys such as `task.kind`) and apply
    /// `key=value` overrides on top.
    pub fn from_text_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("config parse failure: {e}")))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            set_dotted(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let config: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("config parse failure: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn subsample(&self) -> Subsample {
        self.subsample.into()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.pool.size < 2 {
            return bad("pool.size must be at least 2".into());
        }
        if self.k_values.is_empty() {
            return bad("k_values is empty".into());
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("k_values must be strictly ascending".into());
        }
        if self.k_values[0] == 0 || *self.k_values.last().unwrap() > self.pool.size {
            return bad(format!("k_values must lie in 1..={}", self.pool.size));
        }
        if self.strategies.is_empty() {
            return bad("strategies is empty".into());
        }
        if let SubsampleSetting::Count(n) = self.subsample {
            if n == 0 || n >= self.pool.size {
                return bad(format!("subsample must lie in 1..={}", self.pool.size - 1));
            }
        }
        if !(self.oracle.gamma > 0.0) {
            return bad("oracle.gamma must be positive".into());
        }
        if self.oracle.kind == OracleKind::Remote && self.oracle.endpoint.is_none() {
            return bad("oracle.endpoint is required for a remote oracle".into());
        }
        if self.task.d == 0 || self.task.prototypes == 0 {
            return bad("task.d and task.prototypes must be positive".into());
        }
        if !(self.task.noise_sigma >= 0.0) {
            return bad("task.noise_sigma must be non-negative".into());
        }
        let s = &self.sweep;
        if s.gamma.iter().any(|g| !(*g > 0.0))
            || s.m.contains(&0)
            || s.dup_fraction.iter().any(|f| !(0.0..=1.0).contains(f))
            || !(s.delta_z_scale >= 0.0)
        {
            return bad("sweep grid out of range".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_text_with_overrides(&c.to_toml(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let text = "task.kind = \"key-value-association\"\ntask.d = 4\npool.size = 30\nsubsample = \"all\"\nstrategies = [\"random\", \"metric\"]\n";
        let c = ExperimentConfig::from_text_with_overrides(
            text,
            &[
                "seed=7".into(),
                "oracle.gamma=2.5".into(),
                "k_values=[1, 3]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.task.kind, TaskKind::KeyValueAssociation);
        assert_eq!(c.task.d, 4);
        assert_eq!(c.pool.size, 30);
        assert_eq!(c.subsample(), Subsample::All);
        assert_eq!(c.strategies, vec![Strategy::Random, Strategy::Metric]);
        assert_eq!(c.seed, 7);
        assert_eq!(c.oracle.gamma, 2.5);
        assert_eq!(c.k_values, vec![1, 3]);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "k_values = [4, 2]",
            "trials = 0",
            "k_values = [1, 500]",
            "unknown_key = 1",
            "oracle.kind = \"remote\"",
            "subsample = 200",
            "this is not toml",
        ] {
            assert!(
                ExperimentConfig::from_text_with_overrides(text, &[]).is_err(),
                "{text}"
            );
        }
    }
}
