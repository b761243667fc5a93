//! The config file of record. TOML on input; the same structure is echoed as
//! JSON next to every output, and such an echo is accepted back by `--config`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use rdt_core::data::{CsvOptions, LabelColumn};
use rdt_core::eval::Metric;
use rdt_core::Method;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluate: Option<EvaluateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<RankSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetEntry {
    Path(PathBuf),
    Spec(DatasetSpec),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Label column name; the last column when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nominal: Vec<String>,
}

impl DatasetEntry {
    pub fn spec(&self) -> DatasetSpec {
        match self {
            DatasetEntry::Path(p) => DatasetSpec {
                path: p.clone(),
                ..DatasetSpec::default()
            },
            DatasetEntry::Spec(s) => s.clone(),
        }
    }
}

impl DatasetSpec {
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            label: self.label.clone().map_or(LabelColumn::Last, LabelColumn::Name),
            nominal: self.nominal.clone(),
            positive: self.positive.clone(),
            name: self.name.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub datasets: Vec<DatasetEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trees: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaf_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// One growing leaf scored by a per-leaf scorer.
    Leaf,
    /// An ensemble of growing leaves combined by a method.
    #[default]
    Ensemble,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SimMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_pos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble_leaves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantiles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankSection {
    pub inputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_ratio_band: Option<[f64; 2]>,
}

/// Reads a TOML config, or a JSON output echo (its `config` member).
pub fn load(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        let mut value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let inner = value.get_mut("config").map(serde_json::Value::take).unwrap_or(value);
        serde_json::from_value(inner).with_context(|| format!("parsing config echo in {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    Ok(parsed)
}

pub fn check_band(band: [f64; 2]) -> Result<[f64; 2]> {
    let [lo, hi] = band;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        bail!("class-ratio band must satisfy 0 <= lo <= hi <= 1, got {lo},{hi}");
    }
    Ok(band)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_toml() {
        let text = r#"
seed = 7
out = "runs/a"

[evaluate]
datasets = ["data/tic-tac-toe.csv", { path = "data/b.csv", label = "y", positive = "yes", nominal = ["c1"] }]
trees = 10
leaf_sizes = [1, 4]
methods = ["prob", "eva"]

[simulate]
mode = "leaf"
p_pos = 0.6
quantiles = [0.5]

[rank]
metric = "accuracy"
class_ratio_band = [0.4, 0.6]
"#;
        let cfg: FileConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, Some(7));
        let ev = cfg.evaluate.unwrap();
        assert_eq!(ev.datasets.len(), 2);
        let spec = ev.datasets[1].spec();
        assert_eq!(spec.label.as_deref(), Some("y"));
        assert!(matches!(spec.csv_options().label, LabelColumn::Name(ref n) if n == "y"));
        assert_eq!(ev.methods.unwrap(), vec![Method::ProbAvg, Method::Eva]);
        assert_eq!(cfg.simulate.unwrap().mode, Some(SimMode::Leaf));
        assert_eq!(cfg.rank.unwrap().metric, Some(Metric::Accuracy));
    }

    #[test]
    fn rejects_unknown_keys_and_methods() {
        assert!(toml::from_str::<FileConfig>("sed = 1").is_err());
        assert!(toml::from_str::<FileConfig>("[evaluate]\nmethods = [\"median\"]").is_err());
    }

    #[test]
    fn json_echo_round_trips() {
        let cfg = FileConfig {
            seed: Some(3),
            evaluate: Some(EvaluateSection {
                datasets: vec![DatasetEntry::Path("x.csv".into())],
                trees: Some(5),
                ..EvaluateSection::default()
            }),
            ..FileConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("echo.json");
        fs::write(
            &path,
            serde_json::json!({ "command": "evaluate", "config": cfg }).to_string(),
        )
        .unwrap();
        assert_eq!(load(&path).unwrap(), cfg);
    }

    #[test]
    fn band_validation() {
        assert!(check_band([0.4, 0.6]).is_ok());
        assert!(check_band([0.6, 0.4]).is_err());
        assert!(check_band([-0.1, 0.4]).is_err());
    }
}
