//! Run configuration read from a TOML file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use onset_cvi::dataset::Schema;
use onset_cvi::search::{SearchConfig, VoteWeights};
use onset_cvi::synth::SynthConfig;
use onset_cvi::validity::CviKind;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// CSV path; relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default = "default_axis_column")]
    pub axis_column: String,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default)]
    pub feature_columns: Option<Vec<String>>,
    #[serde(default)]
    pub axis_end: Option<f64>,
}

fn default_axis_column() -> String {
    "time".into()
}

impl DatasetSection {
    pub fn schema(&self) -> Schema {
        Schema {
            axis_column: self.axis_column.clone(),
            label_column: self.label_column.clone(),
            feature_columns: self.feature_columns.clone(),
            axis_end: self.axis_end,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSection {
    /// Odd running-median window applied to every feature.
    pub median_window: Option<usize>,
    /// Keep every n-th row after filtering.
    pub decimate: Option<usize>,
    /// Per-level durations kept from the start of each ground-truth level.
    pub truncate_levels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramSection {
    pub bin_width: f64,
}

impl Default for HistogramSection {
    fn default() -> Self {
        Self { bin_width: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoteSection {
    /// Weights of the per-subset K vote.
    pub w1: BTreeMap<CviKind, f64>,
    /// Weights of the cross-subset vote.
    pub w2: BTreeMap<CviKind, f64>,
    /// Subsets kept per K when ranking by the voting scheme.
    pub top_n: usize,
}

impl Default for VoteSection {
    fn default() -> Self {
        let weights = VoteWeights::default();
        Self {
            w1: weights.w1,
            w2: weights.w2,
            top_n: 20,
        }
    }
}

impl VoteSection {
    pub fn weights(&self) -> VoteWeights {
        VoteWeights {
            w1: self.w1.clone(),
            w2: self.w2.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    /// Truth file written by `synth`; enables change-point matching.
    pub truth: Option<PathBuf>,
    pub top_bins: usize,
    /// Accepted distance, in bins, between a peak and a change point.
    pub tolerance_bins: usize,
    /// Bins below this count are hidden in printed reports (stored counts are untouched).
    pub min_count: u64,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            truth: None,
            top_bins: 6,
            tolerance_bins: 1,
            min_count: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub output_dir: Option<PathBuf>,
    pub dataset: Option<DatasetSection>,
    pub preprocess: PreprocessSection,
    pub search: SearchConfig,
    pub histogram: HistogramSection,
    pub vote: VoteSection,
    pub synth: SynthConfig,
    pub report: ReportSection,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths in it resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_relative() {
            self.base_dir.join(path)
        } else {
            path.to_path_buf()
        }
    }

    /// SHA-256 of the canonical JSON form of the parsed config, paths as written.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn dataset(&self) -> CliResult<&DatasetSection> {
        self.dataset
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [dataset] section".into()))
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.histogram.bin_width > 0.0 && self.histogram.bin_width.is_finite()) {
            return Err(CliError::Config(format!(
                "histogram.bin_width must be positive, got {}",
                self.histogram.bin_width
            )));
        }
        if self.vote.top_n == 0 {
            return Err(CliError::Config("vote.top_n must be at least 1".into()));
        }
        self.vote.weights().validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use onset_cvi::search::Selection;

    #[test]
    fn parses_nested_sections() {
        let cfg = Config::from_toml(
            r#"
            [dataset]
            path = "data.csv"
            label_column = "label"

            [search]
            k_min = 3
            k_max = 5
            selection = { quantile = 0.99 }
            shape = { enabled = true, silhouette_sample = 200 }

            [vote]
            top_n = 5
            w1 = { silhouette = 2.0, davies_bouldin = 1.0 }
            w2 = { calinski_harabasz = 1.0 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.search.selection, Selection::Quantile(0.99));
        assert_eq!(cfg.search.restarts, 5);
        assert!(cfg.search.shape.enabled);
        assert_eq!(cfg.vote.w1[&CviKind::Silhouette], 2.0);
        assert!(!cfg.vote.w2.contains_key(&CviKind::Silhouette));
        assert_eq!(cfg.dataset().unwrap().axis_column, "time");
        assert_eq!(cfg.histogram.bin_width, 0.5);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(Config::from_toml("[search]\nk_mn = 3\n").is_err());
        assert!(Config::from_toml("colour = 1\n").is_err());
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = Config::from_toml("[search]\nseed = 4\n").unwrap();
        let b = Config::from_toml("# comment\n[search]\nseed    =  4\n").unwrap();
        let c = Config::from_toml("[search]\nseed = 5\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
