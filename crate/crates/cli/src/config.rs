//! Flat key = value configuration with GRASNID_* environment overrides.
//!
//! One canonical example lives at `config/example.conf`. Every key can be
//! overridden by an environment variable named `GRASNID_<KEY>` with the key
//! upper-cased, e.g. `GRASNID_CUTOFF_PERCENT=99`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use grasnid_core::kdd::schema::DEFAULT_SELECTED_ATTRIBUTES;
use grasnid_core::kdd::DatasetFormat;
use grasnid_core::DistanceEngine;

pub const ENV_PREFIX: &str = "GRASNID_";

/// Which distance kinds the evaluation stage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalDistance {
    Grassmann,
    Frobenius,
    Both,
}

impl std::str::FromStr for EvalDistance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "grassmann" => Ok(EvalDistance::Grassmann),
            "frobenius" => Ok(EvalDistance::Frobenius),
            "both" => Ok(EvalDistance::Both),
            other => Err(format!(
                "unknown eval distance {other:?} (expected grassmann, frobenius or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!(
                "unknown report format {other:?} (expected csv, markdown or json)"
            )),
        }
    }
}

/// Everything a run needs, resolved and validated.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub dataset_kind: DatasetFormat,
    pub train_path: PathBuf,
    pub attribute_indices: Vec<usize>,
    pub cutoff_percent: f64,
    pub engine: DistanceEngine,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub knn_k: usize,
    pub knn_epsilon: f64,
    pub eval_distance: EvalDistance,
    pub eval_include_zsc: bool,
    pub eval_max_rows_per_class: usize,
    pub eval_train_ratio: f64,
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub report_formats: Vec<ReportFormat>,
    pub error_budget: usize,
    /// refuse inputs beyond desk scale unless enabled
    pub full_scale: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_kind: DatasetFormat::NslKdd,
            train_path: PathBuf::from("data/train.txt"),
            attribute_indices: DEFAULT_SELECTED_ATTRIBUTES.to_vec(),
            cutoff_percent: 95.0,
            engine: DistanceEngine::PrincipalAngle,
            tree_max_depth: 12,
            tree_min_leaf: 2,
            knn_k: 5,
            knn_epsilon: 1e-3,
            eval_distance: EvalDistance::Both,
            eval_include_zsc: false,
            eval_max_rows_per_class: 5000,
            eval_train_ratio: 0.7,
            seed: 42,
            threads: 0,
            out_dir: PathBuf::from("out"),
            report_formats: vec![
                ReportFormat::Csv,
                ReportFormat::Markdown,
                ReportFormat::Json,
            ],
            error_budget: 0,
            full_scale: false,
        }
    }
}

/// Rows beyond which a parse refuses to continue without `full_scale = true`.
pub const DESK_SCALE_ROW_LIMIT: usize = 1_000_000;

impl PipelineConfig {
    /// Loads a config file, then applies environment overrides, then
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut pairs = parse_flat(&text)?;
        apply_env_overrides(&mut pairs, std::env::vars());
        let config = Self::from_pairs(pairs)?;
        config.validate()?;
        Ok(config)
    }

    /// Builds a config from defaults plus environment overrides only.
    pub fn from_env() -> Result<Self> {
        let mut pairs = BTreeMap::new();
        apply_env_overrides(&mut pairs, std::env::vars());
        let config = Self::from_pairs(pairs)?;
        config.validate()?;
        Ok(config)
    }

    fn from_pairs(pairs: BTreeMap<String, String>) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (key, value) in pairs {
            config
                .set(&key, &value)
                .with_context(|| format!("config key {key:?}"))?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset_kind" => self.dataset_kind = value.parse().map_err(|e: String| anyhow!(e))?,
            "train_path" => self.train_path = PathBuf::from(value),
            "attribute_indices" => {
                self.attribute_indices = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .with_context(|| format!("invalid attribute index list {value:?}"))?;
            }
            "cutoff_percent" => self.cutoff_percent = parse_num(value)?,
            "engine" => self.engine = value.parse().map_err(|e: String| anyhow!(e))?,
            "tree_max_depth" => self.tree_max_depth = parse_num(value)?,
            "tree_min_leaf" => self.tree_min_leaf = parse_num(value)?,
            "knn_k" => self.knn_k = parse_num(value)?,
            "knn_epsilon" => self.knn_epsilon = parse_num(value)?,
            "eval_distance" => {
                self.eval_distance = value.parse().map_err(|e: String| anyhow!(e))?
            }
            "eval_include_zsc" => self.eval_include_zsc = parse_bool(value)?,
            "eval_max_rows_per_class" => self.eval_max_rows_per_class = parse_num(value)?,
            "eval_train_ratio" => self.eval_train_ratio = parse_num(value)?,
            "seed" => self.seed = parse_num(value)?,
            "threads" => self.threads = parse_num(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "report_formats" => {
                self.report_formats = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_, String>>()
                    .map_err(|e| anyhow!(e))?;
            }
            "error_budget" => self.error_budget = parse_num(value)?,
            "full_scale" => self.full_scale = parse_bool(value)?,
            other => bail!("unknown key {other:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_percent > 0.0 && self.cutoff_percent <= 100.0) {
            bail!(
                "cutoff_percent must lie in (0, 100], got {}",
                self.cutoff_percent
            );
        }
        if self.knn_k < 1 {
            bail!("knn_k must be at least 1");
        }
        if self.attribute_indices.is_empty() {
            bail!("attribute_indices must not be empty");
        }
        for &index in &self.attribute_indices {
            if !(1..=41).contains(&index) {
                bail!("attribute index {index} is outside 1..=41");
            }
        }
        if !(self.eval_train_ratio > 0.0 && self.eval_train_ratio < 1.0) {
            bail!(
                "eval_train_ratio must lie in (0, 1), got {}",
                self.eval_train_ratio
            );
        }
        if self.tree_min_leaf == 0 {
            bail!("tree_min_leaf must be at least 1");
        }
        if self.knn_epsilon <= 0.0 {
            bail!("knn_epsilon must be positive, got {}", self.knn_epsilon);
        }
        if self.report_formats.is_empty() {
            bail!("report_formats must name at least one format");
        }
        Ok(())
    }

    /// Paths must exist once a stage is about to read them.
    pub fn validate_inputs(&self) -> Result<()> {
        if !self.train_path.exists() {
            bail!("train_path {} does not exist", self.train_path.display());
        }
        Ok(())
    }

    /// Canonical serialized form, used for the config digest in manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn parse_num<T: std::str::FromStr>(value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid numeric value {value:?}: {e}"))
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("invalid boolean {other:?}"),
    }
}

/// Parses `key = value` lines; '#' starts a comment, blank lines are skipped.
fn parse_flat(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got {raw:?}", number + 1))?;
        pairs.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(pairs)
}

fn apply_env_overrides(
    pairs: &mut BTreeMap<String, String>,
    vars: impl Iterator<Item = (String, String)>,
) {
    for (name, value) in vars {
        if let Some(key) = name.strip_prefix(ENV_PREFIX) {
            pairs.insert(key.to_ascii_lowercase(), value);
        }
    }
}
