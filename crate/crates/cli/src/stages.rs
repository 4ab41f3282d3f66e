//! The four pipeline stages, file to file: ingest (parse, encode, split),
//! attribute learning (tree, rules, reweighting), inference (distance
//! tables), and evaluation (K-NN comparison). Every intermediate artifact is
//! CSV or JSON, so each stage can run and be inspected on its own.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use grasnid_core::alnid::{self, DecisionTree, TreeParams};
use grasnid_core::inid::{self, InidConfig};
use grasnid_core::kdd::{
    self, AttackTaxonomy, Category, EncodingSchema, FeatureMatrix, SelectedSchema,
    SourceTag,
};
use grasnid_core::zsl::{self, EvalConfig};

use crate::config::{EvalDistance, PipelineConfig, ReportFormat, DESK_SCALE_ROW_LIMIT};
use crate::manifest::{sha256_file, sha256_hex, RunManifest, StageRecord, StageRunner};
use crate::report::{ComparisonTable, DistanceTable, MetricsTable};

pub const STAGES: [&str; 4] = ["ingest", "alnid", "infer", "eval"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassFileEntry {
    pub name: String,
    pub rows: usize,
    pub file: String,
}

/// Written by the ingest stage: classes, counts, files, scaling parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestManifest {
    pub dataset: String,
    pub selected_attributes: Vec<String>,
    pub kc_files: Vec<ClassFileEntry>,
    pub zsc_files: Vec<ClassFileEntry>,
    pub kc_attack_counts: BTreeMap<String, usize>,
    pub skipped_lines: usize,
    pub scaling: EncodingSchema,
}

/// Written by the attribute-learning stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsManifest {
    pub tree_file: String,
    pub stats_file: String,
    pub tree_fingerprint: String,
    pub training_accuracy: f64,
    pub rule_count: usize,
    pub kc_files: Vec<ClassFileEntry>,
    pub zsc_files: Vec<ClassFileEntry>,
}

pub struct Pipeline<'a> {
    pub config: &'a PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: &'a PipelineConfig) -> Self {
        Self { config }
    }

    fn out(&self) -> &Path {
        &self.config.out_dir
    }

    fn ingest_dir(&self) -> PathBuf {
        self.out().join("ingest")
    }

    fn alnid_dir(&self) -> PathBuf {
        self.out().join("alnid")
    }

    fn infer_dir(&self) -> PathBuf {
        self.out().join("infer")
    }

    fn eval_dir(&self) -> PathBuf {
        self.out().join("eval")
    }

    /// Runs all stages in order and writes the run manifest.
    pub fn run_all(&self) -> Result<RunManifest> {
        let mut manifest = RunManifest::new(sha256_hex(self.config.canonical_json().as_bytes()));
        for stage in STAGES {
            let record = self
                .run_stage(stage)
                .with_context(|| format!("stage {stage} failed"))?;
            manifest.stages.push(record);
        }
        manifest.write(&self.out().join("run_manifest.json"))?;
        Ok(manifest)
    }

    pub fn run_stage(&self, stage: &str) -> Result<StageRecord> {
        match stage {
            "ingest" => self.stage_ingest(),
            "alnid" => self.stage_alnid(),
            "infer" => self.stage_infer(),
            "eval" => self.stage_eval(),
            other => bail!("unknown stage {other:?}"),
        }
    }

    // ---- ingest ----------------------------------------------------------

    fn stage_ingest(&self) -> Result<StageRecord> {
        self.config.validate_inputs()?;
        let runner = StageRunner::new(self.out());
        let config_slice = serde_json::to_string(&(
            self.config.dataset_kind,
            &self.config.attribute_indices,
            self.config.error_budget,
            self.config.full_scale,
        ))?;
        let input_digest = sha256_file(&self.config.train_path)?;
        let fingerprint = runner.fingerprint("ingest", &config_slice, &[input_digest]);

        let dir = self.ingest_dir();
        let config = self.config;
        runner.run("ingest", fingerprint, || {
            fs::create_dir_all(&dir)?;
            let options = kdd::ParseOptions {
                format: config.dataset_kind,
                error_budget: config.error_budget,
            };
            let parsed = kdd::parse_records(&config.train_path, &options)?;
            if parsed.records.len() > DESK_SCALE_ROW_LIMIT && !config.full_scale {
                bail!(
                    "{} rows exceed the desk-scale limit of {DESK_SCALE_ROW_LIMIT}; \
                     set full_scale = true to proceed",
                    parsed.records.len()
                );
            }
            let selection = SelectedSchema::new(&config.attribute_indices)?;
            let split = kdd::build_zsl_split(&parsed.records, &AttackTaxonomy::standard(), &selection)?;

            let mut files = Vec::new();
            let mut kc_files = Vec::new();
            for (category, matrix) in &split.kc {
                let file = dir.join(format!("KC_{category}.csv"));
                write_matrix(matrix, &file)?;
                kc_files.push(ClassFileEntry {
                    name: category.to_string(),
                    rows: matrix.rows(),
                    file: file_name(&file),
                });
                files.push(file);
            }
            let mut zsc_files = Vec::new();
            for (attack, matrix) in &split.zsc {
                let file = dir.join(format!("ZSC_{attack}.csv"));
                write_matrix(matrix, &file)?;
                zsc_files.push(ClassFileEntry {
                    name: attack.clone(),
                    rows: matrix.rows(),
                    file: file_name(&file),
                });
                files.push(file);
            }

            let manifest = IngestManifest {
                dataset: config.dataset_kind.as_str().to_string(),
                selected_attributes: split.schema.selection.names().to_vec(),
                kc_files,
                zsc_files,
                kc_attack_counts: split.kc_attack_counts.clone(),
                skipped_lines: parsed.skipped.len(),
                scaling: split.schema.clone(),
            };
            let manifest_path = dir.join("ingest_manifest.json");
            fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
            files.push(manifest_path);
            Ok(files)
        })
    }

    fn read_ingest_manifest(&self) -> Result<IngestManifest> {
        let path = self.ingest_dir().join("ingest_manifest.json");
        let text = fs::read_to_string(&path).with_context(|| {
            format!(
                "cannot read {} (run the ingest stage first)",
                path.display()
            )
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    // ---- attribute learning ---------------------------------------------

    fn stage_alnid(&self) -> Result<StageRecord> {
        let ingest = self.read_ingest_manifest()?;
        let runner = StageRunner::new(self.out());
        let config_slice = serde_json::to_string(&(
            self.config.tree_max_depth,
            self.config.tree_min_leaf,
        ))?;
        let mut inputs = Vec::new();
        for entry in ingest.kc_files.iter().chain(&ingest.zsc_files) {
            inputs.push(sha256_file(&self.ingest_dir().join(&entry.file))?);
        }
        let fingerprint = runner.fingerprint("alnid", &config_slice, &inputs);

        let dir = self.alnid_dir();
        let ingest_dir = self.ingest_dir();
        let config = self.config;
        runner.run("alnid", fingerprint, || {
            fs::create_dir_all(&dir)?;
            // load per-category matrices and stack them for training
            let mut kc = Vec::new();
            for entry in &ingest.kc_files {
                let category = Category::parse(&entry.name)
                    .ok_or_else(|| anyhow!("bad category {:?}", entry.name))?;
                let matrix = read_matrix(
                    &ingest_dir.join(&entry.file),
                    &entry.name,
                    SourceTag::KnownCategory(category),
                )?;
                kc.push((category, matrix));
            }
            let parts: Vec<&FeatureMatrix> = kc.iter().map(|(_, m)| m).collect();
            let training =
                FeatureMatrix::vstack(&parts, SourceTag::Combined("kc-train".to_string()))?;

            let params = TreeParams {
                max_depth: config.tree_max_depth,
                min_leaf: config.tree_min_leaf,
            };
            let learned = alnid::learn_attributes(&training, &params)?;
            let training_accuracy = learned.tree.accuracy(&training);

            let tree_path = dir.join("tree.json");
            fs::write(&tree_path, learned.tree.to_json())?;
            let stats_path = dir.join("attribute_stats.json");
            fs::write(&stats_path, serde_json::to_string_pretty(&learned.stats)?)?;

            let mut files = vec![tree_path.clone(), stats_path.clone()];
            let mut kc_files = Vec::new();
            for (category, matrix) in &kc {
                let weighted = alnid::reweight_instances(matrix, &learned.rules, &learned.stats)?;
                let file = dir.join(format!("KC_{category}.csv"));
                write_matrix(&weighted.matrix, &file)?;
                kc_files.push(ClassFileEntry {
                    name: category.to_string(),
                    rows: weighted.matrix.rows(),
                    file: file_name(&file),
                });
                files.push(file);
            }
            let mut zsc_files = Vec::new();
            for entry in &ingest.zsc_files {
                let matrix = read_matrix(
                    &ingest_dir.join(&entry.file),
                    &entry.name,
                    SourceTag::ZeroShotAttack(entry.name.clone()),
                )?;
                let weighted = alnid::reweight_instances(&matrix, &learned.rules, &learned.stats)?;
                let file = dir.join(format!("ZSC_{}.csv", entry.name));
                write_matrix(&weighted.matrix, &file)?;
                zsc_files.push(ClassFileEntry {
                    name: entry.name.clone(),
                    rows: weighted.matrix.rows(),
                    file: file_name(&file),
                });
                files.push(file);
            }

            let manifest = WeightsManifest {
                tree_file: file_name(&tree_path),
                stats_file: file_name(&stats_path),
                tree_fingerprint: learned.tree.fingerprint(),
                training_accuracy,
                rule_count: learned.rules.rules.len(),
                kc_files,
                zsc_files,
            };
            let manifest_path = dir.join("weights_manifest.json");
            fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
            files.push(manifest_path);
            Ok(files)
        })
    }

    fn read_weights_manifest(&self) -> Result<WeightsManifest> {
        let path = self.alnid_dir().join("weights_manifest.json");
        let text = fs::read_to_string(&path).with_context(|| {
            format!(
                "cannot read {} (run the alnid stage first)",
                path.display()
            )
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    fn load_weighted(
        &self,
        weights: &WeightsManifest,
    ) -> Result<(BTreeMap<Category, FeatureMatrix>, BTreeMap<String, FeatureMatrix>)> {
        let dir = self.alnid_dir();
        let mut kc = BTreeMap::new();
        for entry in &weights.kc_files {
            let category = Category::parse(&entry.name)
                .ok_or_else(|| anyhow!("bad category {:?}", entry.name))?;
            let matrix = read_matrix(
                &dir.join(&entry.file),
                &entry.name,
                SourceTag::KnownCategory(category),
            )?;
            kc.insert(category, matrix);
        }
        let mut zsc = BTreeMap::new();
        for entry in &weights.zsc_files {
            let matrix = read_matrix(
                &dir.join(&entry.file),
                &entry.name,
                SourceTag::ZeroShotAttack(entry.name.clone()),
            )?;
            zsc.insert(entry.name.clone(), matrix);
        }
        Ok((kc, zsc))
    }

    // ---- inference --------------------------------------------------------

    fn stage_infer(&self) -> Result<StageRecord> {
        let weights = self.read_weights_manifest()?;
        let runner = StageRunner::new(self.out());
        let config_slice = serde_json::to_string(&(
            self.config.cutoff_percent,
            self.config.engine,
            &self.config.report_formats,
        ))?;
        let mut inputs = Vec::new();
        for entry in weights.kc_files.iter().chain(&weights.zsc_files) {
            inputs.push(sha256_file(&self.alnid_dir().join(&entry.file))?);
        }
        let fingerprint = runner.fingerprint("infer", &config_slice, &inputs);

        let dir = self.infer_dir();
        let config = self.config;
        let pipeline = self;
        runner.run("infer", fingerprint, || {
            fs::create_dir_all(&dir)?;
            let (kc, zsc) = pipeline.load_weighted(&weights)?;
            let inid_config = InidConfig {
                cutoff_percent: config.cutoff_percent,
                engine: config.engine,
            };
            let mut reports = Vec::new();
            for matrix in zsc.values() {
                reports.push(inid::score_categories(matrix, &kc, &inid_config)?);
            }
            let table = DistanceTable {
                engine: config.engine.to_string(),
                cutoff_percent: config.cutoff_percent,
                reports,
            };
            emit(&dir, "distances", &config.report_formats, &table.to_csv(), &table.to_markdown(), &table.to_json()?)
        })
    }

    // ---- evaluation -------------------------------------------------------

    fn stage_eval(&self) -> Result<StageRecord> {
        let weights = self.read_weights_manifest()?;
        let runner = StageRunner::new(self.out());
        let config_slice = serde_json::to_string(&(
            self.config.knn_k,
            self.config.knn_epsilon,
            self.config.eval_distance,
            self.config.eval_include_zsc,
            self.config.eval_max_rows_per_class,
            self.config.eval_train_ratio,
            self.config.seed,
            &self.config.report_formats,
        ))?;
        let mut inputs = Vec::new();
        for entry in weights.kc_files.iter().chain(&weights.zsc_files) {
            inputs.push(sha256_file(&self.alnid_dir().join(&entry.file))?);
        }
        let fingerprint = runner.fingerprint("eval", &config_slice, &inputs);

        let dir = self.eval_dir();
        let config = self.config;
        let pipeline = self;
        runner.run("eval", fingerprint, || {
            fs::create_dir_all(&dir)?;
            let (kc, zsc) = pipeline.load_weighted(&weights)?;
            let mut parts: Vec<&FeatureMatrix> = kc.values().collect();
            let relabeled_zsc: Vec<FeatureMatrix>;
            if config.eval_include_zsc {
                // held-out instances join under their true category label
                let taxonomy = AttackTaxonomy::standard();
                relabeled_zsc = zsc
                    .iter()
                    .map(|(name, matrix)| {
                        let category = taxonomy
                            .category_of(name)
                            .ok_or_else(|| anyhow!("attack {name:?} missing from taxonomy"))?;
                        FeatureMatrix::new(
                            matrix.values().clone(),
                            vec![category.name().to_string(); matrix.rows()],
                            matrix.column_names().to_vec(),
                            SourceTag::Combined(format!("zsc:{name}")),
                        )
                        .map_err(anyhow::Error::from)
                    })
                    .collect::<Result<_>>()?;
                parts.extend(relabeled_zsc.iter());
            }
            let corpus = FeatureMatrix::vstack(&parts, SourceTag::Combined("eval".to_string()))?;

            let eval_config = EvalConfig {
                k: config.knn_k,
                seed: config.seed,
                epsilon: config.knn_epsilon,
                train_ratio: config.eval_train_ratio,
                max_rows_per_class: config.eval_max_rows_per_class,
            };
            match config.eval_distance {
                EvalDistance::Both => {
                    let comparison = zsl::compare_models(&corpus, &eval_config)?;
                    let table = ComparisonTable {
                        k: eval_config.k,
                        seed: eval_config.seed,
                        comparison,
                    };
                    emit(&dir, "knn_metrics", &config.report_formats, &table.to_csv(), &table.to_markdown(), &table.to_json()?)
                }
                single => {
                    let kind = match single {
                        EvalDistance::Grassmann => zsl::InstanceDistance::GrassmannRank1,
                        EvalDistance::Frobenius => zsl::InstanceDistance::Frobenius,
                        EvalDistance::Both => unreachable!(),
                    };
                    let capped =
                        zsl::stratified_cap(&corpus, eval_config.max_rows_per_class, eval_config.seed);
                    let augmented = capped.with_constant_column();
                    let split =
                        zsl::split_train_test(&augmented, eval_config.train_ratio, eval_config.seed)?;
                    let model = zsl::NeighborModel::fit(
                        &split.train,
                        kind,
                        eval_config.k,
                        eval_config.epsilon,
                    )?;
                    let metrics = zsl::evaluate(&model, &split.test)?;
                    let table = MetricsTable {
                        k: eval_config.k,
                        seed: eval_config.seed,
                        metrics,
                    };
                    emit(&dir, "knn_metrics", &config.report_formats, &table.to_csv(), &table.to_markdown(), &table.to_json()?)
                }
            }
        })
    }
}

/// Writes the requested formats of a report and returns the file list.
fn emit(
    dir: &Path,
    basename: &str,
    formats: &[ReportFormat],
    csv: &str,
    markdown: &str,
    json: &str,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for format in formats {
        let (extension, body) = match format {
            ReportFormat::Csv => ("csv", csv),
            ReportFormat::Markdown => ("md", markdown),
            ReportFormat::Json => ("json", json),
        };
        let path = dir.join(format!("{basename}.{extension}"));
        fs::write(&path, body)?;
        files.push(path);
    }
    Ok(files)
}

fn write_matrix(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let file = fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    matrix.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn read_matrix(path: &Path, label: &str, source: SourceTag) -> Result<FeatureMatrix> {
    let file =
        fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(FeatureMatrix::read_csv(
        BufReader::new(file),
        label,
        source,
    )?)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .expect("stage files are named")
        .to_string_lossy()
        .into_owned()
}

/// Re-emits CSV and markdown reports from the JSON detail files.
pub fn regenerate_reports(out_dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let infer_json = out_dir.join("infer").join("distances.json");
    if infer_json.exists() {
        let table = DistanceTable::from_json(&fs::read_to_string(&infer_json)?)?;
        written.extend(emit(
            &out_dir.join("infer"),
            "distances",
            formats,
            &table.to_csv(),
            &table.to_markdown(),
            &table.to_json()?,
        )?);
    }
    let eval_json = out_dir.join("eval").join("knn_metrics.json");
    if eval_json.exists() {
        let text = fs::read_to_string(&eval_json)?;
        if let Ok(table) = ComparisonTable::from_json(&text) {
            written.extend(emit(
                &out_dir.join("eval"),
                "knn_metrics",
                formats,
                &table.to_csv(),
                &table.to_markdown(),
                &table.to_json()?,
            )?);
        } else {
            let table = MetricsTable::from_json(&text)?;
            written.extend(emit(
                &out_dir.join("eval"),
                "knn_metrics",
                formats,
                &table.to_csv(),
                &table.to_markdown(),
                &table.to_json()?,
            )?);
        }
    }
    if written.is_empty() {
        bail!(
            "no report JSON found under {} (run infer or eval first)",
            out_dir.display()
        );
    }
    Ok(written)
}

/// Decision-tree accuracy recorded by the attribute-learning stage, for
/// quick inspection without re-running.
pub fn read_training_accuracy(out_dir: &Path) -> Result<f64> {
    let path = out_dir.join("alnid").join("weights_manifest.json");
    let manifest: WeightsManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(manifest.training_accuracy)
}

/// The stored decision tree, parsed back.
pub fn read_tree(out_dir: &Path) -> Result<DecisionTree> {
    let path = out_dir.join("alnid").join("tree.json");
    Ok(DecisionTree::from_json(&fs::read_to_string(path)?)?)
}
