//! Prediction-model evaluation: K-NN under a Grassmannian rank-1 distance or
//! the Frobenius (Euclidean) distance, on a stratified train/test split, with
//! accuracy, logarithmic loss, and macro one-vs-rest AUC.
//!
//! A single instance becomes a manifold point as the line it spans: unit
//! vectors x/||x|| and y/||y|| generate rank-1 projectors, and the geodesic
//! distance reduces to `sqrt(2) * arccos(|cos angle(x, y)|)`. A constant
//! one-valued column appended after scaling guarantees nonzero norms, so the
//! rank-1 point always exists; the same augmented vectors feed both distance
//! kinds to keep the comparison fair. The rank-1 distance is invariant to
//! rescaling either argument, sign included.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kdd::{FeatureMatrix, SourceTag};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least {min} rows to split, got {rows}")]
    TooFewRows { rows: usize, min: usize },
    #[error("train ratio must lie in (0, 1), got {0}")]
    BadRatio(f64),
    #[error("K must satisfy 1 <= K <= training rows; got K={k} with {train} rows")]
    BadK { k: usize, train: usize },
    #[error("vectors have different lengths: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cannot build a rank-1 subspace from a zero vector")]
    ZeroVector,
    #[error("the test set holds a single class; ranking metrics are undefined")]
    SingleClassTest,
    #[error("test label {0:?} does not occur in the training data")]
    UnknownTestLabel(String),
    #[error("model has no training rows")]
    EmptyModel,
    #[error(transparent)]
    Ingest(#[from] crate::kdd::IngestError),
}

/// Instance-level distance kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceDistance {
    GrassmannRank1,
    Frobenius,
}

impl InstanceDistance {
    pub fn as_str(self) -> &'static str {
        match self {
            InstanceDistance::GrassmannRank1 => "grassmann",
            InstanceDistance::Frobenius => "frobenius",
        }
    }
}

/// Distance between two instance vectors under the chosen kind.
pub fn instance_distance(x: &[f64], y: &[f64], kind: InstanceDistance) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    match kind {
        InstanceDistance::Frobenius => Ok(x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()),
        InstanceDistance::GrassmannRank1 => {
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nx == 0.0 || ny == 0.0 {
                return Err(EvalError::ZeroVector);
            }
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let cosine = (dot.abs() / (nx * ny)).clamp(0.0, 1.0);
            Ok(std::f64::consts::SQRT_2 * cosine.acos())
        }
    }
}

/// Stratified split sizes land within one row of the ratio per class; classes
/// with fewer than two rows stay whole in the training side and are reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitWarning {
    pub class: String,
    pub rows: usize,
}

pub struct TrainTestSplit {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub warnings: Vec<SplitWarning>,
}

/// Deterministic stratified split: the same seed always produces the same
/// membership, and rows keep their source order inside each side.
pub fn split_train_test(
    data: &FeatureMatrix,
    train_ratio: f64,
    seed: u64,
) -> Result<TrainTestSplit, EvalError> {
    const MIN_ROWS: usize = 10;
    if data.rows() < MIN_ROWS {
        return Err(EvalError::TooFewRows {
            rows: data.rows(),
            min: MIN_ROWS,
        });
    }
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(EvalError::BadRatio(train_ratio));
    }

    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in data.labels().iter().enumerate() {
        by_class.entry(label.as_str()).or_default().push(i);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut train_rows: Vec<usize> = Vec::new();
    let mut test_rows: Vec<usize> = Vec::new();
    let mut warnings = Vec::new();
    for (class, mut rows) in by_class {
        if rows.len() < 2 {
            warnings.push(SplitWarning {
                class: class.to_string(),
                rows: rows.len(),
            });
            train_rows.extend(rows);
            continue;
        }
        rows.shuffle(&mut rng);
        let n = rows.len();
        let take = ((train_ratio * n as f64).round() as usize).clamp(1, n - 1);
        train_rows.extend(&rows[..take]);
        test_rows.extend(&rows[take..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();

    Ok(TrainTestSplit {
        train: take_rows(data, &train_rows, "train"),
        test: take_rows(data, &test_rows, "test"),
        warnings,
    })
}

fn take_rows(data: &FeatureMatrix, rows: &[usize], tag: &str) -> FeatureMatrix {
    let mut values = nalgebra::DMatrix::<f64>::zeros(rows.len(), data.cols());
    let mut labels = Vec::with_capacity(rows.len());
    for (out, &src) in rows.iter().enumerate() {
        values.row_mut(out).copy_from(&data.values().row(src));
        labels.push(data.labels()[src].clone());
    }
    FeatureMatrix::new(
        values,
        labels,
        data.column_names().to_vec(),
        SourceTag::Combined(tag.to_string()),
    )
    .expect("rows taken from a valid matrix")
}

/// Deterministic per-class down-sampling to at most `cap` rows (0 = no cap);
/// keeps source order of the surviving rows.
pub fn stratified_cap(data: &FeatureMatrix, cap: usize, seed: u64) -> FeatureMatrix {
    if cap == 0 {
        return data.clone();
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in data.labels().iter().enumerate() {
        by_class.entry(label.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut keep: Vec<usize> = Vec::new();
    for (_, mut rows) in by_class {
        if rows.len() > cap {
            rows.shuffle(&mut rng);
            rows.truncate(cap);
        }
        keep.extend(rows);
    }
    keep.sort_unstable();
    take_rows(data, &keep, "capped")
}

/// K-NN over stored training rows with a fixed distance kind. Prediction
/// yields a Laplace-smoothed probability per class: `(votes + eps) /
/// (K + eps * classes)`, which sums to one and never vanishes.
#[derive(Debug, Clone)]
pub struct NeighborModel {
    rows: nalgebra::DMatrix<f64>,
    class_of_row: Vec<usize>,
    class_names: Vec<String>,
    kind: InstanceDistance,
    k: usize,
    epsilon: f64,
}

impl NeighborModel {
    pub fn fit(
        train: &FeatureMatrix,
        kind: InstanceDistance,
        k: usize,
        epsilon: f64,
    ) -> Result<Self, EvalError> {
        if train.rows() == 0 {
            return Err(EvalError::EmptyModel);
        }
        if k < 1 || k > train.rows() {
            return Err(EvalError::BadK {
                k,
                train: train.rows(),
            });
        }
        let mut class_names: Vec<String> = train.labels().to_vec();
        class_names.sort_unstable();
        class_names.dedup();
        let class_of_row = train
            .labels()
            .iter()
            .map(|l| {
                class_names
                    .binary_search_by(|c| c.as_str().cmp(l))
                    .expect("label present")
            })
            .collect();
        Ok(Self {
            rows: train.values().clone(),
            class_of_row,
            class_names,
            kind,
            k,
            epsilon,
        })
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> InstanceDistance {
        self.kind
    }

    /// Smoothed per-class probabilities for one instance. Ties at the K-th
    /// distance resolve by training row index.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let n = self.rows.nrows();
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut row = vec![0.0f64; self.rows.ncols()];
        for i in 0..n {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.rows[(i, j)];
            }
            scored.push((instance_distance(x, &row, self.kind)?, i));
        }
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < n {
            scored.select_nth_unstable_by(self.k - 1, order);
            scored.truncate(self.k);
        }
        scored.sort_unstable_by(order);

        let classes = self.class_names.len();
        let mut votes = vec![0usize; classes];
        for &(_, i) in scored.iter().take(self.k) {
            votes[self.class_of_row[i]] += 1;
        }
        let denominator = self.k as f64 + self.epsilon * classes as f64;
        Ok(votes
            .iter()
            .map(|&v| (v as f64 + self.epsilon) / denominator)
            .collect())
    }
}

/// One scored test row, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowPrediction {
    pub row: usize,
    pub true_class: String,
    pub predicted: String,
    pub probability_true: f64,
}

/// Classification metrics over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub distance: InstanceDistance,
    pub classification_accuracy: f64,
    pub log_loss: f64,
    /// macro one-vs-rest ranking AUC; absent when no class has both
    /// positives and negatives in the test set
    pub auc: Option<f64>,
    pub test_rows: usize,
    pub class_names: Vec<String>,
    /// confusion[i][j] counts rows of true class i predicted as class j
    pub confusion: Vec<Vec<usize>>,
    /// per-row outcomes, in test order
    pub predictions: Vec<RowPrediction>,
}

/// Evaluates a fitted model: accuracy by argmax (ties to the first class in
/// name order), natural-log loss of the true-class probability, and macro
/// one-vs-rest AUC with average ranks on ties.
pub fn evaluate(model: &NeighborModel, test: &FeatureMatrix) -> Result<EvalMetrics, EvalError> {
    if test.rows() == 0 {
        return Err(EvalError::TooFewRows { rows: 0, min: 1 });
    }
    let mut distinct: Vec<&str> = test.labels().iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(EvalError::SingleClassTest);
    }

    let classes = model.class_names.len();
    let true_class: Vec<usize> = test
        .labels()
        .iter()
        .map(|l| {
            model
                .class_names
                .binary_search_by(|c| c.as_str().cmp(l))
                .map_err(|_| EvalError::UnknownTestLabel(l.clone()))
        })
        .collect::<Result<_, _>>()?;

    let probabilities: Vec<Vec<f64>> = (0..test.rows())
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..test.cols()).map(|j| test.values()[(i, j)]).collect();
            model.predict(&row)
        })
        .collect::<Result<_, _>>()?;

    let mut hits = 0usize;
    let mut loss_sum = 0.0f64;
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut predictions = Vec::with_capacity(probabilities.len());
    for (i, probs) in probabilities.iter().enumerate() {
        let predicted = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
            .expect("non-empty classes");
        confusion[true_class[i]][predicted] += 1;
        if predicted == true_class[i] {
            hits += 1;
        }
        loss_sum -= probs[true_class[i]].ln();
        predictions.push(RowPrediction {
            row: i,
            true_class: model.class_names[true_class[i]].clone(),
            predicted: model.class_names[predicted].clone(),
            probability_true: probs[true_class[i]],
        });
    }

    // macro one-vs-rest AUC over the smoothed scores
    let mut auc_sum = 0.0f64;
    let mut auc_classes = 0usize;
    for c in 0..classes {
        let positives = true_class.iter().filter(|&&t| t == c).count();
        let negatives = test.rows() - positives;
        if positives == 0 || negatives == 0 {
            continue;
        }
        let scores: Vec<f64> = probabilities.iter().map(|p| p[c]).collect();
        let labels: Vec<bool> = true_class.iter().map(|&t| t == c).collect();
        auc_sum += binary_ranking_auc(&scores, &labels);
        auc_classes += 1;
    }
    let auc = if auc_classes > 0 {
        Some(auc_sum / auc_classes as f64)
    } else {
        None
    };

    Ok(EvalMetrics {
        distance: model.kind,
        classification_accuracy: hits as f64 / test.rows() as f64,
        log_loss: loss_sum / test.rows() as f64,
        auc,
        test_rows: test.rows(),
        class_names: model.class_names.clone(),
        confusion,
        predictions,
    })
}

/// Mann-Whitney ranking AUC with average ranks on tied scores.
fn binary_ranking_auc(scores: &[f64], positives: &[bool]) -> f64 {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let average_rank = (i + j + 2) as f64 / 2.0; // 1-based ranks
        for &idx in &order[i..=j] {
            if positives[idx] {
                rank_sum_pos += average_rank;
            }
        }
        i = j + 1;
    }
    let n_pos = positives.iter().filter(|&&p| p).count() as f64;
    let n_neg = n as f64 - n_pos;
    (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

/// Knobs for the paired model comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub train_ratio: f64,
    /// per-class row cap applied before splitting; 0 disables
    pub max_rows_per_class: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 42,
            epsilon: 1e-3,
            train_ratio: 0.7,
            max_rows_per_class: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub grassmann: EvalMetrics,
    pub frobenius: EvalMetrics,
    pub train_rows: usize,
    pub test_rows: usize,
    pub k: usize,
    pub seed: u64,
    pub warnings: Vec<SplitWarning>,
}

/// Runs both distance kinds on the identical stratified split. The constant
/// bias column is appended here, after scaling, for both kinds alike.
pub fn compare_models(
    data: &FeatureMatrix,
    config: &EvalConfig,
) -> Result<ModelComparison, EvalError> {
    let capped = stratified_cap(data, config.max_rows_per_class, config.seed);
    let augmented = capped.with_constant_column();
    let split = split_train_test(&augmented, config.train_ratio, config.seed)?;

    let mut metrics = Vec::with_capacity(2);
    for kind in [InstanceDistance::GrassmannRank1, InstanceDistance::Frobenius] {
        let model = NeighborModel::fit(&split.train, kind, config.k, config.epsilon)?;
        metrics.push(evaluate(&model, &split.test)?);
    }
    let frobenius = metrics.pop().expect("two models");
    let grassmann = metrics.pop().expect("two models");

    Ok(ModelComparison {
        grassmann,
        frobenius,
        train_rows: split.train.rows(),
        test_rows: split.test.rows(),
        k: config.k,
        seed: config.seed,
        warnings: split.warnings,
    })
}
