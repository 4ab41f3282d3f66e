//! Attribute learning: per-attribute information statistics, decision-tree
//! induction over the known categories, rule extraction, and reweighting of
//! instance attributes by how often the matched rule evaluates them.
//!
//! Routing an instance through the rule set counts, per attribute, the
//! conditions evaluated on the matched path; the instance's attribute value
//! is then rescaled as `a' = a * (1 + count)`. Attributes never tested on the
//! matched path pass through unchanged.

pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kdd::FeatureMatrix;

pub use tree::{induce_tree, DecisionTree, Node, TreeParams};

#[derive(Debug, Error)]
pub enum AlnidError {
    #[error("not enough rows to induce a tree ({rows})")]
    InsufficientData { rows: usize },
    #[error("rules reference attribute {attribute}, but the matrix has {cols} columns")]
    SchemaMismatch { attribute: usize, cols: usize },
    #[error("attribute statistics cover {stats} attributes, matrix has {cols}")]
    StatsMismatch { stats: usize, cols: usize },
    #[error("no rule matched a row; the rule set does not partition the space")]
    NoMatchingRule,
    #[error("invalid tree document: {0}")]
    BadTreeDocument(String),
    #[error(transparent)]
    Ingest(#[from] crate::kdd::IngestError),
}

/// Per-attribute information measures over a labeled matrix, in bits.
/// `quantity_of_information` is the label entropy, `entropy` the label
/// entropy conditioned on the attribute's distinct-value bins, and
/// `information_gain` their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeInfo {
    pub name: String,
    pub quantity_of_information: f64,
    pub entropy: f64,
    pub information_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub label_entropy: f64,
    pub per_attribute: Vec<AttributeInfo>,
    /// true when only one class is present (all measures are zero)
    pub degenerate: bool,
}

/// Information statistics for every attribute. Numeric attributes are binned
/// by their distinct values, the same boundaries the tree's candidate split
/// midpoints separate.
pub fn attribute_stats(data: &FeatureMatrix) -> Result<AttributeStats, AlnidError> {
    if data.rows() == 0 {
        return Err(AlnidError::InsufficientData { rows: 0 });
    }
    let mut class_names: Vec<&str> = data.labels().iter().map(String::as_str).collect();
    class_names.sort_unstable();
    class_names.dedup();
    let class_count = class_names.len();
    let class_ids: Vec<usize> = data
        .labels()
        .iter()
        .map(|l| class_names.binary_search(&l.as_str()).expect("present"))
        .collect();

    let n = data.rows();
    let mut label_counts = vec![0usize; class_count];
    for &id in &class_ids {
        label_counts[id] += 1;
    }
    let label_entropy = tree::entropy(&label_counts, n);
    let degenerate = class_count <= 1;

    let mut per_attribute = Vec::with_capacity(data.cols());
    for (j, name) in data.column_names().iter().enumerate() {
        let conditional = if degenerate {
            0.0
        } else {
            let mut pairs: Vec<(f64, usize)> =
                (0..n).map(|i| (data.values()[(i, j)], class_ids[i])).collect();
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = 0.0;
            let mut start = 0;
            let mut bin_counts = vec![0usize; class_count];
            for i in 0..n {
                bin_counts[pairs[i].1] += 1;
                let boundary = i + 1 == n || pairs[i + 1].0 != pairs[i].0;
                if boundary {
                    let size = i + 1 - start;
                    acc += size as f64 / n as f64 * tree::entropy(&bin_counts, size);
                    bin_counts.iter_mut().for_each(|c| *c = 0);
                    start = i + 1;
                }
            }
            acc
        };
        let gain = (label_entropy - conditional).max(0.0);
        per_attribute.push(AttributeInfo {
            name: name.clone(),
            quantity_of_information: label_entropy,
            entropy: conditional,
            information_gain: gain,
        });
    }

    Ok(AttributeStats {
        label_entropy,
        per_attribute,
        degenerate,
    })
}

/// One comparison in a rule body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: usize,
    pub op: CompareOp,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Le,
    Gt,
}

impl Condition {
    pub fn holds(&self, row: &[f64]) -> bool {
        match self.op {
            CompareOp::Le => row[self.attribute] <= self.threshold,
            CompareOp::Gt => row[self.attribute] > self.threshold,
        }
    }
}

/// A conjunction of conditions ending in a class, one per tree leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub class: String,
    pub support: usize,
    /// how many conditions test each attribute, for the reweighting counts
    pub attribute_counts: Vec<usize>,
}

impl Rule {
    pub fn matches(&self, row: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(row))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub attribute_count: usize,
    pub tree_fingerprint: String,
}

impl RuleSet {
    /// The first (and for tree-derived rules, only) rule matching the row.
    pub fn matched_rule(&self, row: &[f64]) -> Option<&Rule> {
        self.rules.iter().find(|rule| rule.matches(row))
    }

    pub fn predict(&self, row: &[f64]) -> Option<&str> {
        self.matched_rule(row).map(|r| r.class.as_str())
    }
}

/// One rule per leaf: the conjunction of edge conditions on the root-to-leaf
/// path, in depth-first left-to-right order.
pub fn extract_rules(tree: &DecisionTree) -> RuleSet {
    let attribute_count = tree.attribute_names.len();
    let mut rules = Vec::with_capacity(tree.leaf_count());
    let mut path: Vec<Condition> = Vec::new();
    walk(tree, 0, &mut path, &mut rules, attribute_count);
    RuleSet {
        rules,
        attribute_count,
        tree_fingerprint: tree.fingerprint(),
    }
}

fn walk(
    tree: &DecisionTree,
    at: usize,
    path: &mut Vec<Condition>,
    rules: &mut Vec<Rule>,
    attribute_count: usize,
) {
    match &tree.nodes[at] {
        Node::Leaf { class, samples, .. } => {
            let mut attribute_counts = vec![0usize; attribute_count];
            for c in path.iter() {
                attribute_counts[c.attribute] += 1;
            }
            rules.push(Rule {
                conditions: path.clone(),
                class: class.clone(),
                support: *samples,
                attribute_counts,
            });
        }
        Node::Split {
            attribute,
            threshold,
            left,
            right,
            ..
        } => {
            path.push(Condition {
                attribute: *attribute,
                op: CompareOp::Le,
                threshold: *threshold,
            });
            walk(tree, *left, path, rules, attribute_count);
            path.pop();
            path.push(Condition {
                attribute: *attribute,
                op: CompareOp::Gt,
                threshold: *threshold,
            });
            walk(tree, *right, path, rules, attribute_count);
            path.pop();
        }
    }
}

/// Provenance of a reweighted matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProvenance {
    pub source: String,
    pub rows: usize,
    pub cols: usize,
    pub tree_fingerprint: String,
}

#[derive(Debug, Clone)]
pub struct WeightedInstances {
    pub matrix: FeatureMatrix,
    pub provenance: WeightProvenance,
}

/// Routes every row through the rule set and rescales each attribute by
/// `1 + count`, where `count` is how often the matched rule evaluates it.
/// `stats` must describe the same attribute schema; it is carried for
/// validation only and does not alter the weights.
pub fn reweight_instances(
    data: &FeatureMatrix,
    rules: &RuleSet,
    stats: &AttributeStats,
) -> Result<WeightedInstances, AlnidError> {
    let cols = data.cols();
    if rules.attribute_count != cols {
        return Err(AlnidError::SchemaMismatch {
            attribute: rules.attribute_count,
            cols,
        });
    }
    if stats.per_attribute.len() != cols {
        return Err(AlnidError::StatsMismatch {
            stats: stats.per_attribute.len(),
            cols,
        });
    }
    for rule in &rules.rules {
        for condition in &rule.conditions {
            if condition.attribute >= cols {
                return Err(AlnidError::SchemaMismatch {
                    attribute: condition.attribute,
                    cols,
                });
            }
        }
    }

    let n = data.rows();
    let weighted_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..cols).map(|j| data.values()[(i, j)]).collect();
            let rule = rules.matched_rule(&row);
            match rule {
                Some(rule) => row
                    .iter()
                    .zip(&rule.attribute_counts)
                    .map(|(v, &c)| v * (1.0 + c as f64))
                    .collect(),
                None => row, // only reachable for an empty rule set
            }
        })
        .collect();

    if rules.rules.is_empty() && n > 0 {
        return Err(AlnidError::NoMatchingRule);
    }

    let mut values = nalgebra::DMatrix::<f64>::zeros(n, cols);
    for (i, row) in weighted_rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            values[(i, j)] = *v;
        }
    }
    let matrix = FeatureMatrix::new(
        values,
        data.labels().to_vec(),
        data.column_names().to_vec(),
        data.source().clone(),
    )?;
    Ok(WeightedInstances {
        provenance: WeightProvenance {
            source: data.source().describe(),
            rows: n,
            cols,
            tree_fingerprint: rules.tree_fingerprint.clone(),
        },
        matrix,
    })
}

/// Convenience for the pipeline: stats + tree + rules from one training
/// matrix.
pub struct AttributeLearning {
    pub stats: AttributeStats,
    pub tree: DecisionTree,
    pub rules: RuleSet,
}

pub fn learn_attributes(
    training: &FeatureMatrix,
    params: &TreeParams,
) -> Result<AttributeLearning, AlnidError> {
    let stats = attribute_stats(training)?;
    let tree = induce_tree(training, params)?;
    let rules = extract_rules(&tree);
    Ok(AttributeLearning { stats, tree, rules })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdd::SourceTag;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn matrix_1d(values: &[f64], labels: &[&str]) -> FeatureMatrix {
        FeatureMatrix::new(
            DMatrix::from_column_slice(values.len(), 1, values),
            labels.iter().map(|s| s.to_string()).collect(),
            vec!["a0".to_string()],
            SourceTag::Combined("test".to_string()),
        )
        .unwrap()
    }

    fn matrix_2d(rows: &[[f64; 2]], labels: &[&str]) -> FeatureMatrix {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        FeatureMatrix::new(
            DMatrix::from_row_slice(rows.len(), 2, &flat),
            labels.iter().map(|s| s.to_string()).collect(),
            vec!["a0".to_string(), "a1".to_string()],
            SourceTag::Combined("test".to_string()),
        )
        .unwrap()
    }

    #[test]
    fn perfectly_separating_attribute_gains_one_bit() {
        let data = matrix_1d(&[0.0, 0.0, 1.0, 1.0], &["A", "A", "B", "B"]);
        let stats = attribute_stats(&data).unwrap();
        assert_abs_diff_eq!(stats.label_entropy, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            stats.per_attribute[0].information_gain,
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(stats.per_attribute[0].entropy, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn uninformative_attribute_gains_nothing() {
        let data = matrix_1d(&[0.0, 1.0, 0.0, 1.0], &["A", "A", "B", "B"]);
        let stats = attribute_stats(&data).unwrap();
        assert_abs_diff_eq!(
            stats.per_attribute[0].information_gain,
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_class_input_is_degenerate_with_zero_entropy() {
        let data = matrix_1d(&[0.2, 0.4, 0.9], &["A", "A", "A"]);
        let stats = attribute_stats(&data).unwrap();
        assert!(stats.degenerate);
        assert_eq!(stats.label_entropy, 0.0);
        assert_eq!(stats.per_attribute[0].information_gain, 0.0);
    }

    #[test]
    fn separable_data_splits_near_the_boundary() {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            values.push(i as f64 * 0.05); // 0.00 .. 0.45
            labels.push("A");
        }
        for i in 0..10 {
            values.push(0.55 + i as f64 * 0.04);
            labels.push("B");
        }
        let data = matrix_1d(&values, &labels);
        let tree = induce_tree(&data, &TreeParams::default()).unwrap();
        assert_eq!(tree.leaf_count(), 2);
        match &tree.nodes[0] {
            Node::Split { threshold, .. } => {
                assert_abs_diff_eq!(*threshold, 0.5, epsilon = 1e-12)
            }
            other => panic!("expected a split at the root, got {other:?}"),
        }
        assert_abs_diff_eq!(tree.accuracy(&data), 1.0, epsilon = 0.0);
    }

    #[test]
    fn pure_input_yields_a_single_leaf() {
        let data = matrix_1d(&[0.1, 0.5, 0.9], &["A", "A", "A"]);
        let tree = induce_tree(&data, &TreeParams::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[0.3]), "A");
    }

    #[test]
    fn empty_input_is_insufficient() {
        let data = matrix_1d(&[], &[]);
        assert!(matches!(
            induce_tree(&data, &TreeParams::default()),
            Err(AlnidError::InsufficientData { .. })
        ));
    }

    #[test]
    fn chosen_split_dominates_rejected_candidates() {
        let data = matrix_2d(
            &[
                [0.1, 0.9],
                [0.2, 0.1],
                [0.3, 0.8],
                [0.7, 0.2],
                [0.8, 0.7],
                [0.9, 0.3],
            ],
            &["A", "A", "A", "B", "B", "B"],
        );
        let class_ids = vec![0usize, 0, 0, 1, 1, 1];
        let rows: Vec<usize> = (0..6).collect();
        let best = tree::best_split(data.values(), &class_ids, 2, &rows, 1).unwrap();
        // exhaustive check: no candidate beats the returned one
        for attribute in 0..2 {
            let mut sorted: Vec<f64> = rows.iter().map(|&r| data.values()[(r, attribute)]).collect();
            sorted.sort_unstable_by(f64::total_cmp);
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    continue;
                }
                let threshold = (w[0] + w[1]) / 2.0;
                let ratio = gain_ratio_at(&data, &class_ids, attribute, threshold);
                assert!(
                    ratio <= best.gain_ratio + 1e-12,
                    "candidate a{attribute} <= {threshold} has ratio {ratio}, best {}",
                    best.gain_ratio
                );
            }
        }
        assert_eq!(best.attribute, 0);
    }

    fn gain_ratio_at(
        data: &FeatureMatrix,
        class_ids: &[usize],
        attribute: usize,
        threshold: f64,
    ) -> f64 {
        let n = data.rows();
        let mut left = [0usize; 2];
        let mut right = [0usize; 2];
        for i in 0..n {
            if data.values()[(i, attribute)] <= threshold {
                left[class_ids[i]] += 1;
            } else {
                right[class_ids[i]] += 1;
            }
        }
        let n_left: usize = left.iter().sum();
        let n_right: usize = right.iter().sum();
        if n_left == 0 || n_right == 0 {
            return 0.0;
        }
        let mut all = [0usize; 2];
        for i in 0..n {
            all[class_ids[i]] += 1;
        }
        let p_left = n_left as f64 / n as f64;
        let p_right = n_right as f64 / n as f64;
        let gain = tree::entropy(&all, n)
            - p_left * tree::entropy(&left, n_left)
            - p_right * tree::entropy(&right, n_right);
        let info = -(p_left * p_left.log2() + p_right * p_right.log2());
        gain / info
    }

    #[test]
    fn single_leaf_tree_gives_one_unconditioned_rule() {
        let data = matrix_1d(&[0.1, 0.2], &["A", "A"]);
        let tree = induce_tree(&data, &TreeParams::default()).unwrap();
        let rules = extract_rules(&tree);
        assert_eq!(rules.rules.len(), 1);
        assert!(rules.rules[0].conditions.is_empty());
        assert_eq!(rules.rules[0].class, "A");
    }

    #[test]
    fn balanced_depth_two_tree_gives_four_two_condition_rules() {
        // four quadrant classes force a split on each attribute
        let data = matrix_2d(
            &[
                [0.1, 0.1],
                [0.2, 0.2],
                [0.1, 0.9],
                [0.2, 0.8],
                [0.9, 0.1],
                [0.8, 0.2],
                [0.9, 0.9],
                [0.8, 0.8],
            ],
            &["A", "A", "B", "B", "C", "C", "D", "D"],
        );
        let tree = induce_tree(&data, &TreeParams::default()).unwrap();
        let rules = extract_rules(&tree);
        assert_eq!(rules.rules.len(), 4);
        for rule in &rules.rules {
            assert_eq!(rule.conditions.len(), 2);
        }
    }

    #[test]
    fn rules_replay_the_tree_on_every_training_row() {
        let data = matrix_2d(
            &[
                [0.05, 0.3],
                [0.15, 0.7],
                [0.35, 0.2],
                [0.45, 0.9],
                [0.65, 0.4],
                [0.75, 0.6],
                [0.95, 0.1],
                [0.85, 0.8],
            ],
            &["A", "A", "B", "B", "A", "C", "C", "C"],
        );
        let tree = induce_tree(
            &data,
            &TreeParams {
                max_depth: 6,
                min_leaf: 1,
            },
        )
        .unwrap();
        let rules = extract_rules(&tree);
        for i in 0..data.rows() {
            let row = [data.values()[(i, 0)], data.values()[(i, 1)]];
            assert_eq!(rules.predict(&row), Some(tree.predict(&row)));
        }
    }

    #[test]
    fn reweight_leaves_untested_attributes_alone_and_scales_tested_ones() {
        // three class bands on attribute 0 force two conditions on it along
        // the middle path; attribute 1 is never tested
        let data = matrix_2d(
            &[
                [0.1, 0.5],
                [0.2, 0.5],
                [0.5, 0.5],
                [0.55, 0.5],
                [0.9, 0.5],
                [0.95, 0.5],
            ],
            &["A", "A", "B", "B", "C", "C"],
        );
        let tree = induce_tree(&data, &TreeParams::default()).unwrap();
        let rules = extract_rules(&tree);
        let stats = attribute_stats(&data).unwrap();
        let weighted = reweight_instances(&data, &rules, &stats).unwrap();

        // find a row whose matched rule tests attribute 0 twice
        let mut saw_double = false;
        for i in 0..data.rows() {
            let row = [data.values()[(i, 0)], data.values()[(i, 1)]];
            let rule = rules.matched_rule(&row).unwrap();
            let c0 = rule.attribute_counts[0];
            let c1 = rule.attribute_counts[1];
            assert_eq!(c1, 0);
            assert_eq!(weighted.matrix.values()[(i, 1)], 0.5); // untested: unchanged
            assert_abs_diff_eq!(
                weighted.matrix.values()[(i, 0)],
                row[0] * (1.0 + c0 as f64),
                epsilon = 1e-15
            );
            if c0 == 2 {
                saw_double = true;
                assert_abs_diff_eq!(
                    weighted.matrix.values()[(i, 0)],
                    row[0] * 3.0,
                    epsilon = 1e-15
                );
            }
        }
        assert!(saw_double, "middle band should need two conditions");
    }

    #[test]
    fn reweight_keeps_zeros_and_is_deterministic() {
        let data = matrix_2d(
            &[[0.0, 0.3], [0.0, 0.9], [1.0, 0.2], [1.0, 0.8]],
            &["A", "A", "B", "B"],
        );
        let tree = induce_tree(&data, &TreeParams::default()).unwrap();
        let rules = extract_rules(&tree);
        let stats = attribute_stats(&data).unwrap();
        let first = reweight_instances(&data, &rules, &stats).unwrap();
        let second = reweight_instances(&data, &rules, &stats).unwrap();
        assert_eq!(first.matrix, second.matrix);
        assert_eq!(first.matrix.values()[(0, 0)], 0.0);
        assert_eq!(first.provenance.tree_fingerprint, tree.fingerprint());
    }

    #[test]
    fn reweight_rejects_mismatched_schema() {
        let data = matrix_1d(&[0.1, 0.9], &["A", "B"]);
        let wide = matrix_2d(&[[0.1, 0.2], [0.9, 0.8]], &["A", "B"]);
        let tree = induce_tree(&wide, &TreeParams { max_depth: 3, min_leaf: 1 }).unwrap();
        let rules = extract_rules(&tree);
        let stats = attribute_stats(&wide).unwrap();
        assert!(matches!(
            reweight_instances(&data, &rules, &stats),
            Err(AlnidError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn tree_json_round_trips() {
        let data = matrix_2d(
            &[[0.1, 0.3], [0.2, 0.9], [0.8, 0.1], [0.9, 0.7]],
            &["A", "A", "B", "B"],
        );
        let tree = induce_tree(&data, &TreeParams::default()).unwrap();
        let back = DecisionTree::from_json(&tree.to_json()).unwrap();
        assert_eq!(tree, back);
        assert_eq!(tree.fingerprint(), back.fingerprint());
    }
}
