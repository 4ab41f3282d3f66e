//! Greedy top-down decision-tree induction maximizing gain ratio, with
//! numeric thresholds at midpoints of consecutive distinct values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kdd::FeatureMatrix;

use super::AlnidError;

/// Induction hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_leaf: 2,
        }
    }
}

/// Tree node in an arena; the root sits at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        attribute: usize,
        threshold: f64,
        samples: usize,
        /// child index for `value <= threshold`
        left: usize,
        /// child index for `value > threshold`
        right: usize,
    },
    Leaf {
        class: String,
        samples: usize,
        class_counts: BTreeMap<String, usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub attribute_names: Vec<String>,
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index of the leaf a row lands in.
    pub fn route(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    attribute,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if row[*attribute] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> &str {
        match &self.nodes[self.route(row)] {
            Node::Leaf { class, .. } => class,
            Node::Split { .. } => unreachable!("route ends at a leaf"),
        }
    }

    /// Fraction of rows whose prediction matches their label.
    pub fn accuracy(&self, data: &FeatureMatrix) -> f64 {
        if data.rows() == 0 {
            return 0.0;
        }
        let mut hits = 0usize;
        let mut row = vec![0.0f64; data.cols()];
        for i in 0..data.rows() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = data.values()[(i, j)];
            }
            if self.predict(&row) == data.labels()[i] {
                hits += 1;
            }
        }
        hits as f64 / data.rows() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AlnidError> {
        serde_json::from_str(text).map_err(|e| AlnidError::BadTreeDocument(e.to_string()))
    }

    /// Stable FNV-1a fingerprint of the serialized tree, for provenance.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("tree serializes");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in json.as_bytes() {
            hash ^= u64::from(*byte);
            hash = hash.wrapping_mul(0x1_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

/// Entropy in bits of a class-count histogram.
pub(super) fn entropy(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) struct SplitCandidate {
    pub attribute: usize,
    pub threshold: f64,
    pub gain: f64,
    pub gain_ratio: f64,
}

/// Best admissible split of `rows` by gain ratio; ties resolve to the lowest
/// attribute index, then the lowest threshold (guaranteed by scan order).
pub(super) fn best_split(
    values: &nalgebra::DMatrix<f64>,
    class_ids: &[usize],
    class_count: usize,
    rows: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let n = rows.len();
    let mut node_counts = vec![0usize; class_count];
    for &r in rows {
        node_counts[class_ids[r]] += 1;
    }
    let node_entropy = entropy(&node_counts, n);
    if node_entropy == 0.0 {
        return None;
    }

    let mut best: Option<SplitCandidate> = None;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
    for attribute in 0..values.ncols() {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (values[(r, attribute)], class_ids[r])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_counts = vec![0usize; class_count];
        let mut right_counts = node_counts.clone();
        for i in 0..n - 1 {
            let (value, class) = pairs[i];
            left_counts[class] += 1;
            right_counts[class] -= 1;
            if value == pairs[i + 1].0 {
                continue; // not a boundary between distinct values
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let p_left = n_left as f64 / n as f64;
            let p_right = n_right as f64 / n as f64;
            let children = p_left * entropy(&left_counts, n_left)
                + p_right * entropy(&right_counts, n_right);
            let gain = node_entropy - children;
            if gain <= 1e-12 {
                continue;
            }
            let split_info = -(p_left * p_left.log2() + p_right * p_right.log2());
            let gain_ratio = gain / split_info;
            let better = match &best {
                None => true,
                Some(b) => gain_ratio > b.gain_ratio,
            };
            if better {
                best = Some(SplitCandidate {
                    attribute,
                    threshold: (value + pairs[i + 1].0) / 2.0,
                    gain,
                    gain_ratio,
                });
            }
        }
    }
    best
}

/// Grows a tree on labeled data. Recursion stops at purity, `max_depth`,
/// `min_leaf`, or when no split has positive gain.
pub fn induce_tree(data: &FeatureMatrix, params: &TreeParams) -> Result<DecisionTree, AlnidError> {
    if data.rows() == 0 {
        return Err(AlnidError::InsufficientData { rows: 0 });
    }
    if params.min_leaf == 0 || params.min_leaf > data.rows() {
        return Err(AlnidError::InsufficientData { rows: data.rows() });
    }

    let mut class_names: Vec<String> = data.labels().to_vec();
    class_names.sort_unstable();
    class_names.dedup();
    let class_index: BTreeMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();
    let class_ids: Vec<usize> = data
        .labels()
        .iter()
        .map(|label| class_index[label.as_str()])
        .collect();

    let mut tree = DecisionTree {
        attribute_names: data.column_names().to_vec(),
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..data.rows()).collect();
    grow(
        &mut tree,
        data.values(),
        &class_ids,
        &class_names,
        rows,
        0,
        params,
    );
    Ok(tree)
}

fn grow(
    tree: &mut DecisionTree,
    values: &nalgebra::DMatrix<f64>,
    class_ids: &[usize],
    class_names: &[String],
    rows: Vec<usize>,
    depth: usize,
    params: &TreeParams,
) -> usize {
    let class_count = class_names.len();
    let mut counts = vec![0usize; class_count];
    for &r in &rows {
        counts[class_ids[r]] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;

    let candidate = if pure || depth >= params.max_depth || rows.len() < 2 * params.min_leaf {
        None
    } else {
        best_split(values, class_ids, class_count, &rows, params.min_leaf)
    };

    match candidate {
        None => {
            // majority class; count ties resolve to the smallest class name
            let majority = counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("at least one class");
            let class_counts: BTreeMap<String, usize> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (class_names[i].clone(), c))
                .collect();
            let id = tree.nodes.len();
            tree.nodes.push(Node::Leaf {
                class: class_names[majority].clone(),
                samples: rows.len(),
                class_counts,
            });
            id
        }
        Some(split) => {
            let id = tree.nodes.len();
            tree.nodes.push(Node::Split {
                attribute: split.attribute,
                threshold: split.threshold,
                samples: rows.len(),
                left: usize::MAX,
                right: usize::MAX,
            });
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .into_iter()
                .partition(|&r| values[(r, split.attribute)] <= split.threshold);
            let left = grow(
                tree,
                values,
                class_ids,
                class_names,
                left_rows,
                depth + 1,
                params,
            );
            let right = grow(
                tree,
                values,
                class_ids,
                class_names,
                right_rows,
                depth + 1,
                params,
            );
            match &mut tree.nodes[id] {
                Node::Split {
                    left: l, right: r, ..
                } => {
                    *l = left;
                    *r = right;
                }
                Node::Leaf { .. } => unreachable!(),
            }
            id
        }
    }
}
