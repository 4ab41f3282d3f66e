//! Report rendering: distance tables (rows = zero-shot classes, columns =
//! categories) and the K-NN model comparison, as CSV, markdown, or JSON.
//!
//! CSV and markdown print four decimal places with '.' as the decimal mark;
//! markdown bolds the winning (argmin) cell per row. Absent categories (not
//! enough rows for one batch, or all batches failed) render as "-". JSON
//! carries the full per-batch detail and parses back to the same values.

use anyhow::Result;
use serde::{Deserialize, Serialize};

use grasnid_core::inid::DistanceReport;
use grasnid_core::kdd::Category;
use grasnid_core::zsl::ModelComparison;

fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

/// The distance table plus assignment column, one row per zero-shot class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceTable {
    pub engine: String,
    pub cutoff_percent: f64,
    pub reports: Vec<DistanceReport>,
}

impl DistanceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("zsc,assigned");
        for category in Category::ALL {
            out.push_str(&format!(",{category}"));
        }
        out.push('\n');
        for report in &self.reports {
            out.push_str(&report.zsc_name);
            out.push(',');
            out.push_str(
                &report
                    .assignment
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| "-".to_string()),
            );
            for category in Category::ALL {
                out.push(',');
                out.push_str(&cell(report.mean_for(category)));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| ZSC | Assigned |");
        for category in Category::ALL {
            out.push_str(&format!(" {category} |"));
        }
        out.push('\n');
        out.push_str("|---|---|");
        for _ in Category::ALL {
            out.push_str("---|");
        }
        out.push('\n');
        for report in &self.reports {
            out.push_str(&format!("| {} |", report.zsc_name));
            out.push_str(&format!(
                " {} |",
                report
                    .assignment
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| "-".to_string())
            ));
            for category in Category::ALL {
                let text = cell(report.mean_for(category));
                if report.assignment == Some(category) && report.mean_for(category).is_some() {
                    out.push_str(&format!(" **{text}** |"));
                } else {
                    out.push_str(&format!(" {text} |"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The side-by-side K-NN metrics table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub k: usize,
    pub seed: u64,
    pub comparison: ModelComparison,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let g = &self.comparison.grassmann;
        let f = &self.comparison.frobenius;
        let mut out = String::from("metric,grassmannian_distance,frobenius_distance\n");
        out.push_str(&format!(
            "classification_accuracy,{:.4},{:.4}\n",
            g.classification_accuracy, f.classification_accuracy
        ));
        out.push_str(&format!(
            "logarithmic_loss,{:.4},{:.4}\n",
            g.log_loss, f.log_loss
        ));
        out.push_str(&format!(
            "auc,{},{}\n",
            cell(g.auc),
            cell(f.auc)
        ));
        out
    }

    pub fn to_markdown(&self) -> String {
        let g = &self.comparison.grassmann;
        let f = &self.comparison.frobenius;
        let mut out = String::new();
        out.push_str(&format!(
            "| Metric (K = {}) | Grassmannian Distance | Frobenius Distance |\n",
            self.k
        ));
        out.push_str("|---|---|---|\n");
        let row = |name: &str, a: Option<f64>, b: Option<f64>| -> String {
            let (ta, tb) = (cell(a), cell(b));
            match (a, b) {
                (Some(x), Some(y)) if x > y => format!("| {name} | **{ta}** | {tb} |\n"),
                (Some(x), Some(y)) if y > x => format!("| {name} | {ta} | **{tb}** |\n"),
                _ => format!("| {name} | {ta} | {tb} |\n"),
            }
        };
        out.push_str(&row(
            "Classification Accuracy",
            Some(g.classification_accuracy),
            Some(f.classification_accuracy),
        ));
        // lower loss is better: bold the smaller one
        let (gl, fl) = (g.log_loss, f.log_loss);
        if gl < fl {
            out.push_str(&format!(
                "| Logarithmic Loss | **{gl:.4}** | {fl:.4} |\n"
            ));
        } else if fl < gl {
            out.push_str(&format!(
                "| Logarithmic Loss | {gl:.4} | **{fl:.4}** |\n"
            ));
        } else {
            out.push_str(&format!("| Logarithmic Loss | {gl:.4} | {fl:.4} |\n"));
        }
        out.push_str(&row("AUC", g.auc, f.auc));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Metrics table for a single distance kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsTable {
    pub k: usize,
    pub seed: u64,
    pub metrics: grasnid_core::zsl::EvalMetrics,
}

impl MetricsTable {
    pub fn to_csv(&self) -> String {
        let m = &self.metrics;
        let mut out = format!("metric,{}_distance\n", m.distance.as_str());
        out.push_str(&format!(
            "classification_accuracy,{:.4}\n",
            m.classification_accuracy
        ));
        out.push_str(&format!("logarithmic_loss,{:.4}\n", m.log_loss));
        out.push_str(&format!("auc,{}\n", cell(m.auc)));
        out
    }

    pub fn to_markdown(&self) -> String {
        let m = &self.metrics;
        let mut out = format!(
            "| Metric (K = {}) | {} distance |\n|---|---|\n",
            self.k,
            m.distance.as_str()
        );
        out.push_str(&format!(
            "| Classification Accuracy | {:.4} |\n",
            m.classification_accuracy
        ));
        out.push_str(&format!("| Logarithmic Loss | {:.4} |\n", m.log_loss));
        out.push_str(&format!("| AUC | {} |\n", cell(m.auc)));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
