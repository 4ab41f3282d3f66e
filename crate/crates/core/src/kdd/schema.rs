//! The 41-feature connection schema shared by KDD Cup 99 and NSL-KDD, plus
//! the attack-name taxonomy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Features per connection record, before the label.
pub const FEATURE_COUNT: usize = 41;

/// Feature names in file order (1-based positions 1..=41 in the dataset
/// documentation).
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

/// 1-based positions of the string-valued features (protocol_type, service,
/// flag).
pub const CATEGORICAL_FEATURES: [usize; 3] = [2, 3, 4];

/// Default attribute selection, 1-based positions into the 41-feature list:
/// duration, protocol_type, src_bytes, dst_bytes, urgent, count, srv_count,
/// same_srv_rate, dst_host_count, dst_host_srv_count, dst_host_same_srv_rate,
/// dst_host_same_src_port_rate.
pub const DEFAULT_SELECTED_ATTRIBUTES: [usize; 12] = [1, 2, 5, 6, 9, 23, 24, 29, 32, 33, 34, 36];

pub fn feature_name(index_1based: usize) -> Option<&'static str> {
    if (1..=FEATURE_COUNT).contains(&index_1based) {
        Some(FEATURE_NAMES[index_1based - 1])
    } else {
        None
    }
}

pub fn is_categorical(index_1based: usize) -> bool {
    CATEGORICAL_FEATURES.contains(&index_1based)
}

/// The five traffic categories. The declaration order is the tie-break order
/// used everywhere a deterministic choice between categories is needed, and
/// coincides with ascending name order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Category {
    DoS,
    Normal,
    Probe,
    R2L,
    U2R,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::DoS,
        Category::Normal,
        Category::Probe,
        Category::R2L,
        Category::U2R,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::DoS => "DoS",
            Category::Normal => "Normal",
            Category::Probe => "Probe",
            Category::R2L => "R2L",
            Category::U2R => "U2R",
        }
    }

    pub fn parse(name: &str) -> Option<Category> {
        match name {
            "DoS" => Some(Category::DoS),
            "Normal" => Some(Category::Normal),
            "Probe" => Some(Category::Probe),
            "R2L" => Some(Category::R2L),
            "U2R" => Some(Category::U2R),
            _ => None,
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The 23 training classes and their categories, with 8 attacks held out as
/// zero-shot classes (two per attack category).
const CLASS_TABLE: [(&str, Category, bool); 23] = [
    // (label, category, held out as zero-shot)
    ("normal", Category::Normal, false),
    ("back", Category::DoS, false),
    ("land", Category::DoS, true),
    ("neptune", Category::DoS, false),
    ("pod", Category::DoS, false),
    ("smurf", Category::DoS, false),
    ("teardrop", Category::DoS, true),
    ("ipsweep", Category::Probe, true),
    ("nmap", Category::Probe, true),
    ("portsweep", Category::Probe, false),
    ("satan", Category::Probe, false),
    ("ftp_write", Category::R2L, false),
    ("guess_passwd", Category::R2L, true),
    ("imap", Category::R2L, true),
    ("multihop", Category::R2L, false),
    ("phf", Category::R2L, false),
    ("spy", Category::R2L, false),
    ("warezclient", Category::R2L, false),
    ("warezmaster", Category::R2L, false),
    ("buffer_overflow", Category::U2R, false),
    ("loadmodule", Category::U2R, false),
    ("perl", Category::U2R, true),
    ("rootkit", Category::U2R, true),
];

/// Maps attack names to categories and carries the known-class /
/// zero-shot-class partition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackTaxonomy {
    category_of: BTreeMap<String, Category>,
    zsc_set: BTreeSet<String>,
}

impl AttackTaxonomy {
    /// The standard 23-class taxonomy with the 8 held-out attacks: teardrop,
    /// land, ipsweep, nmap, guess_passwd, imap, rootkit, perl.
    pub fn standard() -> Self {
        let mut category_of = BTreeMap::new();
        let mut zsc_set = BTreeSet::new();
        for (label, category, zero_shot) in CLASS_TABLE {
            category_of.insert(label.to_string(), category);
            if zero_shot {
                zsc_set.insert(label.to_string());
            }
        }
        Self {
            category_of,
            zsc_set,
        }
    }

    pub fn category_of(&self, label: &str) -> Option<Category> {
        self.category_of.get(label).copied()
    }

    pub fn is_zero_shot(&self, label: &str) -> bool {
        self.zsc_set.contains(label)
    }

    /// Zero-shot attack names in deterministic (sorted) order.
    pub fn zsc_names(&self) -> impl Iterator<Item = &str> {
        self.zsc_set.iter().map(String::as_str)
    }

    /// Known-class labels (including "normal") in sorted order.
    pub fn kc_names(&self) -> impl Iterator<Item = &str> {
        self.category_of
            .keys()
            .map(String::as_str)
            .filter(|label| !self.zsc_set.contains(*label))
    }

    pub fn class_count(&self) -> usize {
        self.category_of.len()
    }
}
