//! Deterministic generator of KDD-format connection files for tests.
//!
//! Real NSL-KDD / KDD Cup 99 files are large downloads; tests instead build
//! synthetic files with the same 41-feature schema and label dialects at a
//! controllable per-class row count.
//!
//! The geometry is shaped for the subspace pipeline, whose left singular
//! vectors live in row-index space: what makes two matrices of one category
//! close is the alignment of their row-magnitude patterns, not the feature
//! columns themselves. Each category therefore modulates its volume columns
//! with a quadrature pair of sinusoids whose angle advances once per row of
//! the category's own output file (known-class rows share a per-category
//! counter; each held-out attack counts its own rows, since it lands in its
//! own file). Two column groups carry sine and cosine of the same angle, so
//! any contiguous window of rows spans the same two profile directions
//! regardless of offset or phase, while windows of different categories beat
//! at different rates and decorrelate.
//!
//! Generation is a pure function of its inputs: the same [`SynthSpec`]
//! always yields byte-identical files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Output dialect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthFormat {
    /// 42 fields, label suffixed with '.'
    Kdd99,
    /// 43 fields, trailing difficulty column
    NslKdd,
}

/// What to generate: format, RNG seed, and per-class row counts.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub format: SynthFormat,
    pub seed: u64,
    pub class_counts: Vec<(&'static str, usize)>,
}

/// Per-class instance counts of the NSL-KDD training corpus used as the
/// reference setup: eight attacks held out for zero-shot evaluation, the
/// rest (plus normal) forming the known classes.
pub const NSLKDD_TRAIN_COUNTS: [(&str, usize); 23] = [
    ("normal", 67_343),
    ("neptune", 41_214),
    ("satan", 3_632),
    ("ipsweep", 3_599),
    ("portsweep", 2_931),
    ("smurf", 2_646),
    ("nmap", 1_493),
    ("back", 956),
    ("teardrop", 892),
    ("warezclient", 890),
    ("imap", 648),
    ("pod", 201),
    ("guess_passwd", 53),
    ("buffer_overflow", 30),
    ("warezmaster", 20),
    ("land", 19),
    ("rootkit", 10),
    ("loadmodule", 9),
    ("ftp_write", 8),
    ("multihop", 8),
    ("phf", 4),
    ("perl", 3),
    ("spy", 2),
];

/// Desk-scale per-class counts for a KDD Cup 99 style file (the real 10%
/// subset holds ~494k rows; this keeps the same classes at test-friendly
/// size).
pub const KDD99_DESK_COUNTS: [(&str, usize); 23] = [
    ("normal", 6_000),
    ("smurf", 5_000),
    ("neptune", 4_000),
    ("satan", 500),
    ("ipsweep", 450),
    ("back", 400),
    ("portsweep", 350),
    ("teardrop", 300),
    ("nmap", 230),
    ("warezclient", 200),
    ("pod", 100),
    ("guess_passwd", 53),
    ("buffer_overflow", 30),
    ("land", 21),
    ("warezmaster", 20),
    ("imap", 12),
    ("rootkit", 10),
    ("loadmodule", 9),
    ("ftp_write", 8),
    ("multihop", 7),
    ("phf", 4),
    ("perl", 3),
    ("spy", 2),
];

impl SynthSpec {
    /// Full-size NSL-KDD style training file.
    pub fn nslkdd_train(seed: u64) -> Self {
        Self {
            format: SynthFormat::NslKdd,
            seed,
            class_counts: NSLKDD_TRAIN_COUNTS.to_vec(),
        }
    }

    /// Desk-scale KDD Cup 99 style file.
    pub fn kdd99_desk(seed: u64) -> Self {
        Self {
            format: SynthFormat::Kdd99,
            seed,
            class_counts: KDD99_DESK_COUNTS.to_vec(),
        }
    }

    /// Scales every class count down by `divisor`, keeping at least
    /// min(original, 3) rows so no class disappears.
    pub fn scaled_down(mut self, divisor: usize) -> Self {
        for (_, count) in &mut self.class_counts {
            let floor = (*count).min(3);
            *count = (*count / divisor).max(floor);
        }
        self
    }

    pub fn total_rows(&self) -> usize {
        self.class_counts.iter().map(|(_, c)| c).sum()
    }
}

// Selected-attribute profile positions (numeric attributes only, in
// selection order with protocol_type removed):
// 0 duration, 1 src_bytes, 2 dst_bytes, 3 urgent, 4 count, 5 srv_count,
// 6 same_srv_rate, 7 dst_host_count, 8 dst_host_srv_count,
// 9 dst_host_same_srv_rate, 10 dst_host_same_src_port_rate
const PROFILE_DIMS: usize = 11;

/// Column ceilings mapping profile fractions onto raw feature scales.
const COLUMN_MAX: [f64; PROFILE_DIMS] = [
    5_000.0,  // duration
    50_000.0, // src_bytes
    50_000.0, // dst_bytes
    3.0,      // urgent
    511.0,    // count
    511.0,    // srv_count
    1.0,      // same_srv_rate
    255.0,    // dst_host_count
    255.0,    // dst_host_srv_count
    1.0,      // dst_host_same_srv_rate
    1.0,      // dst_host_same_src_port_rate
];

/// Volume columns carrying the sine quadrature.
const GROUP_A: [usize; 4] = [0, 1, 4, 7]; // duration, src_bytes, count, dst_host_count
/// Volume columns carrying the cosine quadrature.
const GROUP_B: [usize; 3] = [2, 5, 8]; // dst_bytes, srv_count, dst_host_srv_count

const INTEGER_COLUMN: [bool; PROFILE_DIMS] = [
    true, true, true, true, true, true, false, true, true, false, false,
];

struct CategoryProfile {
    base: [f64; PROFILE_DIMS],
    /// quadrature beat rate per category-file row
    rate: f64,
    /// half-width (octaves) of the common-mode magnitude jitter
    magnitude_spread: f64,
    /// additive noise half-width on the rate-style columns
    rate_noise: f64,
    protocol: &'static str,
    service: &'static str,
    flag: &'static str,
}

fn category_profile(category: &str) -> CategoryProfile {
    match category {
        "DoS" => CategoryProfile {
            base: [0.05, 0.30, 0.25, 0.0, 0.85, 0.80, 0.95, 0.85, 0.80, 0.95, 0.60],
            rate: 0.35,
            magnitude_spread: 0.35,
            rate_noise: 0.01,
            protocol: "icmp",
            service: "ecr_i",
            flag: "SF",
        },
        "Normal" => CategoryProfile {
            base: [0.08, 0.45, 0.40, 0.0, 0.18, 0.15, 0.80, 0.45, 0.70, 0.74, 0.10],
            rate: 0.015,
            magnitude_spread: 1.7,
            rate_noise: 0.05,
            protocol: "tcp",
            service: "http",
            flag: "SF",
        },
        "Probe" => CategoryProfile {
            base: [0.06, 0.12, 0.10, 0.0, 0.45, 0.15, 0.15, 0.90, 0.20, 0.10, 0.85],
            rate: 0.045,
            magnitude_spread: 0.35,
            rate_noise: 0.01,
            protocol: "tcp",
            service: "private",
            flag: "REJ",
        },
        "R2L" => CategoryProfile {
            base: [0.40, 0.18, 0.62, 0.0, 0.14, 0.11, 0.80, 0.42, 0.66, 0.74, 0.10],
            rate: 0.11,
            magnitude_spread: 1.7,
            rate_noise: 0.05,
            protocol: "tcp",
            service: "ftp",
            flag: "SF",
        },
        "U2R" => CategoryProfile {
            base: [0.45, 0.14, 0.55, 0.0, 0.40, 0.05, 0.80, 0.15, 0.30, 0.74, 0.10],
            rate: 0.21,
            magnitude_spread: 1.5,
            rate_noise: 0.05,
            protocol: "tcp",
            service: "telnet",
            flag: "SF",
        },
        other => panic!("unknown category {other}"),
    }
}

fn category_of(label: &str) -> &'static str {
    match label {
        "normal" => "Normal",
        "back" | "land" | "neptune" | "pod" | "smurf" | "teardrop" => "DoS",
        "ipsweep" | "nmap" | "portsweep" | "satan" => "Probe",
        "ftp_write" | "guess_passwd" | "imap" | "multihop" | "phf" | "spy" | "warezclient"
        | "warezmaster" => "R2L",
        "buffer_overflow" | "loadmodule" | "perl" | "rootkit" => "U2R",
        other => panic!("unknown label {other}"),
    }
}

fn is_zero_shot(label: &str) -> bool {
    matches!(
        label,
        "teardrop" | "land" | "ipsweep" | "nmap" | "guess_passwd" | "imap" | "rootkit" | "perl"
    )
}

/// Stable per-(attack, column) modulation in [0.85, 1.15].
fn attack_modulation(label: &str, column: usize) -> f64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h = (h ^ u64::from(*b)).wrapping_mul(0x1_0000_01b3);
    }
    h = (h ^ column as u64).wrapping_mul(0x1_0000_01b3);
    let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
    0.85 + 0.30 * unit
}

fn attack_phase(label: &str) -> f64 {
    let mut h: u64 = 0x8422_2325_cbf2_9ce4;
    for b in label.as_bytes() {
        h = (h ^ u64::from(*b)).wrapping_mul(0x1_0000_01b3);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU
}

/// Instance-level knobs; the defaults reproduce the tuned desk-scale
/// geometry. Per-category magnitude spread and rate noise come from the
/// category profiles and scale with the factors here.
#[derive(Debug, Clone)]
pub struct NoiseProfile {
    /// quadrature amplitude on the volume columns
    pub amplitude: f64,
    /// additive uniform noise half-width on the 0-1 profile scale
    pub noise: f64,
    /// multiplier on the per-category magnitude jitter
    pub magnitude_scale: f64,
    /// multiplier on the per-category rate-column noise
    pub rate_noise_scale: f64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self {
            amplitude: 0.8,
            noise: 0.01,
            magnitude_scale: 1.0,
            rate_noise_scale: 1.0,
        }
    }
}

struct ClassPlan {
    label: &'static str,
    count: usize,
    phase: f64,
}

fn plan_classes(spec: &SynthSpec) -> Vec<ClassPlan> {
    spec.class_counts
        .iter()
        .map(|&(label, count)| ClassPlan {
            label,
            count,
            phase: attack_phase(label),
        })
        .collect()
}

fn format_rate(v: f64) -> String {
    format!("{:.2}", v)
}

fn generate_line(
    plan: &ClassPlan,
    theta: f64,
    format: SynthFormat,
    noise: &NoiseProfile,
    rng: &mut ChaCha20Rng,
) -> String {
    let label = plan.label;
    let category = category_of(label);
    let profile = category_profile(category);

    let (sin_mod, cos_mod) = (
        1.0 + noise.amplitude * theta.sin(),
        1.0 + noise.amplitude * theta.cos(),
    );
    // common-mode magnitude jitter, shared by every volume column; a thin
    // high-side tail puts some rows on radii where no class is dense
    let spread = profile.magnitude_spread * noise.magnitude_scale;
    let mut magnitude = rng.random_range(-spread..=spread).exp2();
    if spread > 1.0 && rng.random_range(0.0..1.0) < 0.18 {
        magnitude *= (spread * 1.2).exp2();
    }
    let rate_noise = profile.rate_noise * noise.rate_noise_scale;

    let mut selected = [0.0f64; PROFILE_DIMS];
    for (j, slot) in selected.iter_mut().enumerate() {
        let mut v = profile.base[j] * attack_modulation(label, j);
        if GROUP_A.contains(&j) {
            v *= sin_mod * magnitude;
            v += rng.random_range(-noise.noise..=noise.noise);
        } else if GROUP_B.contains(&j) {
            v *= cos_mod * magnitude;
            v += rng.random_range(-noise.noise..=noise.noise);
        } else {
            v += rng.random_range(-rate_noise..=rate_noise);
        }
        *slot = v.clamp(0.0, 1.0);
    }
    let raw = |j: usize| -> f64 {
        let v = selected[j] * COLUMN_MAX[j];
        if INTEGER_COLUMN[j] {
            v.round()
        } else {
            (v * 100.0).round() / 100.0
        }
    };

    // class markers for a few unselected features
    let land = if label == "land" { 1 } else { 0 };
    let wrong_fragment = if matches!(label, "teardrop" | "pod") {
        rng.random_range(1..=3)
    } else {
        0
    };
    let hot = if matches!(label, "guess_passwd" | "ftp_write" | "multihop") {
        rng.random_range(1..=10)
    } else {
        0
    };
    let num_failed_logins = if label == "guess_passwd" {
        rng.random_range(1..=5)
    } else {
        0
    };
    let logged_in = if matches!(category, "Normal" | "R2L" | "U2R") { 1 } else { 0 };
    let root_shell = if category == "U2R" { 1 } else { 0 };
    let num_root = if category == "U2R" {
        rng.random_range(1..=8)
    } else {
        0
    };
    let serror_rate = if matches!(label, "neptune" | "land") {
        rng.random_range(0.85..=1.0)
    } else {
        rng.random_range(0.0..=0.05)
    };
    let rerror_rate = if category == "Probe" {
        rng.random_range(0.6..=1.0)
    } else {
        rng.random_range(0.0..=0.05)
    };
    let diff_srv_rate: f64 = if category == "Probe" {
        rng.random_range(0.5..=1.0)
    } else {
        rng.random_range(0.0..=0.1)
    };

    let mut fields: Vec<String> = Vec::with_capacity(43);
    fields.push(format!("{}", raw(0) as i64)); // 1 duration
    fields.push(profile.protocol.to_string()); // 2 protocol_type
    fields.push(profile.service.to_string()); // 3 service
    fields.push(profile.flag.to_string()); // 4 flag
    fields.push(format!("{}", raw(1) as i64)); // 5 src_bytes
    fields.push(format!("{}", raw(2) as i64)); // 6 dst_bytes
    fields.push(land.to_string()); // 7 land
    fields.push(wrong_fragment.to_string()); // 8 wrong_fragment
    fields.push(format!("{}", raw(3) as i64)); // 9 urgent
    fields.push(hot.to_string()); // 10 hot
    fields.push(num_failed_logins.to_string()); // 11 num_failed_logins
    fields.push(logged_in.to_string()); // 12 logged_in
    fields.push("0".to_string()); // 13 num_compromised
    fields.push(root_shell.to_string()); // 14 root_shell
    fields.push("0".to_string()); // 15 su_attempted
    fields.push(num_root.to_string()); // 16 num_root
    fields.push("0".to_string()); // 17 num_file_creations
    fields.push("0".to_string()); // 18 num_shells
    fields.push("0".to_string()); // 19 num_access_files
    fields.push("0".to_string()); // 20 num_outbound_cmds
    fields.push("0".to_string()); // 21 is_host_login
    fields.push("0".to_string()); // 22 is_guest_login
    fields.push(format!("{}", raw(4) as i64)); // 23 count
    fields.push(format!("{}", raw(5) as i64)); // 24 srv_count
    fields.push(format_rate(serror_rate)); // 25 serror_rate
    fields.push(format_rate(serror_rate * 0.9)); // 26 srv_serror_rate
    fields.push(format_rate(rerror_rate)); // 27 rerror_rate
    fields.push(format_rate(rerror_rate * 0.9)); // 28 srv_rerror_rate
    fields.push(format_rate(selected[6])); // 29 same_srv_rate
    fields.push(format_rate(diff_srv_rate)); // 30 diff_srv_rate
    fields.push(format_rate(rng.random_range(0.0..=0.3))); // 31 srv_diff_host_rate
    fields.push(format!("{}", raw(7) as i64)); // 32 dst_host_count
    fields.push(format!("{}", raw(8) as i64)); // 33 dst_host_srv_count
    fields.push(format_rate(selected[9])); // 34 dst_host_same_srv_rate
    fields.push(format_rate(diff_srv_rate * 0.5)); // 35 dst_host_diff_srv_rate
    fields.push(format_rate(selected[10])); // 36 dst_host_same_src_port_rate
    fields.push(format_rate(rng.random_range(0.0..=0.2))); // 37 dst_host_srv_diff_host_rate
    fields.push(format_rate(serror_rate * 0.95)); // 38 dst_host_serror_rate
    fields.push(format_rate(serror_rate * 0.85)); // 39 dst_host_srv_serror_rate
    fields.push(format_rate(rerror_rate * 0.95)); // 40 dst_host_rerror_rate
    fields.push(format_rate(rerror_rate * 0.85)); // 41 dst_host_srv_rerror_rate

    match format {
        SynthFormat::Kdd99 => {
            fields.push(format!("{label}."));
        }
        SynthFormat::NslKdd => {
            fields.push(label.to_string());
            fields.push(rng.random_range(1..=21u32).to_string());
        }
    }
    fields.join(",")
}

/// Generates all lines of the file. Classes are interleaved evenly (each
/// class spread uniformly over the file), which keeps every attack's share
/// of its category file steady so the per-category beat survives the split.
pub fn generate_lines(spec: &SynthSpec) -> Vec<String> {
    generate_lines_with(spec, &NoiseProfile::default())
}

pub fn generate_lines_with(spec: &SynthSpec, noise: &NoiseProfile) -> Vec<String> {
    let plans = plan_classes(spec);

    // merge by ordinal fraction: instance i of a class with n rows sits at
    // key (i + 1/2) / n, so every class is spread evenly over the file
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(spec.total_rows());
    for (class_index, plan) in plans.iter().enumerate() {
        for i in 0..plan.count {
            let key = (i as f64 + 0.5) / plan.count as f64;
            keyed.push((key, class_index, i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    // one RNG stream per class keeps content independent of interleave order
    let mut rngs: Vec<ChaCha20Rng> = plans
        .iter()
        .map(|plan| {
            let mut class_seed = spec.seed;
            for b in plan.label.as_bytes() {
                class_seed = class_seed
                    .wrapping_mul(0x100_0000_01b3)
                    .wrapping_add(u64::from(*b));
            }
            ChaCha20Rng::seed_from_u64(class_seed)
        })
        .collect();

    // quadrature angles advance per row of the file each instance will end
    // up in: the category file for known classes, the attack's own file for
    // held-out ones
    let mut category_rows: BTreeMap<&str, usize> = BTreeMap::new();
    keyed
        .into_iter()
        .map(|(_, class_index, ordinal)| {
            let plan = &plans[class_index];
            let category = category_of(plan.label);
            let rate = category_profile(category).rate;
            let row_index = if is_zero_shot(plan.label) {
                ordinal
            } else {
                let counter = category_rows.entry(category).or_insert(0);
                let current = *counter;
                *counter += 1;
                current
            };
            let theta = std::f64::consts::TAU * rate * row_index as f64 + plan.phase;
            generate_line(plan, theta, spec.format, noise, &mut rngs[class_index])
        })
        .collect()
}

/// Writes the generated file to `path`.
pub fn write_file(path: &Path, spec: &SynthSpec) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in generate_lines(spec) {
        writeln!(file, "{line}")?;
    }
    Ok(())
}
