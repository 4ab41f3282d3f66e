//! Inference over the Grassmannian: tile the known-class matrix into batches
//! the size of the zero-shot matrix, map the zero-shot matrix and every batch
//! onto the manifold through their leading left singular vectors, and rank
//! categories by the mean geodesic distance over batches.
//!
//! Both subspaces of a pair share one column count: each side proposes the
//! smallest rank holding the cutoff share of its spectral energy, the larger
//! proposal wins, and the result is capped by both numerical ranks. Batches
//! whose distance is undefined (cut locus) or degenerate (zero spectrum) are
//! excluded from the mean and tallied; a category fails only when every batch
//! does. Per-batch distances are accumulated in batch order with compensated
//! summation, so reports are bit-identical across runs and thread counts.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grassmann::{
    build_projector, grassmann_distance, principal_angle_distance, select_rank, thin_svd,
    DistanceEngine, GrassmannError, OrthonormalFrame, IDEMPOTENCY_TOL, SYMMETRY_TOL, TRACE_TOL,
};
use crate::kdd::{Category, FeatureMatrix};

#[derive(Debug, Error)]
pub enum InidError {
    #[error("batch size must be at least 2 rows, got {rows}")]
    InvalidBatchSize { rows: usize },
    #[error("no batches: the known-class matrix has {kc_rows} rows, fewer than the {zsc_rows} zero-shot rows")]
    NoBatches { zsc_rows: usize, kc_rows: usize },
    #[error("all {batches} batches failed; no distance is defined")]
    AllBatchesFailed { batches: usize },
    #[error("column schema mismatch: zero-shot matrix has {zsc:?}, known-class matrix has {kc:?}")]
    SchemaMismatch { zsc: Vec<String>, kc: Vec<String> },
    #[error("no category produced a distance")]
    NoCategoryComputed,
    #[error(transparent)]
    Grassmann(#[from] GrassmannError),
}

/// Contiguous, non-overlapping tiling of the known-class prefix into batches
/// of exactly the zero-shot row count; leftover rows are unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub batch_count: usize,
    pub leftover_rows: usize,
}

impl BatchPlan {
    /// Row range [start, stop) of batch `index`.
    pub fn range(&self, index: usize) -> (usize, usize) {
        debug_assert!(index < self.batch_count);
        let start = index * self.batch_size;
        (start, start + self.batch_size)
    }
}

pub fn plan_batches(zsc_rows: usize, kc_rows: usize) -> Result<BatchPlan, InidError> {
    if zsc_rows < 2 {
        return Err(InidError::InvalidBatchSize { rows: zsc_rows });
    }
    let batch_count = kc_rows / zsc_rows;
    if batch_count == 0 {
        return Err(InidError::NoBatches { zsc_rows, kc_rows });
    }
    Ok(BatchPlan {
        batch_size: zsc_rows,
        batch_count,
        leftover_rows: kc_rows - batch_count * zsc_rows,
    })
}

/// Inference knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InidConfig {
    /// Spectral-energy cutoff for rank selection, in (0, 100].
    pub cutoff_percent: f64,
    pub engine: DistanceEngine,
}

impl Default for InidConfig {
    fn default() -> Self {
        Self {
            cutoff_percent: 95.0,
            engine: DistanceEngine::DenseLog,
        }
    }
}

/// Why a batch was excluded from the mean.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchFailure {
    CutLocus,
    DegenerateSpectrum,
}

/// Outcome of one batch pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub index: usize,
    /// common subspace rank of the pair; absent when the batch spectrum was
    /// degenerate before a rank could be fixed
    pub rank: Option<usize>,
    pub distance: Option<f64>,
    pub failure: Option<BatchFailure>,
}

/// Projector-invariant bookkeeping. With the dense engine every constructed
/// point is validated; with the angle engine the first batch of each pair is
/// checked in release builds and every batch when debug assertions are on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ProjectorAudit {
    pub checked: usize,
    pub violations: usize,
    pub max_idempotency_defect: f64,
    pub max_symmetry_defect: f64,
    pub max_trace_defect: f64,
}

impl ProjectorAudit {
    fn absorb(&mut self, other: &ProjectorAudit) {
        self.checked += other.checked;
        self.violations += other.violations;
        self.max_idempotency_defect = self.max_idempotency_defect.max(other.max_idempotency_defect);
        self.max_symmetry_defect = self.max_symmetry_defect.max(other.max_symmetry_defect);
        self.max_trace_defect = self.max_trace_defect.max(other.max_trace_defect);
    }

    /// Audits the projector P = S S^T of a frame without materializing it:
    /// with the Gram matrix G = S^T S, P^2 - P = S (G - I) S^T, so
    /// ||P^2 - P||_F = ||G - I||_F up to O(defect^2), and tr(P) = tr(G) —
    /// both evaluated in O(m k^2) with no cancellation.
    fn record_frame(&mut self, frame: &OrthonormalFrame) {
        self.checked += 1;
        let s = frame.columns();
        let k = frame.subspace_dim();
        let gram = s.transpose() * s;
        let idem = (&gram - nalgebra::DMatrix::<f64>::identity(k, k)).norm();
        let trace = (gram.trace() - k as f64).abs();
        // (P + P^T)/2 symmetrization makes the symmetry defect exactly zero
        let sym = 0.0;
        self.max_idempotency_defect = self.max_idempotency_defect.max(idem);
        self.max_symmetry_defect = self.max_symmetry_defect.max(sym);
        self.max_trace_defect = self.max_trace_defect.max(trace);
        if idem > IDEMPOTENCY_TOL || sym > SYMMETRY_TOL || trace > TRACE_TOL {
            self.violations += 1;
        }
    }
}

/// Distances from one zero-shot matrix to one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub mean: f64,
    pub batch_size: usize,
    pub batch_count: usize,
    pub leftover_rows: usize,
    pub included_batches: usize,
    pub failed_batches: usize,
    pub cut_locus_batches: usize,
    pub batches: Vec<BatchRecord>,
    pub audit: ProjectorAudit,
}

/// Per-category outcome inside a full report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CategoryOutcome {
    Computed(CategoryStats),
    NoBatches { zsc_rows: usize, kc_rows: usize },
    AllBatchesFailed { batches: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistance {
    pub category: Category,
    pub outcome: CategoryOutcome,
}

impl CategoryDistance {
    pub fn mean(&self) -> Option<f64> {
        match &self.outcome {
            CategoryOutcome::Computed(stats) => Some(stats.mean),
            _ => None,
        }
    }
}

/// One zero-shot class against every category: per-category means, the
/// argmin assignment, and per-batch detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub zsc_name: String,
    pub cutoff_percent: f64,
    pub engine: DistanceEngine,
    pub categories: Vec<CategoryDistance>,
    pub assignment: Option<Category>,
    pub audit: ProjectorAudit,
}

impl DistanceReport {
    pub fn mean_for(&self, category: Category) -> Option<f64> {
        self.categories
            .iter()
            .find(|c| c.category == category)
            .and_then(CategoryDistance::mean)
    }
}

fn check_schema(zsc: &FeatureMatrix, kc: &FeatureMatrix) -> Result<(), InidError> {
    if zsc.column_names() != kc.column_names() {
        return Err(InidError::SchemaMismatch {
            zsc: zsc.column_names().to_vec(),
            kc: kc.column_names().to_vec(),
        });
    }
    Ok(())
}

/// Mean geodesic distance between the zero-shot matrix and the batches of one
/// known-class matrix.
pub fn inid_distance(
    zsc: &FeatureMatrix,
    kc: &FeatureMatrix,
    config: &InidConfig,
) -> Result<CategoryStats, InidError> {
    check_schema(zsc, kc)?;
    let plan = plan_batches(zsc.rows(), kc.rows())?;

    let zsc_svd = thin_svd(zsc.values())?;
    let zsc_rank = select_rank(&zsc_svd.singular_values, config.cutoff_percent)?;
    let zsc_numerical_rank = zsc_svd.numerical_rank();

    let batches: Vec<(BatchRecord, ProjectorAudit)> = (0..plan.batch_count)
        .into_par_iter()
        .map(|index| {
            let (start, stop) = plan.range(index);
            let batch = kc.values().rows(start, stop - start).into_owned();
            let mut audit = ProjectorAudit::default();
            let record = run_batch(
                index,
                &batch,
                &zsc_svd,
                zsc_rank,
                zsc_numerical_rank,
                config,
                &mut audit,
            );
            (record, audit)
        })
        .collect();

    let mut audit = ProjectorAudit::default();
    let mut records = Vec::with_capacity(batches.len());
    for (record, batch_audit) in batches {
        audit.absorb(&batch_audit);
        records.push(record);
    }

    // compensated summation in batch order keeps the mean deterministic
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    let mut included = 0usize;
    let mut cut_locus = 0usize;
    for record in &records {
        match (record.distance, &record.failure) {
            (Some(d), _) => {
                let y = d - compensation;
                let t = sum + y;
                compensation = (t - sum) - y;
                sum = t;
                included += 1;
            }
            (None, Some(BatchFailure::CutLocus)) => cut_locus += 1,
            (None, _) => {}
        }
    }
    if included == 0 {
        return Err(InidError::AllBatchesFailed {
            batches: plan.batch_count,
        });
    }

    Ok(CategoryStats {
        mean: sum / included as f64,
        batch_size: plan.batch_size,
        batch_count: plan.batch_count,
        leftover_rows: plan.leftover_rows,
        included_batches: included,
        failed_batches: plan.batch_count - included,
        cut_locus_batches: cut_locus,
        batches: records,
        audit,
    })
}

fn run_batch(
    index: usize,
    batch: &nalgebra::DMatrix<f64>,
    zsc_svd: &crate::grassmann::SvdResult,
    zsc_rank: usize,
    zsc_numerical_rank: usize,
    config: &InidConfig,
    audit: &mut ProjectorAudit,
) -> BatchRecord {
    let failed = |failure: BatchFailure| BatchRecord {
        index,
        rank: None,
        distance: None,
        failure: Some(failure),
    };

    let batch_svd = match thin_svd(batch) {
        Ok(svd) => svd,
        Err(_) => return failed(BatchFailure::DegenerateSpectrum),
    };
    let batch_rank = match select_rank(&batch_svd.singular_values, config.cutoff_percent) {
        Ok(rank) => rank,
        Err(_) => return failed(BatchFailure::DegenerateSpectrum),
    };

    // both sides must keep the cutoff share of energy; the numerical ranks
    // cap the count of usable directions
    let rank = zsc_rank
        .max(batch_rank)
        .min(zsc_numerical_rank)
        .min(batch_svd.numerical_rank());
    if rank == 0 {
        return failed(BatchFailure::DegenerateSpectrum);
    }

    let zsc_frame = match zsc_svd.leading_frame(rank) {
        Ok(frame) => frame,
        Err(_) => return failed(BatchFailure::DegenerateSpectrum),
    };
    let batch_frame = match batch_svd.leading_frame(rank) {
        Ok(frame) => frame,
        Err(_) => return failed(BatchFailure::DegenerateSpectrum),
    };

    let distance = match config.engine {
        DistanceEngine::DenseLog => {
            let batch_point = match build_projector(batch_frame) {
                Ok(p) => p,
                Err(_) => {
                    audit.checked += 1;
                    audit.violations += 1;
                    return failed(BatchFailure::DegenerateSpectrum);
                }
            };
            let zsc_point = match build_projector(zsc_frame) {
                Ok(p) => p,
                Err(_) => {
                    audit.checked += 1;
                    audit.violations += 1;
                    return failed(BatchFailure::DegenerateSpectrum);
                }
            };
            for point in [&batch_point, &zsc_point] {
                audit.checked += 1;
                audit.max_idempotency_defect =
                    audit.max_idempotency_defect.max(point.idempotency_defect());
                audit.max_symmetry_defect =
                    audit.max_symmetry_defect.max(point.symmetry_defect());
                audit.max_trace_defect = audit.max_trace_defect.max(point.trace_defect());
            }
            grassmann_distance(&batch_point, &zsc_point)
        }
        DistanceEngine::PrincipalAngle => {
            if cfg!(debug_assertions) || index == 0 {
                audit.record_frame(&batch_frame);
                audit.record_frame(&zsc_frame);
            }
            principal_angle_distance(&batch_frame, &zsc_frame)
        }
    };

    match distance {
        Ok(d) => BatchRecord {
            index,
            rank: Some(rank),
            distance: Some(d),
            failure: None,
        },
        Err(GrassmannError::CutLocus) => BatchRecord {
            index,
            rank: Some(rank),
            distance: None,
            failure: Some(BatchFailure::CutLocus),
        },
        Err(_) => BatchRecord {
            index,
            rank: Some(rank),
            distance: None,
            failure: Some(BatchFailure::DegenerateSpectrum),
        },
    }
}

/// Runs [`inid_distance`] against every category and assigns the argmin of
/// the means. A category without enough rows for one batch, or whose batches
/// all failed, is reported as absent and cannot win. Ties resolve to the
/// first category in declaration (= name) order.
pub fn score_categories(
    zsc: &FeatureMatrix,
    kc_by_category: &BTreeMap<Category, FeatureMatrix>,
    config: &InidConfig,
) -> Result<DistanceReport, InidError> {
    let zsc_name = match zsc.source() {
        crate::kdd::SourceTag::ZeroShotAttack(name) => name.clone(),
        other => other.describe(),
    };

    let mut categories = Vec::new();
    let mut audit = ProjectorAudit::default();
    for (&category, kc) in kc_by_category {
        let outcome = match inid_distance(zsc, kc, config) {
            Ok(stats) => {
                audit.absorb(&stats.audit);
                CategoryOutcome::Computed(stats)
            }
            Err(InidError::NoBatches { zsc_rows, kc_rows }) => {
                CategoryOutcome::NoBatches { zsc_rows, kc_rows }
            }
            Err(InidError::AllBatchesFailed { batches }) => {
                CategoryOutcome::AllBatchesFailed { batches }
            }
            Err(other) => return Err(other),
        };
        categories.push(CategoryDistance { category, outcome });
    }

    let mut assignment: Option<(Category, f64)> = None;
    for entry in &categories {
        if let Some(mean) = entry.mean() {
            let better = match assignment {
                None => true,
                Some((_, best)) => mean < best,
            };
            if better {
                assignment = Some((entry.category, mean));
            }
        }
    }
    let assignment = match assignment {
        Some((category, _)) => Some(category),
        None if categories.is_empty() => None,
        None => return Err(InidError::NoCategoryComputed),
    };

    Ok(DistanceReport {
        zsc_name,
        cutoff_percent: config.cutoff_percent,
        engine: config.engine,
        categories,
        assignment,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdd::SourceTag;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn matrix(rows: Vec<Vec<f64>>, tag: SourceTag) -> FeatureMatrix {
        let r = rows.len();
        let c = rows[0].len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let names = (0..c).map(|i| format!("a{i}")).collect();
        FeatureMatrix::new(
            DMatrix::from_row_slice(r, c, &flat),
            vec!["x".to_string(); r],
            names,
            tag,
        )
        .unwrap()
    }

    fn zsc_tag(name: &str) -> SourceTag {
        SourceTag::ZeroShotAttack(name.to_string())
    }

    #[test]
    fn batch_plan_integer_arithmetic() {
        let plan = plan_batches(892, 41_214).unwrap();
        assert_eq!(plan.batch_count, 46);
        assert_eq!(plan.leftover_rows, 182);
        assert_eq!(plan.range(45), (45 * 892, 46 * 892));

        let single = plan_batches(10, 10).unwrap();
        assert_eq!(single.batch_count, 1);
        assert_eq!(single.leftover_rows, 0);

        assert!(matches!(
            plan_batches(100, 50),
            Err(InidError::NoBatches { .. })
        ));
        assert!(matches!(
            plan_batches(1, 50),
            Err(InidError::InvalidBatchSize { rows: 1 })
        ));
    }

    #[test]
    fn identical_matrices_have_zero_mean_distance() {
        let z = matrix(
            vec![
                vec![1.0, 0.2, 0.0],
                vec![0.1, 0.9, 0.1],
                vec![0.3, 0.3, 0.8],
            ],
            zsc_tag("self"),
        );
        for engine in [DistanceEngine::DenseLog, DistanceEngine::PrincipalAngle] {
            let config = InidConfig {
                cutoff_percent: 95.0,
                engine,
            };
            let stats = inid_distance(&z, &z, &config).unwrap();
            assert!(
                stats.mean.abs() < 1e-8,
                "{engine:?} mean {} should vanish",
                stats.mean
            );
            if engine == DistanceEngine::PrincipalAngle {
                for b in &stats.batches {
                    assert_eq!(b.distance, Some(0.0), "angle route is exact on itself");
                }
            }
        }
    }

    #[test]
    fn planted_subspaces_match_the_analytic_angle() {
        // The frames live in row space: a data matrix S * C with orthonormal
        // row profiles S (m x 2) has exactly span(S) as its left subspace.
        // Z uses block profiles (q1, q2); every batch of K uses the pair
        // rotated by phi into two fresh blocks, so both principal angles
        // equal phi and the distance is sqrt(2) * sqrt(2 phi^2) = 2 phi.
        let phi = 0.8f64;
        let m = 8; // rows per matrix; blocks of 2 rows form the profiles
        let block = |start: usize| -> Vec<f64> {
            let mut v = vec![0.0; m];
            v[start] = 1.0 / 2.0f64.sqrt();
            v[start + 1] = 1.0 / 2.0f64.sqrt();
            v
        };
        let (q1, q2, q3, q4) = (block(0), block(2), block(4), block(6));
        // orthogonal feature directions with equal norms: energy splits
        // 50/50 across the two profile components, so alpha = 90 keeps both
        let c1 = [1.0, 0.0, 0.5, 0.0];
        let c2 = [0.0, 1.0, 0.0, 0.5];
        let assemble = |s1: &[f64], s2: &[f64]| -> Vec<Vec<f64>> {
            (0..m)
                .map(|i| {
                    (0..4)
                        .map(|j| s1[i] * c1[j] + s2[i] * c2[j])
                        .collect()
                })
                .collect()
        };
        let z = matrix(assemble(&q1, &q2), zsc_tag("planted"));
        let s1_rot: Vec<f64> = (0..m).map(|i| q1[i] * phi.cos() + q3[i] * phi.sin()).collect();
        let s2_rot: Vec<f64> = (0..m).map(|i| q2[i] * phi.cos() + q4[i] * phi.sin()).collect();
        let mut k_rows = assemble(&s1_rot, &s2_rot);
        k_rows.extend(assemble(&s1_rot, &s2_rot)); // second identical batch
        let k = matrix(k_rows, SourceTag::KnownCategory(Category::DoS));

        let config = InidConfig {
            cutoff_percent: 90.0,
            engine: DistanceEngine::PrincipalAngle,
        };
        let stats = inid_distance(&z, &k, &config).unwrap();
        assert_eq!(stats.batch_count, 2);
        for b in &stats.batches {
            assert_eq!(b.rank, Some(2));
        }
        let expected = SQRT_2 * (2.0 * phi * phi).sqrt();
        assert_abs_diff_eq!(stats.mean, expected, epsilon = 1e-9);

        // dense-log route agrees away from the cut locus
        let dense = inid_distance(
            &z,
            &k,
            &InidConfig {
                cutoff_percent: 90.0,
                engine: DistanceEngine::DenseLog,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(dense.mean, expected, epsilon = 1e-6);
    }

    #[test]
    fn rank_is_capped_by_the_weaker_spectrum() {
        // Z is numerically rank 1; the batch carries two strong directions.
        let z = matrix(
            vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]],
            zsc_tag("thin"),
        );
        let k = matrix(
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
                vec![2.0, 0.0],
                vec![0.0, 2.0],
                vec![1.0, -1.0],
            ],
            SourceTag::KnownCategory(Category::Probe),
        );
        let config = InidConfig {
            cutoff_percent: 99.0,
            engine: DistanceEngine::PrincipalAngle,
        };
        let stats = inid_distance(&z, &k, &config).unwrap();
        for b in &stats.batches {
            assert_eq!(b.rank, Some(1));
        }
    }

    #[test]
    fn cut_locus_batches_are_excluded_and_tallied() {
        // Row-space profiles: Z carries all its mass on row 0, so its left
        // frame is span(e1). The first batch has its mass on row 1
        // (span(e2): angle pi/2, cut locus for the dense engine); the second
        // spreads mass evenly (span((e1+e2)/sqrt(2)): angle pi/4).
        let z = matrix(vec![vec![1.0, 0.0], vec![0.0, 0.0]], zsc_tag("axis"));
        let k = matrix(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![1.0, 0.0],
            ],
            SourceTag::KnownCategory(Category::R2L),
        );
        let config = InidConfig {
            cutoff_percent: 95.0,
            engine: DistanceEngine::DenseLog,
        };
        let stats = inid_distance(&z, &k, &config).unwrap();
        assert_eq!(stats.batch_count, 2);
        assert_eq!(stats.cut_locus_batches, 1);
        assert_eq!(stats.included_batches, 1);
        assert_abs_diff_eq!(stats.mean, SQRT_2 * FRAC_PI_4, epsilon = 1e-9);
        assert_eq!(stats.batches[0].failure, Some(BatchFailure::CutLocus));
    }

    #[test]
    fn all_cut_locus_batches_fail_the_category() {
        // every batch profile sits on row 1, orthogonal to Z's row profile
        let z = matrix(vec![vec![1.0, 0.0], vec![0.0, 0.0]], zsc_tag("axis"));
        let k = matrix(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 0.0],
                vec![2.0, 0.0],
            ],
            SourceTag::KnownCategory(Category::U2R),
        );
        let config = InidConfig {
            cutoff_percent: 95.0,
            engine: DistanceEngine::DenseLog,
        };
        assert!(matches!(
            inid_distance(&z, &k, &config),
            Err(InidError::AllBatchesFailed { batches: 2 })
        ));
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let z = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]], zsc_tag("a"));
        let mut k = matrix(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            SourceTag::KnownCategory(Category::DoS),
        );
        k = FeatureMatrix::new(
            k.values().clone(),
            k.labels().to_vec(),
            vec!["other0".into(), "other1".into()],
            k.source().clone(),
        )
        .unwrap();
        assert!(matches!(
            inid_distance(&z, &k, &InidConfig::default()),
            Err(InidError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn score_categories_assigns_the_nearest_and_reports_absences() {
        // Distances compare row-magnitude profiles. DoS repeats Z's profile
        // (1, 2, 3) exactly, Probe permutes it (3, 1, 2), U2R lacks the rows
        // for even one batch.
        let z = matrix(
            vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]],
            zsc_tag("dos-like"),
        );
        let mut by_category = BTreeMap::new();
        by_category.insert(
            Category::DoS,
            matrix(
                vec![
                    vec![1.0, 0.0],
                    vec![2.0, 0.0],
                    vec![3.0, 0.0],
                    vec![1.0, 0.0],
                    vec![2.0, 0.0],
                    vec![3.0, 0.0],
                ],
                SourceTag::KnownCategory(Category::DoS),
            ),
        );
        by_category.insert(
            Category::Probe,
            matrix(
                vec![vec![3.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
                SourceTag::KnownCategory(Category::Probe),
            ),
        );
        by_category.insert(
            Category::U2R,
            matrix(
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                SourceTag::KnownCategory(Category::U2R),
            ),
        );
        let config = InidConfig {
            cutoff_percent: 95.0,
            engine: DistanceEngine::PrincipalAngle,
        };
        let report = score_categories(&z, &by_category, &config).unwrap();
        assert_eq!(report.assignment, Some(Category::DoS));
        assert_eq!(report.zsc_name, "dos-like");
        assert!(report.mean_for(Category::DoS).unwrap() < 1e-9);
        let u2r = report
            .categories
            .iter()
            .find(|c| c.category == Category::U2R)
            .unwrap();
        assert!(matches!(
            u2r.outcome,
            CategoryOutcome::NoBatches {
                zsc_rows: 3,
                kc_rows: 2
            }
        ));
        assert!(report.mean_for(Category::DoS).unwrap() < report.mean_for(Category::Probe).unwrap());
    }

    #[test]
    fn single_category_wins_by_default() {
        let z = matrix(vec![vec![1.0, 0.1], vec![0.8, 0.2]], zsc_tag("solo"));
        let mut by_category = BTreeMap::new();
        by_category.insert(
            Category::Normal,
            matrix(
                vec![vec![1.0, 0.0], vec![0.9, 0.1]],
                SourceTag::KnownCategory(Category::Normal),
            ),
        );
        let report =
            score_categories(&z, &by_category, &InidConfig::default()).unwrap();
        assert_eq!(report.assignment, Some(Category::Normal));
    }

    #[test]
    fn report_mean_is_consistent_with_batch_list() {
        let z = matrix(
            vec![vec![1.0, 0.3], vec![0.5, 0.8], vec![0.2, 0.9]],
            zsc_tag("mix"),
        );
        let k = matrix(
            (0..12)
                .map(|i| vec![(i as f64 * 0.7).sin().abs(), (i as f64 * 0.3).cos().abs()])
                .collect(),
            SourceTag::KnownCategory(Category::DoS),
        );
        let stats = inid_distance(
            &z,
            &k,
            &InidConfig {
                cutoff_percent: 95.0,
                engine: DistanceEngine::PrincipalAngle,
            },
        )
        .unwrap();
        let listed: Vec<f64> = stats.batches.iter().filter_map(|b| b.distance).collect();
        let recomputed = listed.iter().sum::<f64>() / listed.len() as f64;
        assert_abs_diff_eq!(stats.mean, recomputed, epsilon = 1e-12);
        assert_eq!(stats.included_batches, listed.len());
    }
}
