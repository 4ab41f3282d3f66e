//! Property tests for the numerical kernel and the instance distances.

use grasnid_core::grassmann::{
    build_projector, orthonormality_defect, select_rank, thin_svd, OrthonormalFrame,
};
use grasnid_core::zsl::{instance_distance, InstanceDistance};

use nalgebra::DMatrix;
use proptest::prelude::*;

fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |data| DMatrix::from_row_slice(rows, cols, &data))
}

proptest! {
    #[test]
    fn svd_reconstructs_and_sorts(matrix in small_matrix(5, 3)) {
        let svd = thin_svd(&matrix).unwrap();
        prop_assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let rel = (svd.reconstruct() - &matrix).norm() / matrix.norm().max(1e-12);
        prop_assert!(rel < 1e-7, "relative error {rel:e}");
        prop_assert!(orthonormality_defect(&svd.left_vectors) < 1e-8);
    }

    #[test]
    fn qr_frames_make_valid_projectors(matrix in small_matrix(6, 2)) {
        // skip inputs that collapse to (numerically) lower rank
        let svd = thin_svd(&matrix).unwrap();
        prop_assume!(svd.singular_values[1] > 1e-6);
        let frame = OrthonormalFrame::new(matrix.qr().q()).unwrap();
        let point = build_projector(frame).unwrap();
        prop_assert!(point.idempotency_defect() < 1e-8);
        prop_assert_eq!(point.symmetry_defect(), 0.0);
        prop_assert!(point.trace_defect() < 1e-6);
    }

    #[test]
    fn select_rank_is_monotone_in_the_cutoff(
        values in prop::collection::vec(0.01f64..10.0, 1..8),
        lo in 1.0f64..50.0,
        hi in 50.0f64..100.0,
    ) {
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let k_lo = select_rank(&sorted, lo).unwrap();
        let k_hi = select_rank(&sorted, hi).unwrap();
        prop_assert!(k_lo <= k_hi);
        prop_assert!(k_hi <= sorted.len());
        prop_assert!(k_lo >= 1);
        prop_assert_eq!(select_rank(&sorted, 100.0).unwrap() , sorted.len());
    }

    #[test]
    fn frobenius_instance_distance_is_a_metric(
        x in prop::collection::vec(-5.0f64..5.0, 4),
        y in prop::collection::vec(-5.0f64..5.0, 4),
        z in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let d = |a: &[f64], b: &[f64]| instance_distance(a, b, InstanceDistance::Frobenius).unwrap();
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() < 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
        prop_assert_eq!(d(&x, &x), 0.0);
    }

    #[test]
    fn rank1_distance_ignores_scale_and_sign(
        x in prop::collection::vec(0.05f64..5.0, 4),
        y in prop::collection::vec(0.05f64..5.0, 4),
        a in 0.1f64..5.0,
        b in 0.1f64..5.0,
        flip in any::<bool>(),
    ) {
        let base = instance_distance(&x, &y, InstanceDistance::GrassmannRank1).unwrap();
        let sign = if flip { -1.0 } else { 1.0 };
        let sx: Vec<f64> = x.iter().map(|v| v * a * sign).collect();
        let sy: Vec<f64> = y.iter().map(|v| v * b).collect();
        let scaled = instance_distance(&sx, &sy, InstanceDistance::GrassmannRank1).unwrap();
        prop_assert!((base - scaled).abs() < 1e-9, "{base} vs {scaled}");
    }
}
