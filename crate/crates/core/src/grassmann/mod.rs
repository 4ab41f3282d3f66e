//! Grassmann manifold kernel: subspace extraction, projector representation,
//! and geodesic distances.
//!
//! The Grassmannian `G(k, m)` is the set of all k-dimensional linear subspaces
//! of R^m. A subspace is represented here by its orthogonal projector, an
//! m-by-m matrix `P` with
//!
//! ```text
//! P^2 = P,    P^T = P,    rank(P) = k.
//! ```
//!
//! Given orthonormal frames (from the left singular vectors of a data matrix),
//! the projector is `P = S S^T`. Two distances between subspaces are provided:
//!
//! * [`grassmann_distance`] — the closed-form geodesic distance
//!   `d(P1, P2) = sqrt(-1/4 * trace(log^2((I - 2 P2)(I - 2 P1))))`,
//!   evaluated through the principal logarithm of the orthogonal matrix
//!   `(I - 2 P2)(I - 2 P1)`. Each factor `I - 2 P` is a symmetric orthogonal
//!   involution, so the product is orthogonal and its principal log is real
//!   skew-symmetric whenever no eigenvalue equals -1.
//! * [`principal_angle_distance`] — the same quantity computed from principal
//!   angles: `sqrt(2) * ||theta||_2` where `cos(theta_i)` are the singular
//!   values of `S1^T S2`. This route needs only a k-by-k SVD and stays defined
//!   at angles of pi/2, where the logarithm route hits the cut locus. The two
//!   agree wherever both are defined, which makes the angle route both a fast
//!   path for large ambient dimension and an independent check on the dense
//!   one.
//!
//! The principal logarithm itself goes through the real Schur form: an
//! orthogonal matrix reduces to 1x1 blocks (+/-1) and 2x2 plane rotations, and
//! a rotation by `phi` maps to the skew block `[[0, -phi], [phi, 0]]`. No
//! complex arithmetic is involved at any point. An eigenvalue within
//! [`CUT_LOCUS_TOL`] of -1 raises [`GrassmannError::CutLocus`]: the principal
//! logarithm is not defined there and nearby results carry no precision.
//!
//! All functions are pure; every value is immutable after construction and can
//! be shared freely across threads.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod schur_log;

pub use schur_log::principal_log_orthogonal;

/// Frobenius tolerance for `S^T S = I` when accepting a frame.
pub const ORTHONORMALITY_TOL: f64 = 1e-6;

/// Angular tolerance (radians): eigenvalues with |angle - pi| below this are
/// treated as sitting on the cut locus.
pub const CUT_LOCUS_TOL: f64 = 1e-6;

/// Singular values below `ZERO_SINGULAR_REL_TOL * sigma_1` count as exact
/// zeros when ranks are decided.
pub const ZERO_SINGULAR_REL_TOL: f64 = 1e-12;

/// Errors from the geometry kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrassmannError {
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteInput { row: usize, col: usize },
    #[error("every singular value is zero; no subspace can be selected")]
    AllZeroSpectrum,
    #[error("cutoff percent must lie in (0, 100], got {0}")]
    InvalidCutoff(f64),
    #[error("frame deviates from orthonormality by {defect:.3e} (tolerance {tol:.3e})")]
    NonOrthonormalFrame { defect: f64, tol: f64 },
    #[error("frame must satisfy 1 <= k <= m, got k={k}, m={m}")]
    BadFrameShape { m: usize, k: usize },
    #[error("matrix is not orthogonal: ||Q^T Q - I||_F = {defect:.3e}")]
    NotOrthogonal { defect: f64 },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error(
        "an eigenvalue lies within {CUT_LOCUS_TOL:.0e} rad of -1; \
         the principal logarithm is undefined there"
    )]
    CutLocus,
    #[error("shape mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("subspace ranks differ: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },
    #[error("projector fails the {check} check: defect {defect:.3e} (tolerance {tol:.3e})")]
    InvalidProjector {
        check: &'static str,
        defect: f64,
        tol: f64,
    },
    #[error("Schur iteration did not converge")]
    SchurFailed,
}

type Result<T> = std::result::Result<T, GrassmannError>;

/// Which route evaluates a subspace distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceEngine {
    /// Dense route: principal log of `(I - 2 P2)(I - 2 P1)`, cost O(m^3).
    #[default]
    DenseLog,
    /// Principal-angle route: k-by-k SVD of `S1^T S2`, defined at pi/2.
    PrincipalAngle,
}

impl DistanceEngine {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceEngine::DenseLog => "dense-log",
            DistanceEngine::PrincipalAngle => "principal-angle",
        }
    }
}

impl std::str::FromStr for DistanceEngine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dense-log" => Ok(DistanceEngine::DenseLog),
            "principal-angle" => Ok(DistanceEngine::PrincipalAngle),
            other => Err(format!(
                "unknown distance engine {other:?} (expected dense-log or principal-angle)"
            )),
        }
    }
}

impl std::fmt::Display for DistanceEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An m-by-k matrix with mutually orthonormal columns spanning a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame {
    columns: DMatrix<f64>,
}

impl OrthonormalFrame {
    /// Accepts `columns` as a frame if `1 <= k <= m`, all entries are finite,
    /// and `||S^T S - I||_F` is within [`ORTHONORMALITY_TOL`].
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let (m, k) = columns.shape();
        if k < 1 || k > m {
            return Err(GrassmannError::BadFrameShape { m, k });
        }
        check_finite(&columns)?;
        let defect = orthonormality_defect(&columns);
        if defect > ORTHONORMALITY_TOL {
            return Err(GrassmannError::NonOrthonormalFrame {
                defect,
                tol: ORTHONORMALITY_TOL,
            });
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// m, the dimension of the surrounding space.
    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    /// k, the dimension of the spanned subspace.
    pub fn subspace_dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn into_columns(self) -> DMatrix<f64> {
        self.columns
    }
}

/// `||S^T S - I||_F` for an arbitrary matrix.
pub fn orthonormality_defect(columns: &DMatrix<f64>) -> f64 {
    let k = columns.ncols();
    let gram = columns.transpose() * columns;
    (gram - DMatrix::<f64>::identity(k, k)).norm()
}

/// A point on the Grassmannian: a symmetric idempotent rank-k projector,
/// optionally carrying the frame that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoint {
    projector: DMatrix<f64>,
    rank: usize,
    frame: Option<OrthonormalFrame>,
}

/// Tolerances for the projector invariants.
pub const IDEMPOTENCY_TOL: f64 = 1e-8;
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-6;

impl GrassmannPoint {
    /// Validates `P^2 = P`, `P = P^T`, and `trace(P) = rank` before accepting
    /// a raw projector.
    pub fn from_projector(projector: DMatrix<f64>, rank: usize) -> Result<Self> {
        let (r, c) = projector.shape();
        if r != c {
            return Err(GrassmannError::NotSquare { rows: r, cols: c });
        }
        check_finite(&projector)?;
        let point = Self {
            projector,
            rank,
            frame: None,
        };
        point.check_invariants()?;
        Ok(point)
    }

    fn check_invariants(&self) -> Result<()> {
        let sym = self.symmetry_defect();
        if sym > SYMMETRY_TOL {
            return Err(GrassmannError::InvalidProjector {
                check: "symmetry",
                defect: sym,
                tol: SYMMETRY_TOL,
            });
        }
        let idem = self.idempotency_defect();
        if idem > IDEMPOTENCY_TOL {
            return Err(GrassmannError::InvalidProjector {
                check: "idempotency",
                defect: idem,
                tol: IDEMPOTENCY_TOL,
            });
        }
        let tr = self.trace_defect();
        if tr > TRACE_TOL {
            return Err(GrassmannError::InvalidProjector {
                check: "trace",
                defect: tr,
                tol: TRACE_TOL,
            });
        }
        Ok(())
    }

    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ambient_dim(&self) -> usize {
        self.projector.nrows()
    }

    /// The generating frame, when the point was built from one.
    pub fn frame(&self) -> Option<&OrthonormalFrame> {
        self.frame.as_ref()
    }

    /// Returns the stored frame, or recovers one as the leading left singular
    /// vectors of the projector (an O(m^3) SVD).
    pub fn frame_or_recover(&self) -> Result<OrthonormalFrame> {
        if let Some(frame) = &self.frame {
            return Ok(frame.clone());
        }
        let svd = thin_svd(&self.projector)?;
        svd.leading_frame(self.rank)
    }

    /// `||P^2 - P||_F`
    pub fn idempotency_defect(&self) -> f64 {
        (&self.projector * &self.projector - &self.projector).norm()
    }

    /// `||P - P^T||_F`
    pub fn symmetry_defect(&self) -> f64 {
        (&self.projector - self.projector.transpose()).norm()
    }

    /// `|trace(P) - rank|`
    pub fn trace_defect(&self) -> f64 {
        (self.projector.trace() - self.rank as f64).abs()
    }

    /// Debug dump of the projector entries, one CSV row per matrix row.
    pub fn projector_csv(&self) -> String {
        let m = self.projector.nrows();
        let mut out = String::new();
        for i in 0..m {
            for j in 0..m {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", self.projector[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the projector `P = S S^T` from a frame. The result satisfies the
/// projector invariants; `P` is symmetrized as `(P + P^T)/2` so the symmetry
/// defect is exactly zero.
pub fn build_projector(frame: OrthonormalFrame) -> Result<GrassmannPoint> {
    let defect = orthonormality_defect(frame.columns());
    if defect > ORTHONORMALITY_TOL {
        return Err(GrassmannError::NonOrthonormalFrame {
            defect,
            tol: ORTHONORMALITY_TOL,
        });
    }
    let s = frame.columns();
    let raw = s * s.transpose();
    let projector = (&raw + raw.transpose()) * 0.5;
    let rank = frame.subspace_dim();
    let point = GrassmannPoint {
        projector,
        rank,
        frame: Some(frame),
    };
    point.check_invariants()?;
    Ok(point)
}

/// Singular value decomposition `X = U diag(sigma) V^T` with thin factors:
/// `U` is m-by-r and `V` is d-by-r for `r = min(m, d)`, both with orthonormal
/// columns, and the singular values are sorted non-increasing. The eigenvalues
/// of `X X^T` are the squares `sigma_i^2` (and zero past r).
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left_vectors: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub right_vectors: DMatrix<f64>,
}

impl SvdResult {
    /// The first k left singular vectors as a frame.
    pub fn leading_frame(&self, k: usize) -> Result<OrthonormalFrame> {
        let m = self.left_vectors.nrows();
        if k < 1 || k > self.left_vectors.ncols() {
            return Err(GrassmannError::BadFrameShape { m, k });
        }
        OrthonormalFrame::new(self.left_vectors.columns(0, k).into_owned())
    }

    /// Count of singular values above `ZERO_SINGULAR_REL_TOL * sigma_1`.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }

    /// `U diag(sigma) V^T`, for reconstruction checks.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(
            &self.singular_values,
        ));
        &self.left_vectors * sigma * self.right_vectors.transpose()
    }

    /// Extends the left factor to a full m-by-m orthogonal basis by
    /// Gram-Schmidt against standard basis vectors.
    pub fn completed_left_vectors(&self) -> DMatrix<f64> {
        complete_basis(&self.left_vectors)
    }
}

fn numerical_rank(singular_values: &[f64]) -> usize {
    let largest = singular_values.first().copied().unwrap_or(0.0);
    if largest <= 0.0 {
        return 0;
    }
    let floor = largest * ZERO_SINGULAR_REL_TOL;
    singular_values.iter().filter(|&&s| s > floor).count()
}

fn complete_basis(partial: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, r) = partial.shape();
    let mut full = DMatrix::<f64>::zeros(m, m);
    full.columns_mut(0, r).copy_from(partial);
    let mut have = r;
    while have < m {
        // pick the standard basis vector with the largest residual
        let mut best: Option<(usize, f64, nalgebra::DVector<f64>)> = None;
        for j in 0..m {
            let mut v = nalgebra::DVector::<f64>::zeros(m);
            v[j] = 1.0;
            for pass in 0..2 {
                let _ = pass;
                for c in 0..have {
                    let col = full.column(c);
                    let proj = col.dot(&v);
                    v.axpy(-proj, &col.into_owned(), 1.0);
                }
            }
            let norm = v.norm();
            if best.as_ref().map(|(_, n, _)| norm > *n).unwrap_or(true) {
                best = Some((j, norm, v));
            }
        }
        let (_, norm, v) = best.expect("m > 0");
        full.set_column(have, &(v / norm));
        have += 1;
    }
    full
}

fn check_finite(matrix: &DMatrix<f64>) -> Result<()> {
    for j in 0..matrix.ncols() {
        for i in 0..matrix.nrows() {
            if !matrix[(i, j)].is_finite() {
                return Err(GrassmannError::NonFiniteInput { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Thin SVD of an m-by-d matrix with factors ordered by non-increasing
/// singular value.
pub fn thin_svd(x: &DMatrix<f64>) -> Result<SvdResult> {
    check_finite(x)?;
    let svd = x.clone().svd(true, true);
    let left_vectors = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    debug_assert!(
        singular_values.windows(2).all(|w| w[0] >= w[1]),
        "nalgebra SVD returned unsorted singular values"
    );
    Ok(SvdResult {
        left_vectors,
        singular_values,
        right_vectors: v_t.transpose(),
    })
}

/// Smallest k whose leading eigenvalues `lambda_i = sigma_i^2` carry at least
/// `cutoff_percent` of the total spectral energy. Singular values below
/// `ZERO_SINGULAR_REL_TOL * sigma_1` are treated as exact zeros.
pub fn select_rank(singular_values: &[f64], cutoff_percent: f64) -> Result<usize> {
    if !(cutoff_percent > 0.0 && cutoff_percent <= 100.0) {
        return Err(GrassmannError::InvalidCutoff(cutoff_percent));
    }
    let rank = numerical_rank(singular_values);
    if rank == 0 {
        return Err(GrassmannError::AllZeroSpectrum);
    }
    let eigenvalues: Vec<f64> = singular_values[..rank].iter().map(|s| s * s).collect();
    let total: f64 = eigenvalues.iter().sum();
    let mut cumulative = 0.0;
    for (i, lambda) in eigenvalues.iter().enumerate() {
        cumulative += lambda;
        // small slack guards the boundary cases like 3/4 * 100 >= 75
        if cumulative / total * 100.0 >= cutoff_percent - 1e-9 {
            return Ok(i + 1);
        }
    }
    Ok(rank)
}

/// Geodesic distance `sqrt(-1/4 trace(log^2 Q))` with
/// `Q = (I - 2 P2)(I - 2 P1)`. Since the log `L` is skew-symmetric,
/// `trace(L^2) = -||L||_F^2`, so the radicand is non-negative by construction
/// and the distance is evaluated as `||L||_F / 2`.
pub fn grassmann_distance(p1: &GrassmannPoint, p2: &GrassmannPoint) -> Result<f64> {
    if p1.ambient_dim() != p2.ambient_dim() {
        return Err(GrassmannError::DimensionMismatch {
            left: p1.projector.shape(),
            right: p2.projector.shape(),
        });
    }
    if p1.rank() != p2.rank() {
        return Err(GrassmannError::RankMismatch {
            left: p1.rank(),
            right: p2.rank(),
        });
    }
    let m = p1.ambient_dim();
    let identity = DMatrix::<f64>::identity(m, m);
    let r2 = &identity - 2.0 * &p2.projector;
    let r1 = &identity - 2.0 * &p1.projector;
    let q = r2 * r1;
    let log = principal_log_orthogonal(&q)?;
    Ok(log.norm() / 2.0)
}

/// Principal angles between the subspaces of two frames, non-decreasing,
/// from the singular values of `S1^T S2` with cosines clamped to [0, 1].
pub fn principal_angles(f1: &OrthonormalFrame, f2: &OrthonormalFrame) -> Result<Vec<f64>> {
    if f1.ambient_dim() != f2.ambient_dim() {
        return Err(GrassmannError::DimensionMismatch {
            left: f1.columns.shape(),
            right: f2.columns.shape(),
        });
    }
    if f1.subspace_dim() != f2.subspace_dim() {
        return Err(GrassmannError::RankMismatch {
            left: f1.subspace_dim(),
            right: f2.subspace_dim(),
        });
    }
    let product = f1.columns().transpose() * f2.columns();
    let svd = product.svd(false, false);
    let mut angles: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|c| {
            // round-off keeps cosines of identical subspaces a few ulps
            // under 1; snap so that d(F, F) is exactly zero
            if *c > 1.0 - 1e-14 {
                0.0
            } else {
                c.clamp(0.0, 1.0).acos()
            }
        })
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    Ok(angles)
}

/// `sqrt(2) * ||theta||_2` over the principal angles. Defined everywhere,
/// including at angles of pi/2 where [`grassmann_distance`] raises
/// [`GrassmannError::CutLocus`].
pub fn principal_angle_distance(f1: &OrthonormalFrame, f2: &OrthonormalFrame) -> Result<f64> {
    let angles = principal_angles(f1, f2)?;
    let sum_sq: f64 = angles.iter().map(|t| t * t).sum();
    Ok((2.0 * sum_sq).sqrt())
}

/// Frobenius norm of the difference of two equally shaped matrices.
pub fn frobenius_distance(x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<f64> {
    if x1.shape() != x2.shape() {
        return Err(GrassmannError::DimensionMismatch {
            left: x1.shape(),
            right: x2.shape(),
        });
    }
    check_finite(x1)?;
    check_finite(x2)?;
    Ok((x1 - x2).norm())
}

/// Distance between two Grassmann points through the chosen engine. The
/// principal-angle route uses the stored frames, recovering them from the
/// projectors if necessary.
pub fn subspace_distance(
    p1: &GrassmannPoint,
    p2: &GrassmannPoint,
    engine: DistanceEngine,
) -> Result<f64> {
    match engine {
        DistanceEngine::DenseLog => grassmann_distance(p1, p2),
        DistanceEngine::PrincipalAngle => {
            if p1.rank() != p2.rank() {
                return Err(GrassmannError::RankMismatch {
                    left: p1.rank(),
                    right: p2.rank(),
                });
            }
            let f1 = p1.frame_or_recover()?;
            let f2 = p2.frame_or_recover()?;
            principal_angle_distance(&f1, &f2)
        }
    }
}
