//! Principal logarithm of an orthogonal matrix through the real Schur form.
//!
//! The real Schur form of an orthogonal matrix is block diagonal up to
//! round-off: 1x1 blocks holding +1 or -1 and 2x2 blocks that are plane
//! rotations. The log maps a +1 block to 0 and a rotation by `phi` to
//! `[[0, -phi], [phi, 0]]`; a -1 block (or a rotation within
//! [`CUT_LOCUS_TOL`] of pi) has no principal logarithm.

use nalgebra::DMatrix;

use super::{GrassmannError, CUT_LOCUS_TOL};

/// `||Q^T Q - I||_F` must stay below this for the input to count as
/// orthogonal.
const INPUT_ORTHOGONALITY_TOL: f64 = 1e-6;

/// Subdiagonal entries below this magnitude split the Schur form into 1x1
/// blocks. Must stay well under [`CUT_LOCUS_TOL`] so that rotations by almost
/// pi are still seen as 2x2 blocks and rejected by the angle test instead of
/// being misread as a pair of -1 eigenvalues.
const BLOCK_SPLIT_TOL: f64 = 1e-9;

/// Real skew-symmetric logarithm `L` with `exp(L) = Q` and eigenvalue
/// imaginary parts inside (-pi, pi).
pub fn principal_log_orthogonal(q: &DMatrix<f64>) -> Result<DMatrix<f64>, GrassmannError> {
    let (rows, cols) = q.shape();
    if rows != cols {
        return Err(GrassmannError::NotSquare { rows, cols });
    }
    let defect = (q.transpose() * q - DMatrix::<f64>::identity(rows, rows)).norm();
    if defect > INPUT_ORTHOGONALITY_TOL {
        return Err(GrassmannError::NotOrthogonal { defect });
    }

    // machine-epsilon convergence can stall the QR iteration on some
    // orthogonal inputs; 1e-13 with a hard cap converges reliably and sits
    // far below every tolerance downstream
    let schur = q
        .clone()
        .try_schur(1e-13, 100_000)
        .ok_or(GrassmannError::SchurFailed)?;
    let (basis, form) = schur.unpack();

    let mut log_form = DMatrix::<f64>::zeros(rows, rows);
    let mut i = 0;
    while i < rows {
        let two_by_two = i + 1 < rows && form[(i + 1, i)].abs() > BLOCK_SPLIT_TOL;
        if two_by_two {
            // rotation block: angle from the averaged sine and cosine parts
            let sin2 = form[(i + 1, i)] - form[(i, i + 1)];
            let cos2 = form[(i, i)] + form[(i + 1, i + 1)];
            let phi = sin2.atan2(cos2);
            if phi.abs() >= std::f64::consts::PI - CUT_LOCUS_TOL {
                return Err(GrassmannError::CutLocus);
            }
            log_form[(i, i + 1)] = -phi;
            log_form[(i + 1, i)] = phi;
            i += 2;
        } else {
            // real eigenvalue: +1 maps to 0, -1 sits on the cut locus
            if form[(i, i)] < 0.0 {
                return Err(GrassmannError::CutLocus);
            }
            i += 1;
        }
    }

    let log = &basis * log_form * basis.transpose();
    // exact skew symmetry despite round-off in the basis product
    Ok((&log - log.transpose()) * 0.5)
}
