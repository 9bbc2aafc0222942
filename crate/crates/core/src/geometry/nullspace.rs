use nalgebra::{DMatrix, DVector};

use super::{check_dim, AHPolytope, GeometryError, HPolyhedron, RANK_TOL};

const ZERO_ROW_TOL: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-8;

/// Eliminates `C z = d` from `{z : A z <= b, C z = d}` by writing
/// `z = z0 + N xi` with `N` a basis of `null(C)`.
///
/// Rows of `A N` that vanish are checked against their right-hand side and
/// dropped. Returns `Err(Empty)` when the equalities are inconsistent or a
/// vanished row is violated.
pub fn nullspace_reduce(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
) -> Result<AHPolytope, GeometryError> {
    let n = a.ncols();
    check_dim(a.nrows(), b.len())?;
    check_dim(n, c.ncols())?;
    check_dim(c.nrows(), d.len())?;

    let (basis, particular) = if c.nrows() == 0 {
        (DMatrix::identity(n, n), DVector::zeros(n))
    } else {
        nullspace_and_particular(c, d)?
    };

    let reduced_a = a * &basis;
    let reduced_b = b - a * &particular;
    let mut keep = Vec::with_capacity(reduced_a.nrows());
    for i in 0..reduced_a.nrows() {
        let scale = a.row(i).amax().max(1.0);
        if reduced_a.row(i).amax() <= ZERO_ROW_TOL * scale {
            if reduced_b[i] < -CONSISTENCY_TOL * scale.max(b[i].abs()) {
                return Err(GeometryError::Empty);
            }
        } else {
            keep.push(i);
        }
    }
    let k = basis.ncols();
    let base_a = DMatrix::from_fn(keep.len(), k, |r, j| reduced_a[(keep[r], j)]);
    let base_b = DVector::from_fn(keep.len(), |r, _| reduced_b[keep[r]]);
    let base = if keep.is_empty() { HPolyhedron::universe(k) } else { HPolyhedron::new(base_a, base_b)? };
    AHPolytope::new(base, basis, particular)
}

/// Orthonormal basis of `null(C)` and the minimum-norm solution of `C z = d`.
pub(crate) fn nullspace_and_particular(
    c: &DMatrix<f64>,
    d: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>), GeometryError> {
    let n = c.ncols();
    let m = c.nrows();
    // Pad to at least n rows so the SVD returns a full set of right vectors.
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, m).copy_from(c);
        p
    } else {
        c.clone()
    };
    let svd = padded.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = RANK_TOL * sigma_max;

    let mut rhs = DVector::zeros(padded.nrows());
    rhs.rows_mut(0, m).copy_from(d);
    let mut particular = DVector::zeros(n);
    let mut null_cols: Vec<usize> = Vec::new();
    for i in 0..sigma.len() {
        if sigma_max > 0.0 && sigma[i] > cutoff {
            let coef = u.column(i).dot(&rhs) / sigma[i];
            particular += v_t.row(i).transpose() * coef;
        } else {
            null_cols.push(i);
        }
    }
    let residual = c * &particular - d;
    let scale = d.amax().max(c.amax()).max(1.0);
    if residual.amax() > CONSISTENCY_TOL * scale {
        return Err(GeometryError::Empty);
    }
    let basis = DMatrix::from_fn(n, null_cols.len(), |r, j| v_t[(null_cols[j], r)]);
    Ok((basis, particular))
}
