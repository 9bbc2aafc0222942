use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::hpolyhedron::{matrix_from_rows, matrix_to_rows};
use super::{check_dim, GeometryError, HPolyhedron};
use crate::lp::{LinearProgram, LpOutcome, LpSolver, RowKind};

/// Affine image `{t + T xi : xi in base}` of an H-polyhedron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AHPolytopeRepr", into = "AHPolytopeRepr")]
pub struct AHPolytope {
    base: HPolyhedron,
    map: DMatrix<f64>,
    offset: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct AHPolytopeRepr {
    base: HPolyhedron,
    #[serde(rename = "T")]
    map: Vec<Vec<f64>>,
    t: Vec<f64>,
}

impl TryFrom<AHPolytopeRepr> for AHPolytope {
    type Error = GeometryError;

    fn try_from(repr: AHPolytopeRepr) -> Result<Self, Self::Error> {
        let map = matrix_from_rows(&repr.map, repr.base.dim())?;
        AHPolytope::new(repr.base, map, DVector::from_vec(repr.t))
    }
}

impl From<AHPolytope> for AHPolytopeRepr {
    fn from(p: AHPolytope) -> Self {
        AHPolytopeRepr { map: matrix_to_rows(&p.map), t: p.offset.iter().copied().collect(), base: p.base }
    }
}

/// Feasibility slack allowed in a returned containment certificate.
const CERTIFICATE_TOL: f64 = 1e-7;

impl AHPolytope {
    pub fn new(base: HPolyhedron, map: DMatrix<f64>, offset: DVector<f64>) -> Result<Self, GeometryError> {
        check_dim(base.dim(), map.ncols())?;
        check_dim(map.nrows(), offset.len())?;
        if map.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("T/t"));
        }
        Ok(Self { base, map, offset })
    }

    /// The polyhedron itself under the identity map.
    pub fn from_hpolyhedron(p: HPolyhedron) -> Self {
        let n = p.dim();
        Self { base: p, map: DMatrix::identity(n, n), offset: DVector::zeros(n) }
    }

    pub fn base(&self) -> &HPolyhedron {
        &self.base
    }

    pub fn map(&self) -> &DMatrix<f64> {
        &self.map
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn ambient_dim(&self) -> usize {
        self.map.nrows()
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn image(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.map * xi + &self.offset
    }

    /// Composes with an outer affine map: `{v + M y : y in self}`.
    pub fn transformed(&self, m: &DMatrix<f64>, v: &DVector<f64>) -> Result<AHPolytope, GeometryError> {
        check_dim(self.ambient_dim(), m.ncols())?;
        check_dim(m.nrows(), v.len())?;
        AHPolytope::new(self.base.clone(), m * &self.map, m * &self.offset + v)
    }

    /// L1-nearest member to `y`, with its distance. `None` when the base is empty.
    pub fn l1_projection(
        &self,
        y: &DVector<f64>,
        solver: &LpSolver,
    ) -> Result<Option<(DVector<f64>, f64)>, GeometryError> {
        check_dim(self.ambient_dim(), y.len())?;
        let n = self.ambient_dim();
        let k = self.base_dim();
        let mut lp = LinearProgram::new();
        let xi = lp.add_free_vars(k);
        let e = lp.add_vars(n, 0.0, f64::INFINITY);
        for r in 0..n {
            lp.set_objective(e + r, 1.0);
            let row: Vec<(usize, f64)> = (0..k).map(|j| (xi + j, self.map[(r, j)])).collect();
            let target = y[r] - self.offset[r];
            // |T xi - (y - t)| <= e
            lp.add_row(row.iter().copied().chain([(e + r, -1.0)]), RowKind::Le, target);
            lp.add_row(row.iter().copied().chain([(e + r, 1.0)]), RowKind::Ge, target);
        }
        add_polyhedron_rows(&mut lp, &self.base, xi);
        match solver.solve(&lp)? {
            LpOutcome::Optimal { x, objective } => {
                let point = self.image(&DVector::from_column_slice(&x[xi..xi + k]));
                Ok(Some((point, objective.max(0.0))))
            }
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(GeometryError::Unbounded),
        }
    }

    /// Membership of `y` up to L1 distance `tol`.
    pub fn contains(&self, y: &DVector<f64>, solver: &LpSolver, tol: f64) -> Result<bool, GeometryError> {
        Ok(matches!(self.l1_projection(y, solver)?, Some((_, dist)) if dist <= tol))
    }

    /// A member point, or `Err(Empty)`.
    pub fn some_point(&self, solver: &LpSolver) -> Result<DVector<f64>, GeometryError> {
        let ball = self.base.chebyshev_center(solver)?;
        Ok(self.image(&ball.center))
    }
}

pub(crate) fn add_polyhedron_rows(lp: &mut LinearProgram, p: &HPolyhedron, first_var: usize) {
    let a = p.a();
    for i in 0..p.num_rows() {
        lp.add_row((0..p.dim()).map(|j| (first_var + j, a[(i, j)])), RowKind::Le, p.b()[i]);
    }
}

/// Sufficient LP condition for `X ⊆ Y` between affine images of polyhedra.
///
/// Searches for `Gamma`, `beta` and `Lambda >= 0` with
/// `T_Y Gamma = T_X`, `T_Y beta = t_X - t_Y`, `Lambda H_X = H_Y Gamma` and
/// `Lambda h_X + H_Y beta <= h_Y`. Any such triple maps each `xi` in the base
/// of `X` to `Gamma xi + beta` in the base of `Y`, so `true` always means
/// contained. `false` only means no certificate was found. A solution that
/// fails the residual re-check is reported as a solver error.
pub fn ah_containment_certified(x: &AHPolytope, y: &AHPolytope, solver: &LpSolver) -> Result<bool, GeometryError> {
    check_dim(y.ambient_dim(), x.ambient_dim())?;
    let n = x.ambient_dim();
    let (kx, ky) = (x.base_dim(), y.base_dim());
    let (hx, hy) = (x.base.a(), y.base.a());
    let (qx, qy) = (hx.nrows(), hy.nrows());

    let mut lp = LinearProgram::new();
    let gamma = lp.add_free_vars(ky * kx);
    let beta = lp.add_free_vars(ky);
    let lambda = lp.add_vars(qy * qx, 0.0, f64::INFINITY);
    let g = |j: usize, c: usize| gamma + j * kx + c;
    let l = |i: usize, p: usize| lambda + i * qx + p;

    for r in 0..n {
        for c in 0..kx {
            lp.add_row((0..ky).map(|j| (g(j, c), y.map[(r, j)])), RowKind::Eq, x.map[(r, c)]);
        }
        lp.add_row((0..ky).map(|j| (beta + j, y.map[(r, j)])), RowKind::Eq, x.offset[r] - y.offset[r]);
    }
    for i in 0..qy {
        for c in 0..kx {
            let lam = (0..qx).map(|p| (l(i, p), hx[(p, c)]));
            let gam = (0..ky).map(|j| (g(j, c), -hy[(i, j)]));
            lp.add_row(lam.chain(gam), RowKind::Eq, 0.0);
        }
        let lam = (0..qx).map(|p| (l(i, p), x.base.b()[p]));
        let bet = (0..ky).map(|j| (beta + j, hy[(i, j)]));
        lp.add_row(lam.chain(bet), RowKind::Le, y.base.b()[i]);
    }

    match solver.solve(&lp)? {
        LpOutcome::Optimal { x: sol, .. } => {
            let scale = 1.0 + sol.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let viol = lp.max_violation(&sol);
            if viol <= CERTIFICATE_TOL * scale {
                Ok(true)
            } else {
                Err(GeometryError::Solver(crate::lp::SolverError::NotConverged(format!(
                    "containment certificate residual {viol:.3e}"
                ))))
            }
        }
        LpOutcome::Infeasible => Ok(false),
        LpOutcome::Unbounded => Err(GeometryError::Solver(crate::lp::SolverError::Backend(
            "feasibility program reported unbounded".into(),
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(lo: f64, hi: f64) -> AHPolytope {
        AHPolytope::from_hpolyhedron(HPolyhedron::from_box(&[lo, lo], &[hi, hi]).unwrap())
    }

    #[test]
    fn nested_boxes() {
        let solver = LpSolver::default();
        assert!(ah_containment_certified(&boxed(0.0, 1.0), &boxed(-1.0, 2.0), &solver).unwrap());
        assert!(!ah_containment_certified(&boxed(-1.0, 2.0), &boxed(0.0, 1.0), &solver).unwrap());
        assert!(ah_containment_certified(&boxed(0.0, 1.0), &boxed(0.0, 1.0), &solver).unwrap());
    }

    #[test]
    fn rotated_square_inside_box() {
        let solver = LpSolver::default();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot = DMatrix::from_row_slice(2, 2, &[c, -c, c, c]);
        let sq = HPolyhedron::from_box(&[-0.5, -0.5], &[0.5, 0.5]).unwrap();
        let x = AHPolytope::new(sq, rot, DVector::zeros(2)).unwrap();
        assert!(ah_containment_certified(&x, &boxed(-1.0, 1.0), &solver).unwrap());
        // its corners reach 0.707, so a box of half-width 0.6 does not contain it
        assert!(!ah_containment_certified(&x, &boxed(-0.6, 0.6), &solver).unwrap());
    }

    #[test]
    fn projection_and_membership() {
        let solver = LpSolver::default();
        // segment {(s, s) : s in [0, 1]} as image of [0, 1]
        let base = HPolyhedron::from_box(&[0.0], &[1.0]).unwrap();
        let seg = AHPolytope::new(base, DMatrix::from_row_slice(2, 1, &[1.0, 1.0]), DVector::zeros(2)).unwrap();
        assert!(seg.contains(&DVector::from_vec(vec![0.3, 0.3]), &solver, 1e-9).unwrap());
        assert!(!seg.contains(&DVector::from_vec(vec![0.3, 0.5]), &solver, 1e-9).unwrap());
        let (p, d) = seg.l1_projection(&DVector::from_vec(vec![2.0, 2.0]), &solver).unwrap().unwrap();
        assert!((p - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-9);
        assert!((d - 2.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let solver = LpSolver::default();
        let one = AHPolytope::from_hpolyhedron(HPolyhedron::from_box(&[0.0], &[1.0]).unwrap());
        assert!(matches!(
            ah_containment_certified(&one, &boxed(0.0, 1.0), &solver),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_shape() {
        let seg = AHPolytope::new(
            HPolyhedron::from_box(&[0.0], &[1.0]).unwrap(),
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
            DVector::from_vec(vec![0.5, 0.0]),
        )
        .unwrap();
        let v = serde_json::to_value(&seg).unwrap();
        assert_eq!(v["T"], serde_json::json!([[1.0], [2.0]]));
        assert_eq!(v["t"], serde_json::json!([0.5, 0.0]));
        assert!(v["base"]["A"].is_array());
        assert_eq!(serde_json::from_value::<AHPolytope>(v).unwrap(), seg);
    }
}
