use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_dim, GeometryError};
use crate::lp::{LinearProgram, LpOutcome, LpSolver, RowKind};

/// `{x : A x <= b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HPolyhedronRepr", into = "HPolyhedronRepr")]
pub struct HPolyhedron {
    a: DMatrix<f64>,
    b: DVector<f64>,
    checked_nonempty: bool,
}

#[derive(Serialize, Deserialize)]
struct HPolyhedronRepr {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl TryFrom<HPolyhedronRepr> for HPolyhedron {
    type Error = GeometryError;

    fn try_from(repr: HPolyhedronRepr) -> Result<Self, Self::Error> {
        let n = repr.dim.or_else(|| repr.a.first().map(Vec::len)).unwrap_or(0);
        let a = matrix_from_rows(&repr.a, n)?;
        HPolyhedron::new(a, DVector::from_vec(repr.b))
    }
}

impl From<HPolyhedron> for HPolyhedronRepr {
    fn from(p: HPolyhedron) -> Self {
        HPolyhedronRepr {
            a: matrix_to_rows(&p.a),
            b: p.b.iter().copied().collect(),
            dim: (p.a.nrows() == 0).then_some(p.a.ncols()),
        }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>, GeometryError> {
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(GeometryError::DimensionMismatch { expected: ncols, got: bad.len() });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Inscribed ball returned by [`HPolyhedron::chebyshev_center`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevBall {
    pub center: DVector<f64>,
    /// `f64::INFINITY` when the polyhedron contains arbitrarily large balls.
    pub radius: f64,
}

/// Inequalities plus the equalities `C x = d` detected as opposing row pairs.
#[derive(Debug, Clone)]
pub struct SplitPolyhedron {
    pub inequalities: HPolyhedron,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

impl HPolyhedron {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, GeometryError> {
        check_dim(a.nrows(), b.len())?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("A"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("b"));
        }
        Ok(Self { a, b, checked_nonempty: false })
    }

    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self, GeometryError> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        Self::new(matrix_from_rows(rows, n)?, DVector::from_column_slice(b))
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self, GeometryError> {
        check_dim(lo.len(), hi.len())?;
        let n = lo.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(i, i)] = 1.0;
            b[i] = hi[i];
            a[(n + i, i)] = -1.0;
            b[n + i] = -lo[i];
        }
        Self::new(a, b)
    }

    /// The whole space `R^n` (no rows).
    pub fn universe(n: usize) -> Self {
        Self { a: DMatrix::zeros(0, n), b: DVector::zeros(0), checked_nonempty: false }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn checked_nonempty(&self) -> bool {
        self.checked_nonempty
    }

    /// True iff `A x <= b + tol` componentwise.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool, GeometryError> {
        check_dim(self.dim(), x.len())?;
        Ok(self.max_violation(x) <= tol)
    }

    /// `max_i (A x - b)_i`, or `-inf` for a polyhedron without rows.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let r = &self.a * x - &self.b;
        r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Stacks the rows of `other` under those of `self`.
    pub fn intersect(&self, other: &HPolyhedron) -> Result<HPolyhedron, GeometryError> {
        check_dim(self.dim(), other.dim())?;
        let m = self.num_rows() + other.num_rows();
        let mut a = DMatrix::zeros(m, self.dim());
        a.rows_mut(0, self.num_rows()).copy_from(&self.a);
        a.rows_mut(self.num_rows(), other.num_rows()).copy_from(&other.a);
        let b = DVector::from_iterator(m, self.b.iter().chain(other.b.iter()).copied());
        HPolyhedron::new(a, b)
    }

    /// Appends `C x = d` as paired inequalities.
    pub fn with_equalities(&self, c: &DMatrix<f64>, d: &DVector<f64>) -> Result<HPolyhedron, GeometryError> {
        check_dim(self.dim(), c.ncols())?;
        check_dim(c.nrows(), d.len())?;
        let neg_c = -c;
        let neg_d = -d;
        let upper = HPolyhedron::new(c.clone(), d.clone())?;
        let lower = HPolyhedron::new(neg_c, neg_d)?;
        self.intersect(&upper)?.intersect(&lower)
    }

    /// Largest inscribed ball. `Err(Empty)` iff the polyhedron is empty.
    pub fn chebyshev_center(&self, solver: &LpSolver) -> Result<ChebyshevBall, GeometryError> {
        let n = self.dim();
        let build = |radius_cap: f64| {
            let mut lp = LinearProgram::new();
            let x = lp.add_free_vars(n);
            let r = lp.add_vars(1, 0.0, radius_cap);
            lp.set_objective(r, -1.0);
            for i in 0..self.num_rows() {
                let row = self.a.row(i);
                let norm = row.norm();
                let coeffs = (0..n).map(|j| (x + j, row[j])).chain(std::iter::once((r, norm)));
                lp.add_row(coeffs, RowKind::Le, self.b[i]);
            }
            lp
        };
        match solver.solve(&build(f64::INFINITY))? {
            LpOutcome::Optimal { x, .. } => Ok(ChebyshevBall {
                center: DVector::from_column_slice(&x[..n]),
                radius: x[n].max(0.0),
            }),
            LpOutcome::Infeasible => Err(GeometryError::Empty),
            LpOutcome::Unbounded => match solver.solve(&build(1.0))? {
                LpOutcome::Optimal { x, .. } => Ok(ChebyshevBall {
                    center: DVector::from_column_slice(&x[..n]),
                    radius: f64::INFINITY,
                }),
                LpOutcome::Infeasible => Err(GeometryError::Empty),
                LpOutcome::Unbounded => Err(GeometryError::Unbounded),
            },
        }
    }

    /// Runs the Chebyshev LP and records the result in `checked_nonempty`.
    pub fn certify_nonempty(&mut self, solver: &LpSolver) -> Result<ChebyshevBall, GeometryError> {
        let ball = self.chebyshev_center(solver)?;
        self.checked_nonempty = true;
        Ok(ball)
    }

    /// Bounded iff every coordinate is bounded above and below.
    pub fn is_bounded(&self, solver: &LpSolver) -> Result<bool, GeometryError> {
        let n = self.dim();
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut lp = LinearProgram::new();
                let x = lp.add_free_vars(n);
                lp.set_objective(x + j, sign);
                for i in 0..self.num_rows() {
                    lp.add_row((0..n).map(|k| (x + k, self.a[(i, k)])), RowKind::Le, self.b[i]);
                }
                match solver.solve(&lp)? {
                    LpOutcome::Optimal { .. } => {}
                    LpOutcome::Unbounded => return Ok(false),
                    LpOutcome::Infeasible => return Err(GeometryError::Empty),
                }
            }
        }
        Ok(true)
    }

    /// Detects opposing row pairs `a x <= b`, `-a x <= -b` and returns them as
    /// equalities, together with the remaining inequalities. Rows with a zero
    /// normal are dropped when satisfied and reported as `Empty` otherwise.
    pub fn split_equalities(&self) -> Result<SplitPolyhedron, GeometryError> {
        let m = self.num_rows();
        let n = self.dim();
        let mut paired = vec![false; m];
        let mut eq_rows: Vec<usize> = Vec::new();
        let mut ineq_rows: Vec<usize> = Vec::new();
        for i in 0..m {
            if paired[i] {
                continue;
            }
            let row_i = self.a.row(i);
            let scale = row_i.amax().max(self.b[i].abs()).max(1.0);
            if row_i.amax() <= 1e-12 * scale {
                if self.b[i] < -1e-9 {
                    return Err(GeometryError::Empty);
                }
                paired[i] = true;
                continue;
            }
            let partner = (i + 1..m).find(|&j| {
                !paired[j]
                    && (0..n).all(|k| (row_i[k] + self.a[(j, k)]).abs() <= 1e-12 * scale)
                    && (self.b[i] + self.b[j]).abs() <= 1e-12 * scale
            });
            match partner {
                Some(j) => {
                    paired[i] = true;
                    paired[j] = true;
                    eq_rows.push(i);
                }
                None => ineq_rows.push(i),
            }
        }
        let pick = |rows: &[usize]| {
            (
                DMatrix::from_fn(rows.len(), n, |r, k| self.a[(rows[r], k)]),
                DVector::from_fn(rows.len(), |r, _| self.b[rows[r]]),
            )
        };
        let (ai, bi) = pick(&ineq_rows);
        let (c, d) = pick(&eq_rows);
        Ok(SplitPolyhedron { inequalities: HPolyhedron::new(ai, bi)?, eq_matrix: c, eq_rhs: d })
    }

    /// Preimage under `x = M y + v`: `{y : A M y <= b - A v}`.
    pub fn preimage(&self, map: &DMatrix<f64>, offset: &DVector<f64>) -> Result<HPolyhedron, GeometryError> {
        check_dim(self.dim(), map.nrows())?;
        check_dim(self.dim(), offset.len())?;
        HPolyhedron::new(&self.a * map, &self.b - &self.a * offset)
    }
}
