//! Sparse linear systems with L1 cost terms, emitted into LPs under a
//! variable mapping. Restrictions and heuristic pieces are both built this way.

use nalgebra::{DMatrix, DVector};

use crate::gcs::EdgeCostL1;
use crate::geometry::SplitPolyhedron;
use crate::lp::{LinearProgram, RowKind};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// `weight * |coeffs . z + offset|`
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AbsTerm {
    pub weight: f64,
    pub coeffs: Vec<(usize, f64)>,
    pub offset: f64,
}

/// `{z : ineq rows <=, eq rows =}` with cost `constant + sum of terms`.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct LinearSystem {
    pub nvars: usize,
    pub ineq: Vec<SparseRow>,
    pub eq: Vec<SparseRow>,
    pub terms: Vec<AbsTerm>,
    pub constant: f64,
}

fn mapped(row: nalgebra::DVectorView<'_, f64>, cols: &[usize]) -> Vec<(usize, f64)> {
    row.iter().zip(cols).filter(|(a, _)| **a != 0.0).map(|(a, &c)| (c, *a)).collect()
}

impl LinearSystem {
    pub fn with_vars(nvars: usize) -> Self {
        Self { nvars, ..Default::default() }
    }

    /// Adds a split polyhedron whose column `j` is system variable `cols[j]`.
    pub fn add_polyhedron(&mut self, split: &SplitPolyhedron, cols: &[usize]) {
        let a = split.inequalities.a();
        for i in 0..a.nrows() {
            let row = a.row(i).transpose();
            self.ineq.push(SparseRow { coeffs: mapped(row.as_view(), cols), rhs: split.inequalities.b()[i] });
        }
        for i in 0..split.eq_matrix.nrows() {
            let row = split.eq_matrix.row(i).transpose();
            self.eq.push(SparseRow { coeffs: mapped(row.as_view(), cols), rhs: split.eq_rhs[i] });
        }
    }

    pub fn add_cost(&mut self, cost: &EdgeCostL1, cols: &[usize]) {
        self.constant += cost.c0;
        for t in &cost.terms {
            let coeffs = t.coeffs.iter().zip(cols).filter(|(a, _)| **a != 0.0).map(|(a, &c)| (c, *a)).collect();
            self.terms.push(AbsTerm { weight: t.weight, coeffs, offset: t.offset });
        }
    }

    /// Pins `z[cols[i]] = values[i]`.
    pub fn pin(&mut self, cols: &[usize], values: &[f64]) {
        for (&c, &v) in cols.iter().zip(values) {
            self.eq.push(SparseRow { coeffs: vec![(c, 1.0)], rhs: v });
        }
    }

    /// Adds the rows and scaled cost to `lp`, where system variable `i` is LP
    /// variable `var_map[i]`. Absolute values are lifted with one nonnegative
    /// auxiliary variable per term.
    pub fn emit(&self, lp: &mut LinearProgram, var_map: &[usize], scale: f64) {
        debug_assert_eq!(var_map.len(), self.nvars);
        let remap = |coeffs: &[(usize, f64)]| coeffs.iter().map(|&(j, a)| (var_map[j], a)).collect::<Vec<_>>();
        for r in &self.ineq {
            lp.add_row(remap(&r.coeffs), RowKind::Le, r.rhs);
        }
        for r in &self.eq {
            lp.add_row(remap(&r.coeffs), RowKind::Eq, r.rhs);
        }
        for t in &self.terms {
            let s = lp.add_vars(1, 0.0, f64::INFINITY);
            lp.add_objective(s, scale * t.weight);
            let lin = remap(&t.coeffs);
            // s >= lin + offset and s >= -(lin + offset)
            lp.add_row(lin.iter().map(|&(j, a)| (j, -a)).chain([(s, 1.0)]), RowKind::Ge, t.offset);
            lp.add_row(lin.iter().copied().chain([(s, 1.0)]), RowKind::Ge, -t.offset);
        }
        lp.add_objective_offset(scale * self.constant);
    }

    pub fn cost_at(&self, z: &[f64]) -> f64 {
        self.constant
            + self.terms.iter().map(|t| t.weight * (t.coeffs.iter().map(|&(j, a)| a * z[j]).sum::<f64>() + t.offset).abs()).sum::<f64>()
    }

    fn dense(rows: &[SparseRow], n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut a = DMatrix::zeros(rows.len(), n);
        for (i, r) in rows.iter().enumerate() {
            for &(j, v) in &r.coeffs {
                a[(i, j)] += v;
            }
        }
        (a, DVector::from_iterator(rows.len(), rows.iter().map(|r| r.rhs)))
    }

    pub fn dense_ineq(&self) -> (DMatrix<f64>, DVector<f64>) {
        Self::dense(&self.ineq, self.nvars)
    }

    pub fn dense_eq(&self) -> (DMatrix<f64>, DVector<f64>) {
        Self::dense(&self.eq, self.nvars)
    }
}
