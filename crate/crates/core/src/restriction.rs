//! The convex restriction of the shortest-path program to a fixed path, and
//! the sets derived from it: trajectory polytope, reachable set and cost
//! epigraph.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::gcs::{GcsError, ImplicitGcs, Path, Trajectory};
use crate::geometry::{nullspace_reduce, AHPolytope, GeometryError, HPolyhedron};
use crate::heuristic::Heuristic;
use crate::linear::{LinearSystem, SparseRow};
use crate::lp::{LinearProgram, LpOutcome, LpSolver, RowKind, SolverError};

#[derive(Debug, Error)]
pub enum RestrictionError {
    #[error(transparent)]
    Gcs(#[from] GcsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid path {0}: {1}")]
    InvalidPath(Path, String),
}

impl From<crate::heuristic::HeuristicError> for RestrictionError {
    fn from(e: crate::heuristic::HeuristicError) -> Self {
        use crate::heuristic::HeuristicError as H;
        match e {
            H::Gcs(e) => e.into(),
            H::Solver(e) => e.into(),
            H::Geometry(e) => e.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionSolution {
    pub path: Path,
    pub trajectory: Trajectory,
    /// Cost-to-come at the terminal point.
    pub cost_to_come: f64,
    /// Heuristic at the terminal point.
    pub heuristic: f64,
    /// `cost_to_come + heuristic`.
    pub total_estimate: f64,
}

impl RestrictionSolution {
    pub fn terminal_point(&self) -> &DVector<f64> {
        self.trajectory.points.last().expect("nonempty trajectory")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RestrictionOutcome {
    Optimal(RestrictionSolution),
    Infeasible,
}

impl RestrictionOutcome {
    pub fn optimal(self) -> Option<RestrictionSolution> {
        match self {
            RestrictionOutcome::Optimal(s) => Some(s),
            RestrictionOutcome::Infeasible => None,
        }
    }
}

/// Restricted cost-to-come at a point. `Unreachable` stands for +infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostToCome {
    Finite(f64),
    Unreachable,
}

impl CostToCome {
    pub fn is_finite(&self) -> bool {
        matches!(self, CostToCome::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match self {
            CostToCome::Finite(v) => *v,
            CostToCome::Unreachable => f64::INFINITY,
        }
    }
}

/// All vertex and edge constraints of a path over stacked variables
/// `z = (x_0, ..., x_end)`, with the summed edge cost.
#[derive(Debug, Clone)]
pub(crate) struct PathSystem {
    pub system: LinearSystem,
    pub offsets: Vec<usize>,
    pub dims: Vec<usize>,
}

impl PathSystem {
    pub fn build(g: &dyn ImplicitGcs, path: &Path) -> Result<Self, RestrictionError> {
        if path.vertices()[0] != *g.source() {
            return Err(RestrictionError::InvalidPath(path.clone(), format!("does not start at {}", g.source())));
        }
        let vertices = path.vertices().iter().map(|v| g.vertex(v)).collect::<Result<Vec<_>, _>>()?;
        let dims: Vec<usize> = vertices.iter().map(|v| v.dim()).collect();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for d in &dims {
            offsets.push(total);
            total += d;
        }
        let mut system = LinearSystem::with_vars(total);
        let block = |i: usize| (offsets[i]..offsets[i] + dims[i]).collect::<Vec<_>>();
        for (i, v) in vertices.iter().enumerate() {
            system.add_polyhedron(v.split(), &block(i));
        }
        for i in 0..path.len().saturating_sub(1) {
            let edge = g.edge(&path.vertices()[i], &path.vertices()[i + 1])?;
            let cols: Vec<usize> = block(i).into_iter().chain(block(i + 1)).collect();
            system.add_polyhedron(edge.split(), &cols);
            system.add_cost(edge.cost(), &cols);
        }
        Ok(Self { system, offsets, dims })
    }

    pub fn total_dim(&self) -> usize {
        self.system.nvars
    }

    pub fn end_block(&self) -> Vec<usize> {
        let last = self.dims.len() - 1;
        (self.offsets[last]..self.offsets[last] + self.dims[last]).collect()
    }

    /// Adds the stacked variables and constraints to `lp` with the path cost
    /// in the objective. Returns the LP index of `z[0]`.
    pub fn emit(&self, lp: &mut LinearProgram) -> usize {
        let first = lp.add_free_vars(self.total_dim());
        let map: Vec<usize> = (first..first + self.total_dim()).collect();
        self.system.emit(lp, &map, 1.0);
        first
    }

    pub fn trajectory(&self, z: &[f64]) -> Trajectory {
        let points = self
            .offsets
            .iter()
            .zip(&self.dims)
            .map(|(&o, &d)| DVector::from_column_slice(&z[o..o + d]))
            .collect();
        Trajectory { points, cost: self.system.cost_at(z) }
    }

    /// Rows `selector * x_end = y`, or `x_end = y` without a selector.
    fn pin_terminal(&self, lp: &mut LinearProgram, z0: usize, selector: Option<&DMatrix<f64>>, y: &DVector<f64>) -> Result<(), GeometryError> {
        let end = self.end_block();
        match selector {
            None => {
                check(end.len(), y.len())?;
                for (i, &c) in end.iter().enumerate() {
                    lp.add_row([(z0 + c, 1.0)], RowKind::Eq, y[i]);
                }
            }
            Some(p) => {
                check(end.len(), p.ncols())?;
                check(p.nrows(), y.len())?;
                for r in 0..p.nrows() {
                    lp.add_row(end.iter().enumerate().map(|(j, &c)| (z0 + c, p[(r, j)])), RowKind::Eq, y[r]);
                }
            }
        }
        Ok(())
    }

    fn selected_end(&self, z0: usize, selector: Option<&DMatrix<f64>>) -> Vec<Vec<(usize, f64)>> {
        let end = self.end_block();
        match selector {
            None => end.iter().map(|&c| vec![(z0 + c, 1.0)]).collect(),
            Some(p) => (0..p.nrows()).map(|r| end.iter().enumerate().map(|(j, &c)| (z0 + c, p[(r, j)])).collect()).collect(),
        }
    }
}

fn check(expected: usize, got: usize) -> Result<(), GeometryError> {
    if expected == got {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, got })
    }
}

/// Minimizes the path cost plus the heuristic at the terminal point. The
/// heuristic is a minimum over LP pieces; one LP is solved per piece.
pub fn solve_restriction(
    g: &dyn ImplicitGcs,
    path: &Path,
    heuristic: &Heuristic,
    solver: &LpSolver,
) -> Result<RestrictionOutcome, RestrictionError> {
    let sys = PathSystem::build(g, path)?;
    let end = sys.end_block();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for piece in heuristic.pieces(g, path.last())? {
        let mut lp = LinearProgram::new();
        let z0 = sys.emit(&mut lp);
        let extra = lp.add_free_vars(piece.system.nvars - end.len());
        let map: Vec<usize> = end.iter().map(|&c| z0 + c).chain(extra..extra + piece.system.nvars - end.len()).collect();
        piece.system.emit(&mut lp, &map, piece.scale);
        match solver.solve(&lp)? {
            LpOutcome::Optimal { x, objective } => {
                if best.as_ref().is_none_or(|(b, _)| objective < *b) {
                    best = Some((objective, x[z0..z0 + sys.total_dim()].to_vec()));
                }
            }
            LpOutcome::Infeasible => {}
            LpOutcome::Unbounded => return Err(SolverError::Backend("restriction reported unbounded".into()).into()),
        }
    }
    let Some((objective, z)) = best else {
        return Ok(RestrictionOutcome::Infeasible);
    };
    let trajectory = sys.trajectory(&z);
    let cost_to_come = trajectory.cost;
    let h = (objective - cost_to_come).max(0.0);
    Ok(RestrictionOutcome::Optimal(RestrictionSolution {
        path: path.clone(),
        trajectory,
        cost_to_come,
        heuristic: h,
        total_estimate: cost_to_come + h,
    }))
}

/// Optimal cost-to-come with the terminal point pinned to `x`.
pub fn cost_to_come_at_point(g: &dyn ImplicitGcs, path: &Path, x: &DVector<f64>, solver: &LpSolver) -> Result<CostToCome, RestrictionError> {
    cost_to_come_at_selected(g, path, None, x, solver)
}

/// Optimal cost-to-come over trajectories with `selector * x_end = y`.
pub fn cost_to_come_at_selected(
    g: &dyn ImplicitGcs,
    path: &Path,
    selector: Option<&DMatrix<f64>>,
    y: &DVector<f64>,
    solver: &LpSolver,
) -> Result<CostToCome, RestrictionError> {
    let sys = PathSystem::build(g, path)?;
    let mut lp = LinearProgram::new();
    let z0 = sys.emit(&mut lp);
    sys.pin_terminal(&mut lp, z0, selector, y)?;
    match solver.solve(&lp)? {
        LpOutcome::Optimal { x, .. } => Ok(CostToCome::Finite(sys.system.cost_at(&x[z0..z0 + sys.total_dim()]))),
        LpOutcome::Infeasible => Ok(CostToCome::Unreachable),
        LpOutcome::Unbounded => Err(SolverError::Backend("cost-to-come reported unbounded".into()).into()),
    }
}

/// L1-nearest point of the reachable set to `sample`. `None` when the path
/// is infeasible.
pub fn project_to_reachable(
    g: &dyn ImplicitGcs,
    path: &Path,
    sample: &DVector<f64>,
    solver: &LpSolver,
) -> Result<Option<DVector<f64>>, RestrictionError> {
    project_to_selected(g, path, None, sample, solver)
}

pub fn project_to_selected(
    g: &dyn ImplicitGcs,
    path: &Path,
    selector: Option<&DMatrix<f64>>,
    sample: &DVector<f64>,
    solver: &LpSolver,
) -> Result<Option<DVector<f64>>, RestrictionError> {
    let sys = PathSystem::build(g, path)?;
    let mut lp = LinearProgram::new();
    let first = lp.add_free_vars(sys.total_dim());
    let map: Vec<usize> = (first..first + sys.total_dim()).collect();
    // constraints only, the objective is the projection distance
    sys.system.emit(&mut lp, &map, 0.0);
    let rows = sys.selected_end(first, selector);
    check(rows.len(), sample.len())?;
    let e = lp.add_vars(rows.len(), 0.0, f64::INFINITY);
    for (r, row) in rows.iter().enumerate() {
        lp.add_objective(e + r, 1.0);
        lp.add_row(row.iter().copied().chain([(e + r, -1.0)]), RowKind::Le, sample[r]);
        lp.add_row(row.iter().copied().chain([(e + r, 1.0)]), RowKind::Ge, sample[r]);
    }
    match solver.solve(&lp)? {
        LpOutcome::Optimal { x, .. } => Ok(Some(DVector::from_iterator(
            rows.len(),
            rows.iter().map(|row| row.iter().map(|&(j, a)| a * x[j]).sum::<f64>()),
        ))),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(SolverError::Backend("projection reported unbounded".into()).into()),
    }
}

/// All path constraints over the stacked variables, with equalities written
/// as paired inequalities.
pub fn trajectory_polytope(g: &dyn ImplicitGcs, path: &Path) -> Result<HPolyhedron, RestrictionError> {
    let sys = PathSystem::build(g, path)?;
    let (a, b) = sys.system.dense_ineq();
    let (c, d) = sys.system.dense_eq();
    let n = sys.total_dim();
    let base = if a.nrows() == 0 { HPolyhedron::universe(n) } else { HPolyhedron::new(a, b)? };
    if c.nrows() == 0 {
        return Ok(base);
    }
    Ok(base.with_equalities(&c, &d)?)
}

/// Terminal points reachable along the path, as an affine image of the
/// equality-free trajectory polytope. `None` when the path is infeasible.
pub fn reachable_set(g: &dyn ImplicitGcs, path: &Path, solver: &LpSolver) -> Result<Option<AHPolytope>, RestrictionError> {
    reachable_selected(g, path, None, solver)
}

pub fn reachable_selected(
    g: &dyn ImplicitGcs,
    path: &Path,
    selector: Option<&DMatrix<f64>>,
    solver: &LpSolver,
) -> Result<Option<AHPolytope>, RestrictionError> {
    let sys = PathSystem::build(g, path)?;
    let Some(reduced) = reduce(&sys.system, solver)? else {
        return Ok(None);
    };
    let proj = terminal_projection(&sys, selector, 0)?;
    Ok(Some(reduced.transformed(&proj, &DVector::zeros(proj.nrows()))?))
}

/// Pairs `(terminal point, l)` with `l` at least the cost of some trajectory
/// reaching that point. `None` when the path is infeasible.
pub fn cost_epigraph(g: &dyn ImplicitGcs, path: &Path, solver: &LpSolver) -> Result<Option<AHPolytope>, RestrictionError> {
    epigraph_selected(g, path, None, solver)
}

pub fn epigraph_selected(
    g: &dyn ImplicitGcs,
    path: &Path,
    selector: Option<&DMatrix<f64>>,
    solver: &LpSolver,
) -> Result<Option<AHPolytope>, RestrictionError> {
    let sys = PathSystem::build(g, path)?;
    let n = sys.total_dim();
    let nt = sys.system.terms.len();
    // variables (z, s_1..s_nt, l)
    let mut lifted = sys.system.clone();
    lifted.nvars = n + nt + 1;
    lifted.terms.clear();
    lifted.constant = 0.0;
    let l = n + nt;
    let mut budget = vec![(l, -1.0)];
    for (k, t) in sys.system.terms.iter().enumerate() {
        let s = n + k;
        // |a z + b| <= s
        lifted.ineq.push(SparseRow { coeffs: t.coeffs.iter().copied().chain([(s, -1.0)]).collect(), rhs: -t.offset });
        lifted.ineq.push(SparseRow {
            coeffs: t.coeffs.iter().map(|&(j, a)| (j, -a)).chain([(s, -1.0)]).collect(),
            rhs: t.offset,
        });
        if t.weight != 0.0 {
            budget.push((s, t.weight));
        }
    }
    lifted.ineq.push(SparseRow { coeffs: budget, rhs: -sys.system.constant });
    let Some(reduced) = reduce(&lifted, solver)? else {
        return Ok(None);
    };
    let proj = terminal_projection(&sys, selector, nt + 1)?;
    let mut full = DMatrix::zeros(proj.nrows() + 1, lifted.nvars);
    full.view_mut((0, 0), (proj.nrows(), proj.ncols())).copy_from(&proj);
    full[(proj.nrows(), l)] = 1.0;
    Ok(Some(reduced.transformed(&full, &DVector::zeros(full.nrows()))?))
}

/// `selector * E` where `E` extracts the terminal block from the stacked
/// variables, padded with `extra` zero columns.
fn terminal_projection(sys: &PathSystem, selector: Option<&DMatrix<f64>>, extra: usize) -> Result<DMatrix<f64>, GeometryError> {
    let end = sys.end_block();
    let p = match selector {
        Some(p) => {
            check(end.len(), p.ncols())?;
            p.clone()
        }
        None => DMatrix::identity(end.len(), end.len()),
    };
    let mut m = DMatrix::zeros(p.nrows(), sys.total_dim() + extra);
    for (j, &c) in end.iter().enumerate() {
        m.column_mut(c).copy_from(&p.column(j));
    }
    Ok(m)
}

/// Eliminates equalities and checks the remaining base for emptiness.
fn reduce(system: &LinearSystem, solver: &LpSolver) -> Result<Option<AHPolytope>, RestrictionError> {
    let (a, b) = system.dense_ineq();
    let (c, d) = system.dense_eq();
    let reduced = match nullspace_reduce(&a, &b, &c, &d) {
        Ok(r) => r,
        Err(GeometryError::Empty) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    match reduced.base().chebyshev_center(solver) {
        Ok(_) => Ok(Some(reduced)),
        Err(GeometryError::Empty) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Summed edge cost of a trajectory, recomputed from the edge definitions.
pub fn evaluate_trajectory_cost(g: &dyn ImplicitGcs, path: &Path, traj: &Trajectory) -> Result<f64, RestrictionError> {
    check_lengths(path, traj)?;
    let mut total = 0.0;
    for (i, w) in path.vertices().windows(2).enumerate() {
        total += g.edge(&w[0], &w[1])?.cost().evaluate(&traj.points[i], &traj.points[i + 1]);
    }
    Ok(total)
}

/// Largest violation of any vertex or edge constraint along the trajectory.
pub fn trajectory_residual(g: &dyn ImplicitGcs, path: &Path, traj: &Trajectory) -> Result<f64, RestrictionError> {
    check_lengths(path, traj)?;
    let mut worst: f64 = 0.0;
    for (v, x) in path.vertices().iter().zip(&traj.points) {
        let vertex = g.vertex(v)?;
        check(vertex.dim(), x.len())?;
        worst = worst.max(vertex.set().max_violation(x));
    }
    for (i, w) in path.vertices().windows(2).enumerate() {
        let joint = DVector::from_iterator(
            traj.points[i].len() + traj.points[i + 1].len(),
            traj.points[i].iter().chain(traj.points[i + 1].iter()).copied(),
        );
        worst = worst.max(g.edge(&w[0], &w[1])?.constraint().max_violation(&joint));
    }
    Ok(worst)
}

fn check_lengths(path: &Path, traj: &Trajectory) -> Result<(), RestrictionError> {
    if path.len() != traj.points.len() {
        return Err(RestrictionError::InvalidPath(
            path.clone(),
            format!("trajectory has {} points for {} vertices", traj.points.len(), path.len()),
        ));
    }
    Ok(())
}
