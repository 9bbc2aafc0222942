//! Linear programs and the solver backends that run them.
//!
//! Every subproblem in the search (restrictions, projections, membership,
//! containment certificates, Chebyshev centers) is an LP. Callers build a
//! [`LinearProgram`] and hand it to an [`LpSolver`], which counts calls and
//! dispatches to the configured backend.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

/// Environment variable consulted by [`LpSolver::from_env`].
pub const SOLVER_ENV_VAR: &str = "GCSSTAR_SOLVER";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("LP backend failure: {0}")]
    Backend(String),
    #[error("LP solve did not converge: {0}")]
    NotConverged(String),
    #[error("unknown solver backend key {0:?}")]
    UnknownBackend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `minimize c·x + offset` subject to linear rows and per-variable bounds.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    rows: Vec<Row>,
    offset: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `count` free variables and returns the index of the first.
    pub fn add_free_vars(&mut self, count: usize) -> usize {
        self.add_vars(count, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_vars(&mut self, count: usize, lower: f64, upper: f64) -> usize {
        let first = self.objective.len();
        for _ in 0..count {
            self.lower.push(lower);
            self.upper.push(upper);
            self.objective.push(0.0);
        }
        first
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn add_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] += coeff;
    }

    pub fn add_objective_offset(&mut self, offset: f64) {
        self.offset += offset;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Adds a row, dropping exact zero coefficients. Rows that end up empty
    /// are kept so that `0 <= -1` style infeasibility is still detected.
    pub fn add_row(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, kind: RowKind, rhs: f64) {
        let coeffs: Vec<(usize, f64)> = coeffs.into_iter().filter(|(_, c)| *c != 0.0).collect();
        debug_assert!(coeffs.iter().all(|(i, _)| *i < self.num_vars()));
        self.rows.push(Row { coeffs, kind, rhs });
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Evaluates the objective (including the constant offset) at `x`.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, v) in x.iter().enumerate() {
            worst = worst.max(self.lower[i] - v).max(v - self.upper[i]);
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|(i, c)| c * x[*i]).sum();
            let viol = match row.kind {
                RowKind::Le => lhs - row.rhs,
                RowKind::Ge => row.rhs - lhs,
                RowKind::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Backend {
    /// Sparse primal/dual simplex (`microlp`).
    #[default]
    Simplex,
    /// Primal-dual interior point (`clarabel`).
    InteriorPoint,
}

impl Backend {
    pub fn key(&self) -> &'static str {
        match self {
            Backend::Simplex => "microlp",
            Backend::InteriorPoint => "clarabel",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Backend {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "microlp" | "simplex" => Ok(Backend::Simplex),
            "clarabel" | "ipm" | "interior-point" => Ok(Backend::InteriorPoint),
            other => Err(SolverError::UnknownBackend(other.to_string())),
        }
    }
}

/// Solver handle shared by a run. Counts every LP it solves.
#[derive(Debug, Default)]
pub struct LpSolver {
    backend: Backend,
    calls: AtomicUsize,
}

impl Clone for LpSolver {
    fn clone(&self) -> Self {
        Self::new(self.backend)
    }
}

impl LpSolver {
    pub fn new(backend: Backend) -> Self {
        Self { backend, calls: AtomicUsize::new(0) }
    }

    /// Backend chosen by `GCSSTAR_SOLVER`, defaulting to the simplex backend.
    pub fn from_env() -> Result<Self, SolverError> {
        match std::env::var(SOLVER_ENV_VAR) {
            Ok(key) if !key.trim().is_empty() => Ok(Self::new(key.parse()?)),
            _ => Ok(Self::default()),
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome, SolverError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if lp.num_vars() == 0 {
            return Ok(solve_empty(lp));
        }
        match self.backend {
            Backend::Simplex => solve_simplex(lp),
            Backend::InteriorPoint => solve_interior_point(lp),
        }
    }
}

const EMPTY_TOL: f64 = 1e-9;

fn solve_empty(lp: &LinearProgram) -> LpOutcome {
    let feasible = lp.rows.iter().all(|row| match row.kind {
        RowKind::Le => 0.0 <= row.rhs + EMPTY_TOL,
        RowKind::Ge => 0.0 >= row.rhs - EMPTY_TOL,
        RowKind::Eq => row.rhs.abs() <= EMPTY_TOL,
    });
    if feasible {
        LpOutcome::Optimal { x: Vec::new(), objective: lp.offset }
    } else {
        LpOutcome::Infeasible
    }
}

fn solve_simplex(lp: &LinearProgram) -> Result<LpOutcome, SolverError> {
    use microlp::{ComparisonOp, Error, OptimizationDirection, Problem};

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..lp.num_vars())
        .map(|i| problem.add_var(lp.objective[i], (lp.lower[i], lp.upper[i])))
        .collect();
    for row in &lp.rows {
        if row.coeffs.is_empty() {
            // microlp rejects empty expressions; decide them here.
            let ok = match row.kind {
                RowKind::Le => 0.0 <= row.rhs + EMPTY_TOL,
                RowKind::Ge => 0.0 >= row.rhs - EMPTY_TOL,
                RowKind::Eq => row.rhs.abs() <= EMPTY_TOL,
            };
            if !ok {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        let op = match row.kind {
            RowKind::Le => ComparisonOp::Le,
            RowKind::Eq => ComparisonOp::Eq,
            RowKind::Ge => ComparisonOp::Ge,
        };
        let expr: Vec<_> = row.coeffs.iter().map(|(i, c)| (vars[*i], *c)).collect();
        problem.add_constraint(expr, op, row.rhs);
    }
    match problem.solve() {
        Ok(outcome) => {
            let solution = outcome
                .into_solution()
                .map_err(|_| SolverError::NotConverged("simplex interrupted".into()))?;
            let x: Vec<f64> = vars.iter().map(|v| solution.var_value(*v)).collect();
            let objective = lp.objective_at(&x);
            Ok(LpOutcome::Optimal { x, objective })
        }
        Err(Error::Infeasible) => Ok(LpOutcome::Infeasible),
        Err(Error::Unbounded) => Ok(LpOutcome::Unbounded),
        Err(e) => Err(SolverError::Backend(e.to_string())),
    }
}

fn solve_interior_point(lp: &LinearProgram) -> Result<LpOutcome, SolverError> {
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{
        DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT,
    };

    let n = lp.num_vars();
    // Clarabel form: A x + s = b, s in cone. Equalities first, then inequalities.
    let mut eq_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut le_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for row in &lp.rows {
        match row.kind {
            RowKind::Eq => eq_rows.push((row.coeffs.clone(), row.rhs)),
            RowKind::Le => le_rows.push((row.coeffs.clone(), row.rhs)),
            RowKind::Ge => le_rows.push((row.coeffs.iter().map(|(i, c)| (*i, -c)).collect(), -row.rhs)),
        }
    }
    for i in 0..n {
        if lp.lower[i] == lp.upper[i] {
            eq_rows.push((vec![(i, 1.0)], lp.lower[i]));
            continue;
        }
        if lp.upper[i].is_finite() {
            le_rows.push((vec![(i, 1.0)], lp.upper[i]));
        }
        if lp.lower[i].is_finite() {
            le_rows.push((vec![(i, -1.0)], -lp.lower[i]));
        }
    }
    let m = eq_rows.len() + le_rows.len();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::with_capacity(m);
    for (r, (coeffs, rhs)) in eq_rows.iter().chain(le_rows.iter()).enumerate() {
        for (i, c) in coeffs {
            triplets.push((r, *i, *c));
        }
        b.push(*rhs);
    }
    let a = csc_from_triplets(m, n, triplets);
    let p = CscMatrix::<f64>::zeros((n, n));
    let mut cones = Vec::new();
    if !eq_rows.is_empty() {
        cones.push(ZeroConeT(eq_rows.len()));
    }
    if !le_rows.is_empty() {
        cones.push(NonnegativeConeT(le_rows.len()));
    }
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(400)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .build()
        .map_err(|e| SolverError::Backend(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &lp.objective, &a, &b, &cones, settings)
        .map_err(|e| SolverError::Backend(format!("{e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let x = solver.solution.x.clone();
            let objective = lp.objective_at(&x);
            Ok(LpOutcome::Optimal { x, objective })
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Ok(LpOutcome::Infeasible),
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Ok(LpOutcome::Unbounded),
        other => Err(SolverError::NotConverged(format!("{other:?}"))),
    }
}

fn csc_from_triplets(m: usize, n: usize, mut triplets: Vec<(usize, usize, f64)>) -> clarabel::algebra::CscMatrix<f64> {
    triplets.sort_by_key(|t| (t.1, t.0));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval: Vec<usize> = Vec::with_capacity(triplets.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
    let mut prev: Option<(usize, usize)> = None;
    for (r, c, v) in triplets {
        if prev == Some((r, c)) {
            *nzval.last_mut().expect("previous entry") += v;
            continue;
        }
        prev = Some((r, c));
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
    }
    for c in 0..n {
        colptr[c + 1] += colptr[c];
    }
    clarabel::algebra::CscMatrix::new(m, n, colptr, rowval, nzval)
}
