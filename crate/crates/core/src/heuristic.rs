//! Heuristics representable as a minimum over LP pieces, so that
//! `g + h` stays LP-computable for a fixed path.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::gcs::{GcsError, ImplicitGcs, VertexId};
use crate::geometry::GeometryError;
use crate::linear::LinearSystem;
use crate::lp::{LinearProgram, LpOutcome, LpSolver, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub enum HeuristicSpec {
    Zero,
    /// `mode_switch_constant + weighted L1(x, x_t)` with `x_t` in the target
    /// set, replaced by the true edge cost wherever a direct edge to the
    /// target is cheaper.
    Shortcut { target_point_free: bool, robot_weight: f64, mode_switch_constant: f64 },
    Inflated { inner: Box<HeuristicSpec>, epsilon: f64 },
}

impl HeuristicSpec {
    /// Shortcut with a free target point, robot weight 0.2 and the graph's
    /// own constant lower bound.
    pub fn shortcut_for(g: &dyn ImplicitGcs) -> Self {
        HeuristicSpec::Shortcut { target_point_free: true, robot_weight: 0.2, mode_switch_constant: g.shortcut_constant() }
    }

    pub fn inflated(self, epsilon: f64) -> Self {
        HeuristicSpec::Inflated { inner: Box::new(self), epsilon }
    }

    /// Parses `zero` or `shortcut`, inflated when `epsilon > 1`.
    pub fn from_key(key: &str, g: &dyn ImplicitGcs, epsilon: f64) -> Result<Self, String> {
        let base = match key {
            "zero" => HeuristicSpec::Zero,
            "shortcut" => HeuristicSpec::shortcut_for(g),
            other => return Err(format!("unknown heuristic {other:?}, expected zero or shortcut")),
        };
        if !(epsilon >= 1.0 && epsilon.is_finite()) {
            return Err(format!("epsilon must be a finite value >= 1, got {epsilon}"));
        }
        Ok(if epsilon > 1.0 { base.inflated(epsilon) } else { base })
    }

    fn scale_and_base(&self) -> (f64, &HeuristicSpec) {
        match self {
            HeuristicSpec::Inflated { inner, epsilon } => {
                let (s, b) = inner.scale_and_base();
                (s * epsilon, b)
            }
            other => (1.0, other),
        }
    }
}

impl fmt::Display for HeuristicSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeuristicSpec::Zero => f.write_str("zero"),
            HeuristicSpec::Shortcut { .. } => f.write_str("shortcut"),
            HeuristicSpec::Inflated { inner, epsilon } => write!(f, "{inner}*{epsilon}"),
        }
    }
}

/// One LP piece over `[x_end, extra variables]`, scaled by `scale`.
#[derive(Debug, Clone)]
pub(crate) struct Piece {
    pub system: LinearSystem,
    pub scale: f64,
}

/// A heuristic bound to a graph. Holds the pinned target point when the
/// shortcut target is not free.
#[derive(Debug, Clone)]
pub struct Heuristic {
    spec: HeuristicSpec,
    target_center: Option<Arc<DVector<f64>>>,
}

impl Heuristic {
    pub fn new(spec: HeuristicSpec, g: &dyn ImplicitGcs, solver: &LpSolver) -> Result<Self, GcsError> {
        let target_center = match spec.scale_and_base().1 {
            HeuristicSpec::Shortcut { target_point_free: false, .. } => {
                let t = g.vertex(g.target())?;
                Some(Arc::new(t.set().chebyshev_center(solver)?.center))
            }
            _ => None,
        };
        Ok(Self { spec, target_center })
    }

    pub fn zero() -> Self {
        Self { spec: HeuristicSpec::Zero, target_center: None }
    }

    pub fn spec(&self) -> &HeuristicSpec {
        &self.spec
    }

    pub(crate) fn pieces(&self, g: &dyn ImplicitGcs, v: &VertexId) -> Result<Vec<Piece>, GcsError> {
        let d = g.vertex(v)?.dim();
        let zero = || vec![Piece { system: LinearSystem::with_vars(d), scale: 1.0 }];
        if v == g.target() {
            return Ok(zero());
        }
        let (scale, base) = self.spec.scale_and_base();
        let HeuristicSpec::Shortcut { robot_weight, mode_switch_constant, .. } = base else {
            return Ok(zero());
        };
        let target = g.vertex(g.target())?;
        let dt = target.dim();
        let x: Vec<usize> = (0..d).collect();
        let xt: Vec<usize> = (d..d + dt).collect();
        let both: Vec<usize> = (0..d + dt).collect();
        let mut pieces = Vec::new();

        match g.edge(v, g.target()) {
            Ok(edge) => {
                let mut sys = LinearSystem::with_vars(d + dt);
                sys.add_polyhedron(target.split(), &xt);
                sys.add_polyhedron(edge.split(), &both);
                sys.add_cost(edge.cost(), &both);
                pieces.push(Piece { system: sys, scale });
            }
            Err(GcsError::UnknownEdge(..)) => {}
            Err(e) => return Err(e),
        }

        let mut sys = LinearSystem::with_vars(d + dt);
        sys.add_polyhedron(target.split(), &xt);
        if let Some(center) = &self.target_center {
            sys.pin(&xt, center.as_slice());
        }
        sys.constant = *mode_switch_constant;
        for term in g.shortcut_terms(v)? {
            let w = if term.robot { *robot_weight } else { 1.0 };
            sys.terms.push(crate::linear::AbsTerm {
                weight: w,
                coeffs: vec![(x[term.vertex_coord], 1.0), (xt[term.target_coord], -1.0)],
                offset: 0.0,
            });
        }
        pieces.push(Piece { system: sys, scale });
        Ok(pieces)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HeuristicError {
    #[error(transparent)]
    Gcs(#[from] GcsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `h(x)` at a point of vertex `v`. Returns infinity when no piece is
/// feasible at `x`.
pub fn evaluate_heuristic(
    h: &Heuristic,
    g: &dyn ImplicitGcs,
    v: &VertexId,
    x: &DVector<f64>,
    solver: &LpSolver,
) -> Result<f64, HeuristicError> {
    let d = g.vertex(v)?.dim();
    if x.len() != d {
        return Err(GeometryError::DimensionMismatch { expected: d, got: x.len() }.into());
    }
    let mut best = f64::INFINITY;
    for piece in h.pieces(g, v)? {
        let mut lp = LinearProgram::new();
        let first = lp.add_free_vars(piece.system.nvars);
        let map: Vec<usize> = (first..first + piece.system.nvars).collect();
        let mut sys = piece.system.clone();
        sys.pin(&(0..d).collect::<Vec<_>>(), x.as_slice());
        sys.emit(&mut lp, &map, piece.scale);
        if let LpOutcome::Optimal { objective, .. } = solver.solve(&lp)? {
            best = best.min(objective);
        }
    }
    Ok(best)
}
