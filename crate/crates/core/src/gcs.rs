//! Graph-of-convex-sets data model: vertices carrying polyhedral sets, edges
//! carrying coupling constraints and L1-plus-constant costs, and the
//! successor interface shared by explicit and generated graphs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, HPolyhedron, SplitPolyhedron};
use crate::lp::LpSolver;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(String);

impl VertexId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GcsError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("no edge {0} -> {1}")]
    UnknownEdge(VertexId, VertexId),
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A vertex and its set. The set is split once into inequalities and the
/// equalities hidden in it, which is the form the restriction builders use.
#[derive(Debug, Clone)]
pub struct GcsVertex {
    id: VertexId,
    set: HPolyhedron,
    split: SplitPolyhedron,
}

impl GcsVertex {
    /// Builds a vertex without solving any LP. Use [`GcsVertex::certified`]
    /// or [`validate_problem`] to check the set.
    pub fn new(id: VertexId, set: HPolyhedron) -> Result<Self, GcsError> {
        let split = set.split_equalities()?;
        Ok(Self { id, set, split })
    }

    /// Builds a vertex after certifying that its set is nonempty and bounded.
    pub fn certified(id: VertexId, mut set: HPolyhedron, solver: &LpSolver) -> Result<Self, GcsError> {
        set.certify_nonempty(solver)?;
        if !set.is_bounded(solver)? {
            return Err(GeometryError::Unbounded.into());
        }
        Self::new(id, set)
    }

    pub fn id(&self) -> &VertexId {
        &self.id
    }

    pub fn set(&self) -> &HPolyhedron {
        &self.set
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub(crate) fn split(&self) -> &SplitPolyhedron {
        &self.split
    }
}

/// One absolute-value term `w * |a . (x_u, x_v) + b|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Term {
    #[serde(rename = "w")]
    pub weight: f64,
    #[serde(rename = "a")]
    pub coeffs: Vec<f64>,
    #[serde(rename = "b")]
    pub offset: f64,
}

/// `c(x_u, x_v) = c0 + sum_k w_k |a_k . (x_u, x_v) + b_k|`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EdgeCostL1 {
    pub c0: f64,
    #[serde(default)]
    pub terms: Vec<L1Term>,
}

impl EdgeCostL1 {
    pub fn constant(c0: f64) -> Self {
        Self { c0, terms: Vec::new() }
    }

    /// `c0 + w * ||x_v - x_u||_1` for two points of equal dimension.
    pub fn l1_distance(c0: f64, weight: f64, dim: usize) -> Self {
        let terms = (0..dim)
            .map(|i| {
                let mut coeffs = vec![0.0; 2 * dim];
                coeffs[i] = -1.0;
                coeffs[dim + i] = 1.0;
                L1Term { weight, coeffs, offset: 0.0 }
            })
            .collect();
        Self { c0, terms }
    }

    pub fn evaluate(&self, xu: &DVector<f64>, xv: &DVector<f64>) -> f64 {
        let joint: Vec<f64> = xu.iter().chain(xv.iter()).copied().collect();
        self.c0
            + self
                .terms
                .iter()
                .map(|t| t.weight * (t.coeffs.iter().zip(&joint).map(|(a, x)| a * x).sum::<f64>() + t.offset).abs())
                .sum::<f64>()
    }
}

/// Coupling constraint over `(x_u, x_v)` and the edge cost.
#[derive(Debug, Clone)]
pub struct EdgeData {
    from: VertexId,
    to: VertexId,
    constraint: HPolyhedron,
    split: SplitPolyhedron,
    cost: EdgeCostL1,
}

impl EdgeData {
    pub fn new(from: VertexId, to: VertexId, constraint: HPolyhedron, cost: EdgeCostL1) -> Result<Self, GcsError> {
        let dim = constraint.dim();
        if let Some(t) = cost.terms.iter().find(|t| t.coeffs.len() != dim) {
            return Err(GcsError::Malformed(format!(
                "edge {from} -> {to}: cost term has {} coefficients, constraint space has {dim}",
                t.coeffs.len()
            )));
        }
        let split = constraint.split_equalities()?;
        Ok(Self { from, to, constraint, split, cost })
    }

    /// Edge with no coupling constraint.
    pub fn unconstrained(from: VertexId, to: VertexId, joint_dim: usize, cost: EdgeCostL1) -> Result<Self, GcsError> {
        Self::new(from, to, HPolyhedron::universe(joint_dim), cost)
    }

    pub fn from(&self) -> &VertexId {
        &self.from
    }

    pub fn to(&self) -> &VertexId {
        &self.to
    }

    pub fn constraint(&self) -> &HPolyhedron {
        &self.constraint
    }

    pub fn cost(&self) -> &EdgeCostL1 {
        &self.cost
    }

    pub(crate) fn split(&self) -> &SplitPolyhedron {
        &self.split
    }
}

/// Vertex sequence starting at the source. Revisits are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(Vec<VertexId>);

impl Path {
    pub fn new(vertices: Vec<VertexId>) -> Self {
        assert!(!vertices.is_empty(), "a path has at least one vertex");
        Self(vertices)
    }

    pub fn single(v: VertexId) -> Self {
        Self(vec![v])
    }

    pub fn from_names(names: &[&str]) -> Self {
        Self::new(names.iter().map(|n| VertexId::from(*n)).collect())
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> &VertexId {
        self.0.last().expect("nonempty path")
    }

    pub fn extended(&self, v: VertexId) -> Path {
        let mut vs = self.0.clone();
        vs.push(v);
        Path(vs)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(VertexId::as_str).collect();
        write!(f, "[{}]", names.join(","))
    }
}

/// One point per path vertex, plus the summed edge cost along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<DVector<f64>>,
    pub cost: f64,
}

/// Pairs a coordinate of a vertex point with a coordinate of the target point
/// for the shortcut heuristic. `robot` coordinates use the robot weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortcutTerm {
    pub vertex_coord: usize,
    pub target_coord: usize,
    pub robot: bool,
}

/// An outgoing edge together with its head vertex.
pub type Successor = (Arc<EdgeData>, Arc<GcsVertex>);

/// Successor-generated graph of convex sets.
///
/// Implementations must be pure: the same id always yields the same vertex,
/// edges and successor order (sorted by successor id).
pub trait ImplicitGcs: Send + Sync {
    fn source(&self) -> &VertexId;
    fn target(&self) -> &VertexId;
    fn vertex(&self, id: &VertexId) -> Result<Arc<GcsVertex>, GcsError>;
    fn edge(&self, u: &VertexId, v: &VertexId) -> Result<Arc<EdgeData>, GcsError>;
    fn successors(&self, u: &VertexId) -> Result<Vec<Successor>, GcsError>;

    /// Linear map applied to terminal points before domination checks.
    /// `None` compares full terminal points.
    fn domination_selector(&self, _v: &VertexId) -> Option<DMatrix<f64>> {
        None
    }

    /// Coordinates compared by the shortcut heuristic. Defaults to the
    /// identity pairing when the vertex and target dimensions agree.
    fn shortcut_terms(&self, v: &VertexId) -> Result<Vec<ShortcutTerm>, GcsError> {
        let d = self.vertex(v)?.dim();
        let dt = self.vertex(self.target())?.dim();
        if d != dt {
            return Ok(Vec::new());
        }
        Ok((0..d).map(|i| ShortcutTerm { vertex_coord: i, target_coord: i, robot: false }).collect())
    }

    /// Lower bound on the constant cost of any edge not entering the target.
    fn shortcut_constant(&self) -> f64;

    /// Path length cap used when the caller supplies none.
    fn default_max_path_len(&self) -> Option<usize> {
        None
    }
}

/// A graph held fully in memory.
#[derive(Debug, Clone)]
pub struct ExplicitGcs {
    vertices: BTreeMap<VertexId, Arc<GcsVertex>>,
    edges: BTreeMap<(VertexId, VertexId), Arc<EdgeData>>,
    adjacency: BTreeMap<VertexId, Vec<VertexId>>,
    source: VertexId,
    target: VertexId,
}

impl ExplicitGcs {
    pub fn new(vertices: Vec<GcsVertex>, edges: Vec<EdgeData>, source: VertexId, target: VertexId) -> Result<Self, GcsError> {
        let mut vmap = BTreeMap::new();
        for v in vertices {
            let id = v.id().clone();
            if vmap.insert(id.clone(), Arc::new(v)).is_some() {
                return Err(GcsError::Malformed(format!("duplicate vertex {id}")));
            }
        }
        for id in [&source, &target] {
            if !vmap.contains_key(id) {
                return Err(GcsError::UnknownVertex(id.clone()));
            }
        }
        let mut emap = BTreeMap::new();
        let mut adjacency: BTreeMap<VertexId, Vec<VertexId>> = vmap.keys().map(|k| (k.clone(), Vec::new())).collect();
        for e in edges {
            let key = (e.from().clone(), e.to().clone());
            for id in [&key.0, &key.1] {
                if !vmap.contains_key(id) {
                    return Err(GcsError::UnknownVertex(id.clone()));
                }
            }
            adjacency.get_mut(&key.0).expect("checked").push(key.1.clone());
            if emap.insert(key.clone(), Arc::new(e)).is_some() {
                return Err(GcsError::Malformed(format!("duplicate edge {} -> {}", key.0, key.1)));
            }
        }
        for succ in adjacency.values_mut() {
            succ.sort();
        }
        Ok(Self { vertices: vmap, edges: emap, adjacency, source, target })
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Arc<GcsVertex>> {
        self.vertices.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Arc<EdgeData>> {
        self.edges.values()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Vertices reachable from the source in the discrete graph.
    pub fn reachable_vertices(&self) -> BTreeSet<VertexId> {
        let mut seen = BTreeSet::from([self.source.clone()]);
        let mut queue = VecDeque::from([self.source.clone()]);
        while let Some(u) = queue.pop_front() {
            for v in &self.adjacency[&u] {
                if seen.insert(v.clone()) {
                    queue.push_back(v.clone());
                }
            }
        }
        seen
    }

    pub fn from_json(text: &str) -> Result<Self, GcsError> {
        let raw: ProblemJson = serde_json::from_str(text).map_err(|e| GcsError::Malformed(e.to_string()))?;
        raw.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProblemJson::from(self)).expect("serializable")
    }
}

impl ImplicitGcs for ExplicitGcs {
    fn source(&self) -> &VertexId {
        &self.source
    }

    fn target(&self) -> &VertexId {
        &self.target
    }

    fn vertex(&self, id: &VertexId) -> Result<Arc<GcsVertex>, GcsError> {
        self.vertices.get(id).cloned().ok_or_else(|| GcsError::UnknownVertex(id.clone()))
    }

    fn edge(&self, u: &VertexId, v: &VertexId) -> Result<Arc<EdgeData>, GcsError> {
        self.edges
            .get(&(u.clone(), v.clone()))
            .cloned()
            .ok_or_else(|| GcsError::UnknownEdge(u.clone(), v.clone()))
    }

    fn successors(&self, u: &VertexId) -> Result<Vec<Successor>, GcsError> {
        let succ = self.adjacency.get(u).ok_or_else(|| GcsError::UnknownVertex(u.clone()))?;
        succ.iter().map(|v| Ok((self.edge(u, v)?, self.vertex(v)?))).collect()
    }

    fn shortcut_constant(&self) -> f64 {
        let c = self
            .edges
            .values()
            .filter(|e| e.to() != &self.target)
            .map(|e| e.cost().c0)
            .fold(f64::INFINITY, f64::min);
        if c.is_finite() { c.max(0.0) } else { 0.0 }
    }

    fn default_max_path_len(&self) -> Option<usize> {
        Some(3 * self.reachable_vertices().len())
    }
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    vertices: Vec<VertexJson>,
    edges: Vec<EdgeJson>,
    source: VertexId,
    target: VertexId,
}

#[derive(Serialize, Deserialize)]
struct VertexJson {
    id: VertexId,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    u: VertexId,
    v: VertexId,
    #[serde(rename = "A_e", default)]
    a_e: Vec<Vec<f64>>,
    #[serde(default)]
    b_e: Vec<f64>,
    cost: EdgeCostL1,
}

impl TryFrom<ProblemJson> for ExplicitGcs {
    type Error = GcsError;

    fn try_from(raw: ProblemJson) -> Result<Self, GcsError> {
        let mut dims = BTreeMap::new();
        let mut vertices = Vec::new();
        for v in raw.vertices {
            let set = HPolyhedron::from_rows(&v.a, &v.b)?;
            dims.insert(v.id.clone(), set.dim());
            vertices.push(GcsVertex::new(v.id, set)?);
        }
        let mut edges = Vec::new();
        for e in raw.edges {
            let du = *dims.get(&e.u).ok_or_else(|| GcsError::UnknownVertex(e.u.clone()))?;
            let dv = *dims.get(&e.v).ok_or_else(|| GcsError::UnknownVertex(e.v.clone()))?;
            let constraint = if e.a_e.is_empty() {
                if !e.b_e.is_empty() {
                    return Err(GcsError::Malformed(format!("edge {} -> {}: b_e without A_e", e.u, e.v)));
                }
                HPolyhedron::universe(du + dv)
            } else {
                HPolyhedron::from_rows(&e.a_e, &e.b_e)?
            };
            edges.push(EdgeData::new(e.u, e.v, constraint, e.cost)?);
        }
        ExplicitGcs::new(vertices, edges, raw.source, raw.target)
    }
}

fn rows_of(p: &HPolyhedron) -> (Vec<Vec<f64>>, Vec<f64>) {
    let a = p.a();
    ((0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect(), p.b().iter().copied().collect())
}

impl From<&ExplicitGcs> for ProblemJson {
    fn from(g: &ExplicitGcs) -> Self {
        ProblemJson {
            vertices: g
                .vertices
                .values()
                .map(|v| {
                    let (a, b) = rows_of(v.set());
                    VertexJson { id: v.id().clone(), a, b }
                })
                .collect(),
            edges: g
                .edges
                .values()
                .map(|e| {
                    let (a_e, b_e) = rows_of(e.constraint());
                    EdgeJson { u: e.from().clone(), v: e.to().clone(), a_e, b_e, cost: e.cost().clone() }
                })
                .collect(),
            source: g.source.clone(),
            target: g.target.clone(),
        }
    }
}

/// A problem defect found by [`validate_problem`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptySet(VertexId),
    UnboundedSet(VertexId),
    EdgeDimension { from: VertexId, to: VertexId, expected: usize, got: usize },
    CostNotBoundedAwayFromZero { from: VertexId, to: VertexId },
    NegativeWeight { from: VertexId, to: VertexId },
    SolverFailure(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySet(v) => write!(f, "vertex {v}: set is empty"),
            Violation::UnboundedSet(v) => write!(f, "vertex {v}: set is unbounded"),
            Violation::EdgeDimension { from, to, expected, got } => {
                write!(f, "edge {from} -> {to}: constraint dimension {got}, expected {expected}")
            }
            Violation::CostNotBoundedAwayFromZero { from, to } => {
                write!(f, "edge {from} -> {to}: cost not bounded away from zero")
            }
            Violation::NegativeWeight { from, to } => write!(f, "edge {from} -> {to}: negative cost weight"),
            Violation::SolverFailure(msg) => write!(f, "solver failure during validation: {msg}"),
        }
    }
}

/// Checks set nonemptiness and boundedness, edge dimensions and the cost
/// invariants. An empty report means the problem is well formed.
pub fn validate_problem(g: &ExplicitGcs, solver: &LpSolver) -> Vec<Violation> {
    let mut report = Vec::new();
    for v in g.vertices() {
        match v.set().chebyshev_center(solver) {
            Err(GeometryError::Empty) => {
                report.push(Violation::EmptySet(v.id().clone()));
                continue;
            }
            Err(e) => {
                report.push(Violation::SolverFailure(e.to_string()));
                continue;
            }
            Ok(_) => {}
        }
        match v.set().is_bounded(solver) {
            Ok(true) => {}
            Ok(false) => report.push(Violation::UnboundedSet(v.id().clone())),
            Err(e) => report.push(Violation::SolverFailure(e.to_string())),
        }
    }
    for e in g.edges() {
        let expected = g.vertices[e.from()].dim() + g.vertices[e.to()].dim();
        let got = e.constraint().dim();
        if got != expected {
            report.push(Violation::EdgeDimension { from: e.from().clone(), to: e.to().clone(), expected, got });
        }
        let into_target = e.to() == g.target();
        if e.cost().c0 < 0.0 || (!into_target && e.cost().c0 <= 0.0) {
            report.push(Violation::CostNotBoundedAwayFromZero { from: e.from().clone(), to: e.to().clone() });
        }
        if e.cost().terms.iter().any(|t| t.weight < 0.0) {
            report.push(Violation::NegativeWeight { from: e.from().clone(), to: e.to().clone() });
        }
    }
    report
}
