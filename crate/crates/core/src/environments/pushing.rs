use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stones::{polygon_to_hpolyhedron, Polygon};
use crate::gcs::{EdgeCostL1, EdgeData, GcsError, GcsVertex, ImplicitGcs, L1Term, Path, ShortcutTerm, Successor, Trajectory, VertexId};
use crate::geometry::HPolyhedron;

const PUSH1_JSON: &str = include_str!("../../fixtures/push1.json");
const GEOM_TOL: f64 = 1e-9;

/// A translating polygon. Static bodies keep their polygon in world
/// coordinates; movable ones are placed at a reference position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub name: String,
    pub polygon: Polygon,
    pub movable: bool,
    #[serde(default)]
    pub actuated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub body: String,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

fn one() -> f64 {
    1.0
}

fn default_actuation() -> f64 {
    2.0
}

fn default_contact_force() -> f64 {
    10.0
}

/// Environment description as stored in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushingEnvironment {
    pub bodies: Vec<BodySpec>,
    pub workspace: BoxRegion,
    pub start: BTreeMap<String, [f64; 2]>,
    pub goal: Vec<GoalRegion>,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "default_actuation")]
    pub actuation_limit: f64,
    #[serde(default = "default_contact_force")]
    pub contact_force_limit: f64,
    #[serde(default)]
    pub max_path_len: Option<usize>,
}

impl PushingEnvironment {
    pub fn from_json(text: &str) -> Result<Self, GcsError> {
        serde_json::from_str(text).map_err(|e| GcsError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Committed robot-and-box fixture: push the box one unit along +x.
pub fn push1_environment() -> PushingEnvironment {
    PushingEnvironment::from_json(PUSH1_JSON).expect("committed fixture parses")
}

/// Per-pair entry of a contact mode. `side` 0 refers to the lower-indexed
/// body of the pair, 1 to the other one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairMode {
    /// Face `face` of body `side` separates the pair.
    Separating { side: u8, face: usize },
    /// Face `first` of the first body touches the antiparallel face `second` of the other.
    FaceFace { first: usize, second: usize },
    /// Face `face` of body `side` touches vertex `vertex` of the other body.
    FaceVertex { side: u8, face: usize, vertex: usize },
}

impl PairMode {
    pub fn is_contact(&self) -> bool {
        !matches!(self, PairMode::Separating { .. })
    }
}

impl fmt::Display for PairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairMode::Separating { side, face } => write!(f, "n{side}.{face}"),
            PairMode::FaceFace { first, second } => write!(f, "ff{first}.{second}"),
            PairMode::FaceVertex { side, face, vertex } => write!(f, "fv{side}.{face}.{vertex}"),
        }
    }
}

impl FromStr for PairMode {
    type Err = GcsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GcsError::Malformed(format!("bad pair mode {s:?}"));
        let nums = |rest: &str| rest.split('.').map(|p| p.parse::<usize>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>();
        let side = |v: usize| if v <= 1 { Ok(v as u8) } else { Err(bad()) };
        if let Some(rest) = s.strip_prefix("ff") {
            match nums(rest)?[..] {
                [first, second] => Ok(PairMode::FaceFace { first, second }),
                _ => Err(bad()),
            }
        } else if let Some(rest) = s.strip_prefix("fv") {
            match nums(rest)?[..] {
                [s, face, vertex] => Ok(PairMode::FaceVertex { side: side(s)?, face, vertex }),
                _ => Err(bad()),
            }
        } else if let Some(rest) = s.strip_prefix('n') {
            match nums(rest)?[..] {
                [s, face] => Ok(PairMode::Separating { side: side(s)?, face }),
                _ => Err(bad()),
            }
        } else {
            Err(bad())
        }
    }
}

/// One entry per body pair, in the problem's pair order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContactModeKey(pub Vec<PairMode>);

impl fmt::Display for ContactModeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|m| m.to_string()).collect();
        write!(f, "{}", parts.join("|"))
    }
}

impl FromStr for ContactModeKey {
    type Err = GcsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Ok(Self(Vec::new()));
        }
        s.split('|').map(PairMode::from_str).collect::<Result<_, _>>().map(Self)
    }
}

/// Variable offsets inside a pushing vertex. Each knot holds the positions
/// of movable bodies, then robot actuation, then one force magnitude per
/// contacting pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PushingVertexLayout {
    pub num_movable: usize,
    pub num_robots: usize,
    /// Pair indices in contact, in pair order.
    pub contacts: Vec<usize>,
}

impl PushingVertexLayout {
    pub const KNOTS: usize = 2;

    pub fn knot_size(&self) -> usize {
        2 * self.num_movable + 2 * self.num_robots + self.contacts.len()
    }

    pub fn dim(&self) -> usize {
        Self::KNOTS * self.knot_size()
    }

    pub fn position(&self, knot: usize, movable: usize) -> usize {
        knot * self.knot_size() + 2 * movable
    }

    pub fn actuation(&self, knot: usize, robot: usize) -> usize {
        knot * self.knot_size() + 2 * self.num_movable + 2 * robot
    }

    /// Offset of the force magnitude for the `c`-th contacting pair.
    pub fn force(&self, knot: usize, c: usize) -> usize {
        knot * self.knot_size() + 2 * self.num_movable + 2 * self.num_robots + c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    Source(ContactModeKey),
    Mode(ContactModeKey),
    Target,
}

const SOURCE_PREFIX: &str = "S:";
const TARGET_ID: &str = "T";

#[derive(Debug, Clone, Copy)]
struct Face {
    start: [f64; 2],
    end: [f64; 2],
    normal: [f64; 2],
    tangent: [f64; 2],
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn faces(poly: &[[f64; 2]]) -> Vec<Face> {
    (0..poly.len())
        .map(|i| {
            let (start, end) = (poly[i], poly[(i + 1) % poly.len()]);
            let (dx, dy) = (end[0] - start[0], end[1] - start[1]);
            let len = dx.hypot(dy);
            Face { start, end, normal: [dy / len, -dx / len], tangent: [dx / len, dy / len] }
        })
        .collect()
}

/// Dense rows over one vertex's variables.
struct Rows {
    dim: usize,
    ineq: Vec<Vec<f64>>,
    ineq_rhs: Vec<f64>,
    eq: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
}

impl Rows {
    fn new(dim: usize) -> Self {
        Self { dim, ineq: Vec::new(), ineq_rhs: Vec::new(), eq: Vec::new(), eq_rhs: Vec::new() }
    }

    fn dense(&self, coeffs: &[(usize, f64)]) -> Vec<f64> {
        let mut row = vec![0.0; self.dim];
        for &(j, a) in coeffs {
            row[j] += a;
        }
        row
    }

    fn le(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        let row = self.dense(coeffs);
        self.ineq.push(row);
        self.ineq_rhs.push(rhs);
    }

    fn eq(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        let row = self.dense(coeffs);
        self.eq.push(row);
        self.eq_rhs.push(rhs);
    }

    fn build(self) -> Result<HPolyhedron, GcsError> {
        let base = if self.ineq.is_empty() {
            HPolyhedron::universe(self.dim)
        } else {
            HPolyhedron::from_rows(&self.ineq, &self.ineq_rhs)?
        };
        if self.eq.is_empty() {
            return Ok(base);
        }
        let c = DMatrix::from_fn(self.eq.len(), self.dim, |i, j| self.eq[i][j]);
        Ok(base.with_equalities(&c, &DVector::from_vec(self.eq_rhs))?)
    }
}

/// Contact force contribution: body `pushed` receives `+lambda * normal`,
/// body `pusher` receives `-lambda * normal`.
struct ContactForce {
    normal: [f64; 2],
    pushed: usize,
    pusher: usize,
}

/// Translation-only planar pushing as an implicit graph of convex sets.
/// Vertices are contact modes; the source is the start mode with the first
/// knot pinned to the start configuration; `T` holds final positions of all
/// movable bodies with goal bodies inside their goal boxes.
#[derive(Debug)]
pub struct PushingProblem {
    env: PushingEnvironment,
    faces: Vec<Vec<Face>>,
    pairs: Vec<(usize, usize)>,
    options: Vec<Vec<PairMode>>,
    movable: Vec<usize>,
    movable_index: Vec<Option<usize>>,
    robot_index: Vec<Option<usize>>,
    start_mode: ContactModeKey,
    source: VertexId,
    target: VertexId,
    vertex_cache: RwLock<HashMap<VertexId, Arc<GcsVertex>>>,
}

impl PushingProblem {
    pub fn new(env: PushingEnvironment) -> Result<Self, GcsError> {
        let bad = |msg: String| Err(GcsError::Malformed(msg));
        let mut names = BTreeMap::new();
        for (i, b) in env.bodies.iter().enumerate() {
            polygon_to_hpolyhedron(&b.polygon).map_err(|e| GcsError::Malformed(format!("body {}: {e}", b.name)))?;
            if b.actuated && !b.movable {
                return bad(format!("body {} is actuated but not movable", b.name));
            }
            if names.insert(b.name.clone(), i).is_some() {
                return bad(format!("duplicate body name {}", b.name));
            }
        }
        let ws = &env.workspace;
        if !(ws.lo[0] < ws.hi[0] && ws.lo[1] < ws.hi[1]) {
            return bad("workspace box is empty".into());
        }
        if env.mu <= 0.0 || env.actuation_limit < 0.0 || env.contact_force_limit < 0.0 {
            return bad("mu must be positive and force limits nonnegative".into());
        }
        for name in env.start.keys().chain(env.goal.iter().map(|g| &g.body)).chain(env.weights.keys()) {
            match names.get(name) {
                Some(&i) if env.bodies[i].movable => {}
                _ => return bad(format!("{name:?} is not a movable body")),
            }
        }
        let mut movable_index = vec![None; env.bodies.len()];
        let mut robot_index = vec![None; env.bodies.len()];
        let mut movable = Vec::new();
        let mut robots = 0;
        for (i, b) in env.bodies.iter().enumerate() {
            if b.movable {
                if !env.start.contains_key(&b.name) {
                    return bad(format!("no start position for {}", b.name));
                }
                movable_index[i] = Some(movable.len());
                movable.push(i);
            }
            if b.actuated {
                robot_index[i] = Some(robots);
                robots += 1;
            }
        }
        let faces: Vec<Vec<Face>> = env.bodies.iter().map(|b| faces(&b.polygon)).collect();
        let mut pairs = Vec::new();
        for i in 0..env.bodies.len() {
            for k in i + 1..env.bodies.len() {
                if env.bodies[i].movable || env.bodies[k].movable {
                    pairs.push((i, k));
                }
            }
        }
        let mut problem = Self {
            faces,
            options: Vec::new(),
            pairs,
            movable,
            movable_index,
            robot_index,
            start_mode: ContactModeKey(Vec::new()),
            source: VertexId::from(SOURCE_PREFIX),
            target: VertexId::from(TARGET_ID),
            vertex_cache: RwLock::new(HashMap::new()),
            env,
        };
        problem.options = (0..problem.pairs.len()).map(|q| problem.enumerate_options(q)).collect();
        problem.start_mode = problem.find_start_mode()?;
        problem.source = VertexId::new(format!("{SOURCE_PREFIX}{}", problem.start_mode));
        Ok(problem)
    }

    pub fn from_json(text: &str) -> Result<Self, GcsError> {
        Self::new(PushingEnvironment::from_json(text)?)
    }

    pub fn environment(&self) -> &PushingEnvironment {
        &self.env
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair_options(&self, pair: usize) -> &[PairMode] {
        &self.options[pair]
    }

    pub fn start_mode(&self) -> &ContactModeKey {
        &self.start_mode
    }

    /// Body indices of the movable bodies, in layout order.
    pub fn movable_bodies(&self) -> &[usize] {
        &self.movable
    }

    pub fn mode_vertex_id(&self, key: &ContactModeKey) -> VertexId {
        VertexId::new(key.to_string())
    }

    fn sides(&self, pair: usize, side: u8) -> (usize, usize) {
        let (i, k) = self.pairs[pair];
        if side == 0 { (i, k) } else { (k, i) }
    }

    fn is_extreme(&self, face: &Face, body: usize, vertex: usize) -> bool {
        let poly = &self.env.bodies[body].polygon;
        let lowest = poly.iter().map(|w| dot(face.normal, *w)).fold(f64::INFINITY, f64::min);
        dot(face.normal, poly[vertex]) <= lowest + GEOM_TOL
    }

    fn enumerate_options(&self, pair: usize) -> Vec<PairMode> {
        let (i, k) = self.pairs[pair];
        let mut out = Vec::new();
        for side in 0..2u8 {
            let (b, _) = self.sides(pair, side);
            out.extend((0..self.faces[b].len()).map(|face| PairMode::Separating { side, face }));
        }
        for (fi, a) in self.faces[i].iter().enumerate() {
            for (fk, c) in self.faces[k].iter().enumerate() {
                if dot(a.normal, c.normal) <= -1.0 + GEOM_TOL {
                    out.push(PairMode::FaceFace { first: fi, second: fk });
                }
            }
        }
        for side in 0..2u8 {
            let (b, o) = self.sides(pair, side);
            for (face, fc) in self.faces[b].iter().enumerate() {
                for vertex in 0..self.env.bodies[o].polygon.len() {
                    if self.is_extreme(fc, o, vertex) {
                        out.push(PairMode::FaceVertex { side, face, vertex });
                    }
                }
            }
        }
        out
    }

    fn start_position(&self, body: usize) -> [f64; 2] {
        if self.env.bodies[body].movable { self.env.start[&self.env.bodies[body].name] } else { [0.0, 0.0] }
    }

    fn find_start_mode(&self) -> Result<ContactModeKey, GcsError> {
        let mut key = Vec::with_capacity(self.pairs.len());
        for q in 0..self.pairs.len() {
            let pick = self.options[q].iter().copied().find(|m| match *m {
                PairMode::Separating { side, face } => {
                    let (b, o) = self.sides(q, side);
                    let (coeffs, rhs) = self.separation_row(b, face, o);
                    let (pb, po) = (self.start_position(b), self.start_position(o));
                    dot(coeffs, pb) - dot(coeffs, po) <= rhs + GEOM_TOL
                }
                _ => false,
            });
            match pick {
                Some(m) => key.push(m),
                None => {
                    let (i, k) = self.pairs[q];
                    return Err(GcsError::Malformed(format!(
                        "no mode contains the start configuration: {} and {} overlap",
                        self.env.bodies[i].name, self.env.bodies[k].name
                    )));
                }
            }
        }
        Ok(ContactModeKey(key))
    }

    /// `n . p_b - n . p_o <= rhs` keeps body `o` on the outer side of face `face` of `b`.
    fn separation_row(&self, b: usize, face: usize, o: usize) -> ([f64; 2], f64) {
        let f = &self.faces[b][face];
        let lowest = self.env.bodies[o].polygon.iter().map(|w| dot(f.normal, *w)).fold(f64::INFINITY, f64::min);
        (f.normal, lowest - dot(f.normal, f.start))
    }

    fn validate_key(&self, key: &ContactModeKey) -> Result<(), GcsError> {
        if key.0.len() != self.pairs.len() || key.0.iter().zip(&self.options).any(|(m, opts)| !opts.contains(m)) {
            return Err(GcsError::UnknownVertex(self.mode_vertex_id(key)));
        }
        Ok(())
    }

    fn parse(&self, id: &VertexId) -> Result<Node, GcsError> {
        let s = id.as_str();
        let unknown = || GcsError::UnknownVertex(id.clone());
        if s == TARGET_ID {
            return Ok(Node::Target);
        }
        let (source, body) = match s.strip_prefix(SOURCE_PREFIX) {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let key: ContactModeKey = body.parse().map_err(|_| unknown())?;
        self.validate_key(&key).map_err(|_| unknown())?;
        if source {
            if key != self.start_mode {
                return Err(unknown());
            }
            Ok(Node::Source(key))
        } else {
            Ok(Node::Mode(key))
        }
    }

    pub fn layout(&self, key: &ContactModeKey) -> PushingVertexLayout {
        PushingVertexLayout {
            num_movable: self.movable.len(),
            num_robots: self.robot_index.iter().flatten().count(),
            contacts: key.0.iter().enumerate().filter(|(_, m)| m.is_contact()).map(|(q, _)| q).collect(),
        }
    }

    fn layout_of(&self, node: &Node) -> Option<PushingVertexLayout> {
        match node {
            Node::Source(k) | Node::Mode(k) => Some(self.layout(k)),
            Node::Target => None,
        }
    }

    fn pos_terms(&self, layout: &PushingVertexLayout, knot: usize, body: usize, coef: [f64; 2]) -> Vec<(usize, f64)> {
        match self.movable_index[body] {
            Some(m) => {
                let p = layout.position(knot, m);
                vec![(p, coef[0]), (p + 1, coef[1])]
            }
            None => Vec::new(),
        }
    }

    /// Bounds keeping the whole polygon of `body` inside the workspace.
    fn workspace_bounds(&self, body: usize) -> ([f64; 2], [f64; 2]) {
        let poly = &self.env.bodies[body].polygon;
        let ws = &self.env.workspace;
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for d in 0..2 {
            lo[d] = ws.lo[d] - poly.iter().map(|v| v[d]).fold(f64::INFINITY, f64::min);
            hi[d] = ws.hi[d] - poly.iter().map(|v| v[d]).fold(f64::NEG_INFINITY, f64::max);
        }
        (lo, hi)
    }

    fn contact_force(&self, pair: usize, mode: PairMode) -> Option<ContactForce> {
        match mode {
            PairMode::Separating { .. } => None,
            PairMode::FaceFace { first, .. } => {
                let (b, o) = self.sides(pair, 0);
                Some(ContactForce { normal: self.faces[b][first].normal, pushed: o, pusher: b })
            }
            PairMode::FaceVertex { side, face, .. } => {
                let (b, o) = self.sides(pair, side);
                Some(ContactForce { normal: self.faces[b][face].normal, pushed: o, pusher: b })
            }
        }
    }

    /// Rows tying vertex `w` of `o` (or the face from `w_ge` to `w_le`) to
    /// face `face` of `b` at one knot.
    #[allow(clippy::too_many_arguments)]
    fn contact_rows(&self, rows: &mut Rows, layout: &PushingVertexLayout, knot: usize, b: usize, face: usize, o: usize, w_ge: [f64; 2], w_le: [f64; 2]) {
        let f = self.faces[b][face];
        let neg = |v: [f64; 2]| [-v[0], -v[1]];
        let pair_terms = |cb: [f64; 2], co: [f64; 2]| {
            let mut t = self.pos_terms(layout, knot, b, cb);
            t.extend(self.pos_terms(layout, knot, o, co));
            t
        };
        // n.(p_o + w) = n.(p_b + start)
        rows.eq(&pair_terms(neg(f.normal), f.normal), dot(f.normal, f.start) - dot(f.normal, w_ge));
        // t.(p_o + w_ge) >= t.(p_b + start) and t.(p_o + w_le) <= t.(p_b + end)
        rows.le(&pair_terms(f.tangent, neg(f.tangent)), dot(f.tangent, w_ge) - dot(f.tangent, f.start));
        rows.le(&pair_terms(neg(f.tangent), f.tangent), dot(f.tangent, f.end) - dot(f.tangent, w_le));
    }

    /// The convex set of a mode vertex over its layout variables.
    pub fn vertex_set(&self, key: &ContactModeKey) -> Result<HPolyhedron, GcsError> {
        self.validate_key(key)?;
        self.build_set(key, false)
    }

    fn build_set(&self, key: &ContactModeKey, pin_start: bool) -> Result<HPolyhedron, GcsError> {
        let layout = self.layout(key);
        let mut rows = Rows::new(layout.dim());
        let amax = self.env.actuation_limit;
        for knot in 0..PushingVertexLayout::KNOTS {
            for (m, &body) in self.movable.iter().enumerate() {
                let (lo, hi) = self.workspace_bounds(body);
                let p = layout.position(knot, m);
                for d in 0..2 {
                    rows.le(&[(p + d, 1.0)], hi[d]);
                    rows.le(&[(p + d, -1.0)], -lo[d]);
                }
            }
            for r in 0..layout.num_robots {
                let a = layout.actuation(knot, r);
                for d in 0..2 {
                    rows.le(&[(a + d, 1.0)], amax);
                    rows.le(&[(a + d, -1.0)], amax);
                }
            }
            for c in 0..layout.contacts.len() {
                let l = layout.force(knot, c);
                rows.le(&[(l, -1.0)], 0.0);
                rows.le(&[(l, 1.0)], self.env.contact_force_limit);
            }
            for (q, mode) in key.0.iter().enumerate() {
                match *mode {
                    PairMode::Separating { side, face } => {
                        let (b, o) = self.sides(q, side);
                        let (n, rhs) = self.separation_row(b, face, o);
                        let mut t = self.pos_terms(&layout, knot, b, n);
                        t.extend(self.pos_terms(&layout, knot, o, [-n[0], -n[1]]));
                        rows.le(&t, rhs);
                    }
                    PairMode::FaceFace { first, second } => {
                        let (b, o) = self.sides(q, 0);
                        let g = self.faces[o][second];
                        self.contact_rows(&mut rows, &layout, knot, b, first, o, g.start, g.end);
                    }
                    PairMode::FaceVertex { side, face, vertex } => {
                        let (b, o) = self.sides(q, side);
                        let w = self.env.bodies[o].polygon[vertex];
                        self.contact_rows(&mut rows, &layout, knot, b, face, o, w, w);
                    }
                }
            }
        }
        // p^1 - p^0 = mu * (F^0 + F^1) / 2, one row per coordinate
        let half_mu = 0.5 * self.env.mu;
        for (m, &body) in self.movable.iter().enumerate() {
            for d in 0..2 {
                let mut t = vec![(layout.position(1, m) + d, 1.0), (layout.position(0, m) + d, -1.0)];
                for knot in 0..PushingVertexLayout::KNOTS {
                    if let Some(r) = self.robot_index[body] {
                        t.push((layout.actuation(knot, r) + d, -half_mu));
                    }
                    for (c, &q) in layout.contacts.iter().enumerate() {
                        let f = self.contact_force(q, key.0[q]).expect("contact pair");
                        let sign = if f.pushed == body {
                            1.0
                        } else if f.pusher == body {
                            -1.0
                        } else {
                            continue;
                        };
                        t.push((layout.force(knot, c), -half_mu * sign * f.normal[d]));
                    }
                }
                rows.eq(&t, 0.0);
            }
        }
        if pin_start {
            for (m, &body) in self.movable.iter().enumerate() {
                let p = layout.position(0, m);
                let s = self.start_position(body);
                rows.eq(&[(p, 1.0)], s[0]);
                rows.eq(&[(p + 1, 1.0)], s[1]);
            }
        }
        rows.build()
    }

    fn target_set(&self) -> Result<HPolyhedron, GcsError> {
        let n = 2 * self.movable.len();
        let mut rows = Rows::new(n);
        for (m, &body) in self.movable.iter().enumerate() {
            let (mut lo, mut hi) = self.workspace_bounds(body);
            for g in self.env.goal.iter().filter(|g| g.body == self.env.bodies[body].name) {
                for d in 0..2 {
                    lo[d] = lo[d].max(g.lo[d]);
                    hi[d] = hi[d].min(g.hi[d]);
                }
            }
            for d in 0..2 {
                rows.le(&[(2 * m + d, 1.0)], hi[d]);
                rows.le(&[(2 * m + d, -1.0)], -lo[d]);
            }
        }
        rows.build()
    }

    /// All keys differing from `key` in exactly one pair.
    pub fn pushing_successors(&self, key: &ContactModeKey) -> Vec<ContactModeKey> {
        let mut out = Vec::new();
        for (q, current) in key.0.iter().enumerate() {
            for alt in self.options[q].iter().filter(|m| *m != current) {
                let mut next = key.clone();
                next.0[q] = *alt;
                out.push(next);
            }
        }
        out
    }

    fn differs_in_one_pair(a: &ContactModeKey, b: &ContactModeKey) -> bool {
        a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count() == 1
    }

    fn build_vertex(&self, id: &VertexId) -> Result<GcsVertex, GcsError> {
        let set = match self.parse(id)? {
            Node::Source(k) => self.build_set(&k, true)?,
            Node::Mode(k) => self.build_set(&k, false)?,
            Node::Target => self.target_set()?,
        };
        GcsVertex::new(id.clone(), set)
    }

    /// Positions of each movable body along a solved trajectory, two knots
    /// per mode vertex plus the final position in `T`.
    pub fn body_positions(&self, path: &Path, trajectory: &Trajectory) -> Result<Vec<Vec<[f64; 2]>>, GcsError> {
        let mut out = vec![Vec::new(); self.movable.len()];
        for (id, x) in path.vertices().iter().zip(&trajectory.points) {
            let node = self.parse(id)?;
            for (m, track) in out.iter_mut().enumerate() {
                match self.layout_of(&node) {
                    Some(layout) => {
                        for knot in 0..PushingVertexLayout::KNOTS {
                            let p = layout.position(knot, m);
                            track.push([x[p], x[p + 1]]);
                        }
                    }
                    None => track.push([x[2 * m], x[2 * m + 1]]),
                }
            }
        }
        Ok(out)
    }
}

impl ImplicitGcs for PushingProblem {
    fn source(&self) -> &VertexId {
        &self.source
    }

    fn target(&self) -> &VertexId {
        &self.target
    }

    fn vertex(&self, id: &VertexId) -> Result<Arc<GcsVertex>, GcsError> {
        if let Some(v) = self.vertex_cache.read().expect("cache lock").get(id) {
            return Ok(v.clone());
        }
        let v = Arc::new(self.build_vertex(id)?);
        self.vertex_cache.write().expect("cache lock").entry(id.clone()).or_insert(v.clone());
        Ok(v)
    }

    fn edge(&self, u: &VertexId, v: &VertexId) -> Result<Arc<EdgeData>, GcsError> {
        let no_edge = || GcsError::UnknownEdge(u.clone(), v.clone());
        let (nu, nv) = (self.parse(u)?, self.parse(v)?);
        let lu = self.layout_of(&nu).ok_or_else(no_edge)?;
        let du = lu.dim();
        let key_u = match &nu {
            Node::Source(k) | Node::Mode(k) => k,
            Node::Target => unreachable!(),
        };
        let (dv, cost, target_pos): (usize, EdgeCostL1, Box<dyn Fn(usize) -> usize>) = match &nv {
            Node::Source(_) => return Err(no_edge()),
            Node::Target => (2 * self.movable.len(), EdgeCostL1::constant(0.0), Box::new(|m| 2 * m)),
            Node::Mode(kv) => {
                let allowed = match &nu {
                    Node::Source(_) => kv == key_u || Self::differs_in_one_pair(key_u, kv),
                    _ => Self::differs_in_one_pair(key_u, kv),
                };
                if !allowed {
                    return Err(no_edge());
                }
                let lv = self.layout(kv);
                let dv = lv.dim();
                let mut terms = Vec::new();
                for (m, &body) in self.movable.iter().enumerate() {
                    let w = self.env.weights.get(&self.env.bodies[body].name).copied().unwrap_or(1.0);
                    for d in 0..2 {
                        let mut coeffs = vec![0.0; du + dv];
                        coeffs[du + lv.position(1, m) + d] = 1.0;
                        coeffs[du + lv.position(0, m) + d] = -1.0;
                        terms.push(L1Term { weight: w, coeffs, offset: 0.0 });
                    }
                }
                let lv2 = lv.clone();
                (dv, EdgeCostL1 { c0: 1.0, terms }, Box::new(move |m| lv2.position(0, m)))
            }
        };
        let mut c = DMatrix::zeros(2 * self.movable.len(), du + dv);
        for m in 0..self.movable.len() {
            for d in 0..2 {
                c[(2 * m + d, lu.position(1, m) + d)] = 1.0;
                c[(2 * m + d, du + target_pos(m) + d)] = -1.0;
            }
        }
        let constraint = HPolyhedron::universe(du + dv).with_equalities(&c, &DVector::zeros(c.nrows()))?;
        Ok(Arc::new(EdgeData::new(u.clone(), v.clone(), constraint, cost)?))
    }

    fn successors(&self, u: &VertexId) -> Result<Vec<Successor>, GcsError> {
        let mut ids: Vec<VertexId> = match self.parse(u)? {
            Node::Target => return Ok(Vec::new()),
            Node::Source(k) => std::iter::once(k.clone()).chain(self.pushing_successors(&k)).map(|k| self.mode_vertex_id(&k)).collect(),
            Node::Mode(k) => self.pushing_successors(&k).iter().map(|k| self.mode_vertex_id(k)).collect(),
        };
        ids.push(self.target.clone());
        ids.sort();
        ids.iter().map(|v| Ok((self.edge(u, v)?, self.vertex(v)?))).collect()
    }

    fn domination_selector(&self, v: &VertexId) -> Option<DMatrix<f64>> {
        let layout = self.layout_of(&self.parse(v).ok()?)?;
        let n = 2 * self.movable.len();
        let mut s = DMatrix::zeros(n, layout.dim());
        for m in 0..self.movable.len() {
            for d in 0..2 {
                s[(2 * m + d, layout.position(1, m) + d)] = 1.0;
            }
        }
        Some(s)
    }

    fn shortcut_terms(&self, v: &VertexId) -> Result<Vec<ShortcutTerm>, GcsError> {
        let Some(layout) = self.layout_of(&self.parse(v)?) else {
            return Ok(Vec::new());
        };
        Ok(self
            .movable
            .iter()
            .enumerate()
            .flat_map(|(m, &body)| {
                let robot = self.env.bodies[body].actuated;
                let p = layout.position(1, m);
                (0..2).map(move |d| ShortcutTerm { vertex_coord: p + d, target_coord: 2 * m + d, robot })
            })
            .collect())
    }

    fn shortcut_constant(&self) -> f64 {
        1.0
    }

    fn default_max_path_len(&self) -> Option<usize> {
        self.env.max_path_len
    }
}
