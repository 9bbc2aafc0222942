#![allow(dead_code)]

use gcs_star::gcs::{EdgeCostL1, EdgeData, ExplicitGcs, GcsVertex, ImplicitGcs, L1Term, Path, VertexId};
use gcs_star::geometry::HPolyhedron;
use gcs_star::heuristic::Heuristic;
use gcs_star::lp::{Backend, LpSolver};
use gcs_star::restriction::{solve_restriction, RestrictionOutcome};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_box(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let lo: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
    let hi = lo.iter().map(|l| l + rng.random_range(0.5..3.0)).collect();
    (lo, hi)
}

/// A box, sometimes cut by a halfspace that keeps its center.
fn random_set(rng: &mut ChaCha8Rng, dim: usize) -> HPolyhedron {
    let (lo, hi) = random_box(rng, dim);
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for i in 0..dim {
        let mut r = vec![0.0; dim];
        r[i] = 1.0;
        rows.push(r.clone());
        b.push(hi[i]);
        r[i] = -1.0;
        rows.push(r);
        b.push(-lo[i]);
    }
    if rng.random_bool(0.5) {
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
        let center: f64 = a.iter().zip(lo.iter().zip(&hi)).map(|(ai, (l, h))| ai * 0.5 * (l + h)).sum();
        rows.push(a);
        b.push(center + rng.random_range(0.0..0.5) * norm);
    }
    HPolyhedron::from_rows(&rows, &b).unwrap()
}

fn random_cost(rng: &mut ChaCha8Rng, dim: usize) -> EdgeCostL1 {
    let terms = (0..dim)
        .map(|i| {
            let mut coeffs = vec![0.0; 2 * dim];
            coeffs[i] = -1.0;
            coeffs[dim + i] = 1.0;
            L1Term { weight: rng.random_range(1.0..2.0), coeffs, offset: 0.0 }
        })
        .collect();
    EdgeCostL1 { c0: rng.random_range(0.5..1.5), terms }
}

fn random_coupling(rng: &mut ChaCha8Rng, dim: usize) -> HPolyhedron {
    let u: f64 = rng.random();
    if u < 0.6 {
        return HPolyhedron::universe(2 * dim);
    }
    let mut rows = Vec::new();
    let mut b = Vec::new();
    if u < 0.9 {
        // |x_v - x_u|_inf <= r
        let r = rng.random_range(1.0..5.0);
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; 2 * dim];
                row[i] = -sign;
                row[dim + i] = sign;
                rows.push(row);
                b.push(r);
            }
        }
    } else {
        // first coordinates equal
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; 2 * dim];
            row[0] = -sign;
            row[dim] = sign;
            rows.push(row);
            b.push(0.0);
        }
    }
    HPolyhedron::from_rows(&rows, &b).unwrap()
}

/// At most six vertices in dimension at most three: a singleton source, two
/// to four middle sets and a target set. Edge costs are `c0 + sum w_i |dx_i|`
/// with `c0` in [0.5, 1.5] and `w_i` in [1, 2].
pub fn random_problem(seed: u64) -> ExplicitGcs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=3);
    let n_mid = rng.random_range(2..=4);
    let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
    let mut vertices = vec![
        GcsVertex::new("s".into(), HPolyhedron::from_box(&p, &p).unwrap()).unwrap(),
        GcsVertex::new("t".into(), random_set(&mut rng, dim)).unwrap(),
    ];
    let mids: Vec<VertexId> = (0..n_mid).map(|i| VertexId::new(format!("v{i}"))).collect();
    for m in &mids {
        vertices.push(GcsVertex::new(m.clone(), random_set(&mut rng, dim)).unwrap());
    }
    let mut pairs: Vec<(VertexId, VertexId)> = Vec::new();
    for m in &mids {
        if rng.random_bool(0.7) {
            pairs.push(("s".into(), m.clone()));
        }
        if rng.random_bool(0.5) {
            pairs.push((m.clone(), "t".into()));
        }
        for o in &mids {
            if o != m && rng.random_bool(0.35) {
                pairs.push((m.clone(), o.clone()));
            }
        }
    }
    if !pairs.iter().any(|(u, _)| u.as_str() == "s") {
        pairs.push(("s".into(), mids[0].clone()));
    }
    if !pairs.iter().any(|(_, v)| v.as_str() == "t") {
        pairs.push((mids[n_mid - 1].clone(), "t".into()));
    }
    if rng.random_bool(0.15) {
        pairs.push(("s".into(), "t".into()));
    }
    let edges = pairs
        .into_iter()
        .map(|(u, v)| {
            let c = random_coupling(&mut rng, dim);
            let cost = random_cost(&mut rng, dim);
            EdgeData::new(u, v, c, cost).unwrap()
        })
        .collect();
    ExplicitGcs::new(vertices, edges, "s".into(), "t".into()).unwrap()
}

pub fn oracle_solver() -> LpSolver {
    LpSolver::new(Backend::InteriorPoint)
}

/// Cheapest cost over all walks from the source of at most `max_len`
/// vertices ending at the target, by depth-first enumeration pruned with
/// the optimal cost of each prefix.
pub fn oracle_optimum(g: &ExplicitGcs, max_len: usize) -> Option<(f64, Path)> {
    let solver = oracle_solver();
    let zero = Heuristic::zero();
    let mut best: Option<(f64, Path)> = None;
    let mut stack = vec![Path::single(g.source().clone())];
    while let Some(path) = stack.pop() {
        let RestrictionOutcome::Optimal(sol) = solve_restriction(g, &path, &zero, &solver).unwrap() else {
            continue;
        };
        if best.as_ref().is_some_and(|(b, _)| sol.cost_to_come >= *b) {
            continue;
        }
        if path.last() == g.target() {
            best = Some((sol.cost_to_come, path));
            continue;
        }
        if path.len() < max_len {
            for (e, _) in g.successors(path.last()).unwrap() {
                stack.push(path.extended(e.to().clone()));
            }
        }
    }
    best
}

/// Cost-to-come into `T` through `P`: `alpha + weight * dist_1(x, P)` when
/// `x` lies in the window, infinite otherwise.
#[derive(Debug, Clone)]
pub struct BoxRoute {
    pub alpha: f64,
    pub weight: f64,
    pub p_lo: Vec<f64>,
    pub p_hi: Vec<f64>,
    pub win_lo: Vec<f64>,
    pub win_hi: Vec<f64>,
}

impl BoxRoute {
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        let inside = x.iter().enumerate().all(|(i, v)| *v >= self.win_lo[i] && *v <= self.win_hi[i]);
        inside.then(|| {
            self.alpha + self.weight * x.iter().enumerate().map(|(i, v)| (self.p_lo[i] - v).max(0.0) + (v - self.p_hi[i]).max(0.0)).sum::<f64>()
        })
    }
}

pub const T_SIDE: f64 = 4.0;

/// Candidate route `P0` and one to three stored routes into `T = [0, 4]^d`.
pub struct DominationInstance {
    pub graph: ExplicitGcs,
    pub dim: usize,
    pub candidate: Path,
    pub frontier: Vec<Path>,
    pub routes: Vec<BoxRoute>,
}

fn sub_box(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for _ in 0..dim {
        let x = rng.random_range(lo..hi);
        let y = rng.random_range(lo..hi);
        let (l, h) = if x < y { (x, y) } else { (y, x) };
        let h = h.max(l + 0.3).min(hi);
        let l = l.min(h - 0.3);
        a.push(l);
        b.push(h);
    }
    (a, b)
}

pub fn random_domination_instance(seed: u64) -> DominationInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=3);
    let n = rng.random_range(2..=4);
    let mut routes = Vec::new();
    for i in 0..n {
        let (p_lo, p_hi) = sub_box(&mut rng, dim, -1.0, T_SIDE + 1.0);
        let (win_lo, win_hi) = if i > 0 && rng.random_bool(0.4) {
            (vec![0.0; dim], vec![T_SIDE; dim])
        } else {
            sub_box(&mut rng, dim, 0.0, T_SIDE)
        };
        routes.push(BoxRoute { alpha: rng.random_range(0.0..3.0), weight: rng.random_range(0.5..2.0), p_lo, p_hi, win_lo, win_hi });
    }
    if rng.random_bool(0.3) {
        // a stored route that copies the candidate but is cheaper
        let mut r = routes[0].clone();
        r.alpha -= rng.random_range(0.0..0.5);
        routes[1] = r;
    }
    let zero = vec![0.0; dim];
    let mut vertices = vec![
        GcsVertex::new("s".into(), HPolyhedron::from_box(&zero, &zero).unwrap()).unwrap(),
        GcsVertex::new("T".into(), HPolyhedron::from_box(&zero, &vec![T_SIDE; dim]).unwrap()).unwrap(),
    ];
    let mut edges = Vec::new();
    let mut paths = Vec::new();
    for (i, r) in routes.iter().enumerate() {
        let id = VertexId::new(format!("P{i}"));
        vertices.push(GcsVertex::new(id.clone(), HPolyhedron::from_box(&r.p_lo, &r.p_hi).unwrap()).unwrap());
        edges.push(EdgeData::unconstrained("s".into(), id.clone(), 2 * dim, EdgeCostL1::constant(r.alpha)).unwrap());
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for k in 0..dim {
            let mut row = vec![0.0; 2 * dim];
            row[dim + k] = 1.0;
            rows.push(row.clone());
            b.push(r.win_hi[k]);
            row[dim + k] = -1.0;
            rows.push(row);
            b.push(-r.win_lo[k]);
        }
        let mut cost = EdgeCostL1::l1_distance(0.0, r.weight, dim);
        cost.c0 = 0.0;
        edges.push(EdgeData::new(id.clone(), "T".into(), HPolyhedron::from_rows(&rows, &b).unwrap(), cost).unwrap());
        paths.push(Path::new(vec!["s".into(), id, "T".into()]));
    }
    let graph = ExplicitGcs::new(vertices, edges, "s".into(), "T".into()).unwrap();
    let candidate = paths.remove(0);
    DominationInstance { graph, dim, candidate, frontier: paths, routes }
}

/// At least 200 points on a regular grid over `[0, 4]^d`.
pub fn grid_points(dim: usize) -> Vec<Vec<f64>> {
    let per_axis = match dim {
        1 => 200,
        2 => 15,
        _ => 6,
    };
    let axis: Vec<f64> = (0..per_axis).map(|i| T_SIDE * i as f64 / (per_axis - 1) as f64).collect();
    let mut pts = vec![Vec::new()];
    for _ in 0..dim {
        pts = pts.into_iter().flat_map(|p| axis.iter().map(move |a| [p.clone(), vec![*a]].concat())).collect();
    }
    pts
}

/// Exact verdicts of the two checks on the grid, from the closed-form routes.
pub fn grid_truth(inst: &DominationInstance, margin: f64) -> (bool, bool) {
    let mut rc = false;
    let mut rn = false;
    for x in grid_points(inst.dim) {
        let Some(c) = inst.routes[0].eval(&x) else { continue };
        let others: Vec<Option<f64>> = inst.routes[1..].iter().map(|r| r.eval(&x)).collect();
        rn |= others.iter().all(Option::is_none);
        rc |= others.iter().all(|o| o.is_none_or(|v| c < v - margin));
    }
    (rc, rn)
}

pub fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}
