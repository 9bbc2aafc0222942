use crate::gcs::{EdgeCostL1, EdgeData, ExplicitGcs, GcsVertex, L1Term, Path, VertexId};
use crate::geometry::HPolyhedron;

/// Cost-to-come `alpha + weight * |x - center|` on `[lo, hi]`, infinite elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostCurve {
    pub alpha: f64,
    pub weight: f64,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
}

impl CostCurve {
    pub fn flat(alpha: f64, lo: f64, hi: f64) -> Self {
        Self { alpha, weight: 0.0, center: 0.5 * (lo + hi), lo, hi }
    }

    /// `None` outside the reachable interval.
    pub fn eval(&self, x: f64) -> Option<f64> {
        (self.lo..=self.hi).contains(&x).then(|| self.alpha + self.weight * (x - self.center).abs())
    }
}

/// A candidate path and stored paths ending at the shared terminal `T`,
/// with the expected exact verdicts.
#[derive(Debug, Clone)]
pub struct DominationScenario {
    pub name: &'static str,
    pub graph: ExplicitGcs,
    pub candidate: Path,
    pub frontier: Vec<Path>,
    pub candidate_curve: CostCurve,
    pub frontier_curves: Vec<CostCurve>,
    pub expected_reaches_cheaper: bool,
    pub expected_reaches_new: bool,
}

pub const TERMINAL_LO: f64 = 0.0;
pub const TERMINAL_HI: f64 = 10.0;

/// Builds `s = {0}`, one singleton vertex `P_i = {center_i}` per curve and the
/// terminal `T = [0, 10]`. The edge `s -> P_i` costs `alpha_i`; the edge
/// `P_i -> T` restricts `x_T` to `[lo_i, hi_i]` and costs `weight_i |x_T - x_P|`.
fn scenario(name: &'static str, candidate: CostCurve, frontier: Vec<CostCurve>, rc: bool, rn: bool) -> DominationScenario {
    let point = |id: &str, x: f64| GcsVertex::new(id.into(), HPolyhedron::from_box(&[x], &[x]).unwrap()).unwrap();
    let mut vertices = vec![point("s", 0.0), GcsVertex::new("T".into(), HPolyhedron::from_box(&[TERMINAL_LO], &[TERMINAL_HI]).unwrap()).unwrap()];
    let mut edges = Vec::new();
    let mut paths = Vec::new();
    for (i, c) in std::iter::once(&candidate).chain(&frontier).enumerate() {
        let id = format!("P{i}");
        vertices.push(point(&id, c.center));
        edges.push(EdgeData::unconstrained("s".into(), VertexId::new(&id), 2, EdgeCostL1::constant(c.alpha)).unwrap());
        let window = HPolyhedron::from_rows(&[vec![0.0, 1.0], vec![0.0, -1.0]], &[c.hi, -c.lo]).unwrap();
        let cost = EdgeCostL1 { c0: 0.0, terms: vec![L1Term { weight: c.weight, coeffs: vec![-1.0, 1.0], offset: 0.0 }] };
        edges.push(EdgeData::new(VertexId::new(&id), "T".into(), window, cost).unwrap());
        paths.push(Path::new(vec!["s".into(), VertexId::new(&id), "T".into()]));
    }
    let graph = ExplicitGcs::new(vertices, edges, "s".into(), "T".into()).unwrap();
    let candidate_path = paths.remove(0);
    DominationScenario {
        name,
        graph,
        candidate: candidate_path,
        frontier: paths,
        candidate_curve: candidate,
        frontier_curves: frontier,
        expected_reaches_cheaper: rc,
        expected_reaches_new: rn,
    }
}

/// Five scenarios:
/// (a) cheaper nowhere and nothing new,
/// (b) reaches a new interval,
/// (c) cheaper somewhere but nothing new,
/// (d) cheaper than two stored paths that together cover it,
/// (e) dominated only by two stored paths together.
pub fn fig4_scenarios() -> Vec<DominationScenario> {
    vec![
        scenario(
            "a",
            CostCurve { alpha: 2.0, weight: 0.5, center: 4.5, lo: 3.0, hi: 6.0 },
            vec![CostCurve::flat(1.0, 0.0, 10.0)],
            false,
            false,
        ),
        scenario("b", CostCurve::flat(2.0, 4.0, 8.0), vec![CostCurve::flat(1.0, 0.0, 5.0)], true, true),
        scenario(
            "c",
            CostCurve::flat(1.0, 4.0, 8.0),
            vec![CostCurve { alpha: 3.0, weight: 0.5, center: 2.0, lo: 0.0, hi: 10.0 }],
            true,
            false,
        ),
        scenario("d", CostCurve::flat(1.0, 3.0, 7.0), vec![CostCurve::flat(3.0, 0.0, 5.0), CostCurve::flat(3.0, 5.0, 10.0)], true, false),
        scenario("e", CostCurve::flat(2.0, 3.0, 7.0), vec![CostCurve::flat(1.0, 0.0, 5.0), CostCurve::flat(1.0, 5.0, 10.0)], false, false),
    ]
}
