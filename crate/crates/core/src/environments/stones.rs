use serde::{Deserialize, Serialize};

use crate::gcs::{EdgeCostL1, EdgeData, ExplicitGcs, GcsError, GcsVertex, VertexId};
use crate::geometry::HPolyhedron;

const STONES4_JSON: &str = include_str!("../../fixtures/stones4.json");

/// Convex polygon, counterclockwise.
pub type Polygon = Vec<[f64; 2]>;

/// Stepping-stone layout. Adjacency entries name `s`, `t` or a stone index;
/// stone-to-stone entries give edges both ways, `s` only has outgoing edges
/// and `t` only incoming ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteppingStones {
    pub stones: Vec<Polygon>,
    pub adjacency: Vec<[String; 2]>,
    pub source: [f64; 2],
    pub target: [f64; 2],
    #[serde(default = "default_c0")]
    pub c0: f64,
}

fn default_c0() -> f64 {
    1.0
}

/// Halfspace form of a convex counterclockwise polygon.
pub fn polygon_to_hpolyhedron(poly: &[[f64; 2]]) -> Result<HPolyhedron, GcsError> {
    let n = poly.len();
    if n < 3 {
        return Err(GcsError::Malformed(format!("polygon needs at least 3 vertices, got {n}")));
    }
    let mut rows = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let (p, q, r) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let cross = dx * (r[1] - q[1]) - dy * (r[0] - q[0]);
        if cross <= 0.0 {
            return Err(GcsError::Malformed("polygon is not strictly convex and counterclockwise".into()));
        }
        let len = dx.hypot(dy);
        let normal = [dy / len, -dx / len];
        rows.push(normal.to_vec());
        rhs.push(normal[0] * p[0] + normal[1] * p[1]);
    }
    Ok(HPolyhedron::from_rows(&rows, &rhs)?)
}

fn stone_id(label: &str, count: usize) -> Result<VertexId, GcsError> {
    match label {
        "s" | "t" => Ok(VertexId::from(label)),
        idx => match idx.parse::<usize>() {
            Ok(i) if i < count => Ok(VertexId::new(format!("stone{i}"))),
            _ => Err(GcsError::Malformed(format!("adjacency names unknown stone {idx:?}"))),
        },
    }
}

/// One vertex per stone plus singleton `s` and `t`; every edge costs
/// `c0 + ||x_v - x_u||_1` and carries no coupling constraint.
pub fn make_stepping_stones(layout: &SteppingStones) -> Result<ExplicitGcs, GcsError> {
    let point = |id: &str, p: [f64; 2]| GcsVertex::new(id.into(), HPolyhedron::from_box(&p, &p)?);
    let mut vertices = vec![point("s", layout.source)?, point("t", layout.target)?];
    for (i, poly) in layout.stones.iter().enumerate() {
        vertices.push(GcsVertex::new(VertexId::new(format!("stone{i}")), polygon_to_hpolyhedron(poly)?)?);
    }
    let mut edges = Vec::new();
    let mut add = |u: &VertexId, v: &VertexId| -> Result<(), GcsError> {
        edges.push(EdgeData::unconstrained(u.clone(), v.clone(), 4, EdgeCostL1::l1_distance(layout.c0, 1.0, 2))?);
        Ok(())
    };
    for [a, b] in &layout.adjacency {
        let (u, v) = (stone_id(a, layout.stones.len())?, stone_id(b, layout.stones.len())?);
        let (u, v) = if v.as_str() == "s" || u.as_str() == "t" { (v, u) } else { (u, v) };
        if u.as_str() == "t" || v.as_str() == "s" || u == v {
            return Err(GcsError::Malformed(format!("invalid adjacency {a} - {b}")));
        }
        add(&u, &v)?;
        if u.as_str() != "s" && v.as_str() != "t" {
            add(&v, &u)?;
        }
    }
    ExplicitGcs::new(vertices, edges, "s".into(), "t".into())
}

/// The committed four-stone layout with two routes of different length.
pub fn stones4_layout() -> SteppingStones {
    serde_json::from_str(STONES4_JSON).expect("committed fixture parses")
}

pub fn stones4() -> ExplicitGcs {
    make_stepping_stones(&stones4_layout()).expect("committed fixture is valid")
}
