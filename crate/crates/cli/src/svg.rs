use std::fmt::Write;

use gcs_star::environments::PushingProblem;
use gcs_star::gcs::{ExplicitGcs, Path, Trajectory};
use gcs_star::geometry::HPolyhedron;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;
const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Vertices of a bounded two-dimensional polyhedron, counterclockwise.
pub fn polygon_vertices(p: &HPolyhedron) -> Vec<[f64; 2]> {
    let (a, b) = (p.a(), p.b());
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for i in 0..a.nrows() {
        for j in i + 1..a.nrows() {
            let det = a[(i, 0)] * a[(j, 1)] - a[(i, 1)] * a[(j, 0)];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (b[i] * a[(j, 1)] - a[(i, 1)] * b[j]) / det;
            let y = (a[(i, 0)] * b[j] - b[i] * a[(j, 0)]) / det;
            let inside = (0..a.nrows()).all(|k| a[(k, 0)] * x + a[(k, 1)] * y <= b[k] + 1e-7);
            if inside && !pts.iter().any(|q| (q[0] - x).abs() < 1e-9 && (q[1] - y).abs() < 1e-9) {
                pts.push([x, y]);
            }
        }
    }
    let n = pts.len().max(1) as f64;
    let c = [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n];
    pts.sort_by(|p, q| (p[1] - c[1]).atan2(p[0] - c[0]).total_cmp(&(q[1] - c[1]).atan2(q[0] - c[0])));
    pts
}

struct Canvas {
    lo: [f64; 2],
    scale: f64,
    body: String,
}

impl Canvas {
    fn new(all: &[[f64; 2]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in all {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        Self { lo: [lo[0], hi[1]], scale: (SIZE - 2.0 * MARGIN) / span, body: String::new() }
    }

    fn points(&self, pts: &[[f64; 2]]) -> String {
        let coords: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.3},{:.3}", MARGIN + (p[0] - self.lo[0]) * self.scale, MARGIN + (self.lo[1] - p[1]) * self.scale))
            .collect();
        coords.join(" ")
    }

    fn polygon(&mut self, pts: &[[f64; 2]], fill: &str, label: &str) {
        let points = self.points(pts);
        writeln!(self.body, r#"  <polygon points="{points}" fill="{fill}" fill-opacity="0.35" stroke="black" stroke-width="1"><title>{label}</title></polygon>"#).unwrap();
    }

    fn polyline(&mut self, pts: &[[f64; 2]], color: &str) {
        let points = self.points(pts);
        writeln!(self.body, r#"  <polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>"#).unwrap();
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n{}</svg>\n",
            self.body
        )
    }
}

pub fn check_planar(g: &ExplicitGcs) -> Result<(), String> {
    match g.vertices().find(|v| v.dim() != 2) {
        Some(v) => Err(format!("vertex {} has dimension {}, only 2-D problems can be drawn", v.id(), v.dim())),
        None => Ok(()),
    }
}

/// One polygon per vertex set and a polyline through the trajectory.
pub fn render_explicit(g: &ExplicitGcs, path: &Path, traj: &Trajectory) -> Result<String, String> {
    if traj.points.is_empty() {
        return Err("trajectory is empty".into());
    }
    check_planar(g)?;
    let polys: Vec<(String, Vec<[f64; 2]>)> = g.vertices().map(|v| (v.id().to_string(), polygon_vertices(v.set()))).collect();
    let line: Vec<[f64; 2]> = traj.points.iter().map(|p| [p[0], p[1]]).collect();
    let all: Vec<[f64; 2]> = polys.iter().flat_map(|(_, p)| p.iter().copied()).chain(line.iter().copied()).collect();
    let mut canvas = Canvas::new(&all);
    for (id, poly) in &polys {
        let fill = if path.vertices().iter().any(|v| v.as_str() == id) { "#98df8a" } else { "#c7c7c7" };
        canvas.polygon(poly, fill, id);
    }
    canvas.polyline(&line, COLORS[0]);
    Ok(canvas.finish())
}

/// Static bodies, goal boxes and every movable body at its final position,
/// plus one polyline per movable body through its knot positions.
pub fn render_pushing(problem: &PushingProblem, path: &Path, traj: &Trajectory) -> Result<String, String> {
    if traj.points.is_empty() {
        return Err("trajectory is empty".into());
    }
    let tracks = problem.body_positions(path, traj).map_err(|e| e.to_string())?;
    let env = problem.environment();
    let mut polys: Vec<(String, Vec<[f64; 2]>, &str)> = Vec::new();
    for b in env.bodies.iter().filter(|b| !b.movable) {
        polys.push((b.name.clone(), b.polygon.clone(), "#7f7f7f"));
    }
    for g in &env.goal {
        let (lo, hi) = (g.lo, g.hi);
        polys.push((format!("goal {}", g.body), vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]], "#ffdd57"));
    }
    for (m, &i) in problem.movable_bodies().iter().enumerate() {
        let b = &env.bodies[i];
        let p = tracks[m].last().copied().unwrap_or([0.0, 0.0]);
        polys.push((b.name.clone(), b.polygon.iter().map(|v| [v[0] + p[0], v[1] + p[1]]).collect(), COLORS[m % COLORS.len()]));
    }
    let all: Vec<[f64; 2]> = polys.iter().flat_map(|(_, p, _)| p.iter().copied()).chain(tracks.iter().flatten().copied()).collect();
    let mut canvas = Canvas::new(&all);
    for (name, poly, fill) in &polys {
        canvas.polygon(poly, fill, name);
    }
    for (m, track) in tracks.iter().enumerate() {
        canvas.polyline(track, COLORS[m % COLORS.len()]);
    }
    Ok(canvas.finish())
}
