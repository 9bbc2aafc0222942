use std::collections::BTreeSet;

use gcs_star::domination::{CheckImpl, CheckKind, CheckerConfig};
use gcs_star::environments::*;
use gcs_star::gcs::{ImplicitGcs, Path, VertexId};
use gcs_star::geometry::HitAndRun;
use gcs_star::heuristic::{Heuristic, HeuristicSpec};
use gcs_star::lp::LpSolver;
use gcs_star::restriction::{evaluate_trajectory_cost, solve_restriction, trajectory_residual, RestrictionOutcome};
use gcs_star::search::{gcs_star, SearchOptions, SearchStatus};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn square(cx: f64, cy: f64, half: f64) -> Polygon {
    vec![[cx - half, cy - half], [cx + half, cy - half], [cx + half, cy + half], [cx - half, cy + half]]
}

fn rn_sampling() -> CheckerConfig {
    CheckerConfig::new(CheckKind::ReachesNew, CheckImpl::Sampling).with_seed(7)
}

#[test]
fn stones_overlapping_boxes_give_only_path() {
    let solver = LpSolver::default();
    let layout = SteppingStones {
        stones: vec![square(1.0, 0.0, 0.6), square(2.0, 0.0, 0.6)],
        adjacency: vec![["s".into(), "0".into()], ["0".into(), "1".into()], ["1".into(), "t".into()]],
        source: [0.0, 0.0],
        target: [3.0, 0.0],
        c0: 1.0,
    };
    let g = make_stepping_stones(&layout).unwrap();
    let r = gcs_star(&g, &Heuristic::zero(), &rn_sampling(), &SearchOptions::default(), &solver).unwrap();
    assert_eq!(r.status, SearchStatus::Solved);
    let sol = r.solution.unwrap();
    assert_eq!(sol.path, Path::from_names(&["s", "stone0", "stone1", "t"]));
    assert!((sol.cost - 6.0).abs() < 1e-6, "cost {}", sol.cost);
}

#[test]
fn stones_disjoint_without_edges_fail() {
    let solver = LpSolver::default();
    let layout = SteppingStones {
        stones: vec![square(1.0, 0.0, 0.2), square(5.0, 0.0, 0.2)],
        adjacency: vec![],
        source: [0.0, 0.0],
        target: [6.0, 0.0],
        c0: 1.0,
    };
    let g = make_stepping_stones(&layout).unwrap();
    let r = gcs_star(&g, &Heuristic::zero(), &rn_sampling(), &SearchOptions::default(), &solver).unwrap();
    assert_eq!(r.status, SearchStatus::Fail);
}

#[test]
fn stones_reject_bad_polygons() {
    assert!(polygon_to_hpolyhedron(&[]).is_err());
    // clockwise
    assert!(polygon_to_hpolyhedron(&[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).is_err());
}

fn centroid(poly: &[[f64; 2]]) -> [f64; 2] {
    let n = poly.len() as f64;
    [poly.iter().map(|p| p[0]).sum::<f64>() / n, poly.iter().map(|p| p[1]).sum::<f64>() / n]
}

#[test]
fn stones4_optimum_below_centroid_trajectory() {
    let solver = LpSolver::default();
    let layout = stones4_layout();
    let g = stones4();
    let h = Heuristic::new(HeuristicSpec::shortcut_for(&g), &g, &solver).unwrap();
    let r = gcs_star(&g, &h, &rn_sampling(), &SearchOptions::default(), &solver).unwrap();
    assert_eq!(r.status, SearchStatus::Solved);
    let sol = r.solution.unwrap();
    // centroid trajectory along the returned vertex sequence
    let point = |v: &VertexId| match v.as_str() {
        "s" => layout.source,
        "t" => layout.target,
        s => centroid(&layout.stones[s.trim_start_matches("stone").parse::<usize>().unwrap()]),
    };
    let pts: Vec<[f64; 2]> = sol.path.vertices().iter().map(point).collect();
    let centroid_cost: f64 = pts.windows(2).map(|w| layout.c0 + (w[1][0] - w[0][0]).abs() + (w[1][1] - w[0][1]).abs()).sum();
    assert!(sol.cost <= centroid_cost + 1e-9, "{} > {}", sol.cost, centroid_cost);
    assert!(trajectory_residual(&g, &sol.path, &sol.trajectory).unwrap() <= 1e-7);
}

fn robot_and_box(start_robot: [f64; 2], goal: ([f64; 2], [f64; 2]), workspace: f64) -> PushingEnvironment {
    let mut env = push1_environment();
    env.start.insert("robot".into(), start_robot);
    env.goal = vec![GoalRegion { body: "object".into(), lo: goal.0, hi: goal.1 }];
    env.workspace = BoxRegion { lo: [-workspace; 2], hi: [workspace; 2] };
    env
}

fn samples(p: &gcs_star::geometry::HPolyhedron, n: usize, seed: u64) -> Vec<DVector<f64>> {
    let solver = LpSolver::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut har = HitAndRun::new(p, &solver).unwrap();
    (0..n).map(|_| har.next_sample(&mut rng)).collect()
}

#[test]
fn pushing_separated_object_stays_still() {
    let problem = PushingProblem::new(push1_environment()).unwrap();
    let key = problem.start_mode().clone();
    let layout = problem.layout(&key);
    assert!(layout.contacts.is_empty());
    let obj = 1;
    for x in samples(&problem.vertex_set(&key).unwrap(), 50, 1) {
        for d in 0..2 {
            assert!((x[layout.position(1, obj) + d] - x[layout.position(0, obj) + d]).abs() <= 1e-8);
        }
    }
}

#[test]
fn pushing_free_robot_moves_by_actuation() {
    let mut env = push1_environment();
    env.bodies.truncate(1);
    env.start.remove("object");
    env.goal.clear();
    let problem = PushingProblem::new(env).unwrap();
    assert!(problem.pairs().is_empty());
    let key = ContactModeKey(vec![]);
    let layout = problem.layout(&key);
    for x in samples(&problem.vertex_set(&key).unwrap(), 50, 2) {
        for d in 0..2 {
            let disp = x[layout.position(1, 0) + d] - x[layout.position(0, 0) + d];
            let mean_a = 0.5 * (x[layout.actuation(0, 0) + d] + x[layout.actuation(1, 0) + d]);
            assert!((disp - mean_a).abs() <= 1e-8);
        }
    }
}

#[test]
fn pushing_face_face_action_reaction() {
    let problem = PushingProblem::new(push1_environment()).unwrap();
    // robot's right face (1) against the object's left face (3)
    let key = ContactModeKey(vec![PairMode::FaceFace { first: 1, second: 3 }]);
    let layout = problem.layout(&key);
    assert_eq!(layout.contacts, vec![0]);
    let (rob, obj) = (0, 1);
    let mut saw_push = false;
    for x in samples(&problem.vertex_set(&key).unwrap(), 200, 3) {
        let lam = 0.5 * (x[layout.force(0, 0)] + x[layout.force(1, 0)]);
        let a = [0, 1].map(|d| 0.5 * (x[layout.actuation(0, 0) + d] + x[layout.actuation(1, 0) + d]));
        let obj_disp = [0, 1].map(|d| x[layout.position(1, obj) + d] - x[layout.position(0, obj) + d]);
        let rob_disp = [0, 1].map(|d| x[layout.position(1, rob) + d] - x[layout.position(0, rob) + d]);
        // normal of the robot's right face is +x
        assert!((obj_disp[0] - lam).abs() <= 1e-8 && obj_disp[1].abs() <= 1e-8);
        assert!((rob_disp[0] - (a[0] - lam)).abs() <= 1e-8 && (rob_disp[1] - a[1]).abs() <= 1e-8);
        // contact alignment at both knots
        for k in 0..2 {
            let gap = x[layout.position(k, obj)] - 0.5 - (x[layout.position(k, rob)] + 0.25);
            assert!(gap.abs() <= 1e-8);
        }
        saw_push |= lam > 0.1;
    }
    assert!(saw_push);
}

fn brute_force_options(poly_a: &[[f64; 2]], poly_b: &[[f64; 2]]) -> usize {
    let normals = |p: &[[f64; 2]]| -> Vec<[f64; 2]> {
        (0..p.len())
            .map(|i| {
                let (a, b) = (p[i], p[(i + 1) % p.len()]);
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let l = dx.hypot(dy);
                [dy / l, -dx / l]
            })
            .collect()
    };
    let (na, nb) = (normals(poly_a), normals(poly_b));
    let separating = na.len() + nb.len();
    let face_face = na.iter().flat_map(|x| nb.iter().map(move |y| (x, y))).filter(|(x, y)| x[0] * y[0] + x[1] * y[1] < -1.0 + 1e-9).count();
    let touching = |n: &[[f64; 2]], other: &[[f64; 2]]| {
        n.iter()
            .map(|f| {
                let proj: Vec<f64> = other.iter().map(|w| f[0] * w[0] + f[1] * w[1]).collect();
                let lo = proj.iter().cloned().fold(f64::INFINITY, f64::min);
                proj.iter().filter(|&&p| p <= lo + 1e-9).count()
            })
            .sum::<usize>()
    };
    separating + face_face + touching(&na, poly_b) + touching(&nb, poly_a)
}

fn body(name: &str, polygon: Polygon, movable: bool, actuated: bool) -> BodySpec {
    BodySpec { name: name.into(), polygon, movable, actuated }
}

#[test]
fn pushing_successor_counts_match_enumeration() {
    let tri = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let flipped = vec![[0.0, 0.0], [-1.0, 0.0], [0.0, -1.0]];
    let mut env = push1_environment();
    env.bodies = vec![body("robot", tri.clone(), true, true), body("object", flipped.clone(), true, false)];
    env.start.insert("robot".into(), [-3.0, 0.0]);
    env.start.insert("object".into(), [1.5, 0.5]);
    let problem = PushingProblem::new(env.clone()).unwrap();
    let expected = brute_force_options(&tri, &flipped);
    assert_eq!(problem.pair_options(0).len(), expected);
    let succ = problem.pushing_successors(problem.start_mode());
    assert_eq!(succ.len(), expected - 1);
    assert!(!succ.contains(problem.start_mode()));
    assert_eq!(succ.iter().collect::<BTreeSet<_>>().len(), succ.len());

    // boxes: 8 separating faces, 4 face-face, 16 face-vertex
    let boxes = PushingProblem::new(push1_environment()).unwrap();
    assert_eq!(boxes.pair_options(0).len(), 28);
    assert_eq!(brute_force_options(&square(0.0, 0.0, 0.25), &square(0.0, 0.0, 0.5)), 28);

    // two pairs: robot, object and a static wall
    env.bodies.push(body("wall", square(0.0, 3.0, 0.5), false, false));
    let problem = PushingProblem::new(env).unwrap();
    assert_eq!(problem.pairs().len(), 3);
    let total: usize = (0..3).map(|q| problem.pair_options(q).len() - 1).sum();
    assert_eq!(problem.pushing_successors(problem.start_mode()).len(), total);
    // implicit successors add the unchanged mode (from the source) and T
    assert_eq!(problem.successors(problem.source()).unwrap().len(), total + 2);
}

#[test]
fn pushing_edges_cost_and_continuity() {
    let solver = LpSolver::default();
    let problem = PushingProblem::new(push1_environment()).unwrap();
    let src = problem.source().clone();
    let succ = problem.successors(&src).unwrap();
    let (into_t, _) = succ.iter().find(|(e, _)| e.to() == problem.target()).unwrap();
    assert_eq!(into_t.cost().c0, 0.0);
    assert!(into_t.cost().terms.is_empty());
    let mode = problem.mode_vertex_id(problem.start_mode());
    let e = problem.edge(&src, &mode).unwrap();
    assert!(problem.edge(&mode, &mode).is_err());
    assert!(problem.edge(problem.target(), &mode).is_err());
    // no motion in v -> cost 1
    let xs = samples(&problem.vertex(&src).unwrap().set().clone(), 1, 4).remove(0);
    let layout = problem.layout(problem.start_mode());
    let mut xv = DVector::zeros(layout.dim());
    for m in 0..2 {
        for k in 0..2 {
            for d in 0..2 {
                xv[layout.position(k, m) + d] = xs[layout.position(1, m) + d];
            }
        }
    }
    assert!((e.cost().evaluate(&xs, &xv) - 1.0).abs() < 1e-12);
    // continuity on an optimal restriction; the box cannot move in the separated mode
    let problem = PushingProblem::new(robot_and_box([-1.5, 0.0], ([-0.05, -0.05], [0.05, 0.05]), 4.0)).unwrap();
    let (src, mode) = (problem.source().clone(), problem.mode_vertex_id(problem.start_mode()));
    let path = Path::new(vec![src, mode, problem.target().clone()]);
    let RestrictionOutcome::Optimal(sol) = solve_restriction(&problem, &path, &Heuristic::zero(), &solver).unwrap() else {
        panic!("restriction should be feasible");
    };
    assert!(trajectory_residual(&problem, &path, &sol.trajectory).unwrap() <= 1e-8);
}

#[test]
fn pushing_push1_solves_with_residual_check() {
    let solver = LpSolver::default();
    let problem = PushingProblem::new(push1_environment()).unwrap();
    let h = Heuristic::new(HeuristicSpec::shortcut_for(&problem), &problem, &solver).unwrap();
    let r = gcs_star(&problem, &h, &rn_sampling(), &SearchOptions::default(), &solver).unwrap();
    assert_eq!(r.status, SearchStatus::Solved, "{:?}", r.stats);
    let sol = r.solution.unwrap();
    assert!(trajectory_residual(&problem, &sol.path, &sol.trajectory).unwrap() <= 1e-7);
    assert!((evaluate_trajectory_cost(&problem, &sol.path, &sol.trajectory).unwrap() - sol.cost).abs() < 1e-6);
    let tracks = problem.body_positions(&sol.path, &sol.trajectory).unwrap();
    let end = tracks[1].last().unwrap();
    assert!((end[0] - 1.0).abs() <= 0.05 + 1e-7 && end[1].abs() <= 0.05 + 1e-7);
    // the box moves at least 0.95 and the robot must follow it
    assert!(sol.cost >= 1.0 + 2.0 * 0.95 - 1e-6, "cost {}", sol.cost);
}

#[test]
fn pushing_goal_at_start_is_cheap() {
    let solver = LpSolver::default();
    let problem = PushingProblem::new(robot_and_box([-1.5, 0.0], ([-0.05, -0.05], [0.05, 0.05]), 4.0)).unwrap();
    let r = gcs_star(&problem, &Heuristic::zero(), &rn_sampling(), &SearchOptions::default(), &solver).unwrap();
    assert_eq!(r.status, SearchStatus::Solved);
    assert!(r.solution.unwrap().cost <= 1e-6);
}

#[test]
fn pushing_goal_outside_workspace_fails() {
    let solver = LpSolver::default();
    let problem = PushingProblem::new(robot_and_box([-1.5, 0.0], ([9.0, 0.0], [9.5, 0.5]), 4.0)).unwrap();
    let opts = SearchOptions { max_path_len: Some(3), ..Default::default() };
    let r = gcs_star(&problem, &Heuristic::zero(), &rn_sampling(), &opts, &solver).unwrap();
    assert_eq!(r.status, SearchStatus::Fail);
}

#[test]
fn pushing_rejects_overlapping_start_and_round_trips_json() {
    assert!(PushingProblem::new(robot_and_box([0.2, 0.0], ([0.0; 2], [1.0; 2]), 4.0)).is_err());
    let env = push1_environment();
    assert_eq!(PushingEnvironment::from_json(&env.to_json()).unwrap(), env);
    let key = ContactModeKey(vec![PairMode::FaceVertex { side: 1, face: 2, vertex: 3 }, PairMode::Separating { side: 0, face: 0 }]);
    assert_eq!(key.to_string().parse::<ContactModeKey>().unwrap(), key);
}
