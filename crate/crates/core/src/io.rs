//! Problem loading and the per-run JSON record.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::environments::{fig3_json, push1_environment, stones4, PushingEnvironment, PushingProblem};
use crate::gcs::{ExplicitGcs, GcsError, ImplicitGcs, Path, Trajectory};
use crate::restriction::{evaluate_trajectory_cost, RestrictionError};
use crate::search::{SearchResult, SearchStatus};

pub const FIXTURES: [&str; 3] = ["fig3", "stones4", "push1"];

/// A problem read from JSON or a built-in fixture.
#[derive(Debug)]
pub enum LoadedProblem {
    Explicit(ExplicitGcs),
    Pushing(Box<PushingProblem>),
}

impl LoadedProblem {
    /// Explicit problem JSON, or a pushing environment when the document has
    /// a `bodies` key.
    pub fn from_json(text: &str) -> Result<Self, GcsError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| GcsError::Malformed(e.to_string()))?;
        if value.get("bodies").is_some() {
            Ok(Self::Pushing(Box::new(PushingProblem::new(PushingEnvironment::from_json(text)?)?)))
        } else {
            Ok(Self::Explicit(ExplicitGcs::from_json(text)?))
        }
    }

    pub fn fixture(name: &str) -> Result<Self, GcsError> {
        match name {
            "fig3" => Ok(Self::Explicit(ExplicitGcs::from_json(fig3_json())?)),
            "stones4" => Ok(Self::Explicit(stones4())),
            "push1" => Ok(Self::Pushing(Box::new(PushingProblem::new(push1_environment())?))),
            other => Err(GcsError::Malformed(format!("unknown fixture {other:?}, expected one of {}", FIXTURES.join(", ")))),
        }
    }

    pub fn graph(&self) -> &dyn ImplicitGcs {
        match self {
            Self::Explicit(g) => g,
            Self::Pushing(p) => p.as_ref(),
        }
    }
}

/// Solution and statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub status: SearchStatus,
    pub cost: Option<f64>,
    pub path: Option<Path>,
    pub expansions: usize,
    pub queue_pushes: usize,
    pub domination_calls: usize,
    pub solver_calls: usize,
    pub wall_time_ms: f64,
    pub seed: u64,
    pub checker: String,
    pub heuristic: String,
    /// One point per path vertex.
    #[serde(default)]
    pub trajectory: Option<Vec<Vec<f64>>>,
}

impl RunRecord {
    pub fn new(result: &SearchResult, seed: u64, checker: &str, heuristic: &str) -> Self {
        let sol = result.solution.as_ref();
        Self {
            status: result.status,
            cost: sol.map(|s| s.cost),
            path: sol.map(|s| s.path.clone()),
            expansions: result.stats.expansions,
            queue_pushes: result.stats.queue_pushes,
            domination_calls: result.stats.domination_calls,
            solver_calls: result.stats.solver_calls,
            wall_time_ms: result.stats.wall_time.as_secs_f64() * 1e3,
            seed,
            checker: checker.to_string(),
            heuristic: heuristic.to_string(),
            trajectory: sol.map(|s| s.trajectory.points.iter().map(|p| p.iter().copied().collect()).collect()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, GcsError> {
        serde_json::from_str(text).map_err(|e| GcsError::Malformed(e.to_string()))
    }

    /// The stored trajectory, if nonempty, with the cost recomputed from the graph's edges.
    pub fn trajectory(&self, g: &dyn ImplicitGcs) -> Result<Option<(Path, Trajectory)>, RestrictionError> {
        let (Some(path), Some(points)) = (&self.path, &self.trajectory) else {
            return Ok(None);
        };
        if path.is_empty() || points.is_empty() {
            return Ok(None);
        }
        let mut traj = Trajectory { points: points.iter().map(|p| DVector::from_vec(p.clone())).collect(), cost: 0.0 };
        traj.cost = evaluate_trajectory_cost(g, path, &traj)?;
        Ok(Some((path.clone(), traj)))
    }
}
