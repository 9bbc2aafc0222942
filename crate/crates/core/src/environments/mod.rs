//! Problem builders: the two-route counterexample, one-dimensional
//! domination scenarios, stepping stones and planar box pushing.

mod fig3;
mod fig4;
mod pushing;
mod stones;

pub use fig3::{fig3_counterexample, fig3_json};
pub use fig4::{fig4_scenarios, CostCurve, DominationScenario, TERMINAL_HI, TERMINAL_LO};
pub use pushing::{
    push1_environment, BodySpec, BoxRegion, ContactModeKey, GoalRegion, PairMode, PushingEnvironment, PushingProblem, PushingVertexLayout,
};
pub use stones::{make_stepping_stones, polygon_to_hpolyhedron, stones4, stones4_layout, Polygon, SteppingStones};
