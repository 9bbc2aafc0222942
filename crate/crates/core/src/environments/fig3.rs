use crate::gcs::ExplicitGcs;

const FIG3_JSON: &str = include_str!("../../fixtures/fig3.json");

/// Two routes `s -> A -> C` and `s -> B -> C` into a shared vertex `C`.
/// The cheaper route into `C` cannot continue to `t`; only the route through
/// `B` can.
pub fn fig3_counterexample() -> ExplicitGcs {
    ExplicitGcs::from_json(FIG3_JSON).expect("committed fixture parses")
}

/// Raw fixture text, as committed.
pub fn fig3_json() -> &'static str {
    FIG3_JSON
}
