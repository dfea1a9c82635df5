//! Scenarios, bounds, verdicts and test matrices.

mod bounds;
mod check;
mod scenario;
mod suite;

pub use bounds::{theorem1_bound, theorem2_bound};
pub use check::{check, Metrics, Property, Verdict};
pub use scenario::{
    load_scenario, Scenario, ScenarioConfig, ScenarioError, SequenceStore, TeamRule, ID_POOL,
};
pub use suite::{run_scenario, run_suite, MatrixSpec, Outcome, SuiteReport, CSV_HEADER};
