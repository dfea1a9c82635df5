//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use byzgather::harness::{Scenario, SequenceStore};
use byzgather::simcore::SimSetup;
use byzgather::{FamilyKind, ScenarioConfig};

/// A mid-sized non-simultaneous run: ring of 6, one lure, 17 agents.
pub fn ring_config() -> ScenarioConfig {
    let mut c = ScenarioConfig::new(FamilyKind::Ring, 6, 1, 17);
    c.name = "bench-ring".into();
    c.strategy = "lure".into();
    c
}

/// The smallest team on a path, under staggered wakes.
pub fn small_config() -> ScenarioConfig {
    let mut c = ScenarioConfig::new(FamilyKind::Path, 4, 0, 4);
    c.name = "bench-small".into();
    c.wake_policy = "adversarial_stagger".into();
    c
}

/// Resolves a config once so the benchmark measures only the engine.
pub fn setup(config: &ScenarioConfig, store: &SequenceStore) -> SimSetup {
    Scenario::resolve(config, store)
        .expect("fixture scenario is valid")
        .setup()
}

pub fn shared_store() -> Arc<SequenceStore> {
    Arc::new(SequenceStore::new())
}
