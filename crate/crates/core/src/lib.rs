//! Round-synchronous simulator and checker for gathering mobile agents on
//! anonymous port-numbered graphs in the presence of weakly Byzantine
//! agents.
//!
//! The crate is layered bottom-up: [`portgraph`] and [`exploration`] model
//! the network and the walk every agent uses, [`gathering`] and
//! [`simgather`] are the good-agent protocol as pure transition functions,
//! [`simcore`] runs rounds, [`adversary`] drives the faulty agents and the
//! wake-up schedule, and [`harness`] turns scenarios into verdicts.

pub mod adversary;
pub mod exploration;
pub mod gathering;
pub mod harness;
pub mod portgraph;
pub mod simcore;
pub mod simgather;

pub use adversary::{StrategyKind, WakePolicy, WakePolicyKind};
pub use exploration::ExplorationSequence;
pub use gathering::{AgentState, Protocol, Variant};
pub use harness::{ScenarioConfig, Verdict};
pub use portgraph::{FamilyKind, GraphFamily, PortGraph};
pub use simcore::{Action, AgentId, ObservationView, Trace};
