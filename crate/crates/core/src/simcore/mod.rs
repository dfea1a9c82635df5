//! The synchronous round engine: wake-up, simultaneous observation,
//! transitions and movement.

mod trace;
mod view;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use trace::{AgentMeta, Event, EventKind, GroupWitness, Record, Trace};
pub use view::{Action, AgentId, ObservationView, ViewBuilder, ViewCache, ViewEntry};

use crate::adversary::{AdversaryContext, ByzantineAgent, StrategyKind};
use crate::gathering::{self, AgentState, Protocol};
use crate::portgraph::{NodeIdx, Port, PortGraph};

/// When a dormant agent starts, besides being woken by a visitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WakeTime {
    Round(u64),
    ByVisit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Dormant,
    Active,
    Terminated,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Dormant => "dormant",
            Status::Active => "active",
            Status::Terminated => "terminated",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSpec {
    pub id: AgentId,
    pub start: NodeIdx,
    pub byzantine: bool,
    pub wake: WakeTime,
}

/// A fully resolved run: graph, protocol, agents and adversary.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub graph: Arc<PortGraph>,
    pub protocol: Protocol,
    pub agents: Vec<AgentSpec>,
    pub strategy: StrategyKind,
    pub strategy_seed: u64,
    pub round_cap: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("no agents")]
    NoAgents,
    #[error("id {0} is used by more than one agent")]
    DuplicateId(AgentId),
    #[error("id 0 is not a valid agent id")]
    ZeroId,
    #[error("agent {id} starts on node {node}, graph has {nodes} nodes")]
    StartOutOfRange {
        id: AgentId,
        node: NodeIdx,
        nodes: usize,
    },
    #[error("no good agent wakes at round 1")]
    NoGoodAgentAtRoundOne,
}

impl SimSetup {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.agents.is_empty() {
            return Err(SimError::NoAgents);
        }
        let mut seen = BTreeSet::new();
        for a in &self.agents {
            if a.id.0 == 0 {
                return Err(SimError::ZeroId);
            }
            if !seen.insert(a.id) {
                return Err(SimError::DuplicateId(a.id));
            }
            if a.start >= self.graph.node_count() {
                return Err(SimError::StartOutOfRange {
                    id: a.id,
                    node: a.start,
                    nodes: self.graph.node_count(),
                });
            }
        }
        if !self
            .agents
            .iter()
            .any(|a| !a.byzantine && a.wake == WakeTime::Round(1))
        {
            return Err(SimError::NoGoodAgentAtRoundOne);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Place {
    node: NodeIdx,
    entry: Option<Port>,
}

/// Agent indices per node that appear in views: everyone awake, terminated
/// agents included.
fn occupants(nodes: usize, places: &[Place], status: &[Status]) -> Vec<Vec<usize>> {
    let mut by_node = vec![Vec::new(); nodes];
    for (i, (p, st)) in places.iter().zip(status).enumerate() {
        if *st != Status::Dormant {
            by_node[p.node].push(i);
        }
    }
    by_node
}

/// Runs the scenario until every good agent has terminated or the round cap
/// is reached.
pub fn run(setup: &SimSetup) -> Result<Trace, SimError> {
    setup.validate()?;
    let graph = setup.graph.as_ref();
    let protocol = &setup.protocol;

    let mut order: Vec<usize> = (0..setup.agents.len()).collect();
    order.sort_by_key(|&i| setup.agents[i].id);
    let specs: Vec<AgentSpec> = order.iter().map(|&i| setup.agents[i].clone()).collect();
    let k = specs.len();

    let mut byz: Vec<Option<ByzantineAgent>> = specs
        .iter()
        .map(|s| {
            s.byzantine
                .then(|| ByzantineAgent::new(setup.strategy, setup.strategy_seed, s.id, protocol))
        })
        .collect();
    let mut states: Vec<AgentState> = specs
        .iter()
        .zip(&byz)
        .map(|(s, b)| match b {
            Some(b) => b.presented(),
            None => protocol.initial_state(s.id),
        })
        .collect();
    let mut places: Vec<Place> = specs
        .iter()
        .map(|s| Place {
            node: s.start,
            entry: None,
        })
        .collect();
    let mut status = vec![Status::Dormant; k];

    let mut trace = Trace::new(&specs, protocol.x_n(), setup.strategy);
    for i in 0..k {
        trace.record(0, i, places[i].node, status[i], &states[i]);
    }

    let mut next_states = states.clone();
    let mut actions = vec![Action::Stay; k];
    let mut round = 0;
    let good_done = |status: &[Status]| {
        specs
            .iter()
            .zip(status)
            .all(|(s, st)| s.byzantine || *st == Status::Terminated)
    };

    while !good_done(&status) {
        if round >= setup.round_cap {
            trace.capped = true;
            break;
        }
        round += 1;

        // Wake-up: by schedule, then every dormant agent sharing a node with
        // a non-dormant one.
        for i in 0..k {
            if status[i] == Status::Dormant && specs[i].wake == WakeTime::Round(round) {
                status[i] = Status::Active;
            }
        }
        let mut occupied = vec![false; graph.node_count()];
        for i in 0..k {
            if status[i] != Status::Dormant {
                occupied[places[i].node] = true;
            }
        }
        for i in 0..k {
            if status[i] == Status::Dormant && occupied[places[i].node] {
                status[i] = Status::Active;
            }
            if status[i] == Status::Active && trace.wake_rounds[i].is_none() {
                trace.wake_rounds[i] = Some(round);
                trace.push_event(round, i, EventKind::Woke);
            }
        }

        // Views, formed from start-of-round positions and states.
        let by_node = occupants(graph.node_count(), &places, &status);
        let entries: Vec<Vec<ViewEntry<'_>>> = by_node
            .iter()
            .map(|members| {
                members
                    .iter()
                    .map(|&i| ViewEntry {
                        id: specs[i].id,
                        state: &states[i],
                        terminated: status[i] == Status::Terminated || states[i].terminated,
                    })
                    .collect()
            })
            .collect();
        let caches: Vec<ViewBuilder> = (0..graph.node_count())
            .map(|_| ViewBuilder::new())
            .collect();
        let positions: Vec<NodeIdx> = places.iter().map(|p| p.node).collect();
        let adv = AdversaryContext {
            round,
            graph,
            protocol,
            agents: &specs,
            positions: &positions,
            states: &states,
            status: &status,
        };

        for i in 0..k {
            if status[i] != Status::Active {
                next_states[i].clone_from(&states[i]);
                actions[i] = Action::Stay;
                continue;
            }
            let node = places[i].node;
            let view = caches[node].view(graph.degree(node), places[i].entry, &entries[node]);
            let (mut next, action) = match &mut byz[i] {
                Some(b) => b.step(&adv, i, &view),
                None => gathering::step(protocol, &states[i], &view),
            };
            next.id = specs[i].id;
            if !specs[i].byzantine {
                trace.diff_events(round, i, node, &states[i], &next, &view);
            }
            next_states[i] = next;
            actions[i] = action;
        }
        drop(entries);

        // Simultaneous application.
        for i in 0..k {
            match actions[i] {
                Action::Stay => {}
                Action::Move(p) => match graph.neighbor(places[i].node, p) {
                    Ok((u, q)) => {
                        places[i] = Place {
                            node: u,
                            entry: Some(q),
                        }
                    }
                    Err(_) => debug_assert!(specs[i].byzantine, "good agent used an invalid port"),
                },
                Action::Terminate if !specs[i].byzantine => {
                    status[i] = Status::Terminated;
                    trace.termination_rounds[i] = Some(round);
                }
                Action::Terminate => {}
            }
        }
        std::mem::swap(&mut states, &mut next_states);
        for i in 0..k {
            trace.record(round, i, places[i].node, status[i], &states[i]);
        }
    }

    trace.rounds = round;
    trace.final_positions = places.iter().map(|p| p.node).collect();
    trace.final_states = states;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminated_agents_stay_visible_and_dormant_ones_do_not() {
        let at = |node| Place { node, entry: None };
        let places = [at(0), at(0), at(1), at(0)];
        let status = [
            Status::Terminated,
            Status::Active,
            Status::Dormant,
            Status::Dormant,
        ];
        assert_eq!(occupants(2, &places, &status), vec![vec![0, 1], vec![]]);
    }
}
