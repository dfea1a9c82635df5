//! Run record: change-only position/stage log plus protocol events.

use std::fmt::Write as _;
use std::sync::Arc;

use super::{AgentSpec, ObservationView, Status};
use crate::adversary::StrategyKind;
use crate::gathering::{AgentState, PhaseKind, Sta};
use crate::portgraph::NodeIdx;
use crate::simcore::AgentId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentMeta {
    pub id: AgentId,
    pub byzantine: bool,
    pub start: NodeIdx,
}

/// `agent` is at `node` with `status`/`stage` after `round` (0 = initial).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record {
    pub round: u64,
    pub agent: AgentId,
    pub node: NodeIdx,
    pub status: Status,
    pub stage: &'static str,
}

/// A co-located agent as seen by an agent that just joined a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupWitness {
    pub id: AgentId,
    pub tar: Option<AgentId>,
    pub in_mgst: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Woke,
    CistFinished {
        il: Vec<AgentId>,
        estf: u32,
    },
    MgstPhaseStarted {
        x: u32,
        sta: Sta,
        tar: Option<AgentId>,
        grouped: bool,
    },
    /// `witnessed`: the target was met and then failed the watch.
    Blacklisted {
        id: AgentId,
        witnessed: bool,
    },
    GroupJoined {
        gid: AgentId,
        gef: u32,
        node: NodeIdx,
        witnesses: Vec<GroupWitness>,
    },
    Completed,
    Terminated,
    IdmChanged {
        idm: Option<AgentId>,
    },
    FlagRaised,
}

/// Good-agent protocol event. `round` is the round in which the change
/// happened, or for phase starts the first round of the phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub round: u64,
    pub agent: AgentId,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub agents: Vec<AgentMeta>,
    pub x_n: u64,
    pub strategy: StrategyKind,
    /// Last executed round.
    pub rounds: u64,
    pub capped: bool,
    pub records: Vec<Record>,
    pub wake_rounds: Vec<Option<u64>>,
    pub termination_rounds: Vec<Option<u64>>,
    pub final_positions: Vec<NodeIdx>,
    pub final_states: Vec<AgentState>,
    pub events: Vec<Event>,
    last: Vec<Option<(NodeIdx, Status, &'static str)>>,
}

impl Trace {
    pub(crate) fn new(specs: &[AgentSpec], x_n: u64, strategy: StrategyKind) -> Self {
        let k = specs.len();
        Trace {
            agents: specs
                .iter()
                .map(|s| AgentMeta {
                    id: s.id,
                    byzantine: s.byzantine,
                    start: s.start,
                })
                .collect(),
            x_n,
            strategy,
            rounds: 0,
            capped: false,
            records: Vec::new(),
            wake_rounds: vec![None; k],
            termination_rounds: vec![None; k],
            final_positions: Vec::new(),
            final_states: Vec::new(),
            events: Vec::new(),
            last: vec![None; k],
        }
    }

    pub(crate) fn record(
        &mut self,
        round: u64,
        i: usize,
        node: NodeIdx,
        status: Status,
        state: &AgentState,
    ) {
        let stage = if self.agents[i].byzantine {
            "byzantine"
        } else {
            state.phase.name()
        };
        let key = (node, status, stage);
        if self.last[i] == Some(key) {
            return;
        }
        self.last[i] = Some(key);
        self.records.push(Record {
            round,
            agent: self.agents[i].id,
            node,
            status,
            stage,
        });
    }

    pub(crate) fn push_event(&mut self, round: u64, i: usize, kind: EventKind) {
        self.events.push(Event {
            round,
            agent: self.agents[i].id,
            kind,
        });
    }

    pub(crate) fn diff_events(
        &mut self,
        round: u64,
        i: usize,
        node: NodeIdx,
        old: &AgentState,
        new: &AgentState,
        view: &ObservationView<'_>,
    ) {
        if !old.end_ci && new.end_ci {
            let il = new.il.iter().copied().collect();
            self.push_event(
                round,
                i,
                EventKind::CistFinished {
                    il,
                    estf: new.estf.unwrap_or(0),
                },
            );
        }
        if !Arc::ptr_eq(&old.bl, &new.bl) {
            let witnessed = new.search.flagged && !old.search.flagged;
            for &id in new.bl.difference(&old.bl) {
                self.push_event(round, i, EventKind::Blacklisted { id, witnessed });
            }
        }
        if let (None, Some(gid)) = (old.gid, new.gid) {
            let witnesses = view
                .co_located
                .iter()
                .map(|e| GroupWitness {
                    id: e.id,
                    tar: e.state.tar,
                    in_mgst: !e.terminated && e.state.phase == PhaseKind::MakeGroup,
                })
                .collect();
            let gef = new.gef.unwrap_or(0);
            self.push_event(
                round,
                i,
                EventKind::GroupJoined {
                    gid,
                    gef,
                    node,
                    witnesses,
                },
            );
        }
        if old.phase != PhaseKind::Settled && new.phase == PhaseKind::Settled {
            self.push_event(round, i, EventKind::Completed);
        }
        if new.terminated && !old.terminated {
            self.push_event(round, i, EventKind::Terminated);
        }
        if new.sim.idm != old.sim.idm {
            self.push_event(round, i, EventKind::IdmChanged { idm: new.sim.idm });
        }
        if new.sim.flag_t && !old.sim.flag_t {
            self.push_event(round, i, EventKind::FlagRaised);
        }
        if !new.terminated && new.phase == PhaseKind::MakeGroup && new.slot == 1 {
            self.push_event(
                round + 1,
                i,
                EventKind::MgstPhaseStarted {
                    x: new.x,
                    sta: new.sta,
                    tar: new.tar,
                    grouped: new.gid.is_some(),
                },
            );
        }
    }

    pub fn good_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.agents.len()).filter(|&i| !self.agents[i].byzantine)
    }

    pub fn index_of(&self, id: AgentId) -> Option<usize> {
        self.agents.iter().position(|a| a.id == id)
    }

    pub fn events_of(&self, id: AgentId) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.agent == id)
    }

    /// Position, status and stage of every agent after `round`.
    pub fn snapshot(&self, round: u64) -> Vec<Record> {
        let mut out: Vec<Option<Record>> = vec![None; self.agents.len()];
        for r in self.records.iter().take_while(|r| r.round <= round) {
            if let Some(i) = self.index_of(r.agent) {
                out[i] = Some(*r);
            }
        }
        out.into_iter().flatten().collect()
    }

    /// Line-delimited export, `round,agent,node,status,stage`, after
    /// `#`-prefixed header lines.
    pub fn export(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("round,agent,node,status,stage\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.round, r.agent, r.node, r.status, r.stage
            );
        }
        out
    }
}
