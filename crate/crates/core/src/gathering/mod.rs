//! The good-agent protocol: initial exploration, then cycles of one
//! CollectID-or-MakeGroup phase followed by two Gather phases.

mod clock;
mod labels;
mod stages;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use clock::{ClockPos, PhaseClock};
pub use labels::{
    cist_length, estimate_f, extended_label_bit, extended_label_block, floor_log2, LabelError,
};
pub use stages::{cist_phase_step, consensus, gst_phase_step, mgst_phase_step, reliable_gids};

use crate::exploration::ExplorationSequence;
use crate::simcore::{Action, AgentId, ObservationView};
use crate::simgather::{self, SimFields};

/// `STA` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sta {
    Ci,
    MgSearch,
    MgTarget,
    GExplore,
    GWait,
}

impl Sta {
    pub fn name(self) -> &'static str {
        match self {
            Sta::Ci => "S_CI",
            Sta::MgSearch => "S_MG_SA",
            Sta::MgTarget => "S_MG_TA",
            Sta::GExplore => "S_G_EG",
            Sta::GWait => "S_G_WG",
        }
    }
}

/// The kind of round an agent is about to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseKind {
    Explore,
    Collect,
    MakeGroup,
    GatherCollect,
    GatherMeet,
    /// Waiting on the gathering node for the termination quorum.
    Settled,
    Done,
}

impl PhaseKind {
    pub fn name(self) -> &'static str {
        match self {
            PhaseKind::Explore => "explore",
            PhaseKind::Collect => "cist",
            PhaseKind::MakeGroup => "mgst",
            PhaseKind::GatherCollect => "gst1",
            PhaseKind::GatherMeet => "gst2",
            PhaseKind::Settled => "sim",
            PhaseKind::Done => "done",
        }
    }
}

/// Which termination rule the agents run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Non-simultaneous termination.
    Ns,
    /// Simultaneous termination.
    Sim,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ns => "ns",
            Variant::Sim => "sim",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ns" => Ok(Variant::Ns),
            "sim" => Ok(Variant::Sim),
            other => Err(format!("unknown variant `{other}` (expected ns or sim)")),
        }
    }
}

/// MakeGroup searcher bookkeeping, reset at every phase start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchMemo {
    pub found: bool,
    pub flagged: bool,
}

/// What the agent does in the second Gather phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum GatherPlan {
    /// No reliable group known, or not yet decided.
    #[default]
    Idle,
    /// Member of the smallest reliable waiting group: stay and finish.
    Hold,
    /// Look for the waiting group `gid`.
    Seek { gid: AgentId, found: bool },
}

/// Full protocol state. Between rounds it describes the round about to be
/// executed (`phase`, `slot`, and per-phase values set on entry), so
/// co-located agents read current information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    pub id: AgentId,
    pub sta: Sta,
    pub end_ci: bool,
    /// Rounds executed since wake.
    pub count: u64,
    pub x: u32,
    pub estf: Option<u32>,
    pub il: Arc<BTreeSet<AgentId>>,
    pub bl: Arc<BTreeSet<AgentId>>,
    pub tar: Option<AgentId>,
    pub gef: Option<u32>,
    pub gid: Option<AgentId>,
    pub gl: Arc<BTreeSet<(AgentId, AgentId)>>,
    pub phase: PhaseKind,
    pub slot: u64,
    pub search: SearchMemo,
    pub plan: GatherPlan,
    pub sim: SimFields,
    pub terminated: bool,
}

impl AgentState {
    /// State of a freshly woken agent, positioned on its first round.
    pub fn new(id: AgentId, clock: &PhaseClock) -> Self {
        let mut state = AgentState {
            id,
            sta: Sta::Ci,
            end_ci: false,
            count: 0,
            x: 1,
            estf: None,
            il: Arc::new(BTreeSet::from([id])),
            bl: Arc::new(BTreeSet::new()),
            tar: None,
            gef: None,
            gid: None,
            gl: Arc::new(BTreeSet::new()),
            phase: PhaseKind::Explore,
            slot: 1,
            search: SearchMemo::default(),
            plan: GatherPlan::Idle,
            sim: SimFields::default(),
            terminated: false,
        };
        place(clock, &mut state);
        state
    }

    /// Own-clock number of the round about to be executed.
    pub fn round(&self) -> u64 {
        self.count + 1
    }
}

/// Everything shared by all good agents of one run.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub sequence: Arc<ExplorationSequence>,
    pub clock: PhaseClock,
    pub variant: Variant,
}

impl Protocol {
    pub fn new(sequence: Arc<ExplorationSequence>, variant: Variant) -> Self {
        let clock = PhaseClock::new(sequence.x_n() as u64);
        Self {
            sequence,
            clock,
            variant,
        }
    }

    pub fn x_n(&self) -> u64 {
        self.clock.x_n()
    }

    pub fn initial_state(&self, id: AgentId) -> AgentState {
        AgentState::new(id, &self.clock)
    }
}

/// One round of the protocol.
pub fn step(
    ctx: &Protocol,
    state: &AgentState,
    view: &ObservationView<'_>,
) -> (AgentState, Action) {
    let mut s = state.clone();
    if s.terminated {
        return (s, Action::Stay);
    }
    let action = match s.phase {
        PhaseKind::Explore => explo_move(ctx, (s.slot - 1) as usize, view),
        PhaseKind::Collect => cist_phase_step(ctx, &mut s, view),
        PhaseKind::MakeGroup => mgst_phase_step(ctx, &mut s, view),
        PhaseKind::GatherCollect | PhaseKind::GatherMeet => gst_phase_step(ctx, &mut s, view),
        PhaseKind::Settled => simgather::sim_step(ctx, &mut s, view),
        PhaseKind::Done => Action::Stay,
    };
    s.count += 1;
    if action == Action::Terminate {
        s.terminated = true;
    } else if !matches!(s.phase, PhaseKind::Settled | PhaseKind::Done) {
        place(&ctx.clock, &mut s);
    }
    (s, action)
}

/// Positions the state on round `count + 1`, running phase-entry updates
/// when that round opens a phase.
fn place(clock: &PhaseClock, s: &mut AgentState) {
    match clock.locate(s.count + 1) {
        ClockPos::Initial { step } => {
            s.phase = PhaseKind::Explore;
            s.slot = step;
        }
        ClockPos::Cycle { phase, slot, .. } => {
            s.phase = match phase {
                0 if s.end_ci => PhaseKind::MakeGroup,
                0 => PhaseKind::Collect,
                1 => PhaseKind::GatherCollect,
                _ => PhaseKind::GatherMeet,
            };
            s.slot = slot;
            if slot == 1 {
                enter_phase(s);
            }
        }
    }
}

fn enter_phase(s: &mut AgentState) {
    s.search = SearchMemo::default();
    s.plan = GatherPlan::Idle;
    if s.phase != PhaseKind::MakeGroup || s.gid.is_some() {
        return;
    }
    if s.x == 1 {
        let quota = s.estf.unwrap_or(0) as usize + 1;
        s.sta = if s.il.iter().take(quota).any(|&id| id == s.id) {
            Sta::MgTarget
        } else {
            Sta::MgSearch
        };
    }
    s.tar = if s.sta == Sta::MgTarget {
        Some(s.id)
    } else {
        s.il.iter().find(|id| !s.bl.contains(id)).copied()
    };
}

/// EXPLO move number `index`; every invocation starts from START.
pub(crate) fn explo_move(ctx: &Protocol, index: usize, view: &ObservationView<'_>) -> Action {
    if view.degree == 0 {
        return Action::Stay;
    }
    let entry = if index == 0 { None } else { view.entry_port };
    let port = ctx
        .sequence
        .explo_step(index, entry, view.degree)
        .expect("schedule keeps EXPLO indices and ports in range");
    Action::Move(port)
}
