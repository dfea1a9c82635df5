//! What an agent sees and what it may do in one round.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gathering::AgentState;
use crate::portgraph::Port;

/// Unique agent identifier (a positive integer). Byzantine agents cannot
/// change it.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Decision emitted by a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Stay,
    /// Leave through the given 1-based port.
    Move(Port),
    /// Enter the terminal state on the current node.
    Terminate,
}

/// One co-located agent as presented at the start of the round.
#[derive(Debug, Clone, Copy)]
pub struct ViewEntry<'a> {
    /// True id; the engine overwrites whatever a Byzantine agent presents.
    pub id: AgentId,
    pub state: &'a AgentState,
    pub terminated: bool,
}

/// Everything an agent reads at the beginning of a round.
///
/// `co_located` lists every non-dormant agent on the node, the observer and
/// terminated agents included, sorted by id. All agents on one node receive
/// the same slice.
#[derive(Debug, Clone, Copy)]
pub struct ObservationView<'a> {
    pub degree: usize,
    /// `None` means START: the agent has not entered this node through a port.
    pub entry_port: Option<Port>,
    pub co_located: &'a [ViewEntry<'a>],
    pub(crate) cache: &'a ViewCache,
}

impl<'a> ObservationView<'a> {
    pub fn entry(&self, id: AgentId) -> Option<&ViewEntry<'a>> {
        self.co_located.iter().find(|e| e.id == id)
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.entry(id).is_some()
    }

    /// Most frequent presented `estf` on the node; ties go to the smallest
    /// value. `None` when nobody presents one.
    pub fn estf_mode(&self) -> Option<u32> {
        *self.cache.estf_mode.get_or_init(|| {
            let mut freq: BTreeMap<u32, usize> = BTreeMap::new();
            for e in self.co_located {
                if let Some(v) = e.state.estf {
                    *freq.entry(v).or_default() += 1;
                }
            }
            // max_by_key keeps the last maximum; iterate descending so the
            // smallest value wins ties.
            freq.into_iter()
                .rev()
                .max_by_key(|&(_, c)| c)
                .map(|(v, _)| v)
        })
    }

    /// Largest id that appears in the presented `il` of at least
    /// `quorum` co-located agents.
    pub fn max_id_with_quorum(&self, quorum: usize) -> Option<AgentId> {
        let compute = || {
            let mut freq: BTreeMap<AgentId, usize> = BTreeMap::new();
            for e in self.co_located {
                for &id in e.state.il.iter() {
                    *freq.entry(id).or_default() += 1;
                }
            }
            freq.into_iter()
                .rev()
                .find(|&(_, c)| c >= quorum)
                .map(|(id, _)| id)
        };
        let (q, result) = *self.cache.quorum_max.get_or_init(|| (quorum, compute()));
        if q == quorum {
            result
        } else {
            compute()
        }
    }
}

/// Per-node memo of quantities derived purely from the shared view.
#[derive(Debug, Default)]
pub struct ViewCache {
    estf_mode: OnceCell<Option<u32>>,
    quorum_max: OnceCell<(usize, Option<AgentId>)>,
}

/// Owns the cache so tests and tools can assemble a view by hand.
#[derive(Debug, Default)]
pub struct ViewBuilder {
    cache: ViewCache,
}

impl ViewBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn view<'a>(
        &'a self,
        degree: usize,
        entry_port: Option<Port>,
        co_located: &'a [ViewEntry<'a>],
    ) -> ObservationView<'a> {
        ObservationView {
            degree,
            entry_port,
            co_located,
            cache: &self.cache,
        }
    }
}
