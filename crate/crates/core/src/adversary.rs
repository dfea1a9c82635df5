//! Byzantine behaviour and wake-up schedules.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gathering::{self, AgentState, PhaseKind, Protocol, Sta};
use crate::portgraph::{NodeIdx, PortGraph};
use crate::simcore::{Action, AgentId, AgentSpec, ObservationView, Status, WakeTime};

/// Id planted by the inflation attack.
pub const INFLATED_ID: AgentId = AgentId(1_000_000);

/// Group id used by the fake-group attack; no real agent has it.
pub const FAKE_GID: AgentId = AgentId(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Crash,
    RandomWalk,
    FakeTarget,
    Lure,
    FakeGroup,
    EstfLiar,
    IdInflator,
    MimicGood,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::Crash,
        StrategyKind::RandomWalk,
        StrategyKind::FakeTarget,
        StrategyKind::Lure,
        StrategyKind::FakeGroup,
        StrategyKind::EstfLiar,
        StrategyKind::IdInflator,
        StrategyKind::MimicGood,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Crash => "crash",
            StrategyKind::RandomWalk => "random_walk",
            StrategyKind::FakeTarget => "fake_target",
            StrategyKind::Lure => "lure",
            StrategyKind::FakeGroup => "fake_group",
            StrategyKind::EstfLiar => "estf_liar",
            StrategyKind::IdInflator => "id_inflator",
            StrategyKind::MimicGood => "mimic_good",
        }
    }

    /// Strategies that run the honest protocol internally.
    fn runs_protocol(self) -> bool {
        matches!(
            self,
            StrategyKind::EstfLiar | StrategyKind::IdInflator | StrategyKind::MimicGood
        )
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| AdversaryError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("unknown wake policy `{0}`")]
    UnknownPolicy(String),
    #[error("invalid wake policy: {0}")]
    InvalidPolicy(String),
}

/// Everything the adversary may read: the whole world at round start.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryContext<'a> {
    pub round: u64,
    pub graph: &'a PortGraph,
    pub protocol: &'a Protocol,
    pub agents: &'a [AgentSpec],
    pub positions: &'a [NodeIdx],
    /// Presented states; for good agents these are their true states.
    pub states: &'a [AgentState],
    pub status: &'a [Status],
}

/// One Byzantine agent under a fixed strategy.
#[derive(Debug, Clone)]
pub struct ByzantineAgent {
    kind: StrategyKind,
    rng: ChaCha8Rng,
    /// Honest protocol state, or the state the strategy builds on.
    inner: AgentState,
    presented: AgentState,
}

impl ByzantineAgent {
    pub fn new(kind: StrategyKind, seed: u64, id: AgentId, protocol: &Protocol) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(seed ^ id.0.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let inner = protocol.initial_state(id);
        let mut presented = inner.clone();
        match kind {
            StrategyKind::FakeTarget | StrategyKind::Lure => present_target(&mut presented, None),
            StrategyKind::FakeGroup => {
                presented.end_ci = true;
                presented.sta = Sta::GWait;
                presented.gid = Some(FAKE_GID);
                presented.phase = PhaseKind::GatherCollect;
            }
            _ => {}
        }
        ByzantineAgent {
            kind,
            rng,
            inner,
            presented,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// State shown to co-located agents.
    pub fn presented(&self) -> AgentState {
        self.presented.clone()
    }

    pub fn step(
        &mut self,
        ctx: &AdversaryContext<'_>,
        me: usize,
        view: &ObservationView<'_>,
    ) -> (AgentState, Action) {
        let action = match self.kind {
            StrategyKind::Crash => Action::Stay,
            StrategyKind::RandomWalk => {
                self.scramble(ctx);
                self.random_port(view)
            }
            StrategyKind::FakeTarget => {
                present_target(&mut self.presented, good_estf(ctx));
                Action::Stay
            }
            StrategyKind::Lure => self.lure(ctx, me, view),
            StrategyKind::FakeGroup => {
                self.presented.estf = good_estf(ctx);
                self.random_port(view)
            }
            StrategyKind::EstfLiar | StrategyKind::IdInflator | StrategyKind::MimicGood => {
                self.honest(ctx, view)
            }
        };
        (self.presented.clone(), action)
    }

    fn random_port(&mut self, view: &ObservationView<'_>) -> Action {
        if view.degree == 0 {
            Action::Stay
        } else {
            Action::Move(self.rng.gen_range(1..=view.degree))
        }
    }

    fn honest(&mut self, ctx: &AdversaryContext<'_>, view: &ObservationView<'_>) -> Action {
        debug_assert!(self.kind.runs_protocol());
        if self.inner.terminated {
            return Action::Stay;
        }
        let (next, action) = gathering::step(ctx.protocol, &self.inner, view);
        self.inner = next;
        if action == Action::Terminate {
            self.inner.terminated = true;
        }
        self.presented = self.inner.clone();
        match self.kind {
            StrategyKind::EstfLiar => {
                let lie = if self.rng.gen_bool(0.5) { 0 } else { 50 };
                self.presented.estf = Some(lie);
            }
            StrategyKind::IdInflator => {
                Arc::make_mut(&mut self.presented.il).insert(INFLATED_ID);
            }
            _ => {}
        }
        match action {
            Action::Terminate => Action::Stay,
            other => other,
        }
    }

    /// A plausible-looking random state.
    fn scramble(&mut self, ctx: &AdversaryContext<'_>) {
        const PHASES: [PhaseKind; 4] = [
            PhaseKind::Collect,
            PhaseKind::MakeGroup,
            PhaseKind::GatherCollect,
            PhaseKind::GatherMeet,
        ];
        const STAS: [Sta; 5] = [
            Sta::Ci,
            Sta::MgSearch,
            Sta::MgTarget,
            Sta::GExplore,
            Sta::GWait,
        ];
        let p = &mut self.presented;
        p.phase = *PHASES.choose(&mut self.rng).unwrap();
        p.sta = *STAS.choose(&mut self.rng).unwrap();
        p.end_ci = p.phase != PhaseKind::Collect;
        p.estf = Some(self.rng.gen_range(0..=3));
        let pick = ctx.agents.choose(&mut self.rng).map(|a| a.id);
        p.tar = pick;
        p.gid = if p.sta == Sta::GWait || p.sta == Sta::GExplore {
            pick
        } else {
            None
        };
    }

    /// Presents as a target, then breaks the act in front of a searcher
    /// that is watching it.
    fn lure(
        &mut self,
        ctx: &AdversaryContext<'_>,
        me: usize,
        view: &ObservationView<'_>,
    ) -> Action {
        let id = ctx.agents[me].id;
        present_target(&mut self.presented, good_estf(ctx));
        let clock = &ctx.protocol.clock;
        let watched = view.co_located.iter().any(|e| {
            let s = e.state;
            let good = ctx.agents.iter().any(|a| a.id == e.id && !a.byzantine);
            good && s.phase == PhaseKind::MakeGroup
                && s.sta == Sta::MgSearch
                && s.gid.is_none()
                && s.tar == Some(id)
                && s.search.found
                && !s.search.flagged
                && clock.is_visit_slot(s.slot + 1)
        });
        if !watched {
            return Action::Stay;
        }
        if view.degree > 0 && self.rng.gen_bool(0.5) {
            self.random_port(view)
        } else {
            self.presented.tar = Some(AgentId(id.0 + 1));
            Action::Stay
        }
    }
}

fn present_target(s: &mut AgentState, estf: Option<u32>) {
    s.end_ci = true;
    s.sta = Sta::MgTarget;
    s.tar = Some(s.id);
    s.phase = PhaseKind::MakeGroup;
    s.slot = 1;
    if estf.is_some() {
        s.estf = estf;
    }
}

/// `estf` of the smallest good agent that has one.
fn good_estf(ctx: &AdversaryContext<'_>) -> Option<u32> {
    ctx.agents
        .iter()
        .zip(ctx.states)
        .filter(|(a, _)| !a.byzantine)
        .find_map(|(_, s)| s.estf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WakePolicyKind {
    AllAtOnce,
    SingleGoodFirst,
    AdversarialStagger,
}

impl WakePolicyKind {
    pub const ALL: [WakePolicyKind; 3] = [
        WakePolicyKind::AllAtOnce,
        WakePolicyKind::SingleGoodFirst,
        WakePolicyKind::AdversarialStagger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WakePolicyKind::AllAtOnce => "all_at_once",
            WakePolicyKind::SingleGoodFirst => "single_good_first",
            WakePolicyKind::AdversarialStagger => "adversarial_stagger",
        }
    }
}

impl fmt::Display for WakePolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WakePolicyKind {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WakePolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| AdversaryError::UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WakePolicy {
    AllAtOnce,
    SingleGoodFirst,
    /// One seeded good agent at round 1; everyone else either waits for a
    /// visitor or wakes at a seeded round in `[1, cap]`.
    AdversarialStagger {
        seed: u64,
        cap: u64,
    },
    Explicit(Vec<WakeTime>),
}

/// Wake time per agent, in the order given. `agents` pairs each id with its
/// Byzantine flag.
pub fn wake_schedule(
    policy: &WakePolicy,
    agents: &[(AgentId, bool)],
) -> Result<Vec<WakeTime>, AdversaryError> {
    let goods: BTreeSet<AgentId> = agents.iter().filter(|a| !a.1).map(|a| a.0).collect();
    let schedule = match policy {
        WakePolicy::AllAtOnce => vec![WakeTime::Round(1); agents.len()],
        WakePolicy::SingleGoodFirst => {
            let first = goods
                .first()
                .copied()
                .ok_or_else(|| AdversaryError::InvalidPolicy("no good agent".into()))?;
            agents
                .iter()
                .map(|a| {
                    if a.0 == first {
                        WakeTime::Round(1)
                    } else {
                        WakeTime::ByVisit
                    }
                })
                .collect()
        }
        WakePolicy::AdversarialStagger { seed, cap } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let pool: Vec<AgentId> = goods.iter().copied().collect();
            let first = *pool
                .choose(&mut rng)
                .ok_or_else(|| AdversaryError::InvalidPolicy("no good agent".into()))?;
            let cap = (*cap).max(1);
            agents
                .iter()
                .map(|a| {
                    if a.0 == first {
                        WakeTime::Round(1)
                    } else if rng.gen_bool(0.5) {
                        WakeTime::ByVisit
                    } else {
                        WakeTime::Round(rng.gen_range(1..=cap))
                    }
                })
                .collect()
        }
        WakePolicy::Explicit(times) => {
            if times.len() != agents.len() {
                return Err(AdversaryError::InvalidPolicy(format!(
                    "{} wake entries for {} agents",
                    times.len(),
                    agents.len()
                )));
            }
            times.clone()
        }
    };
    let good_at_one = agents
        .iter()
        .zip(&schedule)
        .any(|(a, w)| !a.1 && *w == WakeTime::Round(1));
    if !good_at_one {
        return Err(AdversaryError::InvalidPolicy(
            "no good agent wakes at round 1".into(),
        ));
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roster() -> Vec<(AgentId, bool)> {
        vec![
            (AgentId(3), true),
            (AgentId(5), false),
            (AgentId(9), false),
            (AgentId(12), true),
        ]
    }

    #[test]
    fn all_at_once_wakes_everyone() {
        let s = wake_schedule(&WakePolicy::AllAtOnce, &roster()).unwrap();
        assert!(s.iter().all(|w| *w == WakeTime::Round(1)));
    }

    #[test]
    fn single_good_first_picks_smallest_good() {
        let s = wake_schedule(&WakePolicy::SingleGoodFirst, &roster()).unwrap();
        assert_eq!(
            s,
            vec![
                WakeTime::ByVisit,
                WakeTime::Round(1),
                WakeTime::ByVisit,
                WakeTime::ByVisit
            ]
        );
    }

    #[test]
    fn stagger_is_seeded_and_valid() {
        for seed in 0..20 {
            let p = WakePolicy::AdversarialStagger { seed, cap: 7 };
            let a = wake_schedule(&p, &roster()).unwrap();
            assert_eq!(a, wake_schedule(&p, &roster()).unwrap());
            for w in &a {
                if let WakeTime::Round(r) = w {
                    assert!((1..=7).contains(r));
                }
            }
        }
    }

    #[test]
    fn explicit_without_good_starter_is_rejected() {
        let p = WakePolicy::Explicit(vec![
            WakeTime::Round(1),
            WakeTime::ByVisit,
            WakeTime::Round(2),
            WakeTime::Round(1),
        ]);
        assert!(matches!(
            wake_schedule(&p, &roster()),
            Err(AdversaryError::InvalidPolicy(_))
        ));
    }

    fn run_with(kind: StrategyKind) -> crate::simcore::Trace {
        use crate::gathering::Variant;
        use crate::simcore::{run, SimSetup};
        let graph = PortGraph::with_canonical_ports(3, &[(0, 1), (1, 2)]).unwrap();
        let seq = crate::exploration::certified_for(3, 0, &[]).unwrap();
        let agents = (1..=5)
            .map(|i| AgentSpec {
                id: AgentId(i),
                start: (i as usize) % 3,
                byzantine: i == 2,
                wake: WakeTime::Round(1),
            })
            .collect();
        let setup = SimSetup {
            graph: Arc::new(graph),
            protocol: Protocol::new(Arc::new(seq), Variant::Ns),
            agents,
            strategy: kind,
            strategy_seed: 7,
            round_cap: 2_000,
        };
        run(&setup).unwrap()
    }

    #[test]
    fn crashed_agent_never_leaves_its_start() {
        let trace = run_with(StrategyKind::Crash);
        let b = trace.index_of(AgentId(2)).unwrap();
        assert!(trace
            .records
            .iter()
            .filter(|r| r.agent == AgentId(2))
            .all(|r| r.node == 2));
        assert_eq!(trace.final_positions[b], 2);
    }

    #[test]
    fn fake_group_is_never_trusted() {
        let trace = run_with(StrategyKind::FakeGroup);
        for i in trace.good_indices() {
            let s = &trace.final_states[i];
            assert!(!gathering::reliable_gids(&s.gl, 1).contains(&FAKE_GID));
            assert_ne!(s.gid, Some(FAKE_GID));
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("nope".parse::<StrategyKind>().is_err());
    }
}
