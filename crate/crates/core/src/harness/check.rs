//! Post-hoc verification of a finished run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::scenario::Scenario;
use crate::gathering::{Sta, Variant};
use crate::simcore::{AgentId, EventKind, Trace};

/// Trace properties checked on every run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    /// Good wake rounds lie within `X_N` of the first good wake.
    WakeWindow,
    /// On finishing CollectID a good agent knows every good id.
    IdsCollected,
    /// Every good estimate is at least `f`.
    EstimateCoversF,
    /// Good estimates differ pairwise by at most one.
    EstimatesClose,
    /// The smallest good agent is a target; at most `max estf + 1` good targets.
    TargetsSound,
    /// No good agent blacklists a good id.
    BlacklistSound,
    /// A group forms only with `4 gef + 4` same-target witnesses, and its
    /// good witnesses all hold that group id.
    GroupAgreement,
    /// A good agent joins a group before the last agent to finish CollectID
    /// completes its `(f+1)`-th MakeGroup phase.
    GroupInTime,
    /// A searcher's target never decreases.
    TargetMonotone,
    /// No good `idm` exceeds the largest real id.
    IdmBounded,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::WakeWindow,
        Property::IdsCollected,
        Property::EstimateCoversF,
        Property::EstimatesClose,
        Property::TargetsSound,
        Property::BlacklistSound,
        Property::GroupAgreement,
        Property::GroupInTime,
        Property::TargetMonotone,
        Property::IdmBounded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::WakeWindow => "wake_window",
            Property::IdsCollected => "ids_collected",
            Property::EstimateCoversF => "estimate_covers_f",
            Property::EstimatesClose => "estimates_close",
            Property::TargetsSound => "targets_sound",
            Property::BlacklistSound => "blacklist_sound",
            Property::GroupAgreement => "group_agreement",
            Property::GroupInTime => "group_in_time",
            Property::TargetMonotone => "target_monotone",
            Property::IdmBounded => "idm_bounded",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Quantities reported alongside the verdict.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    /// Largest MakeGroup phase counter reached by a good agent.
    pub mgst_phases: u32,
    /// Round of the first good group join.
    pub group_round: Option<u64>,
    pub blacklist_insertions: usize,
    /// Insertions after the target was met and then moved or changed `tar`.
    pub witnessed_blacklists: usize,
    pub max_blacklist: usize,
    pub max_idm: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    /// Every good agent terminated.
    pub gathered: bool,
    /// All good agents ended on one node.
    pub same_node: bool,
    /// Simultaneous variant only: all good agents terminated in one round.
    pub same_round: Option<bool>,
    pub first_wake: Option<u64>,
    pub last_termination_round: Option<u64>,
    /// `last_termination_round - first_wake`.
    pub elapsed: Option<u64>,
    pub bound_ns: u64,
    pub bound_sim: u64,
    pub bound_satisfied: bool,
    /// Failures carry a description of the first counterexample.
    pub properties: BTreeMap<Property, Result<(), String>>,
    pub notes: Vec<String>,
    pub metrics: Metrics,
}

impl Verdict {
    /// Gathering achieved within the applicable bound.
    pub fn passed(&self) -> bool {
        self.gathered && self.same_node && self.same_round != Some(false) && self.bound_satisfied
    }

    pub fn properties_hold(&self) -> bool {
        self.properties.values().all(Result::is_ok)
    }

    pub fn failed_properties(&self) -> Vec<Property> {
        self.properties
            .iter()
            .filter(|(_, r)| r.is_err())
            .map(|(p, _)| *p)
            .collect()
    }
}

/// Evaluates gathering, the round bound and every trace property.
pub fn check(trace: &Trace, scenario: &Scenario) -> Verdict {
    let good: Vec<usize> = trace.good_indices().collect();
    let good_ids: BTreeSet<AgentId> = good.iter().map(|&i| trace.agents[i].id).collect();
    let mut notes = Vec::new();

    let gathered = !trace.capped && good.iter().all(|&i| trace.termination_rounds[i].is_some());
    if trace.capped {
        notes.push(format!(
            "RoundCapExceeded: stopped after {} rounds",
            trace.rounds
        ));
    }
    let nodes: BTreeSet<_> = good.iter().map(|&i| trace.final_positions[i]).collect();
    let same_node = nodes.len() == 1;
    let rounds: BTreeSet<_> = good
        .iter()
        .filter_map(|&i| trace.termination_rounds[i])
        .collect();
    let same_round = (scenario.variant == Variant::Sim).then_some(gathered && rounds.len() == 1);

    let first_wake = good.iter().filter_map(|&i| trace.wake_rounds[i]).min();
    let last_termination_round = if gathered {
        rounds.iter().max().copied()
    } else {
        None
    };
    let elapsed = match (first_wake, last_termination_round) {
        (Some(w), Some(t)) => Some(t - w),
        _ => None,
    };
    let bound = scenario.bound();
    let bound_satisfied = elapsed.is_some_and(|e| e <= bound);
    if let Some(e) = elapsed {
        if e > bound {
            notes.push(format!("took {e} rounds, bound is {bound}"));
        }
    }

    let c = Checker {
        trace,
        scenario,
        good: &good,
        good_ids: &good_ids,
    };
    let mut properties = BTreeMap::new();
    properties.insert(Property::WakeWindow, c.wake_window());
    properties.insert(Property::IdsCollected, c.ids_collected());
    properties.insert(Property::EstimateCoversF, c.estimate_covers_f());
    properties.insert(Property::EstimatesClose, c.estimates_close());
    properties.insert(Property::TargetsSound, c.targets_sound());
    properties.insert(Property::BlacklistSound, c.blacklist_sound());
    properties.insert(Property::GroupAgreement, c.group_agreement());
    properties.insert(Property::GroupInTime, c.group_in_time());
    properties.insert(Property::TargetMonotone, c.target_monotone());
    properties.insert(Property::IdmBounded, c.idm_bounded());

    Verdict {
        gathered,
        same_node,
        same_round,
        first_wake,
        last_termination_round,
        elapsed,
        bound_ns: scenario.ns_bound(),
        bound_sim: scenario.sim_bound(),
        bound_satisfied,
        properties,
        notes,
        metrics: c.metrics(),
    }
}

struct Checker<'a> {
    trace: &'a Trace,
    scenario: &'a Scenario,
    good: &'a [usize],
    good_ids: &'a BTreeSet<AgentId>,
}

impl Checker<'_> {
    fn good_events(&self) -> impl Iterator<Item = &crate::simcore::Event> + '_ {
        self.trace
            .events
            .iter()
            .filter(|e| self.good_ids.contains(&e.agent))
    }

    fn finished_cist(&self) -> impl Iterator<Item = (u64, AgentId, &Vec<AgentId>, u32)> + '_ {
        self.good_events().filter_map(|e| match &e.kind {
            EventKind::CistFinished { il, estf } => Some((e.round, e.agent, il, *estf)),
            _ => None,
        })
    }

    fn wake_window(&self) -> Result<(), String> {
        let wakes: Vec<u64> = self
            .good
            .iter()
            .filter_map(|&i| self.trace.wake_rounds[i])
            .collect();
        let (Some(lo), Some(hi)) = (wakes.iter().min(), wakes.iter().max()) else {
            return Ok(());
        };
        if hi - lo > self.trace.x_n {
            return Err(format!(
                "good wakes span rounds {lo}..{hi}, X_N = {}",
                self.trace.x_n
            ));
        }
        Ok(())
    }

    fn ids_collected(&self) -> Result<(), String> {
        for (round, agent, il, _) in self.finished_cist() {
            let have: BTreeSet<AgentId> = il.iter().copied().collect();
            if let Some(missing) = self.good_ids.difference(&have).next() {
                return Err(format!(
                    "agent {agent} finished at round {round} without id {missing}"
                ));
            }
        }
        Ok(())
    }

    fn estimate_covers_f(&self) -> Result<(), String> {
        let f = self.scenario.f() as u32;
        for (round, agent, _, estf) in self.finished_cist() {
            if estf < f {
                return Err(format!(
                    "agent {agent} estimated {estf} < f = {f} at round {round}"
                ));
            }
        }
        Ok(())
    }

    fn estimates_close(&self) -> Result<(), String> {
        let est: Vec<(AgentId, u32)> = self.finished_cist().map(|(_, a, _, e)| (a, e)).collect();
        let lo = est.iter().min_by_key(|e| e.1);
        let hi = est.iter().max_by_key(|e| e.1);
        match (lo, hi) {
            (Some(lo), Some(hi)) if hi.1 - lo.1 > 1 => Err(format!(
                "agent {} estimated {}, agent {} estimated {}",
                lo.0, lo.1, hi.0, hi.1
            )),
            _ => Ok(()),
        }
    }

    fn targets_sound(&self) -> Result<(), String> {
        let mut targets = BTreeSet::new();
        let mut assigned = BTreeSet::new();
        for e in self.good_events() {
            if let EventKind::MgstPhaseStarted {
                x: 1,
                sta,
                grouped: false,
                ..
            } = e.kind
            {
                assigned.insert(e.agent);
                if sta == Sta::MgTarget {
                    targets.insert(e.agent);
                }
            }
        }
        let a_min = self.good_ids.first().copied();
        if let Some(a_min) = a_min {
            if assigned.contains(&a_min) && !targets.contains(&a_min) {
                return Err(format!("smallest good agent {a_min} became a searcher"));
            }
        }
        let efm = self
            .finished_cist()
            .map(|(_, _, _, e)| e)
            .max()
            .unwrap_or(0);
        if targets.len() > efm as usize + 1 {
            return Err(format!(
                "{} good targets, max estimate {efm}",
                targets.len()
            ));
        }
        Ok(())
    }

    fn blacklist_sound(&self) -> Result<(), String> {
        for e in self.good_events() {
            if let EventKind::Blacklisted { id, .. } = e.kind {
                if self.good_ids.contains(&id) {
                    return Err(format!(
                        "agent {} blacklisted good {id} at round {}",
                        e.agent, e.round
                    ));
                }
            }
        }
        Ok(())
    }

    fn group_agreement(&self) -> Result<(), String> {
        let mut joined: BTreeMap<AgentId, (u64, AgentId, u32)> = BTreeMap::new();
        for e in self.good_events() {
            if let EventKind::GroupJoined { gid, gef, .. } = e.kind {
                joined.entry(e.agent).or_insert((e.round, gid, gef));
            }
        }
        for e in self.good_events() {
            let EventKind::GroupJoined {
                gid,
                gef,
                node,
                witnesses,
            } = &e.kind
            else {
                continue;
            };
            let gc: Vec<_> = witnesses
                .iter()
                .filter(|w| w.in_mgst && w.tar == Some(*gid))
                .collect();
            if gc.len() < 4 * *gef as usize + 4 {
                return Err(format!(
                    "agent {} joined {gid} at round {} on node {node} with {} witnesses, gef {gef}",
                    e.agent,
                    e.round,
                    gc.len()
                ));
            }
            for w in gc.iter().filter(|w| self.good_ids.contains(&w.id)) {
                match joined.get(&w.id) {
                    Some(&(r, g, wg)) if r <= e.round && g == *gid => {
                        if r == e.round && wg != *gef {
                            return Err(format!(
                                "agents {} and {} joined {gid} at round {r} with gef {gef} and {wg}",
                                e.agent, w.id
                            ));
                        }
                    }
                    _ => {
                        return Err(format!(
                            "good witness {} did not hold {gid} when agent {} joined at round {}",
                            w.id, e.agent, e.round
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    fn group_in_time(&self) -> Result<(), String> {
        let Some((last_cist, a_last)) = self
            .finished_cist()
            .map(|(r, a, _, _)| (r, a))
            .max_by_key(|&(r, _)| r)
        else {
            return Ok(());
        };
        let p = 3 * self.trace.x_n + 1;
        let deadline = last_cist + 3 * (self.scenario.f() as u64 + 1) * p;
        match self.metrics().group_round {
            Some(r) if r <= deadline => Ok(()),
            Some(r) => Err(format!(
                "first group at round {r}, agent {a_last} finished collecting at {last_cist}, deadline {deadline}"
            )),
            None if self.trace.rounds < deadline => Ok(()),
            None => Err(format!("no group by round {deadline}")),
        }
    }

    fn target_monotone(&self) -> Result<(), String> {
        let mut last: BTreeMap<AgentId, AgentId> = BTreeMap::new();
        for e in self.good_events() {
            if let EventKind::MgstPhaseStarted {
                sta: Sta::MgSearch,
                tar: Some(t),
                grouped: false,
                ..
            } = e.kind
            {
                if let Some(prev) = last.insert(e.agent, t) {
                    if t < prev {
                        return Err(format!(
                            "agent {} moved target from {prev} to {t} at round {}",
                            e.agent, e.round
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn idm_bounded(&self) -> Result<(), String> {
        let top = AgentId(self.scenario.lambda_all());
        match self.metrics().max_idm {
            Some(idm) if idm > top => Err(format!("idm reached {idm}, largest real id is {top}")),
            _ => Ok(()),
        }
    }

    fn metrics(&self) -> Metrics {
        let mut m = Metrics::default();
        let mut bl: BTreeMap<AgentId, usize> = BTreeMap::new();
        for e in self.good_events() {
            match &e.kind {
                EventKind::MgstPhaseStarted { x, .. } => m.mgst_phases = m.mgst_phases.max(*x),
                EventKind::GroupJoined { .. } if m.group_round.is_none() => {
                    m.group_round = Some(e.round)
                }
                EventKind::Blacklisted { witnessed, .. } => {
                    m.blacklist_insertions += 1;
                    m.witnessed_blacklists += usize::from(*witnessed);
                    *bl.entry(e.agent).or_default() += 1;
                }
                EventKind::IdmChanged { idm: Some(idm) } => {
                    m.max_idm = Some(m.max_idm.map_or(*idm, |cur| cur.max(*idm)))
                }
                _ => {}
            }
        }
        m.max_blacklist = bl.values().copied().max().unwrap_or(0);
        m
    }
}
