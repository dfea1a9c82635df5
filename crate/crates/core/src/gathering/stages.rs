//! Per-phase transition rules for the CollectID, MakeGroup and Gather stages.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::labels::{cist_length, estimate_f, extended_label_bit};
use super::{explo_move, AgentState, GatherPlan, PhaseKind, Protocol, Sta, Variant};
use crate::simcore::{Action, AgentId, ObservationView};

fn record_ids(s: &mut AgentState, view: &ObservationView<'_>) {
    for e in view.co_located {
        if !s.il.contains(&e.id) {
            Arc::make_mut(&mut s.il).insert(e.id);
        }
    }
}

fn record_pairs(s: &mut AgentState, view: &ObservationView<'_>) {
    for e in view.co_located {
        if e.id == s.id {
            continue;
        }
        if let Some(g) = e.state.gid {
            if !s.gl.contains(&(g, e.id)) {
                Arc::make_mut(&mut s.gl).insert((g, e.id));
            }
        }
    }
}

/// One CollectID round. The last round of the agent's final CollectID phase
/// fixes `estf` and switches to MakeGroup.
pub fn cist_phase_step(ctx: &Protocol, s: &mut AgentState, view: &ObservationView<'_>) -> Action {
    let clock = &ctx.clock;
    let slot = s.slot;
    let action = if extended_label_bit(s.id.0, s.x as u64) == 0 {
        record_ids(s, view);
        Action::Stay
    } else {
        if clock.is_visit_slot(slot) {
            record_ids(s, view);
        }
        if clock.is_explore_slot(slot) {
            explo_move(ctx, clock.explore_index(slot), view)
        } else {
            Action::Stay
        }
    };
    if clock.is_pad(slot) {
        if s.x as u64 == cist_length(s.id.0) {
            s.estf = Some(estimate_f(s.il.len()).unwrap_or(0));
            s.end_ci = true;
            s.x = 0;
        }
        s.x += 1;
    }
    action
}

/// One MakeGroup round, for targets and searchers alike.
pub fn mgst_phase_step(ctx: &Protocol, s: &mut AgentState, view: &ObservationView<'_>) -> Action {
    let clock = &ctx.clock;
    let slot = s.slot;
    let action = if s.gid.is_some() {
        Action::Stay
    } else if s.sta == Sta::MgTarget {
        consensus(s, view);
        Action::Stay
    } else {
        search_step(ctx, s, view)
    };
    if clock.is_pad(slot) {
        s.x += 1;
    }
    action
}

fn search_step(ctx: &Protocol, s: &mut AgentState, view: &ObservationView<'_>) -> Action {
    let clock = &ctx.clock;
    let x_n = clock.x_n();
    let slot = s.slot;
    let Some(tar) = s.tar else {
        return Action::Stay;
    };
    if !s.search.found && slot <= 2 * x_n + 1 && view.contains(tar) {
        s.search.found = true;
    }
    if s.search.found && !s.search.flagged && clock.is_visit_slot(slot) {
        let honest = view.entry(tar).is_some_and(|e| e.state.tar == Some(tar));
        if !honest {
            s.search.flagged = true;
            Arc::make_mut(&mut s.bl).insert(tar);
        }
    }
    if !s.search.found && slot == 2 * x_n + 1 {
        Arc::make_mut(&mut s.bl).insert(tar);
    }
    if s.search.found {
        consensus(s, view);
        Action::Stay
    } else if clock.is_explore_slot(slot) {
        explo_move(ctx, clock.explore_index(slot), view)
    } else {
        Action::Stay
    }
}

/// Group formation check, run by waiting MakeGroup agents every round.
pub fn consensus(s: &mut AgentState, view: &ObservationView<'_>) {
    if s.gid.is_some() {
        return;
    }
    let Some(tar) = s.tar else {
        return;
    };
    let in_mgst =
        |e: &&crate::simcore::ViewEntry<'_>| !e.terminated && e.state.phase == PhaseKind::MakeGroup;
    let present = view.co_located.iter().filter(in_mgst).count();
    if present < 4 * s.estf.unwrap_or(0) as usize {
        return;
    }
    let Some(gef) = view.estf_mode() else {
        return;
    };
    s.gef = Some(gef);
    let gc: Vec<AgentId> = view
        .co_located
        .iter()
        .filter(in_mgst)
        .filter(|e| e.state.tar == Some(tar))
        .map(|e| e.id)
        .collect();
    if gc.len() < 4 * gef as usize + 4 || !gc.contains(&tar) {
        return;
    }
    s.gid = Some(tar);
    let explorers = 2 * gef as usize + 2;
    s.sta = if gc.iter().take(explorers).any(|&id| id == s.id) {
        Sta::GExplore
    } else {
        Sta::GWait
    };
}

/// Group ids backed by at least `estf + 1` distinct member ids.
pub fn reliable_gids(gl: &BTreeSet<(AgentId, AgentId)>, estf: u32) -> BTreeSet<AgentId> {
    let mut out = BTreeSet::new();
    let mut current: Option<(AgentId, usize)> = None;
    for &(gid, _) in gl {
        current = match current {
            Some((g, c)) if g == gid => Some((g, c + 1)),
            _ => Some((gid, 1)),
        };
        if let Some((g, c)) = current {
            if c > estf as usize {
                out.insert(g);
            }
        }
    }
    out
}

fn waiting_group_here(view: &ObservationView<'_>, gid: AgentId, estf: u32) -> bool {
    let members = view
        .co_located
        .iter()
        .filter(|e| e.state.sta == Sta::GWait && e.state.gid == Some(gid))
        .count();
    members > estf as usize
}

/// One round of either Gather phase.
pub fn gst_phase_step(ctx: &Protocol, s: &mut AgentState, view: &ObservationView<'_>) -> Action {
    if !s.end_ci {
        return Action::Stay;
    }
    let clock = &ctx.clock;
    let slot = s.slot;
    if s.phase == PhaseKind::GatherCollect {
        if s.sta == Sta::GWait {
            record_pairs(s, view);
            return Action::Stay;
        }
        if clock.is_visit_slot(slot) {
            record_pairs(s, view);
        }
        return if clock.is_explore_slot(slot) {
            explo_move(ctx, clock.explore_index(slot), view)
        } else {
            Action::Stay
        };
    }

    let estf = s.estf.unwrap_or(0);
    if slot == 1 {
        let target = reliable_gids(&s.gl, estf).into_iter().next();
        s.plan = match target {
            None => GatherPlan::Idle,
            Some(g) if s.sta == Sta::GWait && s.gid == Some(g) => GatherPlan::Hold,
            Some(g) => GatherPlan::Seek {
                gid: g,
                found: false,
            },
        };
    }
    match s.plan {
        GatherPlan::Idle => Action::Stay,
        GatherPlan::Hold => {
            if clock.is_pad(slot) {
                finish(ctx, s)
            } else {
                Action::Stay
            }
        }
        GatherPlan::Seek { gid, mut found } => {
            if !found && slot <= 2 * clock.x_n() + 1 && waiting_group_here(view, gid, estf) {
                found = true;
                s.plan = GatherPlan::Seek { gid, found };
            }
            if clock.is_pad(slot) {
                finish(ctx, s)
            } else if !found && clock.is_explore_slot(slot) {
                explo_move(ctx, clock.explore_index(slot), view)
            } else {
                Action::Stay
            }
        }
    }
}

/// Completion of the gathering protocol: terminate, or settle and hand over
/// to the simultaneous-termination loop.
fn finish(ctx: &Protocol, s: &mut AgentState) -> Action {
    match ctx.variant {
        Variant::Ns => Action::Terminate,
        Variant::Sim => {
            s.phase = PhaseKind::Settled;
            s.sim.completed_at = Some(s.round() + 1);
            Action::Stay
        }
    }
}
