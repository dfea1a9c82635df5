//! Same-round termination: agents that completed the gathering protocol wait
//! on the gathering node until a quorum of termination flags forms.

use crate::gathering::{floor_log2, AgentState, Protocol};
use crate::simcore::{Action, AgentId, ObservationView};

/// Extension fields carried by every agent state; inert in the
/// non-simultaneous variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimFields {
    pub flag_t: bool,
    pub idm: Option<AgentId>,
    /// Own-clock round from which the agent waits (`r_i`).
    pub completed_at: Option<u64>,
    /// Last computed `T`.
    pub threshold: Option<u64>,
}

/// `T = 2 X_N + 3 (2 floor(log idm) + 6)(3 X_N + 1)`.
pub fn threshold(x_n: u64, idm: AgentId) -> u64 {
    2 * x_n + 3 * (2 * floor_log2(idm.0) as u64 + 6) * (3 * x_n + 1)
}

/// Largest id present in the `il` of at least `gef + 1` co-located agents.
pub fn trusted_max_id(view: &ObservationView<'_>, gef: u32) -> Option<AgentId> {
    view.max_id_with_quorum(gef as usize + 1)
}

/// One waiting round.
pub fn sim_step(ctx: &Protocol, s: &mut AgentState, view: &ObservationView<'_>) -> Action {
    let now = s.round();
    if let Some(g) = view.estf_mode() {
        s.gef = Some(g);
    }
    let gef = s.gef.unwrap_or(0);
    let flags = view
        .co_located
        .iter()
        .filter(|e| e.state.sim.flag_t)
        .count();
    if flags > gef as usize {
        return Action::Terminate;
    }
    s.sim.idm = trusted_max_id(view, gef);
    if let Some(idm) = s.sim.idm {
        let t = threshold(ctx.x_n(), idm);
        s.sim.threshold = Some(t);
        let since = s.sim.completed_at.unwrap_or(now);
        if now >= since + ctx.x_n() && now >= t {
            s.sim.flag_t = true;
        }
    }
    Action::Stay
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exploration::ExplorationSequence;
    use crate::gathering::Variant;
    use crate::simcore::{ViewBuilder, ViewEntry};
    use std::sync::Arc;

    #[test]
    fn threshold_matches_hand_expansion() {
        // 20 + 3 * (2*3 + 6) * 31
        assert_eq!(threshold(10, AgentId(8)), 1136);
        assert_eq!(threshold(0, AgentId(1)), 18);
    }

    fn waiting(ctx: &Protocol, id: u64, il: &[u64]) -> AgentState {
        let mut s = ctx.initial_state(AgentId(id));
        s.il = Arc::new(il.iter().map(|&i| AgentId(i)).collect());
        s.estf = Some(1);
        s.gef = Some(1);
        s.phase = crate::gathering::PhaseKind::Settled;
        s
    }

    fn with_view<R>(states: &[AgentState], f: impl FnOnce(&ObservationView<'_>) -> R) -> R {
        let entries: Vec<ViewEntry<'_>> = states
            .iter()
            .map(|s| ViewEntry {
                id: s.id,
                state: s,
                terminated: false,
            })
            .collect();
        let b = ViewBuilder::new();
        f(&b.view(1, None, &entries))
    }

    fn ctx() -> Protocol {
        Protocol::new(
            Arc::new(ExplorationSequence::from_offsets(vec![0], 2, 0)),
            Variant::Sim,
        )
    }

    #[test]
    fn single_liar_cannot_raise_idm() {
        let ctx = ctx();
        let states = [
            waiting(&ctx, 1, &[1, 2]),
            waiting(&ctx, 2, &[1, 2]),
            waiting(&ctx, 9, &[1, 9]),
        ];
        assert_eq!(
            with_view(&states, |v| trusted_max_id(v, 1)),
            Some(AgentId(2))
        );
        assert_eq!(
            with_view(&states, |v| trusted_max_id(v, 0)),
            Some(AgentId(9))
        );
    }

    #[test]
    fn flag_waits_for_threshold_and_own_delay() {
        let ctx = ctx();
        let mut s = waiting(&ctx, 1, &[1]);
        s.sim.completed_at = Some(1);
        // X = 1, idm = 1: T = 2 + 3 * 6 * 4 = 74
        let peer = waiting(&ctx, 2, &[1]);
        s.count = 72;
        let here = [s.clone(), peer.clone()];
        with_view(&here, |v| sim_step(&ctx, &mut s, v));
        assert_eq!(s.sim.threshold, Some(74));
        assert!(!s.sim.flag_t);
        s.count = 73;
        let here = [s.clone(), peer];
        with_view(&here, |v| sim_step(&ctx, &mut s, v));
        assert!(s.sim.flag_t);
    }

    #[test]
    fn terminates_on_flag_quorum_only() {
        let ctx = ctx();
        let mut flagged = [waiting(&ctx, 2, &[2]), waiting(&ctx, 3, &[3])];
        for f in &mut flagged {
            f.sim.flag_t = true;
        }
        let me = waiting(&ctx, 1, &[1]);
        let mut one = vec![me.clone(), flagged[0].clone()];
        let mut s = me.clone();
        assert_eq!(with_view(&one, |v| sim_step(&ctx, &mut s, v)), Action::Stay);
        one.push(flagged[1].clone());
        let mut s = me.clone();
        assert_eq!(
            with_view(&one, |v| sim_step(&ctx, &mut s, v)),
            Action::Terminate
        );
    }
}
