//! Phase arithmetic driven by an agent's own round counter.

use serde::{Deserialize, Serialize};

/// Where a given round of an agent's life falls in the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockPos {
    /// Initial EXPLO, `step` in `1..=X_N`.
    Initial { step: u64 },
    /// `phase` 0 is the CollectID/MakeGroup phase, 1 and 2 the Gather phases.
    Cycle { cycle: u64, phase: u8, slot: u64 },
}

/// `P_N = 3 X_N + 1`, split into wait / explore / wait / pad slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseClock {
    x_n: u64,
}

impl PhaseClock {
    pub fn new(x_n: u64) -> Self {
        Self { x_n }
    }

    pub fn x_n(&self) -> u64 {
        self.x_n
    }

    pub fn p_n(&self) -> u64 {
        3 * self.x_n + 1
    }

    /// Position of the `round`-th round since wake (1-based).
    pub fn locate(&self, round: u64) -> ClockPos {
        assert!(round >= 1, "rounds since wake are 1-based");
        if round <= self.x_n {
            return ClockPos::Initial { step: round };
        }
        let p = self.p_n();
        let c = round - self.x_n - 1;
        let cycle = c / (3 * p);
        let within = c % (3 * p);
        ClockPos::Cycle {
            cycle,
            phase: (within / p) as u8,
            slot: within % p + 1,
        }
    }

    /// First round of `cycle`'s `phase`.
    pub fn phase_start(&self, cycle: u64, phase: u8) -> u64 {
        self.x_n + 1 + (3 * cycle + phase as u64) * self.p_n()
    }

    /// Slots `X_N+1 ..= 2X_N`, the rounds in which EXPLO moves.
    pub fn is_explore_slot(&self, slot: u64) -> bool {
        slot > self.x_n && slot <= 2 * self.x_n
    }

    /// Slots `X_N+1 ..= 2X_N+1`: every node the walk occupies, arrival
    /// included.
    pub fn is_visit_slot(&self, slot: u64) -> bool {
        slot > self.x_n && slot <= 2 * self.x_n + 1
    }

    /// EXPLO step index used at an explore slot.
    pub fn explore_index(&self, slot: u64) -> usize {
        (slot - self.x_n - 1) as usize
    }

    pub fn is_pad(&self, slot: u64) -> bool {
        slot == self.p_n()
    }
}
