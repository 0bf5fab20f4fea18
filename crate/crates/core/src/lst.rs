//! Link status table: per outgoing link counters for the congestion test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scot::BrokerId;

/// Counters for one direction of one link.
///
/// `q_in` and `q_out` count messages entering and leaving the output queue
/// since the current window opened; `q_len` is the live queue length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStatus {
    pub q_in: u64,
    pub q_out: u64,
    pub q_len: u64,
    pub window_start: u64,
}

impl LinkStatus {
    /// `(1 + q_in) / (1 + q_out)`.
    pub fn congestion_element(&self) -> f64 {
        (1 + self.q_in) as f64 / (1 + self.q_out) as f64
    }

    pub fn is_congested(&self, tau: f64) -> bool {
        is_congested(self.q_len, self.q_in, self.q_out, tau)
    }
}

/// `q_len · (1 + q_in) / (1 + q_out) > tau`, evaluated without division so
/// the boundary case compares exactly.
pub fn is_congested(q_len: u64, q_in: u64, q_out: u64, tau: f64) -> bool {
    debug_assert!(tau > 0.0);
    (q_len as f64) * ((1 + q_in) as f64) > tau * ((1 + q_out) as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lst {
    links: BTreeMap<BrokerId, LinkStatus>,
}

impl Lst {
    pub fn new(neighbours: impl IntoIterator<Item = BrokerId>) -> Self {
        Lst {
            links: neighbours
                .into_iter()
                .map(|b| (b, LinkStatus::default()))
                .collect(),
        }
    }

    pub fn get(&self, to: BrokerId) -> LinkStatus {
        self.links.get(&to).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BrokerId, &LinkStatus)> {
        self.links.iter()
    }

    pub fn on_enqueue(&mut self, to: BrokerId) {
        let e = self.links.entry(to).or_default();
        e.q_in += 1;
        e.q_len += 1;
    }

    pub fn on_dequeue(&mut self, to: BrokerId) {
        let e = self.links.entry(to).or_default();
        e.q_out += 1;
        e.q_len = e.q_len.saturating_sub(1);
    }

    /// Opens a new window: counters restart, queue lengths carry over.
    pub fn reset_window(&mut self, now: u64) {
        for e in self.links.values_mut() {
            e.q_in = 0;
            e.q_out = 0;
            e.window_start = now;
        }
    }

    pub fn is_congested(&self, to: BrokerId, tau: f64) -> bool {
        self.get(to).is_congested(tau)
    }
}
