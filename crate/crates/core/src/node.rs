//! What the simulator needs from a broker implementation, and the events a
//! broker reports about its own state changes.

use serde::Serialize;

use crate::civ::Civ;
use crate::lst::Lst;
use crate::model::{AdvId, Hop, Message, MessageKind, NotifId, Outgoing, SubId};
use crate::scot::BrokerId;

/// Which branch of the dynamic router produced a CIV-N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdrCase {
    /// Some target iLink is free; the CIV-N rides the least loaded one.
    #[serde(rename = "free_ilink")]
    FreeILink,
    /// All target iLinks are congested; the CIV-N rides a free target aLink.
    #[serde(rename = "alink_detour")]
    ALinkDetour,
    /// An intermediate broker passes unserved bits down a free target aLink.
    Residual,
    /// Nothing is free; the CIV-N goes onto the least loaded iLink anyway.
    Forced,
}

/// Per-notification routing figures at one broker.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RoutingStepStats {
    /// Target aLinks.
    pub alpha: u32,
    /// Target iLinks.
    pub beta: u32,
    /// Target iLinks that are not congested.
    pub theta: u32,
    /// Target iLinks that are congested.
    pub ol: u32,
    /// Notifications of this advertisement routed here in the current window.
    pub gamma: u64,
    /// Copies actually enqueued onto links.
    pub copies: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum BrokerEvent {
    SrtStored {
        adv: AdvId,
        last_hop: Hop,
    },
    PrtStored {
        sub: SubId,
        last_hop: Hop,
    },
    PrtRemoved {
        sub: SubId,
    },
    Duplicate {
        kind: MessageKind,
    },
    CivChanged {
        adv: AdvId,
        civ: String,
    },
    Routed {
        notif: NotifId,
        stats: RoutingStepStats,
    },
    CivN {
        notif: NotifId,
        to: BrokerId,
        bits: String,
        case: IdrCase,
    },
    ForcedCongestedSend {
        notif: NotifId,
        to: BrokerId,
    },
    Dropped {
        reason: &'static str,
    },
}

impl BrokerEvent {
    pub fn civ_n(notif: NotifId, to: BrokerId, civ: &Civ, case: IdrCase) -> Self {
        BrokerEvent::CivN {
            notif,
            to,
            bits: civ.to_string(),
            case,
        }
    }
}

/// A broker driven by the simulator.
///
/// Implementations are single-owner state machines: the simulator hands them
/// one message at a time and forwards whatever they return.
pub trait Node: Send {
    fn id(&self) -> BrokerId;

    fn handle(&mut self, msg: Message, from: Hop, now: u64) -> Vec<Outgoing>;

    /// Output-queue counters, maintained by the simulator.
    fn lst(&self) -> &Lst;
    fn lst_mut(&mut self) -> &mut Lst;

    /// Called at each window boundary.
    fn on_window(&mut self, now: u64);

    /// Events recorded since the last drain.
    fn drain_events(&mut self) -> Vec<BrokerEvent>;

    /// `(advertisement, last hop)` for every stored advertisement.
    fn srt_entries(&self) -> Vec<(AdvId, Hop)>;

    /// `(subscription, last hop)` for every stored subscription entry.
    fn prt_entries(&self) -> Vec<(SubId, Hop)>;
}
