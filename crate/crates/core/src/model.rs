//! Identifiers and the messages brokers exchange.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::civ::Civ;
use crate::filter::{Filter, FilterError, Payload};
use crate::scot::BrokerId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClientId(pub u32);

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

macro_rules! client_seq_id {
    ($name:ident, $tag:literal) => {
        /// Unique without coordination: the issuing client plus its own sequence number.
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        pub struct $name {
            pub client: ClientId,
            pub seq: u32,
        }

        impl $name {
            pub const fn new(client: u32, seq: u32) -> Self {
                $name {
                    client: ClientId(client),
                    seq,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}.{}{}", self.client, $tag, self.seq)
            }
        }
    };
}

client_seq_id!(AdvId, "a");
client_seq_id!(SubId, "s");
client_seq_id!(NotifId, "n");

/// Advertisement-tree id used by the flooding baseline. Assigned by the root
/// broker, so it is unique without coordination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tid {
    pub root: BrokerId,
    pub seq: u32,
}

/// Where a message came from, or where a table entry points back to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hop {
    Client(ClientId),
    Broker(BrokerId),
}

impl Hop {
    pub fn broker(self) -> Option<BrokerId> {
        match self {
            Hop::Broker(b) => Some(b),
            Hop::Client(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Advertisement {
    pub id: AdvId,
    pub filter: Filter,
}

impl Advertisement {
    pub fn publisher(&self) -> ClientId {
        self.id.client
    }

    pub fn overlaps(&self, sub: &Subscription) -> Result<bool, FilterError> {
        self.filter.overlaps(&sub.filter)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subscription {
    pub id: SubId,
    pub filter: Filter,
}

impl Subscription {
    pub fn subscriber(&self) -> ClientId {
        self.id.client
    }

    pub fn matches(&self, n: &Notification) -> bool {
        self.filter.matches(&n.payload)
    }
}

/// Routing treats an overlap that cannot be decided (type mismatch) as no overlap.
pub fn overlaps(adv: &Advertisement, sub: &Subscription) -> bool {
    adv.overlaps(sub).unwrap_or(false)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub id: NotifId,
    /// The advertisement this notification conforms to.
    pub adv: AdvId,
    pub payload: Payload,
    /// Present on a CIV-N: clusters that are still owed a copy.
    pub civ: Option<Civ>,
    /// Stamped by the host broker in the flooding baseline.
    pub tid: Option<Tid>,
    /// Broker-to-broker hops travelled so far.
    pub hops: u32,
}

impl Notification {
    pub fn new(id: NotifId, adv: AdvId, payload: Payload) -> Self {
        Notification {
            id,
            adv,
            payload,
            civ: None,
            tid: None,
            hops: 0,
        }
    }

    pub fn publisher(&self) -> ClientId {
        self.id.client
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Message {
    Advertise {
        adv: Advertisement,
        /// Subscription-context vector handed to secondary brokers.
        civ: Option<Civ>,
        tid: Option<Tid>,
    },
    Subscribe {
        sub: Subscription,
        /// Advertisement trees the subscription is bound to (baseline only).
        tids: Vec<Tid>,
    },
    Unsubscribe {
        sub: SubId,
    },
    /// A secondary cluster now hosts interest in `adv`.
    CibSet {
        adv: AdvId,
        from_ci: u32,
        sub: Subscription,
    },
    /// A secondary cluster no longer hosts interest in `adv`.
    CibClear {
        adv: AdvId,
        from_ci: u32,
    },
    Notify(Notification),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Advertisement,
    Subscription,
    Unsubscription,
    CibSet,
    CibClear,
    Notification,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::Advertisement,
        MessageKind::Subscription,
        MessageKind::Unsubscription,
        MessageKind::CibSet,
        MessageKind::CibClear,
        MessageKind::Notification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Advertisement => "advertisement",
            MessageKind::Subscription => "subscription",
            MessageKind::Unsubscription => "unsubscription",
            MessageKind::CibSet => "cib_set",
            MessageKind::CibClear => "cib_clear",
            MessageKind::Notification => "notification",
        }
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Advertise { .. } => MessageKind::Advertisement,
            Message::Subscribe { .. } => MessageKind::Subscription,
            Message::Unsubscribe { .. } => MessageKind::Unsubscription,
            Message::CibSet { .. } => MessageKind::CibSet,
            Message::CibClear { .. } => MessageKind::CibClear,
            Message::Notify(_) => MessageKind::Notification,
        }
    }

    pub fn is_civ_n(&self) -> bool {
        matches!(self, Message::Notify(n) if n.civ.is_some())
    }
}

/// A message leaving a broker, either onto a link or to a local client.
#[derive(Clone, Debug, PartialEq)]
pub enum Outgoing {
    Link {
        to: BrokerId,
        msg: Message,
    },
    Deliver {
        client: ClientId,
        notif: Notification,
    },
}
