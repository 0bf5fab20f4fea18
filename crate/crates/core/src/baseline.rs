//! Flooding baseline: advertisements flood the whole overlay and are
//! de-duplicated by tree id, subscriptions travel back along the trees they are
//! bound to, and notifications follow those bindings.

use std::collections::{BTreeMap, BTreeSet};

use crate::lst::Lst;
use crate::model::{
    overlaps, AdvId, Advertisement, Hop, Message, MessageKind, Notification, Outgoing, SubId,
    Subscription, Tid,
};
use crate::node::{BrokerEvent, Node, RoutingStepStats};
use crate::scot::{BrokerId, ScotTopology};

#[derive(Clone, Debug, PartialEq)]
pub struct TidSrtEntry {
    pub adv: Advertisement,
    pub last_hop: Hop,
    pub tid: Tid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TidPrtEntry {
    pub sub: Subscription,
    pub last_hop: Hop,
    pub bound_tids: BTreeSet<Tid>,
}

pub struct TidBroker {
    id: BrokerId,
    neighbours: BTreeSet<BrokerId>,
    srt: BTreeMap<AdvId, TidSrtEntry>,
    by_tid: BTreeMap<Tid, AdvId>,
    prt: BTreeMap<(SubId, Hop), TidPrtEntry>,
    /// Trees each subscription has already been sent along, per next hop.
    forwarded: BTreeMap<SubId, BTreeMap<BrokerId, BTreeSet<Tid>>>,
    next_tid: u32,
    lst: Lst,
    window_counts: BTreeMap<AdvId, u64>,
    events: Vec<BrokerEvent>,
}

impl TidBroker {
    pub fn new(topology: &ScotTopology, id: BrokerId) -> Self {
        let neighbours: BTreeSet<BrokerId> = topology
            .graph()
            .neighbours(&id)
            .expect("broker of topology")
            .clone();
        TidBroker {
            id,
            lst: Lst::new(neighbours.iter().copied()),
            neighbours,
            srt: BTreeMap::new(),
            by_tid: BTreeMap::new(),
            prt: BTreeMap::new(),
            forwarded: BTreeMap::new(),
            next_tid: 0,
            window_counts: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    pub fn srt(&self) -> &BTreeMap<AdvId, TidSrtEntry> {
        &self.srt
    }

    pub fn prt(&self) -> &BTreeMap<(SubId, Hop), TidPrtEntry> {
        &self.prt
    }

    fn advertise(&mut self, adv: Advertisement, tid: Option<Tid>, from: Hop) -> Vec<Outgoing> {
        if self.srt.contains_key(&adv.id) {
            self.events.push(BrokerEvent::Duplicate {
                kind: MessageKind::Advertisement,
            });
            return Vec::new();
        }
        let tid = match (from, tid) {
            (Hop::Broker(_), Some(t)) => t,
            _ => {
                let t = Tid {
                    root: self.id,
                    seq: self.next_tid,
                };
                self.next_tid += 1;
                t
            }
        };
        let mut out: Vec<Outgoing> = self
            .neighbours
            .iter()
            .filter(|&&b| Hop::Broker(b) != from)
            .map(|&to| Outgoing::Link {
                to,
                msg: Message::Advertise {
                    adv: adv.clone(),
                    civ: None,
                    tid: Some(tid),
                },
            })
            .collect();
        self.events.push(BrokerEvent::SrtStored {
            adv: adv.id,
            last_hop: from,
        });
        self.by_tid.insert(tid, adv.id);
        self.srt.insert(
            adv.id,
            TidSrtEntry {
                adv: adv.clone(),
                last_hop: from,
                tid,
            },
        );

        // Local subscribers that registered before this advertisement existed.
        let local: Vec<SubId> = self
            .prt
            .values()
            .filter(|e| matches!(e.last_hop, Hop::Client(_)) && overlaps(&adv, &e.sub))
            .map(|e| e.sub.id)
            .collect();
        for sub in local {
            let key = self
                .prt
                .keys()
                .find(|k| k.0 == sub)
                .copied()
                .expect("entry present");
            self.prt
                .get_mut(&key)
                .expect("entry present")
                .bound_tids
                .insert(tid);
            let s = self.prt[&key].sub.clone();
            out.extend(self.forward_sub(&s, [tid]));
        }
        out
    }

    /// Sends `sub` one step back along each listed tree, skipping trees
    /// already covered.
    fn forward_sub(
        &mut self,
        sub: &Subscription,
        tids: impl IntoIterator<Item = Tid>,
    ) -> Vec<Outgoing> {
        let mut groups: BTreeMap<BrokerId, Vec<Tid>> = BTreeMap::new();
        for tid in tids {
            let Some(entry) = self.by_tid.get(&tid).and_then(|a| self.srt.get(a)) else {
                continue;
            };
            let Hop::Broker(next) = entry.last_hop else {
                continue;
            };
            let done = self
                .forwarded
                .entry(sub.id)
                .or_default()
                .entry(next)
                .or_default();
            if done.insert(tid) {
                groups.entry(next).or_default().push(tid);
            }
        }
        groups
            .into_iter()
            .map(|(to, tids)| Outgoing::Link {
                to,
                msg: Message::Subscribe {
                    sub: sub.clone(),
                    tids,
                },
            })
            .collect()
    }

    fn subscribe(&mut self, sub: Subscription, tids: Vec<Tid>, from: Hop) -> Vec<Outgoing> {
        let tids: BTreeSet<Tid> = match from {
            Hop::Client(_) => self
                .srt
                .values()
                .filter(|e| overlaps(&e.adv, &sub))
                .map(|e| e.tid)
                .collect(),
            Hop::Broker(_) => tids.into_iter().collect(),
        };
        let key = (sub.id, from);
        let fresh = !self.prt.contains_key(&key);
        if fresh {
            self.events.push(BrokerEvent::PrtStored {
                sub: sub.id,
                last_hop: from,
            });
        } else if matches!(from, Hop::Client(_)) {
            self.events.push(BrokerEvent::Duplicate {
                kind: MessageKind::Subscription,
            });
            return Vec::new();
        }
        let entry = self.prt.entry(key).or_insert_with(|| TidPrtEntry {
            sub: sub.clone(),
            last_hop: from,
            bound_tids: BTreeSet::new(),
        });
        entry.bound_tids.extend(tids.iter().copied());
        self.forward_sub(&sub, tids)
    }

    fn unsubscribe(&mut self, id: SubId, from: Hop) -> Vec<Outgoing> {
        if self.prt.remove(&(id, from)).is_none() {
            return Vec::new();
        }
        self.events.push(BrokerEvent::PrtRemoved { sub: id });
        let still_needed: BTreeSet<Tid> = self
            .prt
            .iter()
            .filter(|(k, _)| k.0 == id)
            .flat_map(|(_, e)| e.bound_tids.iter().copied())
            .collect();
        let Some(sent) = self.forwarded.get_mut(&id) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        sent.retain(|&to, tids| {
            if tids.is_disjoint(&still_needed) {
                out.push(Outgoing::Link {
                    to,
                    msg: Message::Unsubscribe { sub: id },
                });
                false
            } else {
                true
            }
        });
        if sent.is_empty() {
            self.forwarded.remove(&id);
        }
        out
    }

    fn notify(&mut self, mut n: Notification, from: Hop) -> Vec<Outgoing> {
        if let Hop::Client(publisher) = from {
            match self.srt.get(&n.adv) {
                Some(e) if e.last_hop == Hop::Client(publisher) => n.tid = Some(e.tid),
                _ => {
                    self.events.push(BrokerEvent::Dropped {
                        reason: "notification without advertisement at host",
                    });
                    return Vec::new();
                }
            }
        }
        let Some(tid) = n.tid else {
            self.events.push(BrokerEvent::Dropped {
                reason: "notification without tree id",
            });
            return Vec::new();
        };
        let mut local = BTreeSet::new();
        let mut next = BTreeSet::new();
        for e in self.prt.values() {
            if !e.bound_tids.contains(&tid) || !e.sub.matches(&n) {
                continue;
            }
            match e.last_hop {
                Hop::Client(c) => {
                    local.insert(c);
                }
                Hop::Broker(b) if Hop::Broker(b) != from => {
                    next.insert(b);
                }
                Hop::Broker(_) => {}
            }
        }
        if matches!(from, Hop::Broker(_)) && local.is_empty() && next.is_empty() {
            self.events.push(BrokerEvent::Dropped {
                reason: "no binding for tree id",
            });
        }
        let gamma = {
            let c = self.window_counts.entry(n.adv).or_insert(0);
            *c += 1;
            *c
        };
        self.events.push(BrokerEvent::Routed {
            notif: n.id,
            stats: RoutingStepStats {
                alpha: next.len() as u32,
                gamma,
                copies: next.len() as u32,
                ..Default::default()
            },
        });
        let mut out: Vec<Outgoing> = local
            .into_iter()
            .map(|client| Outgoing::Deliver {
                client,
                notif: n.clone(),
            })
            .collect();
        for to in next {
            let mut copy = n.clone();
            copy.hops += 1;
            out.push(Outgoing::Link {
                to,
                msg: Message::Notify(copy),
            });
        }
        out
    }
}

impl Node for TidBroker {
    fn id(&self) -> BrokerId {
        self.id
    }

    fn handle(&mut self, msg: Message, from: Hop, _now: u64) -> Vec<Outgoing> {
        match msg {
            Message::Advertise { adv, tid, .. } => self.advertise(adv, tid, from),
            Message::Subscribe { sub, tids } => self.subscribe(sub, tids, from),
            Message::Unsubscribe { sub } => self.unsubscribe(sub, from),
            Message::Notify(n) => self.notify(n, from),
            Message::CibSet { .. } | Message::CibClear { .. } => {
                self.events.push(BrokerEvent::Dropped {
                    reason: "interest bits are not used by the flooding baseline",
                });
                Vec::new()
            }
        }
    }

    fn lst(&self) -> &Lst {
        &self.lst
    }

    fn lst_mut(&mut self) -> &mut Lst {
        &mut self.lst
    }

    fn on_window(&mut self, now: u64) {
        self.lst.reset_window(now);
        self.window_counts.clear();
    }

    fn drain_events(&mut self) -> Vec<BrokerEvent> {
        std::mem::take(&mut self.events)
    }

    fn srt_entries(&self) -> Vec<(AdvId, Hop)> {
        self.srt.values().map(|e| (e.adv.id, e.last_hop)).collect()
    }

    fn prt_entries(&self) -> Vec<(SubId, Hop)> {
        self.prt.keys().copied().collect()
    }
}
