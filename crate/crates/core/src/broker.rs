//! The clustered broker: region-scoped advertisement forwarding, cluster-wide
//! subscription broadcast, interest bits via CIB_SET/CIB_CLEAR, and static or
//! congestion-aware notification routing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::civ::{Civ, CivContext};
use crate::lst::Lst;
use crate::model::{
    overlaps, AdvId, Advertisement, Hop, Message, MessageKind, Notification, Outgoing, SubId,
    Subscription,
};
use crate::node::{BrokerEvent, IdrCase, Node, RoutingStepStats};
use crate::scot::{BrokerId, NeighbourInfo, ScotTopology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Routing {
    /// Static: copies follow subscription trees and interest bits.
    Snr,
    /// Inter-cluster dynamic: congested iLinks are bypassed with CIV-Ns.
    Idr,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrokerParams {
    /// Congestion threshold.
    pub tau: f64,
    /// Window length in simulated microseconds.
    pub window_us: u64,
}

impl Default for BrokerParams {
    fn default() -> Self {
        BrokerParams {
            tau: 10.0,
            window_us: 50_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrtEntry {
    pub adv: Advertisement,
    pub last_hop: Hop,
    /// Advertisement context at the host broker, subscription context elsewhere.
    pub civ: Civ,
}

impl SrtEntry {
    pub fn is_host(&self) -> bool {
        matches!(self.last_hop, Hop::Client(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrtEntry {
    pub sub: Subscription,
    pub last_hop: Hop,
}

pub struct Broker {
    id: BrokerId,
    neighbours: NeighbourInfo,
    width: u32,
    params: BrokerParams,
    routing: Routing,
    srt: BTreeMap<AdvId, SrtEntry>,
    prt: BTreeMap<SubId, PrtEntry>,
    lst: Lst,
    window_counts: BTreeMap<AdvId, u64>,
    events: Vec<BrokerEvent>,
}

/// Copies to send: destination and the vector to attach, if any.
type Sends = BTreeMap<BrokerId, Option<Civ>>;

impl Broker {
    pub fn new(
        topology: &ScotTopology,
        id: BrokerId,
        params: BrokerParams,
        routing: Routing,
    ) -> Self {
        let neighbours = topology.neighbours(id).expect("broker of topology").clone();
        let lst = Lst::new(
            neighbours
                .primary
                .iter()
                .chain(&neighbours.secondary)
                .copied(),
        );
        Broker {
            id,
            neighbours,
            width: topology.cluster_count() as u32,
            params,
            routing,
            srt: BTreeMap::new(),
            prt: BTreeMap::new(),
            lst,
            window_counts: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    pub fn srt(&self) -> &BTreeMap<AdvId, SrtEntry> {
        &self.srt
    }

    pub fn prt(&self) -> &BTreeMap<SubId, PrtEntry> {
        &self.prt
    }

    pub fn neighbours(&self) -> &NeighbourInfo {
        &self.neighbours
    }

    fn emit(&mut self, e: BrokerEvent) {
        self.events.push(e);
    }

    fn secondary_in(&self, ci: u32) -> BrokerId {
        BrokerId { af: self.id.af, ci }
    }

    fn host_interest(&self, adv: &Advertisement) -> bool {
        self.prt.values().any(|e| overlaps(adv, &e.sub))
    }

    fn set_civ_bit(&mut self, adv: AdvId, bit: u32, on: bool) {
        let Some(entry) = self.srt.get_mut(&adv) else {
            return;
        };
        if entry.civ.get(bit) == on {
            return;
        }
        if on {
            entry.civ.set(bit).expect("bit within width");
        } else {
            entry.civ.clear(bit).expect("bit within width");
        }
        let civ = entry.civ.to_string();
        self.emit(BrokerEvent::CivChanged { adv, civ });
    }

    fn advertise(&mut self, adv: Advertisement, civ: Option<Civ>, from: Hop) -> Vec<Outgoing> {
        if self.srt.contains_key(&adv.id) {
            self.emit(BrokerEvent::Duplicate {
                kind: MessageKind::Advertisement,
            });
            return Vec::new();
        }
        let mut out = Vec::new();
        match from {
            Hop::Client(_) => {
                let mut civ = Civ::new(self.width, CivContext::Advertisement, self.id.ci)
                    .expect("valid width");
                if self.host_interest(&adv) {
                    civ.set(self.id.ci).expect("own cluster");
                }
                for &s in &self.neighbours.secondary {
                    let carried = Civ::new(self.width, CivContext::Subscription, s.ci)
                        .and_then(|c| c.with_bit(self.id.ci))
                        .expect("valid width");
                    out.push(Outgoing::Link {
                        to: s,
                        msg: Message::Advertise {
                            adv: adv.clone(),
                            civ: Some(carried),
                            tid: None,
                        },
                    });
                }
                self.store_adv(adv, from, civ);
            }
            Hop::Broker(sender) => {
                let mut civ = match civ {
                    Some(c) => c
                        .recontext(CivContext::Subscription, self.id.ci)
                        .expect("valid width"),
                    None => Civ::new(self.width, CivContext::Subscription, self.id.ci)
                        .and_then(|c| c.with_bit(sender.ci))
                        .expect("valid width"),
                };
                let matching = self
                    .prt
                    .values()
                    .find(|e| overlaps(&adv, &e.sub))
                    .map(|e| e.sub.clone());
                if let Some(sub) = matching {
                    civ.set(self.id.ci).expect("own cluster");
                    out.push(Outgoing::Link {
                        to: sender,
                        msg: Message::CibSet {
                            adv: adv.id,
                            from_ci: self.id.ci,
                            sub,
                        },
                    });
                }
                self.store_adv(adv, from, civ);
            }
        }
        out
    }

    fn store_adv(&mut self, adv: Advertisement, last_hop: Hop, civ: Civ) {
        let id = adv.id;
        self.emit(BrokerEvent::SrtStored { adv: id, last_hop });
        self.emit(BrokerEvent::CivChanged {
            adv: id,
            civ: civ.to_string(),
        });
        self.srt.insert(id, SrtEntry { adv, last_hop, civ });
    }

    fn cib(&mut self, adv: AdvId, from_ci: u32, on: bool) {
        match self.srt.get(&adv) {
            Some(e) if e.is_host() && from_ci != self.id.ci && from_ci < self.width => {
                self.set_civ_bit(adv, from_ci, on);
            }
            _ => self.emit(BrokerEvent::Dropped {
                reason: "interest update for unknown advertisement",
            }),
        }
    }

    fn subscribe(&mut self, sub: Subscription, from: Hop) -> Vec<Outgoing> {
        if self.prt.contains_key(&sub.id) {
            self.emit(BrokerEvent::Duplicate {
                kind: MessageKind::Subscription,
            });
            return Vec::new();
        }
        let mut out: Vec<Outgoing> = self
            .neighbours
            .primary
            .iter()
            .filter(|&&b| Hop::Broker(b) != from)
            .map(|&to| Outgoing::Link {
                to,
                msg: Message::Subscribe {
                    sub: sub.clone(),
                    tids: Vec::new(),
                },
            })
            .collect();

        let mut host_bits = Vec::new();
        let mut cib_sets = Vec::new();
        for e in self.srt.values() {
            if !overlaps(&e.adv, &sub) {
                continue;
            }
            match e.last_hop {
                Hop::Client(_) => host_bits.push(e.adv.id),
                Hop::Broker(host) if !e.civ.get(self.id.ci) => cib_sets.push((e.adv.id, host)),
                Hop::Broker(_) => {}
            }
        }
        for adv in host_bits {
            self.set_civ_bit(adv, self.id.ci, true);
        }
        for (adv, host) in cib_sets {
            self.set_civ_bit(adv, self.id.ci, true);
            out.push(Outgoing::Link {
                to: host,
                msg: Message::CibSet {
                    adv,
                    from_ci: self.id.ci,
                    sub: sub.clone(),
                },
            });
        }
        self.emit(BrokerEvent::PrtStored {
            sub: sub.id,
            last_hop: from,
        });
        self.prt.insert(
            sub.id,
            PrtEntry {
                sub,
                last_hop: from,
            },
        );
        out
    }

    fn unsubscribe(&mut self, id: SubId, from: Hop) -> Vec<Outgoing> {
        if self.prt.remove(&id).is_none() {
            return Vec::new();
        }
        self.emit(BrokerEvent::PrtRemoved { sub: id });
        let mut out: Vec<Outgoing> = self
            .neighbours
            .primary
            .iter()
            .filter(|&&b| Hop::Broker(b) != from)
            .map(|&to| Outgoing::Link {
                to,
                msg: Message::Unsubscribe { sub: id },
            })
            .collect();
        let mut updates = Vec::new();
        for e in self.srt.values() {
            if !e.civ.get(self.id.ci) || self.host_interest(&e.adv) {
                continue;
            }
            updates.push((e.adv.id, e.last_hop));
        }
        for (adv, last_hop) in updates {
            self.set_civ_bit(adv, self.id.ci, false);
            if let Hop::Broker(host) = last_hop {
                out.push(Outgoing::Link {
                    to: host,
                    msg: Message::CibClear {
                        adv,
                        from_ci: self.id.ci,
                    },
                });
            }
        }
        out
    }

    fn least_loaded(&self, candidates: impl IntoIterator<Item = BrokerId>) -> Option<BrokerId> {
        candidates
            .into_iter()
            .min_by_key(|&b| (self.lst.get(b).q_len, b))
    }

    fn congested(&self, to: BrokerId) -> bool {
        self.lst.is_congested(to, self.params.tau)
    }

    fn notify(&mut self, n: Notification, from: Hop) -> Vec<Outgoing> {
        let at_host = matches!(from, Hop::Client(_));
        let host_civ = if at_host {
            match self.srt.get(&n.adv) {
                Some(e) if e.last_hop == Hop::Client(n.publisher()) => Some(e.civ),
                _ => {
                    self.emit(BrokerEvent::Dropped {
                        reason: "notification without advertisement at host",
                    });
                    return Vec::new();
                }
            }
        } else {
            None
        };

        let mut out = Vec::new();
        let mut local = BTreeSet::new();
        let mut alinks = BTreeSet::new();
        for e in self.prt.values() {
            if !e.sub.matches(&n) {
                continue;
            }
            match e.last_hop {
                Hop::Client(c) => {
                    local.insert(c);
                }
                Hop::Broker(b) if Hop::Broker(b) != from => {
                    alinks.insert(b);
                }
                Hop::Broker(_) => {}
            }
        }
        for client in local {
            out.push(Outgoing::Deliver {
                client,
                notif: n.clone(),
            });
        }

        let gamma = {
            let c = self.window_counts.entry(n.adv).or_insert(0);
            *c += 1;
            *c
        };

        let (sends, mut stats) = match (host_civ, n.civ) {
            (Some(civ), _) => {
                let ilinks: Vec<BrokerId> = civ
                    .ones()
                    .filter(|&ci| ci != self.id.ci)
                    .map(|ci| self.secondary_in(ci))
                    .collect();
                self.route_host(&n, &alinks, &ilinks, civ.cb())
            }
            (None, Some(carried)) => self.route_residual(&n, &alinks, carried),
            (None, None) => {
                let stats = RoutingStepStats {
                    alpha: alinks.len() as u32,
                    ..Default::default()
                };
                (alinks.iter().map(|&b| (b, None)).collect(), stats)
            }
        };
        stats.gamma = gamma;
        stats.copies = sends.len() as u32;
        self.emit(BrokerEvent::Routed { notif: n.id, stats });

        for (to, civ) in sends {
            let mut copy = n.clone();
            copy.civ = civ;
            copy.hops += 1;
            out.push(Outgoing::Link {
                to,
                msg: Message::Notify(copy),
            });
        }
        out
    }

    /// Routing at the publisher's host broker.
    fn route_host(
        &mut self,
        n: &Notification,
        alinks: &BTreeSet<BrokerId>,
        ilinks: &[BrokerId],
        host_ci: u32,
    ) -> (Sends, RoutingStepStats) {
        let mut sends: Sends = alinks.iter().map(|&b| (b, None)).collect();
        let (busy, free): (Vec<BrokerId>, Vec<BrokerId>) = match self.routing {
            Routing::Snr => (Vec::new(), ilinks.to_vec()),
            Routing::Idr => ilinks.iter().partition(|&&b| self.congested(b)),
        };
        let stats = RoutingStepStats {
            alpha: alinks.len() as u32,
            beta: ilinks.len() as u32,
            theta: free.len() as u32,
            ol: busy.len() as u32,
            ..Default::default()
        };
        for &b in &free {
            sends.insert(b, None);
        }
        if busy.is_empty() {
            return (sends, stats);
        }
        let pending = |skip: Option<BrokerId>| {
            let mut civ =
                Civ::new(self.width, CivContext::Publication, host_ci).expect("valid width");
            for b in &busy {
                if Some(*b) != skip {
                    civ.set(b.ci).expect("cluster in range");
                }
            }
            civ
        };
        if let Some(carrier) = self.least_loaded(free.iter().copied()) {
            let civ = pending(None);
            self.attach(&mut sends, n, carrier, civ, IdrCase::FreeILink);
        } else if let Some(carrier) =
            self.least_loaded(alinks.iter().copied().filter(|&b| !self.congested(b)))
        {
            let civ = pending(None);
            self.attach(&mut sends, n, carrier, civ, IdrCase::ALinkDetour);
        } else {
            let carrier = self
                .least_loaded(busy.iter().copied())
                .expect("busy is non-empty");
            let civ = pending(Some(carrier));
            self.force(&mut sends, n, carrier, civ);
        }
        (sends, stats)
    }

    /// Routing at a broker that received a CIV-N: serve each owed cluster over
    /// its own iLink when free, otherwise pass the remainder on.
    fn route_residual(
        &mut self,
        n: &Notification,
        alinks: &BTreeSet<BrokerId>,
        carried: Civ,
    ) -> (Sends, RoutingStepStats) {
        let mut sends: Sends = alinks.iter().map(|&b| (b, None)).collect();
        let owed: Vec<BrokerId> = carried
            .ones()
            .filter(|&ci| ci != self.id.ci)
            .map(|ci| self.secondary_in(ci))
            .collect();
        let (busy, free): (Vec<BrokerId>, Vec<BrokerId>) =
            owed.iter().partition(|&&b| self.congested(b));
        let stats = RoutingStepStats {
            alpha: alinks.len() as u32,
            beta: owed.len() as u32,
            theta: free.len() as u32,
            ol: busy.len() as u32,
            ..Default::default()
        };
        for &b in &free {
            sends.insert(b, None);
        }
        if busy.is_empty() {
            return (sends, stats);
        }
        let pending = |skip: Option<BrokerId>| {
            let mut civ =
                Civ::new(self.width, CivContext::Publication, carried.cb()).expect("valid width");
            for b in &busy {
                if Some(*b) != skip {
                    civ.set(b.ci).expect("cluster in range");
                }
            }
            civ
        };
        if let Some(carrier) =
            self.least_loaded(alinks.iter().copied().filter(|&b| !self.congested(b)))
        {
            let civ = pending(None);
            self.attach(&mut sends, n, carrier, civ, IdrCase::Residual);
        } else {
            let carrier = self
                .least_loaded(busy.iter().copied())
                .expect("busy is non-empty");
            let civ = pending(Some(carrier));
            self.force(&mut sends, n, carrier, civ);
        }
        (sends, stats)
    }

    fn attach(
        &mut self,
        sends: &mut Sends,
        n: &Notification,
        carrier: BrokerId,
        civ: Civ,
        case: IdrCase,
    ) {
        self.emit(BrokerEvent::civ_n(n.id, carrier, &civ, case));
        sends.insert(carrier, Some(civ));
    }

    fn force(&mut self, sends: &mut Sends, n: &Notification, carrier: BrokerId, civ: Civ) {
        self.emit(BrokerEvent::ForcedCongestedSend {
            notif: n.id,
            to: carrier,
        });
        if civ.is_empty() {
            sends.insert(carrier, None);
        } else {
            self.attach(sends, n, carrier, civ, IdrCase::Forced);
        }
    }
}

impl Node for Broker {
    fn id(&self) -> BrokerId {
        self.id
    }

    fn handle(&mut self, msg: Message, from: Hop, _now: u64) -> Vec<Outgoing> {
        match msg {
            Message::Advertise { adv, civ, .. } => self.advertise(adv, civ, from),
            Message::Subscribe { sub, .. } => self.subscribe(sub, from),
            Message::Unsubscribe { sub } => self.unsubscribe(sub, from),
            Message::CibSet { adv, from_ci, .. } => {
                self.cib(adv, from_ci, true);
                Vec::new()
            }
            Message::CibClear { adv, from_ci } => {
                self.cib(adv, from_ci, false);
                Vec::new()
            }
            Message::Notify(n) => self.notify(n, from),
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
        self.prt.values().map(|e| (e.sub.id, e.last_hop)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::Payload;
    use crate::model::{ClientId, NotifId};
    use crate::scot::preset;

    struct Fixture {
        topo: ScotTopology,
    }

    impl Fixture {
        fn fig3() -> Self {
            Fixture {
                topo: preset("fig3").unwrap(),
            }
        }

        fn b(&self, label: &str, ci: u32) -> BrokerId {
            self.topo.broker(label, ci).unwrap()
        }

        fn broker(&self, label: &str, ci: u32, routing: Routing) -> Broker {
            Broker::new(
                &self.topo,
                self.b(label, ci),
                BrokerParams::default(),
                routing,
            )
        }
    }

    fn adv(client: u32, filter: &str) -> Advertisement {
        Advertisement {
            id: AdvId::new(client, 0),
            filter: filter.parse().unwrap(),
        }
    }

    fn sub(client: u32, filter: &str) -> Subscription {
        Subscription {
            id: SubId::new(client, 0),
            filter: filter.parse().unwrap(),
        }
    }

    fn link_targets(out: &[Outgoing]) -> Vec<(BrokerId, MessageKind)> {
        out.iter()
            .filter_map(|o| match o {
                Outgoing::Link { to, msg } => Some((*to, msg.kind())),
                Outgoing::Deliver { .. } => None,
            })
            .collect()
    }

    fn advertise_msg(a: Advertisement) -> Message {
        Message::Advertise {
            adv: a,
            civ: None,
            tid: None,
        }
    }

    #[test]
    fn host_forwards_to_every_secondary() {
        let fx = Fixture::fig3();
        let mut b = fx.broker("a", 0, Routing::Snr);
        let out = b.handle(
            advertise_msg(adv(1, "price between 0 10")),
            Hop::Client(ClientId(1)),
            0,
        );
        assert_eq!(
            link_targets(&out),
            vec![
                (fx.b("a", 1), MessageKind::Advertisement),
                (fx.b("a", 2), MessageKind::Advertisement)
            ]
        );
        let entry = &b.srt()[&AdvId::new(1, 0)];
        assert_eq!(entry.civ.to_string(), "000");
        assert_eq!(entry.civ.context(), CivContext::Advertisement);
    }

    #[test]
    fn secondary_without_interest_stays_quiet() {
        let fx = Fixture::fig3();
        let mut b = fx.broker("a", 1, Routing::Snr);
        let out = b.handle(
            advertise_msg(adv(1, "price between 0 10")),
            Hop::Broker(fx.b("a", 0)),
            0,
        );
        assert!(out.is_empty());
        let civ = b.srt()[&AdvId::new(1, 0)].civ;
        assert_eq!((civ.to_string(), civ.cb()), ("001".to_string(), 1));
    }

    #[test]
    fn secondary_with_many_matches_sends_one_cib_set() {
        let fx = Fixture::fig3();
        let mut b = fx.broker("a", 1, Routing::Snr);
        for c in 10..13 {
            b.handle(
                Message::Subscribe {
                    sub: sub(c, "price >= 5"),
                    tids: vec![],
                },
                Hop::Client(ClientId(c)),
                0,
            );
        }
        let out = b.handle(
            advertise_msg(adv(1, "price between 0 10")),
            Hop::Broker(fx.b("a", 0)),
            0,
        );
        assert_eq!(
            link_targets(&out),
            vec![(fx.b("a", 0), MessageKind::CibSet)]
        );
        assert_eq!(b.srt()[&AdvId::new(1, 0)].civ.to_string(), "011");
    }

    #[test]
    fn cib_set_updates_host_bits() {
        let fx = Fixture::fig3();
        let mut b = fx.broker("a", 0, Routing::Snr);
        b.handle(
            Message::Subscribe {
                sub: sub(9, "price >= 0"),
                tids: vec![],
            },
            Hop::Client(ClientId(9)),
            0,
        );
        b.handle(
            advertise_msg(adv(1, "price between 0 10")),
            Hop::Client(ClientId(1)),
            0,
        );
        assert_eq!(b.srt()[&AdvId::new(1, 0)].civ.to_string(), "001");
        let set = |ci| Message::CibSet {
            adv: AdvId::new(1, 0),
            from_ci: ci,
            sub: sub(7, "price >= 0"),
        };
        b.handle(set(2), Hop::Broker(fx.b("a", 2)), 0);
        assert_eq!(b.srt()[&AdvId::new(1, 0)].civ.to_string(), "101");
        b.handle(set(2), Hop::Broker(fx.b("a", 2)), 0);
        assert_eq!(b.srt()[&AdvId::new(1, 0)].civ.to_string(), "101");
        b.handle(set(1), Hop::Broker(fx.b("a", 1)), 0);
        assert_eq!(b.srt()[&AdvId::new(1, 0)].civ.to_string(), "111");
        assert!(!b.prt().contains_key(&SubId::new(7, 0)));
    }

    #[test]
    fn subscription_floods_cluster_only() {
        let fx = Fixture::fig3();
        let mut b = fx.broker("b", 0, Routing::Snr);
        let out = b.handle(
            Message::Subscribe {
                sub: sub(3, "price >= 0"),
                tids: vec![],
            },
            Hop::Broker(fx.b("a", 0)),
            0,
        );
        let targets = link_targets(&out);
        assert_eq!(
            targets,
            vec![
                (fx.b("c", 0), MessageKind::Subscription),
                (fx.b("d", 0), MessageKind::Subscription)
            ]
        );
    }

    #[test]
    fn second_overlapping_subscription_is_suppressed() {
        let fx = Fixture::fig3();
        let mut b = fx.broker("a", 1, Routing::Snr);
        b.handle(
            advertise_msg(adv(1, "price between 0 10")),
            Hop::Broker(fx.b("a", 0)),
            0,
        );
        let first = b.handle(
            Message::Subscribe {
                sub: sub(3, "price >= 5"),
                tids: vec![],
            },
            Hop::Client(ClientId(3)),
            0,
        );
        let second = b.handle(
            Message::Subscribe {
                sub: sub(4, "price <= 5"),
                tids: vec![],
            },
            Hop::Client(ClientId(4)),
            0,
        );
        let cibs = |out: &[Outgoing]| {
            link_targets(out)
                .iter()
                .filter(|t| t.1 == MessageKind::CibSet)
                .count()
        };
        assert_eq!((cibs(&first), cibs(&second)), (1, 0));
    }

    #[test]
    fn unsubscribe_clears_only_when_last_interest_leaves() {
        let fx = Fixture::fig3();
        let mut b = fx.broker("a", 1, Routing::Snr);
        b.handle(
            advertise_msg(adv(1, "price between 0 10")),
            Hop::Broker(fx.b("a", 0)),
            0,
        );
        for c in [3, 4] {
            b.handle(
                Message::Subscribe {
                    sub: sub(c, "price >= 5"),
                    tids: vec![],
                },
                Hop::Client(ClientId(c)),
                0,
            );
        }
        let out = b.handle(
            Message::Unsubscribe {
                sub: SubId::new(3, 0),
            },
            Hop::Client(ClientId(3)),
            0,
        );
        assert!(!link_targets(&out)
            .iter()
            .any(|t| t.1 == MessageKind::CibClear));
        let out = b.handle(
            Message::Unsubscribe {
                sub: SubId::new(4, 0),
            },
            Hop::Client(ClientId(4)),
            0,
        );
        assert!(link_targets(&out).contains(&(fx.b("a", 0), MessageKind::CibClear)));
        assert_eq!(b.srt()[&AdvId::new(1, 0)].civ.to_string(), "001");
        let out = b.handle(
            Message::Unsubscribe {
                sub: SubId::new(99, 0),
            },
            Hop::Client(ClientId(99)),
            0,
        );
        assert!(out.is_empty());
    }

    fn host_with_targets(routing: Routing) -> (Fixture, Broker, Notification) {
        // Host (b,2) of a path-of-three overlay; interest in clusters 0 and 1,
        // plus subscribers behind both aLinks.
        let topo = preset("fig7").unwrap();
        let fx = Fixture { topo };
        let mut b = fx.broker("b", 2, routing);
        b.handle(
            advertise_msg(adv(1, "price between 0 100")),
            Hop::Client(ClientId(1)),
            0,
        );
        for (c, from) in [(20, "a"), (21, "c")] {
            b.handle(
                Message::Subscribe {
                    sub: sub(c, "price >= 0"),
                    tids: vec![],
                },
                Hop::Broker(fx.b(from, 2)),
                0,
            );
        }
        for ci in [0, 1] {
            b.handle(
                Message::CibSet {
                    adv: AdvId::new(1, 0),
                    from_ci: ci,
                    sub: sub(30 + ci, "price >= 0"),
                },
                Hop::Broker(fx.b("b", ci)),
                0,
            );
        }
        let payload: Payload = [("price".to_string(), 50.0.into())].into();
        let n = Notification::new(NotifId::new(1, 0), AdvId::new(1, 0), payload);
        (fx, b, n)
    }

    fn load(b: &mut Broker, to: BrokerId, len: u64) {
        for _ in 0..len {
            b.lst_mut().on_enqueue(to);
        }
    }

    fn sent(out: &[Outgoing]) -> Vec<(BrokerId, Option<String>)> {
        out.iter()
            .filter_map(|o| match o {
                Outgoing::Link {
                    to,
                    msg: Message::Notify(n),
                } => Some((*to, n.civ.map(|c| c.to_string()))),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn idr_equals_snr_without_congestion() {
        let (_, mut snr, n) = host_with_targets(Routing::Snr);
        let (_, mut idr, _) = host_with_targets(Routing::Idr);
        let a = snr.handle(Message::Notify(n.clone()), Hop::Client(ClientId(1)), 0);
        let b = idr.handle(Message::Notify(n), Hop::Client(ClientId(1)), 0);
        assert_eq!(sent(&a), sent(&b));
        assert_eq!(sent(&a).len(), 4);
    }

    #[test]
    fn free_ilink_carries_congested_bits() {
        let (fx, mut b, n) = host_with_targets(Routing::Idr);
        load(&mut b, fx.b("b", 0), 30);
        let out = b.handle(Message::Notify(n), Hop::Client(ClientId(1)), 0);
        assert_eq!(
            sent(&out),
            vec![
                (fx.b("a", 2), None),
                (fx.b("b", 1), Some("001".into())),
                (fx.b("c", 2), None),
            ]
        );
        let stats = b
            .drain_events()
            .into_iter()
            .find_map(|e| match e {
                BrokerEvent::Routed { stats, .. } => Some(stats),
                _ => None,
            })
            .unwrap();
        assert_eq!(
            (stats.alpha, stats.beta, stats.theta, stats.ol),
            (2, 2, 1, 1)
        );
        assert_eq!(stats.copies, stats.alpha + stats.theta);
    }

    #[test]
    fn all_ilinks_congested_detours_over_alink() {
        let (fx, mut b, n) = host_with_targets(Routing::Idr);
        load(&mut b, fx.b("b", 0), 30);
        load(&mut b, fx.b("b", 1), 30);
        load(&mut b, fx.b("a", 2), 2);
        let out = b.handle(Message::Notify(n), Hop::Client(ClientId(1)), 0);
        assert_eq!(
            sent(&out),
            vec![(fx.b("a", 2), None), (fx.b("c", 2), Some("011".into()))]
        );
    }

    #[test]
    fn nothing_free_forces_least_loaded_ilink() {
        let (fx, mut b, n) = host_with_targets(Routing::Idr);
        load(&mut b, fx.b("b", 0), 30);
        load(&mut b, fx.b("b", 1), 20);
        load(&mut b, fx.b("a", 2), 20);
        load(&mut b, fx.b("c", 2), 20);
        let out = b.handle(Message::Notify(n), Hop::Client(ClientId(1)), 0);
        assert_eq!(
            sent(&out),
            vec![
                (fx.b("a", 2), None),
                (fx.b("b", 1), Some("001".into())),
                (fx.b("c", 2), None),
            ]
        );
        assert!(b
            .drain_events()
            .iter()
            .any(|e| matches!(e, BrokerEvent::ForcedCongestedSend { .. })));
    }

    #[test]
    fn unknown_advertisement_is_dropped_at_host() {
        let fx = Fixture::fig3();
        let mut b = fx.broker("a", 0, Routing::Snr);
        let n = Notification::new(NotifId::new(1, 0), AdvId::new(1, 0), Payload::new());
        assert!(b
            .handle(Message::Notify(n), Hop::Client(ClientId(1)), 0)
            .is_empty());
        assert!(matches!(
            b.drain_events()[..],
            [BrokerEvent::Dropped { .. }]
        ));
    }
}
