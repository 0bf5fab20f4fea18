//! Deterministic discrete-event simulation of an overlay.
//!
//! Time is an integer count of microseconds. Each link direction has a FIFO
//! output queue; the head message occupies the link for its service time,
//! then arrives at the far end after the link latency. Brokers process
//! messages instantly. Events with equal time run in scheduling order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::TidBroker;
use crate::broker::{Broker, BrokerParams, Routing};
use crate::metrics::{
    AdvStats, BrokerStats, CivNRecord, Conservation, Delivery, LinkStats, MetricsReport,
    QueueSample, SubStats,
};
use crate::model::{AdvId, ClientId, Hop, Message, MessageKind, NotifId, Outgoing, SubId};
use crate::node::{BrokerEvent, Node};
use crate::scot::{BrokerId, LinkKind, ScotTopology};
use crate::workload::{Action, Workload};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingMode {
    Snr,
    Idr,
    TidStatic,
}

impl RoutingMode {
    pub fn name(self) -> &'static str {
        match self {
            RoutingMode::Snr => "snr",
            RoutingMode::Idr => "idr",
            RoutingMode::TidStatic => "tid-static",
        }
    }
}

impl std::str::FromStr for RoutingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snr" => Ok(RoutingMode::Snr),
            "idr" => Ok(RoutingMode::Idr),
            "tid-static" => Ok(RoutingMode::TidStatic),
            other => Err(format!(
                "unknown routing `{other}` (expected snr, idr or tid-static)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub latency_us: u64,
    /// Extra latency drawn once per link direction from `0..=jitter_us`.
    pub jitter_us: u64,
    pub alink_service_us: u64,
    pub ilink_service_us: u64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            latency_us: 1_000,
            jitter_us: 0,
            alink_service_us: 100,
            ilink_service_us: 100,
        }
    }
}

/// Slows one link direction for a while and optionally preloads its queue
/// with synthetic backlog that counts toward queue length but not toward
/// inter-broker messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongestionInjection {
    pub from: BrokerId,
    pub to: BrokerId,
    pub start_us: u64,
    pub end_us: u64,
    pub service_us: u64,
    pub backlog: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub routing: RoutingMode,
    pub params: BrokerParams,
    pub links: LinkConfig,
    pub injections: Vec<CongestionInjection>,
    pub horizon_us: Option<u64>,
    pub event_budget: u64,
    pub seed: u64,
    /// Brokers whose queues are sampled at every window boundary.
    pub watch: Vec<BrokerId>,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            routing: RoutingMode::Snr,
            params: BrokerParams::default(),
            links: LinkConfig::default(),
            injections: Vec::new(),
            horizon_us: None,
            event_budget: 50_000_000,
            seed: 0,
            watch: Vec::new(),
            trace: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("event budget of {budget} exhausted at t={time_us}us ({pending} events pending); likely a routing loop")]
    EventBudget {
        budget: u64,
        time_us: u64,
        pending: usize,
    },
    #[error("client {0} has no host broker")]
    UnplacedClient(ClientId),
    #[error("client {client} placed on unknown broker {broker}")]
    UnknownHost { client: ClientId, broker: BrokerId },
    #[error("no link {from} -> {to}")]
    UnknownLink { from: BrokerId, to: BrokerId },
    #[error("injection on {from} -> {to} must end after it starts")]
    BadInjection { from: BrokerId, to: BrokerId },
}

/// One line of the optional JSON-lines trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Send {
        time_us: u64,
        from: BrokerId,
        to: BrokerId,
        kind: MessageKind,
        #[serde(skip_serializing_if = "Option::is_none")]
        civ: Option<String>,
    },
    Deliver {
        time_us: u64,
        notif: NotifId,
        client: ClientId,
        hops: u32,
    },
    Broker {
        time_us: u64,
        broker: BrokerId,
        #[serde(flatten)]
        event: BrokerEvent,
    },
}

pub struct SimOutput {
    pub report: MetricsReport,
    pub trace: Vec<TraceRecord>,
}

enum Queued {
    Msg(Message),
    Filler,
}

struct LinkQueue {
    kind: LinkKind,
    latency_us: u64,
    nominal_service_us: u64,
    service_us: u64,
    queue: VecDeque<Queued>,
    busy: bool,
    sent: u64,
    max_q_len: u64,
}

enum EventKind {
    Client(usize),
    ServiceDone {
        from: BrokerId,
        to: BrokerId,
    },
    Arrival {
        from: BrokerId,
        to: BrokerId,
        msg: Message,
    },
    WindowTick,
    InjectionStart(usize),
    InjectionEnd(usize),
}

struct Scheduled {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

struct Sim<'a> {
    topology: &'a ScotTopology,
    workload: &'a Workload,
    cfg: &'a SimConfig,
    hosts: BTreeMap<ClientId, BrokerId>,
    nodes: BTreeMap<BrokerId, Box<dyn Node + 'a>>,
    links: BTreeMap<(BrokerId, BrokerId), LinkQueue>,
    heap: BinaryHeap<Scheduled>,
    seq: u64,
    now: u64,
    /// Scheduled events other than window ticks.
    pending_work: usize,
    tick_scheduled: bool,
    report: MetricsReport,
    published_at: BTreeMap<NotifId, u64>,
    ledger: BTreeMap<(NotifId, ClientId), u32>,
    routed: BTreeMap<BrokerId, u64>,
    cib_sets: BTreeMap<AdvId, u64>,
    trace: Vec<TraceRecord>,
}

/// Runs `workload` on `topology` until quiescence or the horizon.
pub fn run(
    topology: &ScotTopology,
    workload: &Workload,
    cfg: &SimConfig,
) -> Result<SimOutput, SimError> {
    let mut sim = Sim::new(topology, workload, cfg)?;
    sim.run()?;
    Ok(sim.finish())
}

impl<'a> Sim<'a> {
    fn new(
        topology: &'a ScotTopology,
        workload: &'a Workload,
        cfg: &'a SimConfig,
    ) -> Result<Self, SimError> {
        let mut hosts = BTreeMap::new();
        for &(client, broker) in &workload.clients {
            if !topology.contains(broker) {
                return Err(SimError::UnknownHost { client, broker });
            }
            hosts.insert(client, broker);
        }
        for a in &workload.actions {
            if !hosts.contains_key(&a.client) {
                return Err(SimError::UnplacedClient(a.client));
            }
        }

        let mut nodes: BTreeMap<BrokerId, Box<dyn Node + 'a>> = BTreeMap::new();
        for b in topology.brokers() {
            let node: Box<dyn Node> = match cfg.routing {
                RoutingMode::Snr => Box::new(Broker::new(topology, b, cfg.params, Routing::Snr)),
                RoutingMode::Idr => Box::new(Broker::new(topology, b, cfg.params, Routing::Idr)),
                RoutingMode::TidStatic => Box::new(TidBroker::new(topology, b)),
            };
            nodes.insert(b, node);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut links = BTreeMap::new();
        for (u, v) in topology.graph().edges() {
            let kind = topology.link_kind(*u, *v).expect("edge of overlay");
            let service = match kind {
                LinkKind::ALink => cfg.links.alink_service_us,
                LinkKind::ILink => cfg.links.ilink_service_us,
            };
            for (from, to) in [(*u, *v), (*v, *u)] {
                let jitter = if cfg.links.jitter_us > 0 {
                    rng.random_range(0..=cfg.links.jitter_us)
                } else {
                    0
                };
                links.insert(
                    (from, to),
                    LinkQueue {
                        kind,
                        latency_us: cfg.links.latency_us + jitter,
                        nominal_service_us: service,
                        service_us: service,
                        queue: VecDeque::new(),
                        busy: false,
                        sent: 0,
                        max_q_len: 0,
                    },
                );
            }
        }
        for inj in &cfg.injections {
            if !links.contains_key(&(inj.from, inj.to)) {
                return Err(SimError::UnknownLink {
                    from: inj.from,
                    to: inj.to,
                });
            }
            if inj.end_us <= inj.start_us {
                return Err(SimError::BadInjection {
                    from: inj.from,
                    to: inj.to,
                });
            }
        }

        let report = MetricsReport {
            routing: cfg.routing.name().to_string(),
            seed: cfg.seed,
            workload_fingerprint: workload.fingerprint(),
            ..Default::default()
        };
        Ok(Sim {
            topology,
            workload,
            cfg,
            hosts,
            nodes,
            links,
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0,
            pending_work: 0,
            tick_scheduled: false,
            report,
            published_at: BTreeMap::new(),
            ledger: BTreeMap::new(),
            routed: BTreeMap::new(),
            cib_sets: BTreeMap::new(),
            trace: Vec::new(),
        })
    }

    fn schedule(&mut self, time: u64, kind: EventKind) {
        if !matches!(kind, EventKind::WindowTick) {
            self.pending_work += 1;
        }
        self.heap.push(Scheduled {
            time,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn ensure_tick(&mut self) {
        if !self.tick_scheduled && self.pending_work > 0 {
            let w = self.cfg.params.window_us.max(1);
            let next = (self.now / w + 1) * w;
            self.schedule(next, EventKind::WindowTick);
            self.tick_scheduled = true;
        }
    }

    fn run(&mut self) -> Result<(), SimError> {
        for (i, a) in self.workload.actions.iter().enumerate() {
            self.heap.push(Scheduled {
                time: a.time_us,
                seq: self.seq,
                kind: EventKind::Client(i),
            });
            self.seq += 1;
            self.pending_work += 1;
        }
        for (i, inj) in self.cfg.injections.iter().enumerate() {
            let (s, e) = (inj.start_us, inj.end_us);
            self.schedule(s, EventKind::InjectionStart(i));
            self.schedule(e, EventKind::InjectionEnd(i));
        }
        self.ensure_tick();

        let mut processed = 0u64;
        while let Some(ev) = self.heap.peek() {
            if self.cfg.horizon_us.is_some_and(|h| ev.time > h) {
                break;
            }
            let ev = self.heap.pop().expect("peeked");
            processed += 1;
            if processed > self.cfg.event_budget {
                return Err(SimError::EventBudget {
                    budget: self.cfg.event_budget,
                    time_us: ev.time,
                    pending: self.heap.len(),
                });
            }
            self.now = ev.time;
            if matches!(ev.kind, EventKind::WindowTick) {
                self.tick_scheduled = false;
            } else {
                self.pending_work -= 1;
            }
            self.process(ev.kind);
            self.ensure_tick();
        }
        self.report.events_processed = processed;
        self.report.end_time_us = self.now;
        Ok(())
    }

    fn process(&mut self, kind: EventKind) {
        match kind {
            EventKind::Client(i) => self.client_action(i),
            EventKind::ServiceDone { from, to } => self.service_done(from, to),
            EventKind::Arrival { from, to, msg } => {
                self.report.conservation.received += 1;
                if let Message::Notify(n) = &msg {
                    if n.hops as usize > 2 * self.topology.broker_count() {
                        self.report.hop_violations += 1;
                        return;
                    }
                }
                self.handle(to, msg, Hop::Broker(from));
            }
            EventKind::WindowTick => self.window_tick(),
            EventKind::InjectionStart(i) => {
                let inj = self.cfg.injections[i];
                let link = self.links.get_mut(&(inj.from, inj.to)).expect("validated");
                link.service_us = inj.service_us;
                for _ in 0..inj.backlog {
                    self.enqueue(inj.from, inj.to, Queued::Filler);
                }
            }
            EventKind::InjectionEnd(i) => {
                let inj = self.cfg.injections[i];
                let link = self.links.get_mut(&(inj.from, inj.to)).expect("validated");
                link.service_us = link.nominal_service_us;
            }
        }
    }

    fn client_action(&mut self, i: usize) {
        let a = &self.workload.actions[i];
        let host = self.hosts[&a.client];
        let msg = match &a.action {
            Action::Advertise(adv) => Message::Advertise {
                adv: adv.clone(),
                civ: None,
                tid: None,
            },
            Action::Subscribe(sub) => Message::Subscribe {
                sub: sub.clone(),
                tids: Vec::new(),
            },
            Action::Unsubscribe(sub) => Message::Unsubscribe { sub: *sub },
            Action::Publish(n) => {
                self.report.notifications_published += 1;
                self.published_at.insert(n.id, self.now);
                Message::Notify(n.clone())
            }
        };
        self.handle(host, msg, Hop::Client(a.client));
    }

    fn handle(&mut self, at: BrokerId, msg: Message, from: Hop) {
        let node = self.nodes.get_mut(&at).expect("broker exists");
        let out = node.handle(msg, from, self.now);
        let events = node.drain_events();
        for e in events {
            self.record_event(at, e);
        }
        for o in out {
            match o {
                Outgoing::Link { to, msg } => self.send(at, to, msg),
                Outgoing::Deliver { client, notif } => {
                    self.deliver(at, client, notif.id, notif.hops)
                }
            }
        }
    }

    fn record_event(&mut self, at: BrokerId, e: BrokerEvent) {
        match &e {
            BrokerEvent::Duplicate { kind } => {
                *self.report.duplicates.entry(*kind).or_insert(0) += 1
            }
            BrokerEvent::ForcedCongestedSend { .. } => self.report.forced_sends += 1,
            BrokerEvent::Dropped { reason } => {
                *self.report.drops.entry(reason.to_string()).or_insert(0) += 1
            }
            BrokerEvent::Routed { .. } => *self.routed.entry(at).or_insert(0) += 1,
            BrokerEvent::CivN {
                notif,
                to,
                bits,
                case,
            } => self.report.civ_n_records.push(CivNRecord {
                time_us: self.now,
                notif: *notif,
                at,
                to: *to,
                bits: bits.clone(),
                case: *case,
            }),
            _ => {}
        }
        if self.cfg.trace {
            self.trace.push(TraceRecord::Broker {
                time_us: self.now,
                broker: at,
                event: e,
            });
        }
    }

    fn send(&mut self, from: BrokerId, to: BrokerId, msg: Message) {
        assert!(
            self.links.contains_key(&(from, to)),
            "broker {from} sent to non-neighbour {to}"
        );
        let kind = msg.kind();
        *self.report.ims.entry(kind).or_insert(0) += 1;
        if msg.is_civ_n() {
            self.report.civ_n += 1;
        }
        if let Message::CibSet { adv, .. } = &msg {
            *self.cib_sets.entry(*adv).or_insert(0) += 1;
        }
        self.report.conservation.sent += 1;
        if self.cfg.trace {
            let civ = match &msg {
                Message::Notify(n) => n.civ.map(|c| c.to_string()),
                _ => None,
            };
            self.trace.push(TraceRecord::Send {
                time_us: self.now,
                from,
                to,
                kind,
                civ,
            });
        }
        self.links.get_mut(&(from, to)).expect("checked").sent += 1;
        self.enqueue(from, to, Queued::Msg(msg));
    }

    fn enqueue(&mut self, from: BrokerId, to: BrokerId, item: Queued) {
        if matches!(item, Queued::Filler) {
            self.report.fillers += 1;
        }
        let link = self.links.get_mut(&(from, to)).expect("link exists");
        link.queue.push_back(item);
        link.max_q_len = link.max_q_len.max(link.queue.len() as u64);
        let start = !link.busy;
        let service = link.service_us;
        if start {
            link.busy = true;
        }
        self.nodes
            .get_mut(&from)
            .expect("broker")
            .lst_mut()
            .on_enqueue(to);
        if start {
            self.schedule(self.now + service, EventKind::ServiceDone { from, to });
        }
    }

    fn service_done(&mut self, from: BrokerId, to: BrokerId) {
        let link = self.links.get_mut(&(from, to)).expect("link exists");
        let item = link
            .queue
            .pop_front()
            .expect("service implies a queued item");
        let latency = link.latency_us;
        let more = !link.queue.is_empty();
        let service = link.service_us;
        link.busy = more;
        self.nodes
            .get_mut(&from)
            .expect("broker")
            .lst_mut()
            .on_dequeue(to);
        if let Queued::Msg(msg) = item {
            self.schedule(self.now + latency, EventKind::Arrival { from, to, msg });
        }
        if more {
            self.schedule(self.now + service, EventKind::ServiceDone { from, to });
        }
    }

    fn deliver(&mut self, at: BrokerId, client: ClientId, notif: NotifId, hops: u32) {
        let count = self.ledger.entry((notif, client)).or_insert(0);
        *count += 1;
        if *count > 1 {
            self.report.duplicate_deliveries += 1;
            return;
        }
        let published = self.published_at.get(&notif).copied().unwrap_or(self.now);
        let publisher_host = self.hosts.get(&notif.client).copied().unwrap_or(at);
        self.report.deliveries.push(Delivery {
            notif,
            subscriber: client,
            publisher_host,
            subscriber_host: at,
            hops,
            delay_us: self.now - published,
        });
        if self.cfg.trace {
            self.trace.push(TraceRecord::Deliver {
                time_us: self.now,
                notif,
                client,
                hops,
            });
        }
    }

    fn window_tick(&mut self) {
        for (&(from, to), link) in &self.links {
            let lst = self.nodes[&from].lst().get(to);
            if lst.q_len != link.queue.len() as u64 {
                self.report.lst_mismatches += 1;
            }
        }
        for &b in &self.cfg.watch {
            let Some(node) = self.nodes.get(&b) else {
                continue;
            };
            for (&to, s) in node.lst().iter() {
                self.report.queue_samples.push(QueueSample {
                    time_us: self.now,
                    broker: b,
                    to,
                    q_len: s.q_len,
                    q_in: s.q_in,
                    q_out: s.q_out,
                    congested: s.is_congested(self.cfg.params.tau),
                });
            }
        }
        for node in self.nodes.values_mut() {
            node.on_window(self.now);
        }
    }

    fn finish(mut self) -> SimOutput {
        let mut in_flight = 0u64;
        for link in self.links.values() {
            in_flight += link
                .queue
                .iter()
                .filter(|q| matches!(q, Queued::Msg(_)))
                .count() as u64;
        }
        in_flight += self
            .heap
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Arrival { .. }))
            .count() as u64;
        self.report.conservation = Conservation {
            in_flight,
            ..self.report.conservation
        };

        for (&b, node) in &self.nodes {
            self.report.brokers.push(BrokerStats {
                broker: b,
                srt: node.srt_entries().len(),
                prt: node.prt_entries().len(),
                max_queue: 0,
                routed: self.routed.get(&b).copied().unwrap_or(0),
            });
        }
        for ((from, to), link) in &self.links {
            self.report.links.insert(
                (*from, *to),
                LinkStats {
                    kind: link.kind,
                    sent: link.sent,
                    max_q_len: link.max_q_len,
                },
            );
        }
        for row in &mut self.report.brokers {
            row.max_queue = self
                .links
                .iter()
                .filter(|((from, _), _)| *from == row.broker)
                .map(|(_, l)| l.max_q_len)
                .max()
                .unwrap_or(0);
        }
        self.tree_metrics();
        SimOutput {
            report: self.report,
            trace: self.trace,
        }
    }

    /// Reach and depth of every advertisement and subscription, following
    /// last-hop pointers back to the issuing client's broker.
    fn tree_metrics(&mut self) {
        let mut adv_hops: BTreeMap<_, BTreeMap<BrokerId, Hop>> = BTreeMap::new();
        let mut sub_hops: BTreeMap<SubId, BTreeMap<BrokerId, Hop>> = BTreeMap::new();
        for (&b, node) in &self.nodes {
            for (adv, hop) in node.srt_entries() {
                adv_hops.entry(adv).or_default().insert(b, hop);
            }
            for (sub, hop) in node.prt_entries() {
                // The baseline may hold several entries per subscription; keep the first.
                sub_hops.entry(sub).or_default().entry(b).or_insert(hop);
            }
        }
        let limit = self.topology.broker_count();
        let depth = |hops: &BTreeMap<BrokerId, Hop>, start: BrokerId| -> usize {
            let mut at = start;
            let mut d = 0;
            while let Some(Hop::Broker(next)) = hops.get(&at) {
                at = *next;
                d += 1;
                if d > limit {
                    break;
                }
            }
            d
        };
        for (adv, hops) in &adv_hops {
            let host = self
                .hosts
                .get(&adv.client)
                .copied()
                .unwrap_or(BrokerId::new(0, 0));
            let tree_length = hops.keys().map(|&b| depth(hops, b)).max().unwrap_or(0);
            self.report.adverts.insert(
                *adv,
                AdvStats {
                    host,
                    reach: hops.len(),
                    tree_length,
                    cib_sets: self.cib_sets.get(adv).copied().unwrap_or(0),
                },
            );
        }
        for (sub, hops) in &sub_hops {
            let host = self
                .hosts
                .get(&sub.client)
                .copied()
                .unwrap_or(BrokerId::new(0, 0));
            let d = hops.keys().map(|&b| depth(hops, b)).max().unwrap_or(0);
            self.report.subs.insert(
                *sub,
                SubStats {
                    host,
                    reach: hops.len(),
                    depth: d,
                },
            );
        }
    }
}

/// Serializes a trace as JSON lines.
pub fn trace_to_jsonl(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in trace {
        out.push_str(&serde_json::to_string(r).expect("trace serializes"));
        out.push('\n');
    }
    out
}
