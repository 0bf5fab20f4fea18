//! Run metrics and their CSV form.
//!
//! CSV files written by [`MetricsReport::write_csv`]:
//!
//! | file | one row per |
//! |------|-------------|
//! | `summary.csv` | metric (`metric,value`) |
//! | `brokers.csv` | broker: `broker,cluster,class,srt,prt,max_queue,routed` |
//! | `adverts.csv` | advertisement: `adv,host,reach,tree_length,cib_sets` |
//! | `subscriptions.csv` | subscription: `sub,host,reach,depth` |
//! | `deliveries.csv` | delivered copy: `notif,subscriber,publisher_host,subscriber_host,hops,delay_us` |
//! | `links.csv` | link direction: `from,to,kind,sent,max_queue` |
//! | `queues.csv` | window sample at a watched broker: `time_us,broker,to,q_len,q_in,q_out,congested` |
//! | `civ_n.csv` | CIV-N send: `time_us,notif,at,to,bits,case` |

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::model::{AdvId, ClientId, MessageKind, NotifId, SubId};
use crate::node::IdrCase;
use crate::scot::{BrokerClass, BrokerId, LinkKind, ScotTopology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AdvStats {
    pub host: BrokerId,
    /// Brokers storing the advertisement.
    pub reach: usize,
    /// Longest chain of broker hops from a storing broker back to the host.
    pub tree_length: usize,
    /// Interest-bit set messages sent toward the host.
    pub cib_sets: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SubStats {
    pub host: BrokerId,
    pub reach: usize,
    pub depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Delivery {
    pub notif: NotifId,
    pub subscriber: ClientId,
    pub publisher_host: BrokerId,
    pub subscriber_host: BrokerId,
    pub hops: u32,
    pub delay_us: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LinkStats {
    pub kind: LinkKind,
    pub sent: u64,
    pub max_q_len: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QueueSample {
    pub time_us: u64,
    pub broker: BrokerId,
    pub to: BrokerId,
    pub q_len: u64,
    pub q_in: u64,
    pub q_out: u64,
    pub congested: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CivNRecord {
    pub time_us: u64,
    pub notif: NotifId,
    pub at: BrokerId,
    pub to: BrokerId,
    pub bits: String,
    pub case: IdrCase,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Conservation {
    pub sent: u64,
    pub received: u64,
    pub in_flight: u64,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.sent == self.received + self.in_flight
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BrokerStats {
    pub broker: BrokerId,
    pub srt: usize,
    pub prt: usize,
    pub max_queue: u64,
    pub routed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub routing: String,
    pub seed: u64,
    pub workload_fingerprint: String,
    /// Inter-broker messages by kind; every link send counts, duplicates included.
    pub ims: BTreeMap<MessageKind, u64>,
    pub civ_n: u64,
    /// Messages a broker received and discarded as already known.
    pub duplicates: BTreeMap<MessageKind, u64>,
    pub forced_sends: u64,
    pub drops: BTreeMap<String, u64>,
    /// Synthetic backlog messages from congestion injections (not IMs).
    pub fillers: u64,
    pub brokers: Vec<BrokerStats>,
    pub adverts: BTreeMap<AdvId, AdvStats>,
    pub subs: BTreeMap<SubId, SubStats>,
    pub notifications_published: u64,
    pub deliveries: Vec<Delivery>,
    pub duplicate_deliveries: u64,
    pub hop_violations: u64,
    pub links: BTreeMap<(BrokerId, BrokerId), LinkStats>,
    pub queue_samples: Vec<QueueSample>,
    pub civ_n_records: Vec<CivNRecord>,
    pub conservation: Conservation,
    pub lst_mismatches: u64,
    pub events_processed: u64,
    pub end_time_us: u64,
}

impl MetricsReport {
    pub fn ims_total(&self) -> u64 {
        self.ims.values().sum()
    }

    pub fn ims_of(&self, kind: MessageKind) -> u64 {
        self.ims.get(&kind).copied().unwrap_or(0)
    }

    pub fn duplicates_of(&self, kind: MessageKind) -> u64 {
        self.duplicates.get(&kind).copied().unwrap_or(0)
    }

    /// `(notification, subscriber)` pairs delivered at least once.
    pub fn delivered_set(&self) -> BTreeSet<(NotifId, ClientId)> {
        self.deliveries
            .iter()
            .map(|d| (d.notif, d.subscriber))
            .collect()
    }

    /// Largest queue seen on any outgoing link of `broker`.
    pub fn max_queue_at(&self, broker: BrokerId) -> u64 {
        self.links
            .iter()
            .filter(|((from, _), _)| *from == broker)
            .map(|(_, s)| s.max_q_len)
            .max()
            .unwrap_or(0)
    }

    pub fn srt_total(&self) -> usize {
        self.brokers.iter().map(|b| b.srt).sum()
    }

    pub fn prt_total(&self) -> usize {
        self.brokers.iter().map(|b| b.prt).sum()
    }

    pub fn max_hops(&self) -> u32 {
        self.deliveries.iter().map(|d| d.hops).max().unwrap_or(0)
    }

    pub fn summary_rows(&self) -> Vec<(String, String)> {
        let mut rows: Vec<(String, String)> = vec![
            ("routing".into(), self.routing.clone()),
            ("seed".into(), self.seed.to_string()),
            (
                "workload_fingerprint".into(),
                self.workload_fingerprint.clone(),
            ),
            ("brokers".into(), self.brokers.len().to_string()),
            ("advertisements".into(), self.adverts.len().to_string()),
            ("subscriptions".into(), self.subs.len().to_string()),
            (
                "notifications".into(),
                self.notifications_published.to_string(),
            ),
            ("ims_total".into(), self.ims_total().to_string()),
        ];
        for kind in MessageKind::ALL {
            rows.push((
                format!("ims_{}", kind.name()),
                self.ims_of(kind).to_string(),
            ));
        }
        for kind in MessageKind::ALL {
            rows.push((
                format!("duplicates_{}", kind.name()),
                self.duplicates_of(kind).to_string(),
            ));
        }
        rows.extend([
            ("civ_n".into(), self.civ_n.to_string()),
            (
                "forced_congested_sends".into(),
                self.forced_sends.to_string(),
            ),
            ("drops".into(), self.drops.values().sum::<u64>().to_string()),
            ("filler_messages".into(), self.fillers.to_string()),
            ("srt_total".into(), self.srt_total().to_string()),
            ("prt_total".into(), self.prt_total().to_string()),
            ("deliveries".into(), self.deliveries.len().to_string()),
            (
                "duplicate_deliveries".into(),
                self.duplicate_deliveries.to_string(),
            ),
            ("max_hops".into(), self.max_hops().to_string()),
            ("hop_violations".into(), self.hop_violations.to_string()),
            ("sent".into(), self.conservation.sent.to_string()),
            ("received".into(), self.conservation.received.to_string()),
            ("in_flight".into(), self.conservation.in_flight.to_string()),
            ("lst_mismatches".into(), self.lst_mismatches.to_string()),
            ("events".into(), self.events_processed.to_string()),
            ("end_time_us".into(), self.end_time_us.to_string()),
        ]);
        rows
    }

    /// Writes every CSV file into `dir`, creating it if needed.
    pub fn write_csv(&self, topology: &ScotTopology, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let label = |b: BrokerId| topology.label(b);

        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        w.write_record(["metric", "value"])?;
        for (k, v) in self.summary_rows() {
            w.write_record([k, v])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("brokers.csv"))?;
        w.write_record([
            "broker",
            "cluster",
            "class",
            "srt",
            "prt",
            "max_queue",
            "routed",
        ])?;
        for b in &self.brokers {
            let class = match topology.neighbours(b.broker).map(|n| n.class) {
                Ok(BrokerClass::Inner) => "inner",
                _ => "edge",
            };
            w.write_record([
                label(b.broker),
                b.broker.ci.to_string(),
                class.to_string(),
                b.srt.to_string(),
                b.prt.to_string(),
                b.max_queue.to_string(),
                b.routed.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("adverts.csv"))?;
        w.write_record(["adv", "host", "reach", "tree_length", "cib_sets"])?;
        for (id, s) in &self.adverts {
            w.write_record([
                id.to_string(),
                label(s.host),
                s.reach.to_string(),
                s.tree_length.to_string(),
                s.cib_sets.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("subscriptions.csv"))?;
        w.write_record(["sub", "host", "reach", "depth"])?;
        for (id, s) in &self.subs {
            w.write_record([
                id.to_string(),
                label(s.host),
                s.reach.to_string(),
                s.depth.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("deliveries.csv"))?;
        w.write_record([
            "notif",
            "subscriber",
            "publisher_host",
            "subscriber_host",
            "hops",
            "delay_us",
        ])?;
        for d in &self.deliveries {
            w.write_record([
                d.notif.to_string(),
                d.subscriber.to_string(),
                label(d.publisher_host),
                label(d.subscriber_host),
                d.hops.to_string(),
                d.delay_us.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("links.csv"))?;
        w.write_record(["from", "to", "kind", "sent", "max_queue"])?;
        for ((from, to), s) in &self.links {
            let kind = match s.kind {
                LinkKind::ALink => "alink",
                LinkKind::ILink => "ilink",
            };
            w.write_record([
                label(*from),
                label(*to),
                kind.into(),
                s.sent.to_string(),
                s.max_q_len.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("queues.csv"))?;
        w.write_record([
            "time_us",
            "broker",
            "to",
            "q_len",
            "q_in",
            "q_out",
            "congested",
        ])?;
        for q in &self.queue_samples {
            w.write_record([
                q.time_us.to_string(),
                label(q.broker),
                label(q.to),
                q.q_len.to_string(),
                q.q_in.to_string(),
                q.q_out.to_string(),
                q.congested.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("civ_n.csv"))?;
        w.write_record(["time_us", "notif", "at", "to", "bits", "case"])?;
        for r in &self.civ_n_records {
            let case = serde_json::to_value(r.case)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            w.write_record([
                r.time_us.to_string(),
                r.notif.to_string(),
                label(r.at),
                label(r.to),
                r.bits.clone(),
                case,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
