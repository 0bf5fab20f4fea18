//! Client placement and timed client actions, plus the stock-quote workload
//! generator used by the experiments.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::filter::{Constraint, Filter, Payload, Predicate, Value};
use crate::model::{AdvId, Advertisement, ClientId, NotifId, Notification, SubId, Subscription};
use crate::scot::{BrokerId, ScotTopology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Advertise(Advertisement),
    Subscribe(Subscription),
    Unsubscribe(SubId),
    Publish(Notification),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedAction {
    pub time_us: u64,
    pub client: ClientId,
    pub action: Action,
}

/// Everything clients do during a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    /// Client to host broker.
    pub clients: Vec<(ClientId, BrokerId)>,
    /// Ordered by time; ties keep insertion order.
    pub actions: Vec<TimedAction>,
}

impl Workload {
    pub fn host_of(&self, client: ClientId) -> Option<BrokerId> {
        self.clients
            .iter()
            .find(|(c, _)| *c == client)
            .map(|(_, b)| *b)
    }

    pub fn add_client(&mut self, client: ClientId, host: BrokerId) {
        self.clients.push((client, host));
    }

    pub fn push(&mut self, time_us: u64, client: ClientId, action: Action) {
        self.actions.push(TimedAction {
            time_us,
            client,
            action,
        });
    }

    /// Stable sort by time.
    pub fn normalize(&mut self) {
        self.actions.sort_by_key(|a| a.time_us);
        self.clients.sort();
        self.clients.dedup();
    }

    /// Hex SHA-256 of the serialized workload; equal fingerprints mean two
    /// runs saw the same clients doing the same things.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("workload serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn advertisements(&self) -> impl Iterator<Item = &Advertisement> {
        self.actions.iter().filter_map(|a| match &a.action {
            Action::Advertise(adv) => Some(adv),
            _ => None,
        })
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &Subscription> {
        self.actions.iter().filter_map(|a| match &a.action {
            Action::Subscribe(s) => Some(s),
            _ => None,
        })
    }

    pub fn notifications(&self) -> impl Iterator<Item = &Notification> {
        self.actions.iter().filter_map(|a| match &a.action {
            Action::Publish(n) => Some(n),
            _ => None,
        })
    }
}

/// Attribute names of the stock-quote schema.
pub const STOCK_ATTRIBUTES: [&str; 10] = [
    "symbol", "price", "volume", "open", "high", "low", "close", "change", "bid", "ask",
];

/// Width of the price domain; advertisement price windows sit inside `[0, PRICE_SPAN)`.
pub const PRICE_SPAN: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub publishers: usize,
    pub subscribers: usize,
    /// Notifications issued by each publisher.
    pub notifications_per_publisher: usize,
    pub symbols: usize,
    /// Target fraction of notifications a subscription matches.
    pub selectivity: f64,
    /// Width of each advertisement's price window.
    pub advert_price_width: f64,
    pub advertise_at_us: u64,
    pub subscribe_at_us: u64,
    /// Spacing between consecutive client actions of one phase.
    pub spacing_us: u64,
    /// Gap between the last subscription and the first notification.
    pub quiet_gap_us: u64,
    /// Interval between notifications from one publisher.
    pub publish_interval_us: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            publishers: 10,
            subscribers: 50,
            notifications_per_publisher: 50,
            symbols: 500,
            selectivity: 0.02,
            advert_price_width: 200.0,
            advertise_at_us: 0,
            subscribe_at_us: 1_000_000,
            spacing_us: 100,
            quiet_gap_us: 1_000_000,
            publish_interval_us: 1_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurstConfig {
    pub notifications: usize,
    pub interval_us: u64,
    /// Share of the subscriber population interested in the burst.
    pub interested_fraction: f64,
    /// Fixed host for the high-rate publisher; random when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub host: Option<BrokerId>,
}

impl Default for BurstConfig {
    fn default() -> Self {
        BurstConfig {
            notifications: 2000,
            interval_us: 500,
            interested_fraction: 0.02,
            host: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BurstInfo {
    pub publisher: ClientId,
    pub host: BrokerId,
    pub subscribers: Vec<ClientId>,
    pub start_us: u64,
}

/// Deterministic generator: clients are placed uniformly at random, and
/// subscription price windows are sized from a calibration sample so each
/// matches roughly `selectivity` of all notifications.
pub struct Generator<'a> {
    topology: &'a ScotTopology,
    rng: ChaCha8Rng,
    brokers: Vec<BrokerId>,
    next_client: u32,
}

struct Publisher {
    client: ClientId,
    adv: Advertisement,
    symbol: String,
    lo: f64,
    hi: f64,
}

impl<'a> Generator<'a> {
    pub fn new(topology: &'a ScotTopology, seed: u64) -> Self {
        Generator {
            topology,
            rng: ChaCha8Rng::seed_from_u64(seed),
            brokers: topology.brokers().collect(),
            next_client: 0,
        }
    }

    fn client(&mut self) -> ClientId {
        let c = ClientId(self.next_client);
        self.next_client += 1;
        c
    }

    fn random_broker(&mut self) -> BrokerId {
        *self
            .brokers
            .choose(&mut self.rng)
            .expect("topology has brokers")
    }

    fn symbol(&mut self, symbols: usize) -> String {
        format!("S{}", self.rng.random_range(0..symbols.max(1)))
    }

    fn publisher(&mut self, symbol: String, width: f64) -> Publisher {
        let client = self.client();
        let width = width.clamp(1.0, PRICE_SPAN);
        let lo = self.rng.random_range(0.0..=(PRICE_SPAN - width)).floor();
        let hi = lo + width;
        let filter = Filter::new(vec![
            Predicate::new("symbol", Constraint::Eq(Value::Str(symbol.clone()))),
            Predicate::new("price", Constraint::Between(lo, hi)),
        ])
        .expect("non-empty");
        Publisher {
            client,
            adv: Advertisement {
                id: AdvId { client, seq: 0 },
                filter,
            },
            symbol,
            lo,
            hi,
        }
    }

    fn payload(&mut self, symbol: &str, lo: f64, hi: f64) -> Payload {
        let price = (self.rng.random_range(lo..=hi) * 100.0).round() / 100.0;
        let mut p = Payload::new();
        p.insert("symbol".into(), Value::Str(symbol.to_string()));
        p.insert("price".into(), Value::Num(price));
        p.insert(
            "volume".into(),
            Value::Num(self.rng.random_range(0..1_000_000) as f64),
        );
        for attr in &STOCK_ATTRIBUTES[3..] {
            let v = ((price + self.rng.random_range(-5.0..5.0)) * 100.0).round() / 100.0;
            p.insert((*attr).into(), Value::Num(v));
        }
        p
    }

    /// Subscription over `symbol` whose price window covers `fraction` of
    /// the sample prices, placed at a random offset within the sample.
    fn calibrated_filter(
        &mut self,
        symbol: Option<&str>,
        sorted_prices: &[f64],
        fraction: f64,
    ) -> Filter {
        let n = sorted_prices.len();
        let mut preds = Vec::new();
        if let Some(s) = symbol {
            preds.push(Predicate::new(
                "symbol",
                Constraint::Eq(Value::Str(s.to_string())),
            ));
        }
        if n == 0 || fraction >= 1.0 {
            preds.push(Predicate::new("price", Constraint::Ge(0.0)));
        } else {
            let span = ((fraction * n as f64).round() as usize).clamp(1, n);
            let start = self.rng.random_range(0..=n - span);
            let (lo, hi) = (sorted_prices[start], sorted_prices[start + span - 1]);
            preds.push(Predicate::new("price", Constraint::Between(lo, hi)));
        }
        Filter::new(preds).expect("non-empty")
    }

    /// Publishers advertise first, subscribers register next, and
    /// notifications start once subscriptions have settled.
    pub fn generate(&mut self, cfg: &GeneratorConfig) -> Workload {
        let mut w = Workload::default();
        let mut pubs = Vec::new();
        for _ in 0..cfg.publishers {
            let symbol = self.symbol(cfg.symbols);
            let p = self.publisher(symbol, cfg.advert_price_width);
            let host = self.random_broker();
            w.add_client(p.client, host);
            pubs.push(p);
        }
        for (i, p) in pubs.iter().enumerate() {
            w.push(
                cfg.advertise_at_us + i as u64 * cfg.spacing_us,
                p.client,
                Action::Advertise(p.adv.clone()),
            );
        }

        // Calibration sample drawn from the same distribution as the notifications.
        let mut sample: Vec<(usize, f64)> = Vec::new();
        for _ in 0..4000.max(cfg.publishers * 20) {
            if pubs.is_empty() {
                break;
            }
            let k = self.rng.random_range(0..pubs.len());
            let (lo, hi) = (pubs[k].lo, pubs[k].hi);
            sample.push((k, self.rng.random_range(lo..=hi)));
        }

        for i in 0..cfg.subscribers {
            let client = self.client();
            let host = self.random_broker();
            w.add_client(client, host);
            let filter = self.subscription_filter(&pubs, &sample, cfg.selectivity);
            w.push(
                cfg.subscribe_at_us + i as u64 * cfg.spacing_us,
                client,
                Action::Subscribe(Subscription {
                    id: SubId { client, seq: 0 },
                    filter,
                }),
            );
        }

        let start =
            cfg.subscribe_at_us + cfg.subscribers as u64 * cfg.spacing_us + cfg.quiet_gap_us;
        for round in 0..cfg.notifications_per_publisher {
            for (k, p) in pubs.iter().enumerate() {
                let payload = self.payload(&p.symbol, p.lo, p.hi);
                let n = Notification::new(
                    NotifId {
                        client: p.client,
                        seq: round as u32,
                    },
                    p.adv.id,
                    payload,
                );
                let t =
                    start + round as u64 * cfg.publish_interval_us + k as u64 * cfg.spacing_us / 10;
                w.push(t, p.client, Action::Publish(n));
            }
        }
        w.normalize();
        w
    }

    /// A subscription on one advertised symbol, with a price window wide
    /// enough that it matches `selectivity` of all notifications overall.
    fn subscription_filter(
        &mut self,
        pubs: &[Publisher],
        sample: &[(usize, f64)],
        selectivity: f64,
    ) -> Filter {
        if pubs.is_empty() {
            return self.calibrated_filter(None, &[], 1.0);
        }
        let k = self.rng.random_range(0..pubs.len());
        let symbol = pubs[k].symbol.clone();
        let mut prices: Vec<f64> = sample
            .iter()
            .filter(|(j, _)| pubs[*j].symbol == symbol)
            .map(|&(_, p)| p)
            .collect();
        prices.sort_by(f64::total_cmp);
        // Share of all notifications that carry this symbol.
        let share = prices.len() as f64 / sample.len().max(1) as f64;
        if share > selectivity {
            self.calibrated_filter(Some(&symbol), &prices, selectivity / share)
        } else {
            // A single symbol carries too little traffic; use a price band
            // across all symbols instead.
            let mut all: Vec<f64> = sample.iter().map(|&(_, p)| p).collect();
            all.sort_by(f64::total_cmp);
            self.calibrated_filter(None, &all, selectivity)
        }
    }

    /// Adds a high-rate publisher and a small set of subscribers that only it
    /// serves. The subscribers cover every cluster and never share the
    /// publisher's broker. The burst starts once all subscriptions are in.
    pub fn add_burst(
        &mut self,
        w: &mut Workload,
        cfg: &GeneratorConfig,
        burst: &BurstConfig,
    ) -> BurstInfo {
        let hrp = self.client();
        let host = match burst.host {
            Some(b) => b,
            None => self.random_broker(),
        };
        w.add_client(hrp, host);
        let adv = Advertisement {
            id: AdvId {
                client: hrp,
                seq: 0,
            },
            filter: Filter::new(vec![
                Predicate::new("symbol", Constraint::Eq(Value::Str("HRP".into()))),
                Predicate::new("price", Constraint::Between(PRICE_SPAN, 2.0 * PRICE_SPAN)),
            ])
            .expect("non-empty"),
        };
        w.push(cfg.advertise_at_us, hrp, Action::Advertise(adv.clone()));

        let clusters = self.topology.cluster_count();
        let wanted =
            ((burst.interested_fraction * cfg.subscribers as f64).round() as usize).max(clusters);
        let mut subscribers = Vec::new();
        for i in 0..wanted {
            let client = self.client();
            let place = if i < clusters {
                let options: Vec<BrokerId> = self
                    .topology
                    .cluster(i as u32)
                    .into_iter()
                    .filter(|&b| b != host)
                    .collect();
                *options
                    .choose(&mut self.rng)
                    .expect("cluster has another broker")
            } else {
                self.broker_except(&[host])
            };
            w.add_client(client, place);
            let sub = Subscription {
                id: SubId { client, seq: 0 },
                filter: Filter::new(vec![Predicate::new("price", Constraint::Ge(PRICE_SPAN))])
                    .expect("non-empty"),
            };
            w.push(
                cfg.subscribe_at_us + i as u64 * cfg.spacing_us,
                client,
                Action::Subscribe(sub),
            );
            subscribers.push(client);
        }

        let start = cfg.subscribe_at_us
            + (cfg.subscribers + wanted) as u64 * cfg.spacing_us
            + cfg.quiet_gap_us;
        for k in 0..burst.notifications {
            let payload = self.payload("HRP", PRICE_SPAN, 2.0 * PRICE_SPAN);
            let n = Notification::new(
                NotifId {
                    client: hrp,
                    seq: k as u32,
                },
                adv.id,
                payload,
            );
            w.push(
                start + k as u64 * burst.interval_us,
                hrp,
                Action::Publish(n),
            );
        }
        w.normalize();
        BurstInfo {
            publisher: hrp,
            host,
            subscribers,
            start_us: start,
        }
    }

    /// Picks a random broker outside `exclude`.
    pub fn broker_except(&mut self, exclude: &[BrokerId]) -> BrokerId {
        let options: Vec<BrokerId> = self
            .brokers
            .iter()
            .copied()
            .filter(|b| !exclude.contains(b))
            .collect();
        *options.choose(&mut self.rng).expect("some broker remains")
    }
}

/// Fraction of `(notification, subscription)` pairs that match.
pub fn measured_selectivity(w: &Workload) -> f64 {
    let notifs: Vec<&Notification> = w.notifications().collect();
    let subs: Vec<&Subscription> = w.subscriptions().collect();
    if notifs.is_empty() || subs.is_empty() {
        return 0.0;
    }
    let hits: usize = subs
        .iter()
        .map(|s| notifs.iter().filter(|n| s.matches(n)).count())
        .sum();
    hits as f64 / (notifs.len() * subs.len()) as f64
}

/// Per-client action counts, handy for summaries.
pub fn action_counts(w: &Workload) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::new();
    for a in &w.actions {
        let key = match a.action {
            Action::Advertise(_) => "advertisements",
            Action::Subscribe(_) => "subscriptions",
            Action::Unsubscribe(_) => "unsubscriptions",
            Action::Publish(_) => "notifications",
        };
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}
