//! Scenario files: topology, routing, link model, workload and congestion
//! injections in one TOML document.
//!
//! ```toml
//! seed = 7
//! routing = "idr"            # snr | idr | tid-static
//! watch = ["(b,2)"]
//!
//! [topology]
//! preset = "fig7"            # or: af = "tree.txt", cf = "k3.txt"
//!
//! [params]
//! tau = 10.0
//! window_ms = 50
//!
//! [[clients]]
//! id = 1
//! host = "(b,2)"
//!
//! [[actions]]
//! at_us = 0
//! client = 1
//! advertise = "price between 0 100"
//!
//! [[congestion]]
//! from = "(b,2)"
//! to = "(b,0)"
//! start_us = 1000
//! end_us = 900000
//! service_us = 20000
//! backlog = 30
//! ```
//!
//! A `[workload]` table generates clients instead of listing them; `[burst]`
//! adds a high-rate publisher on top of a generated workload.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::broker::BrokerParams;
use crate::filter::{Constraint, Filter, FilterError, Payload};
use crate::metrics::MetricsReport;
use crate::model::{AdvId, Advertisement, ClientId, NotifId, Notification, SubId, Subscription};
use crate::scot::{self, BrokerId, ScotTopology, TopologyError};
use crate::sim::{
    self, CongestionInjection, LinkConfig, RoutingMode, SimConfig, SimError, SimOutput,
};
use crate::workload::{Action, BurstConfig, BurstInfo, Generator, GeneratorConfig, Workload};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("action {index}: {source}")]
    Filter { index: usize, source: FilterError },
    #[error("runs used different workloads ({a} vs {b})")]
    WorkloadMismatch { a: String, b: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub preset: Option<String>,
    pub af: Option<PathBuf>,
    pub cf: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub tau: f64,
    pub window_ms: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        ParamsSection {
            tau: 10.0,
            window_ms: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientEntry {
    pub id: u32,
    pub host: String,
}

/// One scripted client action; exactly one of the action fields is set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionEntry {
    pub at_us: u64,
    pub client: u32,
    pub advertise: Option<String>,
    pub subscribe: Option<String>,
    /// Withdraws the client's most recent subscription.
    #[serde(default)]
    pub unsubscribe: bool,
    /// Payload as `attr = value` pairs, published under the client's most
    /// recent advertisement.
    pub publish: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongestionEntry {
    pub from: String,
    pub to: String,
    pub start_us: u64,
    pub end_us: u64,
    pub service_us: u64,
    #[serde(default)]
    pub backlog: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurstSection {
    pub notifications: usize,
    pub interval_us: u64,
    pub interested_fraction: f64,
    pub host: Option<String>,
}

impl Default for BurstSection {
    fn default() -> Self {
        let d = BurstConfig::default();
        BurstSection {
            notifications: d.notifications,
            interval_us: d.interval_us,
            interested_fraction: d.interested_fraction,
            host: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_routing")]
    pub routing: RoutingMode,
    pub horizon_ms: Option<f64>,
    #[serde(default = "default_budget")]
    pub event_budget: u64,
    #[serde(default)]
    pub watch: Vec<String>,
    pub topology: TopologySection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub links: LinkConfig,
    pub workload: Option<GeneratorConfig>,
    pub burst: Option<BurstSection>,
    #[serde(default)]
    pub clients: Vec<ClientEntry>,
    #[serde(default)]
    pub actions: Vec<ActionEntry>,
    #[serde(default)]
    pub congestion: Vec<CongestionEntry>,
}

fn default_routing() -> RoutingMode {
    RoutingMode::Snr
}

fn default_budget() -> u64 {
    SimConfig::default().event_budget
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        // Factor files are relative to the scenario file.
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.topology.af, &mut cfg.topology.cf]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Everything needed to run a scenario, resolved and validated.
pub struct Prepared {
    pub topology: ScotTopology,
    pub workload: Workload,
    pub sim: SimConfig,
    pub burst: Option<BurstInfo>,
}

pub struct ScenarioRun {
    pub topology: ScotTopology,
    pub workload: Workload,
    pub burst: Option<BurstInfo>,
    pub output: SimOutput,
}

impl ScenarioRun {
    pub fn report(&self) -> &MetricsReport {
        &self.output.report
    }
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

pub fn load_topology(section: &TopologySection) -> Result<ScotTopology, ScenarioError> {
    match (&section.preset, &section.af, &section.cf) {
        (Some(name), None, None) => Ok(scot::preset(name)?),
        (None, Some(af), Some(cf)) => {
            let read = |p: &PathBuf| {
                std::fs::read_to_string(p).map_err(|source| ScenarioError::Io {
                    path: p.clone(),
                    source,
                })
            };
            Ok(scot::scot_from_text(&read(af)?, &read(cf)?)?)
        }
        _ => Err(invalid(
            "topology needs either `preset` or both `af` and `cf`",
        )),
    }
}

fn parse_payload(text: &str) -> Result<Payload, FilterError> {
    let filter: Filter = text.parse()?;
    let mut payload = Payload::new();
    for p in filter.predicates() {
        match &p.constraint {
            Constraint::Eq(v) => {
                payload.insert(p.attr.clone(), v.clone());
            }
            _ => return Err(FilterError::Syntax(p.to_string())),
        }
    }
    Ok(payload)
}

fn scripted_workload(cfg: &ScenarioConfig, topo: &ScotTopology) -> Result<Workload, ScenarioError> {
    let mut w = Workload::default();
    let mut known = BTreeMap::new();
    for c in &cfg.clients {
        let host = topo.parse_broker(&c.host)?;
        if known.insert(c.id, host).is_some() {
            return Err(invalid(format!("client {} declared twice", c.id)));
        }
        w.add_client(ClientId(c.id), host);
    }
    let mut adv_seq: BTreeMap<u32, u32> = BTreeMap::new();
    let mut sub_seq: BTreeMap<u32, u32> = BTreeMap::new();
    let mut notif_seq: BTreeMap<u32, u32> = BTreeMap::new();
    for (index, a) in cfg.actions.iter().enumerate() {
        if !known.contains_key(&a.client) {
            return Err(invalid(format!(
                "action {index}: client {} is not declared",
                a.client
            )));
        }
        let set = [
            a.advertise.is_some(),
            a.subscribe.is_some(),
            a.unsubscribe,
            a.publish.is_some(),
        ]
        .iter()
        .filter(|x| **x)
        .count();
        if set != 1 {
            return Err(invalid(format!(
                "action {index}: set exactly one of advertise, subscribe, unsubscribe, publish"
            )));
        }
        let client = ClientId(a.client);
        let filter_err = |source| ScenarioError::Filter { index, source };
        let action = if let Some(text) = &a.advertise {
            let seq = adv_seq.entry(a.client).or_insert(0);
            let adv = Advertisement {
                id: AdvId { client, seq: *seq },
                filter: text.parse().map_err(filter_err)?,
            };
            *seq += 1;
            Action::Advertise(adv)
        } else if let Some(text) = &a.subscribe {
            let seq = sub_seq.entry(a.client).or_insert(0);
            let sub = Subscription {
                id: SubId { client, seq: *seq },
                filter: text.parse().map_err(filter_err)?,
            };
            *seq += 1;
            Action::Subscribe(sub)
        } else if a.unsubscribe {
            let Some(&next) = sub_seq.get(&a.client) else {
                return Err(invalid(format!(
                    "action {index}: client {} has no subscription",
                    a.client
                )));
            };
            Action::Unsubscribe(SubId {
                client,
                seq: next - 1,
            })
        } else {
            let text = a.publish.as_deref().expect("one action set");
            let Some(&next_adv) = adv_seq.get(&a.client) else {
                return Err(invalid(format!(
                    "action {index}: client {} has not advertised",
                    a.client
                )));
            };
            let seq = notif_seq.entry(a.client).or_insert(0);
            let n = Notification::new(
                NotifId { client, seq: *seq },
                AdvId {
                    client,
                    seq: next_adv - 1,
                },
                parse_payload(text).map_err(filter_err)?,
            );
            *seq += 1;
            Action::Publish(n)
        };
        w.push(a.at_us, client, action);
    }
    w.normalize();
    Ok(w)
}

/// Resolves and validates a scenario without running it.
pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared, ScenarioError> {
    if cfg.params.tau.is_nan() || cfg.params.tau <= 0.0 {
        return Err(invalid(format!(
            "params.tau must be > 0, got {}",
            cfg.params.tau
        )));
    }
    if cfg.params.window_ms.is_nan() || cfg.params.window_ms <= 0.0 {
        return Err(invalid(format!(
            "params.window_ms must be > 0, got {}",
            cfg.params.window_ms
        )));
    }
    if cfg.links.alink_service_us == 0 || cfg.links.ilink_service_us == 0 {
        return Err(invalid("link service times must be > 0"));
    }
    let topology = load_topology(&cfg.topology)?;

    let scripted = !cfg.clients.is_empty() || !cfg.actions.is_empty();
    let (workload, burst) = match (&cfg.workload, scripted) {
        (Some(_), true) => {
            return Err(invalid(
                "use either [workload] or [[clients]]/[[actions]], not both",
            ))
        }
        (Some(gen), false) => {
            if !(gen.selectivity > 0.0 && gen.selectivity <= 1.0) {
                return Err(invalid(format!(
                    "workload.selectivity must be in (0, 1], got {}",
                    gen.selectivity
                )));
            }
            let mut g = Generator::new(&topology, cfg.seed);
            let mut w = g.generate(gen);
            let burst = match &cfg.burst {
                Some(b) => {
                    let host = b
                        .host
                        .as_deref()
                        .map(|h| topology.parse_broker(h))
                        .transpose()?;
                    let bc = BurstConfig {
                        notifications: b.notifications,
                        interval_us: b.interval_us,
                        interested_fraction: b.interested_fraction,
                        host,
                    };
                    Some(g.add_burst(&mut w, gen, &bc))
                }
                None => None,
            };
            (w, burst)
        }
        (None, _) => {
            if cfg.burst.is_some() {
                return Err(invalid("[burst] needs a generated [workload]"));
            }
            (scripted_workload(cfg, &topology)?, None)
        }
    };

    let injections = cfg
        .congestion
        .iter()
        .map(|c| {
            Ok(CongestionInjection {
                from: topology.parse_broker(&c.from)?,
                to: topology.parse_broker(&c.to)?,
                start_us: c.start_us,
                end_us: c.end_us,
                service_us: c.service_us,
                backlog: c.backlog,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    for inj in &injections {
        if topology.link_kind(inj.from, inj.to).is_none() {
            return Err(invalid(format!(
                "congestion on {} -> {}: not a link",
                topology.label(inj.from),
                topology.label(inj.to)
            )));
        }
        if inj.end_us <= inj.start_us {
            return Err(invalid(format!(
                "congestion on {} -> {}: end_us must exceed start_us",
                topology.label(inj.from),
                topology.label(inj.to)
            )));
        }
    }
    let mut watch = cfg
        .watch
        .iter()
        .map(|w| topology.parse_broker(w))
        .collect::<Result<Vec<BrokerId>, _>>()?;
    if let Some(b) = &burst {
        if !watch.contains(&b.host) {
            watch.push(b.host);
        }
    }

    let sim = SimConfig {
        routing: cfg.routing,
        params: BrokerParams {
            tau: cfg.params.tau,
            window_us: (cfg.params.window_ms * 1000.0).round().max(1.0) as u64,
        },
        links: cfg.links,
        injections,
        horizon_us: cfg.horizon_ms.map(|h| (h * 1000.0) as u64),
        event_budget: cfg.event_budget,
        seed: cfg.seed,
        watch,
        trace: false,
    };
    Ok(Prepared {
        topology,
        workload,
        sim,
        burst,
    })
}

pub fn run_scenario(cfg: &ScenarioConfig, trace: bool) -> Result<ScenarioRun, ScenarioError> {
    let mut p = prepare(cfg)?;
    p.sim.trace = trace;
    let output = sim::run(&p.topology, &p.workload, &p.sim)?;
    Ok(ScenarioRun {
        topology: p.topology,
        workload: p.workload,
        burst: p.burst,
        output,
    })
}

/// Runs independent scenarios on the rayon pool; results keep input order.
pub fn run_batch(cfgs: &[ScenarioConfig]) -> Vec<Result<ScenarioRun, ScenarioError>> {
    cfgs.par_iter().map(|c| run_scenario(c, false)).collect()
}

/// One line of a side-by-side comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub a: String,
    pub b: String,
}

fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Compares two runs of the same workload.
pub fn compare_runs(
    a: &MetricsReport,
    b: &MetricsReport,
    focus: Option<BrokerId>,
) -> Result<Vec<ComparisonRow>, ScenarioError> {
    if a.workload_fingerprint != b.workload_fingerprint {
        return Err(ScenarioError::WorkloadMismatch {
            a: a.workload_fingerprint.clone(),
            b: b.workload_fingerprint.clone(),
        });
    }
    let mut rows = Vec::new();
    let mut push = |metric: &str, x: String, y: String| {
        rows.push(ComparisonRow {
            metric: metric.to_string(),
            a: x,
            b: y,
        })
    };
    push("routing", a.routing.clone(), b.routing.clone());
    let skip = ["routing", "seed", "workload_fingerprint"];
    for ((k, x), (_, y)) in a.summary_rows().into_iter().zip(b.summary_rows()) {
        if !skip.contains(&k.as_str()) {
            push(&k, x, y);
        }
    }
    let max_queue = |r: &MetricsReport| r.links.values().map(|l| l.max_q_len).max().unwrap_or(0);
    push(
        "max_queue_any_link",
        max_queue(a).to_string(),
        max_queue(b).to_string(),
    );
    if let Some(f) = focus {
        push(
            "max_queue_focus_broker",
            a.max_queue_at(f).to_string(),
            b.max_queue_at(f).to_string(),
        );
    }
    let delays = |r: &MetricsReport| {
        let mut d: Vec<u64> = r.deliveries.iter().map(|d| d.delay_us).collect();
        d.sort_unstable();
        d
    };
    let (da, db) = (delays(a), delays(b));
    for (name, q) in [
        ("delay_p50_us", 0.5),
        ("delay_p95_us", 0.95),
        ("delay_max_us", 1.0),
    ] {
        push(
            name,
            percentile(&da, q).to_string(),
            percentile(&db, q).to_string(),
        );
    }
    let equal = a.delivered_set() == b.delivered_set();
    push("delivered_sets_equal", equal.to_string(), equal.to_string());
    Ok(rows)
}

pub fn write_comparison(rows: &[ComparisonRow], path: &Path) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}
