#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeSet;
use std::path::PathBuf;

use scot_core::model::{ClientId, NotifId, SubId};
use scot_core::scenario::{run_scenario, ScenarioConfig, ScenarioRun};
use scot_core::sim::{run, RoutingMode, SimConfig};
use scot_core::workload::{Action, Generator, GeneratorConfig, Workload};
use scot_core::{MetricsReport, ScotTopology};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

pub fn load_config(name: &str, routing: RoutingMode) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::load(&config_path(name)).expect("bundled config loads");
    cfg.routing = routing;
    cfg
}

pub fn run_config(name: &str, routing: RoutingMode) -> ScenarioRun {
    run_scenario(&load_config(name, routing), false).expect("bundled config runs")
}

pub fn generated(topology: &ScotTopology, seed: u64, cfg: &GeneratorConfig) -> Workload {
    Generator::new(topology, seed).generate(cfg)
}

pub fn simulate(
    topology: &ScotTopology,
    workload: &Workload,
    routing: RoutingMode,
    seed: u64,
) -> MetricsReport {
    let cfg = SimConfig {
        routing,
        seed,
        ..SimConfig::default()
    };
    run(topology, workload, &cfg)
        .expect("simulation completes")
        .report
}

/// Interested subscribers computed directly from the workload script: a
/// notification reaches every subscription that matches it, was issued
/// before it, and was not withdrawn before it.
pub fn expected_deliveries(w: &Workload) -> BTreeSet<(NotifId, ClientId)> {
    let mut active: Vec<(SubId, &scot_core::Subscription)> = Vec::new();
    let mut out = BTreeSet::new();
    for a in &w.actions {
        match &a.action {
            Action::Subscribe(s) => active.push((s.id, s)),
            Action::Unsubscribe(id) => active.retain(|(sid, _)| sid != id),
            Action::Publish(n) => {
                for (_, s) in &active {
                    if s.filter.matches(&n.payload) {
                        out.insert((n.id, s.id.client));
                    }
                }
            }
            Action::Advertise(_) => {}
        }
    }
    out
}

/// Builds a scripted scenario in code.
pub struct Script {
    pub cfg: ScenarioConfig,
}

impl Script {
    pub fn new(preset: &str, routing: RoutingMode) -> Self {
        let mut cfg =
            ScenarioConfig::from_toml(&format!("[topology]\npreset = \"{preset}\"\n")).unwrap();
        cfg.routing = routing;
        Script { cfg }
    }

    pub fn client(mut self, id: u32, host: &str) -> Self {
        self.cfg.clients.push(scot_core::scenario::ClientEntry {
            id,
            host: host.to_string(),
        });
        self
    }

    fn action(
        mut self,
        at_us: u64,
        client: u32,
        f: impl FnOnce(&mut scot_core::scenario::ActionEntry),
    ) -> Self {
        let mut a = scot_core::scenario::ActionEntry {
            at_us,
            client,
            ..Default::default()
        };
        f(&mut a);
        self.cfg.actions.push(a);
        self
    }

    pub fn advertise(self, at_us: u64, client: u32, filter: &str) -> Self {
        self.action(at_us, client, |a| a.advertise = Some(filter.into()))
    }

    pub fn subscribe(self, at_us: u64, client: u32, filter: &str) -> Self {
        self.action(at_us, client, |a| a.subscribe = Some(filter.into()))
    }

    pub fn unsubscribe(self, at_us: u64, client: u32) -> Self {
        self.action(at_us, client, |a| a.unsubscribe = true)
    }

    pub fn publish(self, at_us: u64, client: u32, payload: &str) -> Self {
        self.action(at_us, client, |a| a.publish = Some(payload.into()))
    }

    pub fn run(&self) -> ScenarioRun {
        run_scenario(&self.cfg, true).expect("script runs")
    }
}

/// Link sends of one message kind, as `(from, to, civ)` labels.
pub fn sends(
    run: &ScenarioRun,
    kind: scot_core::MessageKind,
) -> Vec<(String, String, Option<String>)> {
    run.output
        .trace
        .iter()
        .filter_map(|r| match r {
            scot_core::sim::TraceRecord::Send {
                from,
                to,
                kind: k,
                civ,
                ..
            } if *k == kind => Some((
                run.topology.label(*from),
                run.topology.label(*to),
                civ.clone(),
            )),
            _ => None,
        })
        .collect()
}

/// The latest interest vector recorded for `adv` at `broker`.
pub fn civ_at(run: &ScenarioRun, broker: &str, adv: scot_core::AdvId) -> Option<String> {
    let b = run.topology.parse_broker(broker).unwrap();
    run.output.trace.iter().rev().find_map(|r| match r {
        scot_core::sim::TraceRecord::Broker {
            broker,
            event: scot_core::node::BrokerEvent::CivChanged { adv: a, civ },
            ..
        } if *broker == b && *a == adv => Some(civ.clone()),
        _ => None,
    })
}
