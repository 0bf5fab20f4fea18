//! Publish/subscribe routing over a structured cyclic overlay (a tree crossed
//! with a complete graph), a flooding baseline, and a deterministic
//! discrete-event simulator to compare them.

pub mod baseline;
pub mod broker;
pub mod civ;
pub mod filter;
pub mod graph;
pub mod lst;
pub mod metrics;
pub mod model;
pub mod node;
pub mod scenario;
pub mod scot;
pub mod sim;
pub mod workload;

pub use baseline::TidBroker;
pub use broker::{Broker, BrokerParams, Routing};
pub use civ::{Civ, CivContext};
pub use filter::{Filter, Payload, Value};
pub use graph::{cartesian_product, connectivity_bounds, ConnectivityBounds, Graph, GraphError};
pub use metrics::MetricsReport;
pub use model::{
    AdvId, Advertisement, ClientId, Message, MessageKind, NotifId, Notification, SubId,
    Subscription,
};
pub use scenario::{
    compare_runs, run_batch, run_scenario, ScenarioConfig, ScenarioError, ScenarioRun,
};
pub use scot::{build_scot, preset, BrokerId, ScotTopology, TopologyError};
pub use sim::{run, LinkConfig, RoutingMode, SimConfig, SimError, SimOutput};
pub use workload::{BurstConfig, Generator, GeneratorConfig, Workload};
