//! The structured cyclic overlay: a tree factor crossed with a complete
//! factor. Copies of the tree are clusters, copies of the complete graph are
//! regions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    self, build_graph, cartesian_product, complete_graph, path_graph, Graph, GraphError,
};

/// A broker position in the overlay.
///
/// `af` indexes the sorted labels of the tree factor; `ci` is the cluster
/// index, which is the integer label of the complete factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BrokerId {
    pub af: u32,
    pub ci: u32,
}

impl BrokerId {
    pub const fn new(af: u32, ci: u32) -> Self {
        BrokerId { af, ci }
    }
}

impl fmt::Display for BrokerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.af, self.ci)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrokerClass {
    Edge,
    Inner,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighbourInfo {
    /// Same cluster, joined by aLinks.
    pub primary: BTreeSet<BrokerId>,
    /// Same region, joined by iLinks.
    pub secondary: BTreeSet<BrokerId>,
    pub class: BrokerClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    ALink,
    ILink,
}

/// A factor-pair property that the overlay construction requires.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// The tree factor has a cycle, is disconnected, or is empty.
    Acyclic,
    /// The second factor is not a complete graph.
    Connectivity,
    /// Second-factor labels are not the integers `0..n`.
    Index,
    /// The operands look swapped: the first factor carries the integer labels
    /// and the second does not.
    LabelOrder,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Violation::Acyclic => "acyclic property",
            Violation::Connectivity => "connectivity property",
            Violation::Index => "index property",
            Violation::LabelOrder => "label order property",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("invalid factors: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
    InvalidFactors(Vec<Violation>),
    #[error("unknown broker {0}")]
    UnknownBroker(String),
    #[error("unknown topology preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn integer_labels(g: &Graph<String>) -> Option<Vec<u32>> {
    let mut labels: Vec<u32> = g
        .vertices()
        .map(|l| l.parse().ok())
        .collect::<Option<_>>()?;
    labels.sort_unstable();
    labels
        .iter()
        .enumerate()
        .all(|(i, &l)| i as u32 == l)
        .then_some(labels)
}

/// Checks every property the overlay relies on and returns the ones that fail.
pub fn validate_factors(g_af: &Graph<String>, g_cf: &Graph<String>) -> Vec<Violation> {
    let mut out = Vec::new();
    if !g_af.is_tree() {
        out.push(Violation::Acyclic);
    }
    if g_cf.is_empty() || !g_cf.is_complete() {
        out.push(Violation::Connectivity);
    }
    let cf_indexed = integer_labels(g_cf).is_some();
    if !cf_indexed {
        out.push(Violation::Index);
    }
    if !cf_indexed && !g_af.is_empty() && integer_labels(g_af).is_some() {
        out.push(Violation::LabelOrder);
    }
    out
}

#[derive(Clone, Debug)]
pub struct ScotTopology {
    g_af: Graph<String>,
    g_cf: Graph<String>,
    af_labels: Vec<String>,
    af_index: BTreeMap<String, u32>,
    product: Graph<BrokerId>,
    neighbours: BTreeMap<BrokerId, NeighbourInfo>,
    diam_af: usize,
}

/// Builds the overlay from a tree factor and a complete, integer-labelled factor.
pub fn build_scot(g_af: Graph<String>, g_cf: Graph<String>) -> Result<ScotTopology, TopologyError> {
    let violations = validate_factors(&g_af, &g_cf);
    if !violations.is_empty() {
        return Err(TopologyError::InvalidFactors(violations));
    }
    let af_labels: Vec<String> = g_af.vertices().cloned().collect();
    let af_index: BTreeMap<String, u32> = af_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i as u32))
        .collect();
    let af_numeric: Graph<u32> = relabel(&g_af, |l| af_index[l]);
    let cf_numeric: Graph<u32> = relabel(&g_cf, |l| l.parse().expect("index property checked"));
    let pairs = cartesian_product(&af_numeric, &cf_numeric)?;
    let product = relabel(&pairs, |&(af, ci)| BrokerId { af, ci });

    let neighbours = product
        .vertices()
        .map(|&b| {
            let ns = product.neighbours(&b).expect("vertex of product");
            let primary: BTreeSet<BrokerId> = ns.iter().filter(|n| n.ci == b.ci).copied().collect();
            let secondary: BTreeSet<BrokerId> =
                ns.iter().filter(|n| n.af == b.af).copied().collect();
            let class = if primary.len() <= 1 {
                BrokerClass::Edge
            } else {
                BrokerClass::Inner
            };
            (
                b,
                NeighbourInfo {
                    primary,
                    secondary,
                    class,
                },
            )
        })
        .collect();
    let diam_af = g_af.diameter()?;
    Ok(ScotTopology {
        g_af,
        g_cf,
        af_labels,
        af_index,
        product,
        neighbours,
        diam_af,
    })
}

fn relabel<A: Ord + Clone, B: Ord + Clone>(g: &Graph<A>, f: impl Fn(&A) -> B) -> Graph<B> {
    let vertices: Vec<B> = g.vertices().map(&f).collect();
    let edges: Vec<(B, B)> = g.edges().map(|(u, v)| (f(u), f(v))).collect();
    Graph::from_parts_unchecked(vertices, edges)
}

impl ScotTopology {
    pub fn g_af(&self) -> &Graph<String> {
        &self.g_af
    }

    pub fn g_cf(&self) -> &Graph<String> {
        &self.g_cf
    }

    /// The overlay as a plain graph over broker ids.
    pub fn graph(&self) -> &Graph<BrokerId> {
        &self.product
    }

    pub fn broker_count(&self) -> usize {
        self.product.order()
    }

    pub fn cluster_count(&self) -> usize {
        self.g_cf.order()
    }

    pub fn region_count(&self) -> usize {
        self.g_af.order()
    }

    pub fn diam_af(&self) -> usize {
        self.diam_af
    }

    pub fn brokers(&self) -> impl Iterator<Item = BrokerId> + '_ {
        self.product.vertices().copied()
    }

    pub fn contains(&self, b: BrokerId) -> bool {
        self.neighbours.contains_key(&b)
    }

    /// Brokers of cluster `ci`, in af order.
    pub fn cluster(&self, ci: u32) -> Vec<BrokerId> {
        (0..self.region_count() as u32)
            .map(|af| BrokerId { af, ci })
            .collect()
    }

    /// Brokers of the region with af index `af`.
    pub fn region(&self, af: u32) -> Vec<BrokerId> {
        (0..self.cluster_count() as u32)
            .map(|ci| BrokerId { af, ci })
            .collect()
    }

    pub fn clusters(&self) -> BTreeMap<u32, Vec<BrokerId>> {
        (0..self.cluster_count() as u32)
            .map(|ci| (ci, self.cluster(ci)))
            .collect()
    }

    pub fn regions(&self) -> BTreeMap<u32, Vec<BrokerId>> {
        (0..self.region_count() as u32)
            .map(|af| (af, self.region(af)))
            .collect()
    }

    /// Intra-cluster links, each once with the smaller endpoint first.
    pub fn alinks(&self) -> Vec<(BrokerId, BrokerId)> {
        self.product
            .edges()
            .filter(|(u, v)| u.ci == v.ci)
            .map(|(u, v)| (*u, *v))
            .collect()
    }

    /// Intra-region links, each once with the smaller endpoint first.
    pub fn ilinks(&self) -> Vec<(BrokerId, BrokerId)> {
        self.product
            .edges()
            .filter(|(u, v)| u.af == v.af)
            .map(|(u, v)| (*u, *v))
            .collect()
    }

    pub fn link_kind(&self, a: BrokerId, b: BrokerId) -> Option<LinkKind> {
        if !self.product.has_edge(&a, &b) {
            None
        } else if a.ci == b.ci {
            Some(LinkKind::ALink)
        } else {
            Some(LinkKind::ILink)
        }
    }

    pub fn neighbours(&self, b: BrokerId) -> Result<&NeighbourInfo, TopologyError> {
        self.neighbours
            .get(&b)
            .ok_or_else(|| TopologyError::UnknownBroker(b.to_string()))
    }

    pub fn af_label(&self, af: u32) -> &str {
        &self.af_labels[af as usize]
    }

    pub fn af_index(&self, label: &str) -> Option<u32> {
        self.af_index.get(label).copied()
    }

    /// Looks up a broker by tree label and cluster index.
    pub fn broker(&self, af_label: &str, ci: u32) -> Option<BrokerId> {
        let af = self.af_index(af_label)?;
        let b = BrokerId { af, ci };
        self.contains(b).then_some(b)
    }

    /// Parses `(a,2)` or `a,2`.
    pub fn parse_broker(&self, text: &str) -> Result<BrokerId, TopologyError> {
        let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
        let unknown = || TopologyError::UnknownBroker(text.to_string());
        let (label, ci) = inner.split_once(',').ok_or_else(unknown)?;
        let ci: u32 = ci.trim().parse().map_err(|_| unknown())?;
        self.broker(label.trim(), ci).ok_or_else(unknown)
    }

    /// Human-readable name such as `(a,2)`.
    pub fn label(&self, b: BrokerId) -> String {
        format!("({},{})", self.af_label(b.af), b.ci)
    }

    /// Hop distance inside the tree factor between two regions.
    pub fn af_distance(&self, a: u32, b: u32) -> usize {
        let dist = self.g_af.bfs_distances(&self.af_labels[a as usize]);
        dist[&self.af_labels[b as usize]]
    }
}

/// The factors of a named preset topology.
pub fn preset_factors(name: &str) -> Result<(Graph<String>, Graph<String>), TopologyError> {
    let pair = match name {
        // Six brokers in three regions of two.
        "fig1" => (path_graph(&["1", "2", "3"]), complete_graph(2)),
        "fig3" => (
            build_graph(
                &["a", "b", "c", "d", "e", "f"],
                &[("a", "b"), ("b", "c"), ("b", "d"), ("d", "e"), ("e", "f")],
            )?,
            complete_graph(3),
        ),
        "fig7" => (path_graph(&["a", "b", "c"]), complete_graph(3)),
        "fig10" => (fig10_tree(), complete_graph(5)),
        other => return Err(TopologyError::UnknownPreset(other.to_string())),
    };
    Ok(pair)
}

pub const PRESETS: [&str; 4] = ["fig1", "fig3", "fig7", "fig10"];

pub fn preset(name: &str) -> Result<ScotTopology, TopologyError> {
    let (af, cf) = preset_factors(name)?;
    build_scot(af, cf)
}

fn fig10_tree() -> Graph<String> {
    let labels: Vec<String> = ('A'..='N').map(String::from).collect();
    let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
    build_graph(
        &labels,
        &[
            ("A", "F"),
            ("B", "G"),
            ("C", "H"),
            ("D", "I"),
            ("E", "F"),
            ("F", "G"),
            ("G", "H"),
            ("H", "I"),
            ("I", "J"),
            ("K", "F"),
            ("L", "G"),
            ("M", "H"),
            ("N", "I"),
        ],
    )
    .expect("static tree")
}

/// Loads factor graphs from edge-list text.
pub fn scot_from_text(af: &str, cf: &str) -> Result<ScotTopology, TopologyError> {
    build_scot(graph::parse_edge_list(af)?, graph::parse_edge_list(cf)?)
}
