//! Undirected simple graphs, the Cartesian product of two graphs, and the
//! structural measures (degree, diameter, vertex/edge connectivity) used when
//! building and validating an overlay.
//!
//! Connectivity values of a single graph are found by exhaustive cut
//! enumeration. Factor graphs are small (a few dozen vertices at most), so the
//! search terminates quickly: it walks cut sizes upward and stops at the first
//! disconnecting set.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate vertex label `{0}`")]
    DuplicateVertex(String),
    #[error("edge endpoint `{0}` is not a vertex")]
    DanglingEndpoint(String),
    #[error("self-loop on vertex `{0}`")]
    SelfLoop(String),
    #[error("graph has no vertices")]
    Empty,
    #[error("graph is disconnected")]
    Disconnected,
    #[error("factor needs at least two vertices, found {0}")]
    TooSmall(usize),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// An undirected graph without self-loops or parallel edges.
///
/// Vertices are kept in a `BTreeSet`, so iteration order (and everything
/// derived from it) is deterministic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph<V: Ord> {
    adjacency: BTreeMap<V, BTreeSet<V>>,
    edge_count: usize,
}

impl<V: Ord + Clone + fmt::Display> Graph<V> {
    /// Builds a graph from an explicit vertex list and edge list.
    ///
    /// Edges are canonicalised, so `{u,v}` and `{v,u}` collapse to one edge.
    pub fn new(
        vertices: impl IntoIterator<Item = V>,
        edges: impl IntoIterator<Item = (V, V)>,
    ) -> Result<Self, GraphError> {
        let mut adjacency: BTreeMap<V, BTreeSet<V>> = BTreeMap::new();
        for v in vertices {
            if adjacency.contains_key(&v) {
                return Err(GraphError::DuplicateVertex(v.to_string()));
            }
            adjacency.insert(v, BTreeSet::new());
        }
        let mut graph = Graph {
            adjacency,
            edge_count: 0,
        };
        for (u, v) in edges {
            graph.insert_edge(u, v)?;
        }
        Ok(graph)
    }

    fn insert_edge(&mut self, u: V, v: V) -> Result<(), GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u.to_string()));
        }
        for end in [&u, &v] {
            if !self.adjacency.contains_key(end) {
                return Err(GraphError::DanglingEndpoint(end.to_string()));
            }
        }
        let fresh = self
            .adjacency
            .get_mut(&u)
            .expect("checked")
            .insert(v.clone());
        self.adjacency.get_mut(&v).expect("checked").insert(u);
        if fresh {
            self.edge_count += 1;
        }
        Ok(())
    }
}

impl<V: Ord + Clone> Graph<V> {
    /// Builds a graph from parts already known to be valid (unique vertices,
    /// endpoints present, no self-loops). Used when relabelling a graph.
    pub(crate) fn from_parts_unchecked(vertices: Vec<V>, edges: Vec<(V, V)>) -> Self {
        let mut adjacency: BTreeMap<V, BTreeSet<V>> =
            vertices.into_iter().map(|v| (v, BTreeSet::new())).collect();
        let mut edge_count = 0;
        for (u, v) in edges {
            debug_assert!(u != v);
            if adjacency.get_mut(&u).expect("endpoint").insert(v.clone()) {
                edge_count += 1;
            }
            adjacency.get_mut(&v).expect("endpoint").insert(u);
        }
        Graph {
            adjacency,
            edge_count,
        }
    }

    /// Number of vertices, |G|.
    pub fn order(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of edges, ‖G‖.
    pub fn size(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &V> + '_ {
        self.adjacency.keys()
    }

    pub fn contains(&self, v: &V) -> bool {
        self.adjacency.contains_key(v)
    }

    /// Each edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (&V, &V)> + '_ {
        self.adjacency
            .iter()
            .flat_map(|(u, ns)| ns.iter().filter(move |v| u < *v).map(move |v| (u, v)))
    }

    pub fn neighbours(&self, v: &V) -> Option<&BTreeSet<V>> {
        self.adjacency.get(v)
    }

    pub fn has_edge(&self, u: &V, v: &V) -> bool {
        self.adjacency.get(u).is_some_and(|ns| ns.contains(v))
    }

    pub fn degree(&self, v: &V) -> Option<usize> {
        self.adjacency.get(v).map(BTreeSet::len)
    }

    /// δ(G); zero for the empty graph.
    pub fn min_degree(&self) -> usize {
        self.adjacency
            .values()
            .map(BTreeSet::len)
            .min()
            .unwrap_or(0)
    }

    /// Δ(G); zero for the empty graph.
    pub fn max_degree(&self) -> usize {
        self.adjacency
            .values()
            .map(BTreeSet::len)
            .max()
            .unwrap_or(0)
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut seq: Vec<usize> = self.adjacency.values().map(BTreeSet::len).collect();
        seq.sort_unstable();
        seq
    }

    /// Hop distance from `source` to every reachable vertex.
    pub fn bfs_distances(&self, source: &V) -> BTreeMap<V, usize> {
        let mut dist = BTreeMap::new();
        if !self.contains(source) {
            return dist;
        }
        dist.insert(source.clone(), 0);
        let mut queue = VecDeque::from([source.clone()]);
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for w in &self.adjacency[&u] {
                if !dist.contains_key(w) {
                    dist.insert(w.clone(), d + 1);
                    queue.push_back(w.clone());
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        match self.adjacency.keys().next() {
            None => true,
            Some(first) => self.bfs_distances(first).len() == self.order(),
        }
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let mut seen: BTreeSet<&V> = BTreeSet::new();
        let mut count = 0;
        for v in self.adjacency.keys() {
            if seen.contains(v) {
                continue;
            }
            count += 1;
            let mut stack = vec![v];
            seen.insert(v);
            while let Some(u) = stack.pop() {
                for w in &self.adjacency[u] {
                    if seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// True when the graph has no cycle (it is a forest).
    pub fn is_acyclic(&self) -> bool {
        self.edge_count + self.components() == self.order()
    }

    pub fn is_tree(&self) -> bool {
        !self.is_empty() && self.is_connected() && self.is_acyclic()
    }

    pub fn is_complete(&self) -> bool {
        let n = self.order();
        self.edge_count == n * n.saturating_sub(1) / 2
    }

    /// Longest shortest path, in edges.
    pub fn diameter(&self) -> Result<usize, GraphError> {
        if self.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut best = 0;
        for v in self.adjacency.keys() {
            let dist = self.bfs_distances(v);
            if dist.len() != self.order() {
                return Err(GraphError::Disconnected);
            }
            best = best.max(dist.values().copied().max().unwrap_or(0));
        }
        Ok(best)
    }

    fn indexed(&self) -> IndexedGraph {
        let index: BTreeMap<&V, usize> = self
            .adjacency
            .keys()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let adj = self
            .adjacency
            .values()
            .map(|ns| ns.iter().map(|w| index[w]).collect())
            .collect();
        let edges = self.edges().map(|(u, v)| (index[u], index[v])).collect();
        IndexedGraph { adj, edges }
    }

    /// κ(G): the fewest vertices whose removal disconnects the graph.
    /// Complete graphs on `n` vertices get `n - 1`.
    pub fn vertex_connectivity(&self) -> usize {
        let n = self.order();
        if n <= 1 {
            return 0;
        }
        if self.is_complete() {
            return n - 1;
        }
        let g = self.indexed();
        if !g.connected_without(&[], &[]) {
            return 0;
        }
        for k in 1..=n - 2 {
            for cut in (0..n).combinations(k) {
                if !g.connected_without(&cut, &[]) {
                    return k;
                }
            }
        }
        n - 1
    }

    /// λ(G): the fewest edges whose removal disconnects the graph.
    pub fn edge_connectivity(&self) -> usize {
        if self.order() <= 1 {
            return 0;
        }
        let g = self.indexed();
        if !g.connected_without(&[], &[]) {
            return 0;
        }
        for k in 1..self.min_degree() {
            for cut in (0..g.edges.len()).combinations(k) {
                if !g.connected_without(&[], &cut) {
                    return k;
                }
            }
        }
        self.min_degree()
    }
}

struct IndexedGraph {
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl IndexedGraph {
    /// Whether the graph stays connected after deleting the listed vertices
    /// and edges (edges given by position in `self.edges`).
    fn connected_without(&self, removed_vertices: &[usize], removed_edges: &[usize]) -> bool {
        let n = self.adj.len();
        let mut gone = vec![false; n];
        for &v in removed_vertices {
            gone[v] = true;
        }
        let cut: BTreeSet<(usize, usize)> = removed_edges.iter().map(|&e| self.edges[e]).collect();
        let Some(start) = (0..n).find(|&v| !gone[v]) else {
            return true;
        };
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut reached = 1;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &w in &self.adj[u] {
                if gone[w] || seen[w] || cut.contains(&(u.min(w), u.max(w))) {
                    continue;
                }
                seen[w] = true;
                reached += 1;
                stack.push(w);
            }
        }
        reached == n - removed_vertices.len()
    }
}

/// G □ H. Vertices are `(g, h)` pairs; `(g,h) ~ (g',h')` iff
/// `g = g'` and `hh' ∈ E(H)`, or `gg' ∈ E(G)` and `h = h'`.
pub fn cartesian_product<A, B>(g: &Graph<A>, h: &Graph<B>) -> Result<Graph<(A, B)>, GraphError>
where
    A: Ord + Clone,
    B: Ord + Clone,
{
    if g.is_empty() || h.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut adjacency: BTreeMap<(A, B), BTreeSet<(A, B)>> = BTreeMap::new();
    for a in g.vertices() {
        for b in h.vertices() {
            let mut ns = BTreeSet::new();
            for b2 in &h.adjacency[b] {
                ns.insert((a.clone(), b2.clone()));
            }
            for a2 in &g.adjacency[a] {
                ns.insert((a2.clone(), b.clone()));
            }
            adjacency.insert((a.clone(), b.clone()), ns);
        }
    }
    let edge_count = g.size() * h.order() + g.order() * h.size();
    Ok(Graph {
        adjacency,
        edge_count,
    })
}

/// Closed-form connectivity of a Cartesian product, computed from the
/// factors' own connectivity and minimum degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectivityBounds {
    pub kappa: usize,
    pub lambda: usize,
}

pub fn connectivity_bounds<A, B>(
    g: &Graph<A>,
    h: &Graph<B>,
) -> Result<ConnectivityBounds, GraphError>
where
    A: Ord + Clone,
    B: Ord + Clone,
{
    for n in [g.order(), h.order()] {
        if n < 2 {
            return Err(GraphError::TooSmall(n));
        }
    }
    if !g.is_connected() || !h.is_connected() {
        return Err(GraphError::Disconnected);
    }
    let degree_sum = g.min_degree() + h.min_degree();
    let kappa = (g.vertex_connectivity() * h.order())
        .min(g.order() * h.vertex_connectivity())
        .min(degree_sum);
    let lambda = (g.edge_connectivity() * h.order())
        .min(g.order() * h.edge_connectivity())
        .min(degree_sum);
    Ok(ConnectivityBounds { kappa, lambda })
}

/// Parses the plain edge-list format: one `u v` pair per line. A line with
/// a single label declares an isolated vertex; `#` starts a comment.
pub fn parse_edge_list(text: &str) -> Result<Graph<String>, GraphError> {
    let mut vertices = BTreeSet::new();
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            [v] => {
                vertices.insert(v.to_string());
            }
            [u, v] => {
                vertices.insert(u.to_string());
                vertices.insert(v.to_string());
                edges.push((u.to_string(), v.to_string()));
            }
            _ => {
                return Err(GraphError::Parse {
                    line: lineno + 1,
                    reason: format!("expected `u v`, got `{line}`"),
                })
            }
        }
    }
    Graph::new(vertices, edges)
}

/// Renders a graph in the edge-list format accepted by [`parse_edge_list`].
pub fn to_edge_list<V: Ord + Clone + fmt::Display>(g: &Graph<V>) -> String {
    let mut out = String::new();
    for v in g.vertices() {
        if g.degree(v) == Some(0) {
            out.push_str(&format!("{v}\n"));
        }
    }
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

/// Convenience constructor for string-labelled graphs.
pub fn build_graph(
    labels: &[&str],
    edge_pairs: &[(&str, &str)],
) -> Result<Graph<String>, GraphError> {
    Graph::new(
        labels.iter().map(|s| s.to_string()),
        edge_pairs
            .iter()
            .map(|(u, v)| (u.to_string(), v.to_string())),
    )
}

/// Complete graph on integer labels `0..n`.
pub fn complete_graph(n: usize) -> Graph<String> {
    let labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let edges = (0..n)
        .tuple_combinations()
        .map(|(i, j)| (i.to_string(), j.to_string()));
    Graph::new(labels, edges).expect("complete graph is well formed")
}

/// Path graph over the given labels, in order.
pub fn path_graph(labels: &[&str]) -> Graph<String> {
    let edges: Vec<(&str, &str)> = labels.iter().copied().tuple_windows().collect();
    build_graph(labels, &edges).expect("path graph is well formed")
}
