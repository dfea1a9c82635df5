//! Anonymous connected undirected graphs with local port numbering.
//!
//! Every node `v` labels its incident edges with ports `1..=d(v)`. Ports are
//! 1-based everywhere outside the exploration arithmetic. Node indices exist
//! only for simulation bookkeeping; agents never see them.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Internal node index. Never exposed to the protocol layer.
pub type NodeIdx = usize;

/// A 1-based local port number.
pub type Port = usize;

/// Probability of adding each non-tree edge in the random-connected family.
pub const EXTRA_EDGE_PROBABILITY: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(NodeIdx, NodeIdx, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(NodeIdx),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(NodeIdx, NodeIdx),
    #[error("graph is disconnected: node {unreached} is unreachable from node 0")]
    DisconnectedGraph { unreached: NodeIdx },
    #[error("port assignment at node {node} is not a bijection onto 1..={degree}")]
    DuplicatePort { node: NodeIdx, degree: usize },
    #[error("port {port} out of range at node {node} (degree {degree})")]
    PortOutOfRange {
        node: NodeIdx,
        port: Port,
        degree: usize,
    },
    #[error("invalid family parameters: {0}")]
    InvalidFamilyParameters(String),
    #[error("graph file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Anonymous port-numbered graph.
///
/// `adjacency[v][p - 1] = (u, q)` means port `p` at `v` leads to `u`, where
/// the same edge carries port `q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortGraph {
    adjacency: Vec<Vec<(NodeIdx, Port)>>,
}

impl PortGraph {
    /// Builds a graph from an edge list and a per-node port ordering.
    ///
    /// `port_order[v]` lists the neighbours of `v`; the i-th entry gets port
    /// `i + 1`. It must be a permutation of the neighbours given by `edges`.
    pub fn build(
        node_count: usize,
        edges: &[(NodeIdx, NodeIdx)],
        port_order: &[Vec<NodeIdx>],
    ) -> Result<Self, GraphError> {
        let neighbours = validated_neighbours(node_count, edges)?;
        if port_order.len() != node_count {
            return Err(GraphError::Parse {
                line: 0,
                msg: format!(
                    "port assignment covers {} nodes, expected {node_count}",
                    port_order.len()
                ),
            });
        }
        for (v, order) in port_order.iter().enumerate() {
            let given: BTreeSet<NodeIdx> = order.iter().copied().collect();
            if given.len() != order.len() || given != neighbours[v] {
                return Err(GraphError::DuplicatePort {
                    node: v,
                    degree: neighbours[v].len(),
                });
            }
        }

        let mut adjacency: Vec<Vec<(NodeIdx, Port)>> = port_order
            .iter()
            .map(|order| order.iter().map(|&u| (u, 0)).collect())
            .collect();
        for (v, ports) in adjacency.iter_mut().enumerate() {
            for (u, back) in ports.iter_mut() {
                let q = port_order[*u]
                    .iter()
                    .position(|&w| w == v)
                    .expect("neighbour sets are symmetric");
                *back = q + 1;
            }
        }
        let graph = PortGraph { adjacency };
        graph.check_connected()?;
        Ok(graph)
    }

    /// Builds a graph whose ports follow ascending neighbour index order.
    pub fn with_canonical_ports(
        node_count: usize,
        edges: &[(NodeIdx, NodeIdx)],
    ) -> Result<Self, GraphError> {
        let neighbours = validated_neighbours(node_count, edges)?;
        let order: Vec<Vec<NodeIdx>> = neighbours
            .into_iter()
            .map(|set| set.into_iter().collect())
            .collect();
        Self::build(node_count, edges, &order)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, v: NodeIdx) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Follows port `p` out of `v`, returning the far node and its entry port.
    pub fn neighbor(&self, v: NodeIdx, p: Port) -> Result<(NodeIdx, Port), GraphError> {
        let degree = self.degree(v);
        if p == 0 || p > degree {
            return Err(GraphError::PortOutOfRange {
                node: v,
                port: p,
                degree,
            });
        }
        Ok(self.adjacency[v][p - 1])
    }

    /// Undirected edge list with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(NodeIdx, NodeIdx)> {
        let mut out: Vec<_> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(v, ports)| ports.iter().map(move |&(u, _)| (v, u)))
            .filter(|(v, u)| v < u)
            .collect();
        out.sort_unstable();
        out
    }

    /// Neighbour order per node (port `i + 1` leads to entry `i`).
    pub fn port_order(&self) -> Vec<Vec<NodeIdx>> {
        self.adjacency
            .iter()
            .map(|ports| ports.iter().map(|&(u, _)| u).collect())
            .collect()
    }

    /// Nodes reachable from `start` by breadth-first search.
    pub fn reachable_from(&self, start: NodeIdx) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        match self.reachable_from(0).iter().position(|&r| !r) {
            Some(unreached) => Err(GraphError::DisconnectedGraph { unreached }),
            None => Ok(()),
        }
    }

    /// Parses the plain-text graph format.
    ///
    /// ```text
    /// # comment
    /// 4
    /// 0 1
    /// 1 2
    /// 2 3
    /// ports
    /// 1: 2 0
    /// ```
    ///
    /// The first non-comment line is the node count, followed by one `u v`
    /// edge per line. An optional `ports` section lists, per node, the
    /// neighbours in port order; nodes not listed keep ascending order.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (line_no, first) = lines.next().ok_or(GraphError::Empty)?;
        let node_count: usize = first.parse().map_err(|_| GraphError::Parse {
            line: line_no,
            msg: format!("expected node count, found {first:?}"),
        })?;

        let mut edges = Vec::new();
        let mut overrides: Vec<(usize, NodeIdx, Vec<NodeIdx>)> = Vec::new();
        let mut in_ports = false;
        for (line_no, line) in lines {
            if line.eq_ignore_ascii_case("ports") {
                in_ports = true;
                continue;
            }
            let bad = |msg: String| GraphError::Parse { line: line_no, msg };
            if in_ports {
                let (node, rest) = line
                    .split_once(':')
                    .ok_or_else(|| bad("expected `node: neighbours...`".into()))?;
                let node: NodeIdx = node
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad node {node:?}")))?;
                let order = rest
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| bad(format!("bad neighbour {t:?}"))))
                    .collect::<Result<Vec<NodeIdx>, _>>()?;
                overrides.push((line_no, node, order));
            } else {
                let mut it = line.split_whitespace();
                let (Some(u), Some(v), None) = (it.next(), it.next(), it.next()) else {
                    return Err(bad(format!("expected `u v`, found {line:?}")));
                };
                let u = u.parse().map_err(|_| bad(format!("bad node {u:?}")))?;
                let v = v.parse().map_err(|_| bad(format!("bad node {v:?}")))?;
                edges.push((u, v));
            }
        }

        let neighbours = validated_neighbours(node_count, &edges)?;
        let mut order: Vec<Vec<NodeIdx>> = neighbours
            .into_iter()
            .map(|set| set.into_iter().collect())
            .collect();
        for (line_no, node, given) in overrides {
            if node >= node_count {
                return Err(GraphError::Parse {
                    line: line_no,
                    msg: format!("ports for node {node} outside 0..{node_count}"),
                });
            }
            order[node] = given;
        }
        Self::build(node_count, &edges, &order)
    }

    /// Serialises into the text format accepted by [`PortGraph::parse`],
    /// always including the ports section.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.node_count());
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out.push_str("ports\n");
        for (v, order) in self.port_order().iter().enumerate() {
            let list: Vec<String> = order.iter().map(ToString::to_string).collect();
            out.push_str(&format!("{v}: {}\n", list.join(" ")));
        }
        out
    }
}

fn validated_neighbours(
    node_count: usize,
    edges: &[(NodeIdx, NodeIdx)],
) -> Result<Vec<BTreeSet<NodeIdx>>, GraphError> {
    if node_count == 0 {
        return Err(GraphError::Empty);
    }
    let mut neighbours = vec![BTreeSet::new(); node_count];
    for &(u, v) in edges {
        if u >= node_count || v >= node_count {
            return Err(GraphError::NodeOutOfRange(u, v, node_count));
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        if !neighbours[u].insert(v) {
            return Err(GraphError::DuplicateEdge(u.min(v), u.max(v)));
        }
        neighbours[v].insert(u);
    }
    Ok(neighbours)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Ring,
    Complete,
    Path,
    RandomTree,
    RandomConnected,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] = [
        FamilyKind::Ring,
        FamilyKind::Complete,
        FamilyKind::Path,
        FamilyKind::RandomTree,
        FamilyKind::RandomConnected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Ring => "ring",
            FamilyKind::Complete => "complete",
            FamilyKind::Path => "path",
            FamilyKind::RandomTree => "random-tree",
            FamilyKind::RandomConnected => "random-connected",
        }
    }

    pub fn min_nodes(self) -> usize {
        match self {
            FamilyKind::Ring => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GraphError::InvalidFamilyParameters(format!("unknown family {s:?}")))
    }
}

/// A generator recipe: family, node count and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GraphFamily {
    pub kind: FamilyKind,
    pub nodes: usize,
    pub seed: u64,
}

impl GraphFamily {
    pub fn new(kind: FamilyKind, nodes: usize, seed: u64) -> Self {
        GraphFamily { kind, nodes, seed }
    }

    /// Generates the instance. Deterministic in `(kind, nodes, seed)`; the
    /// port labelling is a seeded shuffle for every family.
    pub fn generate(&self) -> Result<PortGraph, GraphError> {
        let n = self.nodes;
        if n < self.kind.min_nodes() {
            return Err(GraphError::InvalidFamilyParameters(format!(
                "{} needs at least {} nodes, got {n}",
                self.kind,
                self.kind.min_nodes()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let edges: Vec<(NodeIdx, NodeIdx)> = match self.kind {
            FamilyKind::Ring => (0..n).map(|v| (v, (v + 1) % n)).collect(),
            FamilyKind::Complete => (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .collect(),
            FamilyKind::Path => (1..n).map(|v| (v - 1, v)).collect(),
            FamilyKind::RandomTree => random_spanning_tree(n, &mut rng),
            FamilyKind::RandomConnected => {
                let mut edges = random_spanning_tree(n, &mut rng);
                let tree: BTreeSet<(NodeIdx, NodeIdx)> =
                    edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
                for u in 0..n {
                    for v in u + 1..n {
                        if !tree.contains(&(u, v)) && rng.gen_bool(EXTRA_EDGE_PROBABILITY) {
                            edges.push((u, v));
                        }
                    }
                }
                edges
            }
        };
        let mut order: Vec<Vec<NodeIdx>> = vec![Vec::new(); n];
        for &(u, v) in &edges {
            order[u].push(v);
            order[v].push(u);
        }
        for ports in &mut order {
            ports.sort_unstable();
            ports.shuffle(&mut rng);
        }
        PortGraph::build(n, &edges, &order)
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-n{}-s{}", self.kind, self.nodes, self.seed)
    }
}

/// Uniform attachment over a random node ordering.
fn random_spanning_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<(NodeIdx, NodeIdx)> {
    let mut perm: Vec<NodeIdx> = (0..n).collect();
    perm.shuffle(rng);
    (1..n)
        .map(|i| {
            let parent = perm[rng.gen_range(0..i)];
            (parent, perm[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring3() -> PortGraph {
        PortGraph::with_canonical_ports(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn smallest_connected_graph() {
        let g = PortGraph::build(2, &[(0, 1)], &[vec![1], vec![0]]).unwrap();
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(1), 1);
        assert_eq!(g.neighbor(0, 1), Ok((1, 1)));
    }

    #[test]
    fn ring_has_two_ports_everywhere() {
        let g = ring3();
        for v in 0..3 {
            assert_eq!(g.degree(v), 2);
        }
        let (u, q) = g.neighbor(0, 1).unwrap();
        assert_eq!(g.neighbor(u, q), Ok((0, 1)));
        assert_eq!(
            g.neighbor(0, 3),
            Err(GraphError::PortOutOfRange {
                node: 0,
                port: 3,
                degree: 2
            })
        );
        assert!(g.neighbor(0, 0).is_err());
    }

    #[test]
    fn build_rejects_malformed_input() {
        assert_eq!(
            PortGraph::with_canonical_ports(4, &[(0, 1), (2, 3)]),
            Err(GraphError::DisconnectedGraph { unreached: 2 })
        );
        assert_eq!(
            PortGraph::with_canonical_ports(2, &[(0, 0)]),
            Err(GraphError::SelfLoop(0))
        );
        assert_eq!(
            PortGraph::with_canonical_ports(2, &[(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            PortGraph::build(2, &[(0, 1)], &[vec![1, 1], vec![0]]),
            Err(GraphError::DuplicatePort { node: 0, degree: 1 })
        );
        assert_eq!(
            PortGraph::with_canonical_ports(0, &[]),
            Err(GraphError::Empty)
        );
        assert!(matches!(
            PortGraph::with_canonical_ports(2, &[(0, 5)]),
            Err(GraphError::NodeOutOfRange(0, 5, 2))
        ));
    }

    #[test]
    fn single_node_graph_is_valid() {
        let g = PortGraph::with_canonical_ports(1, &[]).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.degree(0), 0);
    }

    #[test]
    fn generated_families() {
        let ring = GraphFamily::new(FamilyKind::Ring, 5, 0).generate().unwrap();
        assert_eq!(ring.edge_count(), 5);
        assert!((0..5).all(|v| ring.degree(v) == 2));

        let k4 = GraphFamily::new(FamilyKind::Complete, 4, 1)
            .generate()
            .unwrap();
        assert!((0..4).all(|v| k4.degree(v) == 3));

        let rc = GraphFamily::new(FamilyKind::RandomConnected, 8, 7)
            .generate()
            .unwrap();
        assert!(bfs_oracle_connected(&rc));

        let tree = GraphFamily::new(FamilyKind::RandomTree, 9, 3)
            .generate()
            .unwrap();
        assert_eq!(tree.edge_count(), 8);

        assert!(matches!(
            GraphFamily::new(FamilyKind::Ring, 2, 0).generate(),
            Err(GraphError::InvalidFamilyParameters(_))
        ));
    }

    // Independent reachability check over the edge list only.
    fn bfs_oracle_connected(g: &PortGraph) -> bool {
        let n = g.node_count();
        let edges = g.edges();
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for &(u, v) in &edges {
                if seen[u] != seen[v] {
                    seen[u] = true;
                    seen[v] = true;
                    changed = true;
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    #[test]
    fn text_format_roundtrip_and_port_section() {
        let g = GraphFamily::new(FamilyKind::RandomConnected, 6, 11)
            .generate()
            .unwrap();
        assert_eq!(PortGraph::parse(&g.to_text()).unwrap(), g);

        let text = "# path\n3\n0 1\n1 2\nports\n1: 2 0\n";
        let p = PortGraph::parse(text).unwrap();
        assert_eq!(p.neighbor(1, 1).unwrap().0, 2);
        assert_eq!(p.neighbor(1, 2).unwrap().0, 0);

        assert!(matches!(
            PortGraph::parse("3\n0 1\n1\n"),
            Err(GraphError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            PortGraph::parse("4\n0 1\n2 3\n"),
            Err(GraphError::DisconnectedGraph { .. })
        ));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn family() -> impl Strategy<Value = GraphFamily> {
            (0usize..5, 3usize..=12, any::<u64>())
                .prop_map(|(k, n, seed)| GraphFamily::new(FamilyKind::ALL[k], n, seed))
        }

        proptest! {
            #[test]
            fn port_involution(fam in family()) {
                let g = fam.generate().unwrap();
                for v in 0..g.node_count() {
                    for p in 1..=g.degree(v) {
                        let (u, q) = g.neighbor(v, p).unwrap();
                        prop_assert_eq!(g.neighbor(u, q).unwrap(), (v, p));
                    }
                }
            }

            #[test]
            fn generated_graphs_are_connected_and_reproducible(fam in family()) {
                let g = fam.generate().unwrap();
                prop_assert!(g.reachable_from(0).into_iter().all(|r| r));
                prop_assert_eq!(fam.generate().unwrap(), g);
            }
        }
    }
}
