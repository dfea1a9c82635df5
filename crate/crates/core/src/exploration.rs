//! EXPLO(N): a fixed offset sequence that drives a port walk visiting every
//! node of every registered benchmark graph with at most `N` nodes, from any
//! start node.
//!
//! Sequences are drawn from a seeded generator and then certified by brute
//! force against the benchmark set. The certified length is `X_N`, the move
//! count used by every phase clock.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::portgraph::{FamilyKind, GraphFamily, NodeIdx, Port, PortGraph};

/// Seeds used for every family/size pair in the benchmark set.
pub const BENCHMARK_SEEDS: [u64; 3] = [0, 1, 2];

const MAX_BUILD_ATTEMPTS: u32 = 8;

#[derive(Debug, Error)]
pub enum ExploError {
    #[error("step index {index} out of range for sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("entry port {port:?} invalid for degree {degree}")]
    BadPort { port: Option<Port>, degree: usize },
    #[error("graph {graph} has {nodes} nodes, more than N = {bound}")]
    GraphTooLarge {
        graph: usize,
        nodes: usize,
        bound: usize,
    },
    #[error(
        "certification failed after {attempts} attempts: graph {graph} from start {start} leaves node {uncovered} unvisited"
    )]
    CertificationFailedAfterRetries {
        attempts: u32,
        graph: usize,
        start: NodeIdx,
        uncovered: NodeIdx,
    },
    #[error("sequence cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A certified exploration sequence. Its length is `X_N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationSequence {
    offsets: Vec<u32>,
    certified_bound: usize,
    seed: u64,
}

/// Outcome of brute-force coverage checking on one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertResult {
    Pass,
    Fail { start: NodeIdx, uncovered: NodeIdx },
    ExceedsBound { nodes: usize },
}

impl CertResult {
    pub fn passed(self) -> bool {
        self == CertResult::Pass
    }
}

impl ExplorationSequence {
    pub fn from_offsets(offsets: Vec<u32>, certified_bound: usize, seed: u64) -> Self {
        ExplorationSequence {
            offsets,
            certified_bound,
            seed,
        }
    }

    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    pub fn certified_bound(&self) -> usize {
        self.certified_bound
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `X_N`: number of moves of one EXPLO run.
    pub fn x_n(&self) -> usize {
        self.offsets.len()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Exit port of step `index`: `((e - 1 + offset) mod d) + 1`, with `e = 1`
    /// when `entry` is `None` (START).
    pub fn explo_step(
        &self,
        index: usize,
        entry: Option<Port>,
        degree: usize,
    ) -> Result<Port, ExploError> {
        let offset = *self.offsets.get(index).ok_or(ExploError::IndexOutOfRange {
            index,
            len: self.offsets.len(),
        })?;
        let e = match entry {
            None => 1,
            Some(p) if (1..=degree).contains(&p) => p,
            Some(_) => {
                return Err(ExploError::BadPort {
                    port: entry,
                    degree,
                })
            }
        };
        if degree == 0 {
            return Err(ExploError::BadPort {
                port: entry,
                degree,
            });
        }
        Ok((e - 1 + offset as usize) % degree + 1)
    }

    /// Node trajectory of the walk from `start`, including the start node.
    pub fn walk(&self, graph: &PortGraph, start: NodeIdx) -> Vec<NodeIdx> {
        let mut path = Vec::with_capacity(self.len() + 1);
        path.push(start);
        let mut at = start;
        let mut entry = None;
        for i in 0..self.len() {
            let exit = self
                .explo_step(i, entry, graph.degree(at))
                .expect("entry port always comes from the graph");
            let (next, back) = graph.neighbor(at, exit).expect("exit port in range");
            at = next;
            entry = Some(back);
            path.push(at);
        }
        path
    }

    /// Checks that the walk covers `graph` from every start node.
    pub fn certify(&self, graph: &PortGraph) -> CertResult {
        if graph.node_count() > self.certified_bound {
            return CertResult::ExceedsBound {
                nodes: graph.node_count(),
            };
        }
        for start in 0..graph.node_count() {
            if let Some(uncovered) = first_uncovered(&self.offsets, graph, start, self.len()) {
                return CertResult::Fail { start, uncovered };
            }
        }
        CertResult::Pass
    }

    /// Draws offsets from `seed` (initial length `20 * N^3`), certifies them
    /// against `graphs`, and truncates to the shortest prefix that still
    /// covers every graph from every start. On failure the length doubles and
    /// the offsets are redrawn.
    pub fn build(
        bound: usize,
        seed: u64,
        graphs: &[PortGraph],
    ) -> Result<ExplorationSequence, ExploError> {
        for (i, g) in graphs.iter().enumerate() {
            if g.node_count() > bound {
                return Err(ExploError::GraphTooLarge {
                    graph: i,
                    nodes: g.node_count(),
                    bound,
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut len = 20 * bound.pow(3);
        let mut failure = None;
        for _ in 0..MAX_BUILD_ATTEMPTS {
            let offsets: Vec<u32> = (0..len).map(|_| rng.gen()).collect();
            match longest_cover_time(&offsets, graphs) {
                Ok(needed) => {
                    let mut offsets = offsets;
                    offsets.truncate(needed);
                    return Ok(ExplorationSequence::from_offsets(offsets, bound, seed));
                }
                Err(fail) => failure = Some(fail),
            }
            len *= 2;
        }
        let (graph, start, uncovered) = failure.expect("at least one attempt ran");
        Err(ExploError::CertificationFailedAfterRetries {
            attempts: MAX_BUILD_ATTEMPTS,
            graph,
            start,
            uncovered,
        })
    }

    /// Plain-text cache form: a header line, then the offsets.
    pub fn to_cache_string(&self) -> String {
        let mut out = String::from("# byzgather exploration sequence\n");
        let _ = writeln!(
            out,
            "N {} seed {} length {}",
            self.certified_bound,
            self.seed,
            self.len()
        );
        for chunk in self.offsets.chunks(16) {
            let line: Vec<String> = chunk.iter().map(ToString::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_cache_str(text: &str) -> Result<ExplorationSequence, ExploError> {
        let bad = |msg: &str| ExploError::Cache(msg.to_string());
        let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [n_key, n, seed_key, seed, len_key, len] = fields[..] else {
            return Err(bad("header must be `N <n> seed <s> length <len>`"));
        };
        if (n_key, seed_key, len_key) != ("N", "seed", "length") {
            return Err(bad("header must be `N <n> seed <s> length <len>`"));
        }
        let bound: usize = n.parse().map_err(|_| bad("bad N"))?;
        let seed: u64 = seed.parse().map_err(|_| bad("bad seed"))?;
        let len: usize = len.parse().map_err(|_| bad("bad length"))?;
        let offsets = lines
            .flat_map(str::split_whitespace)
            .map(|t| t.parse::<u32>().map_err(|_| bad("bad offset")))
            .collect::<Result<Vec<_>, _>>()?;
        if offsets.len() != len {
            return Err(bad("offset count does not match header length"));
        }
        Ok(ExplorationSequence::from_offsets(offsets, bound, seed))
    }

    pub fn save(&self, path: &Path) -> Result<(), ExploError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_cache_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ExplorationSequence, ExploError> {
        Self::from_cache_str(&fs::read_to_string(path)?)
    }
}

/// Cache file path for `(N, seed)` inside `dir`.
pub fn cache_path(dir: &Path, bound: usize, seed: u64) -> PathBuf {
    dir.join(format!("explo-N{bound}-seed{seed}.txt"))
}

/// Loads a cached sequence if it still certifies `graphs`; otherwise builds
/// one and writes it back.
pub fn load_or_build(
    dir: &Path,
    bound: usize,
    seed: u64,
    graphs: &[PortGraph],
) -> Result<ExplorationSequence, ExploError> {
    let path = cache_path(dir, bound, seed);
    if let Ok(seq) = ExplorationSequence::load(&path) {
        if seq.certified_bound() == bound
            && seq.seed() == seed
            && graphs.iter().all(|g| seq.certify(g).passed())
        {
            return Ok(seq);
        }
    }
    let seq = ExplorationSequence::build(bound, seed, graphs)?;
    seq.save(&path)?;
    Ok(seq)
}

/// Every family at every admissible size `<= bound`, for each benchmark seed.
pub fn benchmark_families(bound: usize) -> Vec<GraphFamily> {
    let mut out = Vec::new();
    for kind in FamilyKind::ALL {
        for nodes in kind.min_nodes()..=bound {
            for seed in BENCHMARK_SEEDS {
                out.push(GraphFamily::new(kind, nodes, seed));
            }
        }
    }
    out
}

pub fn benchmark_graphs(bound: usize) -> Vec<PortGraph> {
    benchmark_families(bound)
        .iter()
        .map(|f| f.generate().expect("benchmark families are valid"))
        .collect()
}

/// Builds the sequence for `bound` certified against the benchmark set plus
/// any extra graphs.
pub fn certified_for(
    bound: usize,
    seed: u64,
    extra: &[PortGraph],
) -> Result<ExplorationSequence, ExploError> {
    let mut graphs = benchmark_graphs(bound);
    graphs.extend(extra.iter().cloned());
    ExplorationSequence::build(bound, seed, &graphs)
}

/// Moves needed before the walk from `start` has seen every node, or the
/// first node left uncovered after `limit` moves.
fn cover_time(offsets: &[u32], graph: &PortGraph, start: NodeIdx) -> Result<usize, NodeIdx> {
    let n = graph.node_count();
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut remaining = n - 1;
    let mut at = start;
    let mut entry: Port = 1;
    for (i, &offset) in offsets.iter().enumerate() {
        if remaining == 0 {
            return Ok(i);
        }
        let d = graph.degree(at);
        let exit = (entry - 1 + offset as usize) % d + 1;
        let (next, back) = graph.neighbor(at, exit).expect("exit in range");
        at = next;
        entry = back;
        if !seen[at] {
            seen[at] = true;
            remaining -= 1;
        }
    }
    if remaining == 0 {
        Ok(offsets.len())
    } else {
        Err(seen.iter().position(|&s| !s).expect("some node uncovered"))
    }
}

fn first_uncovered(
    offsets: &[u32],
    graph: &PortGraph,
    start: NodeIdx,
    limit: usize,
) -> Option<NodeIdx> {
    cover_time(&offsets[..limit], graph, start).err()
}

fn longest_cover_time(
    offsets: &[u32],
    graphs: &[PortGraph],
) -> Result<usize, (usize, NodeIdx, NodeIdx)> {
    let mut longest = 0;
    for (gi, g) in graphs.iter().enumerate() {
        for start in 0..g.node_count() {
            let t = cover_time(offsets, g, start).map_err(|u| (gi, start, u))?;
            longest = longest.max(t);
        }
    }
    Ok(longest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(offsets: &[u32], bound: usize) -> ExplorationSequence {
        ExplorationSequence::from_offsets(offsets.to_vec(), bound, 0)
    }

    #[test]
    fn explo_step_rule() {
        assert_eq!(seq(&[0], 3).explo_step(0, Some(2), 3).unwrap(), 2);
        assert_eq!(seq(&[1], 3).explo_step(0, Some(3), 3).unwrap(), 1);
        // ((1 - 1 + 2) mod 5) + 1
        assert_eq!(seq(&[2], 5).explo_step(0, None, 5).unwrap(), 3);
        assert!(matches!(
            seq(&[2], 5).explo_step(1, None, 5),
            Err(ExploError::IndexOutOfRange { index: 1, len: 1 })
        ));
        assert!(matches!(
            seq(&[2], 5).explo_step(0, Some(6), 5),
            Err(ExploError::BadPort { .. })
        ));
        assert!(matches!(
            seq(&[2], 5).explo_step(0, Some(0), 5),
            Err(ExploError::BadPort { .. })
        ));
    }

    #[test]
    fn x_n_is_length() {
        assert_eq!(seq(&[], 1).x_n(), 0);
        assert_eq!(seq(&[7; 12], 4).x_n(), 12);
    }

    #[test]
    fn certify_trivial_cases() {
        let one = PortGraph::with_canonical_ports(1, &[]).unwrap();
        let two = PortGraph::with_canonical_ports(2, &[(0, 1)]).unwrap();
        assert_eq!(seq(&[], 2).certify(&one), CertResult::Pass);
        assert_eq!(
            seq(&[], 2).certify(&two),
            CertResult::Fail {
                start: 0,
                uncovered: 1
            }
        );
        assert_eq!(seq(&[5], 2).certify(&two), CertResult::Pass);
        assert_eq!(
            seq(&[5], 1).certify(&two),
            CertResult::ExceedsBound { nodes: 2 }
        );
    }

    // Walk oracle: trace the ring by hand. With canonical ports on a ring,
    // node v has ports 1 -> min neighbour, 2 -> max neighbour.
    #[test]
    fn six_ring_zero_offsets_matches_walk_oracle() {
        let edges: Vec<_> = (0..6).map(|v| (v, (v + 1) % 6)).collect();
        let ring = PortGraph::with_canonical_ports(6, &edges).unwrap();
        let s = seq(&[0; 5], 6);
        let oracle_covers = (0..6).all(|start| {
            let mut seen = [false; 6];
            let mut at = start;
            seen[at] = true;
            let mut entry = 1usize;
            for _ in 0..5 {
                let mut nbrs = [(at + 5) % 6, (at + 1) % 6];
                nbrs.sort_unstable();
                let next = nbrs[entry - 1];
                let mut back = [(next + 5) % 6, (next + 1) % 6];
                back.sort_unstable();
                entry = back.iter().position(|&u| u == at).unwrap() + 1;
                at = next;
                seen[at] = true;
            }
            seen.iter().all(|&x| x)
        });
        assert_eq!(s.certify(&ring).passed(), oracle_covers);
    }

    #[test]
    fn build_small_cases() {
        let two = PortGraph::with_canonical_ports(2, &[(0, 1)]).unwrap();
        let s = ExplorationSequence::build(2, 9, std::slice::from_ref(&two)).unwrap();
        assert_eq!(s.x_n(), 1);
        assert!(s.certify(&two).passed());

        let ring5 = GraphFamily::new(FamilyKind::Ring, 5, 0).generate().unwrap();
        let s = ExplorationSequence::build(5, 3, std::slice::from_ref(&ring5)).unwrap();
        assert!(s.x_n() >= 4);
        assert!(s.certify(&ring5).passed());
        assert_eq!(ExplorationSequence::build(5, 3, &[ring5]).unwrap(), s);

        let big = GraphFamily::new(FamilyKind::Path, 6, 0).generate().unwrap();
        assert!(matches!(
            ExplorationSequence::build(5, 0, &[big]),
            Err(ExploError::GraphTooLarge { nodes: 6, .. })
        ));
    }

    #[test]
    fn n8_benchmark_set_certifies() {
        let graphs = benchmark_graphs(8);
        let s = ExplorationSequence::build(8, 1, &graphs).unwrap();
        assert!(graphs.iter().all(|g| s.certify(g).passed()));
        // Truncation is tight: one move fewer breaks some graph.
        let shorter = seq(&s.offsets()[..s.x_n() - 1], 8);
        assert!(graphs.iter().any(|g| !shorter.certify(g).passed()));
    }

    #[test]
    fn walk_includes_start_and_every_move() {
        let g = GraphFamily::new(FamilyKind::Complete, 4, 2)
            .generate()
            .unwrap();
        let s = ExplorationSequence::build(4, 0, std::slice::from_ref(&g)).unwrap();
        let w = s.walk(&g, 2);
        assert_eq!(w.len(), s.x_n() + 1);
        assert_eq!(w[0], 2);
    }

    #[test]
    fn cache_roundtrip() {
        let s = certified_for(4, 5, &[]).unwrap();
        let back = ExplorationSequence::from_cache_str(&s.to_cache_string()).unwrap();
        assert_eq!(back, s);
        assert!(ExplorationSequence::from_cache_str("N 3 seed 1 length 2\n4\n").is_err());
        assert!(ExplorationSequence::from_cache_str("nonsense\n").is_err());

        let dir = tempfile::tempdir().unwrap();
        let graphs = benchmark_graphs(4);
        let built = load_or_build(dir.path(), 4, 5, &graphs).unwrap();
        assert!(cache_path(dir.path(), 4, 5).exists());
        assert_eq!(load_or_build(dir.path(), 4, 5, &graphs).unwrap(), built);
    }
}
