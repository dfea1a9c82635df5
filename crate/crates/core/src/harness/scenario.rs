//! Scenario files and their resolution into a runnable setup.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bounds::{theorem1_bound, theorem2_bound};
use crate::adversary::{wake_schedule, StrategyKind, WakePolicy, WakePolicyKind};
use crate::exploration::{self, ExploError, ExplorationSequence};
use crate::gathering::{Protocol, Variant};
use crate::portgraph::{FamilyKind, GraphError, GraphFamily, NodeIdx, PortGraph};
use crate::simcore::{AgentId, AgentSpec, SimSetup, WakeTime};

/// Default ids are drawn from `1..=ID_POOL`.
pub const ID_POOL: u64 = 64;

/// Which lower bound on `k` a scenario must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TeamRule {
    /// `k >= 4f^2 + 9f + 4`.
    Abstract,
    /// `k >= (4f + 4)(f + 1)`.
    Theorem,
    /// No requirement; for engine plumbing tests.
    Waived,
}

impl TeamRule {
    pub const ALL: [TeamRule; 3] = [TeamRule::Abstract, TeamRule::Theorem, TeamRule::Waived];

    pub fn name(self) -> &'static str {
        match self {
            TeamRule::Abstract => "abstract",
            TeamRule::Theorem => "theorem",
            TeamRule::Waived => "waived",
        }
    }

    pub fn min_team(self, f: usize) -> usize {
        match self {
            TeamRule::Abstract => 4 * f * f + 9 * f + 4,
            TeamRule::Theorem => (4 * f + 4) * (f + 1),
            TeamRule::Waived => 1,
        }
    }
}

impl fmt::Display for TeamRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TeamRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TeamRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown team_rule `{s}`"))
    }
}

fn default_strategy() -> String {
    "crash".into()
}
fn default_wake_policy() -> String {
    "all_at_once".into()
}
fn default_variant() -> String {
    "ns".into()
}
fn default_team_rule() -> String {
    "abstract".into()
}

/// One scenario as written in a TOML file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub family: String,
    pub n: usize,
    #[serde(default)]
    pub graph_seed: u64,
    /// Overrides the family generator; relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_file: Option<PathBuf>,
    /// `N`; defaults to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bound: Option<usize>,
    pub f: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<u64>>,
    /// Ids of the Byzantine agents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub byzantine: Option<Vec<u64>>,
    /// Start node per agent, in `ids` order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<NodeIdx>>,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub strategy_seed: u64,
    #[serde(default = "default_wake_policy")]
    pub wake_policy: String,
    #[serde(default)]
    pub wake_seed: u64,
    /// Latest scheduled wake round under `adversarial_stagger`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wake_cap: Option<u64>,
    /// Wake round per agent for `wake_policy = "explicit"`; 0 means by visit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wake_rounds: Option<Vec<u64>>,
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_cap: Option<u64>,
    #[serde(default)]
    pub exploration_seed: u64,
    #[serde(default)]
    pub placement_seed: u64,
    #[serde(default = "default_team_rule")]
    pub team_rule: String,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Exploration(#[from] ExploError),
}

impl ScenarioConfig {
    /// A scenario with every optional field at its default.
    pub fn new(family: FamilyKind, n: usize, f: usize, k: usize) -> Self {
        ScenarioConfig {
            name: String::new(),
            family: family.name().into(),
            n,
            graph_seed: 0,
            graph_file: None,
            n_bound: None,
            f,
            k,
            ids: None,
            byzantine: None,
            starts: None,
            strategy: default_strategy(),
            strategy_seed: 0,
            wake_policy: default_wake_policy(),
            wake_seed: 0,
            wake_cap: None,
            wake_rounds: None,
            variant: default_variant(),
            round_cap: None,
            exploration_seed: 0,
            placement_seed: 0,
            team_rule: default_team_rule(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn bound_n(&self) -> usize {
        self.n_bound.unwrap_or(self.n)
    }

    /// Checks every field invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errs = Vec::new();
        let family = self.family.parse::<FamilyKind>();
        match &family {
            Err(e) => errs.push(e.to_string()),
            Ok(kind) if self.graph_file.is_none() && self.n < kind.min_nodes() => errs.push(
                format!("{} needs n >= {}, got {}", kind, kind.min_nodes(), self.n),
            ),
            Ok(_) => {}
        }
        if self.n == 0 {
            errs.push("n must be at least 1".into());
        }
        if self.n > self.bound_n() {
            errs.push(format!("n = {} exceeds N = {}", self.n, self.bound_n()));
        }
        if self.k == 0 {
            errs.push("k must be at least 1".into());
        }
        if self.f >= self.k {
            errs.push(format!(
                "f = {} leaves no good agent among k = {}",
                self.f, self.k
            ));
        }
        if let Err(e) = self.strategy.parse::<StrategyKind>() {
            errs.push(e.to_string());
        }
        if self.wake_policy != "explicit" {
            if let Err(e) = self.wake_policy.parse::<WakePolicyKind>() {
                errs.push(e.to_string());
            }
        } else {
            match &self.wake_rounds {
                None => errs.push("wake_policy explicit needs wake_rounds".into()),
                Some(w) if w.len() != self.k => {
                    errs.push(format!("{} wake_rounds for k = {}", w.len(), self.k))
                }
                Some(_) => {}
            }
        }
        if let Err(e) = self.variant.parse::<Variant>() {
            errs.push(e);
        }
        match self.team_rule.parse::<TeamRule>() {
            Err(e) => errs.push(e),
            Ok(rule) => {
                let need = rule.min_team(self.f);
                if self.k < need {
                    errs.push(format!(
                        "k = {} is below the {} team size {} for f = {}",
                        self.k, rule, need, self.f
                    ));
                }
            }
        }
        match &self.ids {
            Some(ids) => {
                if ids.len() != self.k {
                    errs.push(format!("{} ids listed for k = {}", ids.len(), self.k));
                }
                if ids.contains(&0) {
                    errs.push("ids must be positive".into());
                }
                if ids.iter().collect::<BTreeSet<_>>().len() != ids.len() {
                    errs.push("ids must be distinct".into());
                }
            }
            None if self.k as u64 > ID_POOL => errs.push(format!(
                "k = {} exceeds the default id pool of {ID_POOL}",
                self.k
            )),
            None => {}
        }
        if let Some(byz) = &self.byzantine {
            if byz.len() != self.f {
                errs.push(format!(
                    "{} Byzantine ids listed for f = {}",
                    byz.len(),
                    self.f
                ));
            }
            match &self.ids {
                Some(ids) => {
                    if byz.iter().any(|b| !ids.contains(b)) {
                        errs.push("byzantine lists an id not in ids".into());
                    }
                }
                None => errs.push("byzantine needs explicit ids".into()),
            }
        }
        if let Some(starts) = &self.starts {
            if starts.len() != self.k {
                errs.push(format!("{} starts listed for k = {}", starts.len(), self.k));
            }
            if starts.iter().any(|&s| s >= self.n) {
                errs.push(format!("start node outside 0..{}", self.n));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errs))
        }
    }
}

/// Reads and validates a scenario file. A relative `graph_file` is resolved
/// against the file's directory.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = ScenarioConfig::from_toml_str(&text)?;
    if let (Some(g), Some(dir)) = (&config.graph_file, path.parent()) {
        if g.is_relative() {
            config.graph_file = Some(dir.join(g));
        }
    }
    Ok(config)
}

/// Certified sequences shared across scenarios, keyed by `(N, seed)`.
#[derive(Debug, Default)]
pub struct SequenceStore {
    dir: Option<PathBuf>,
    cache: Mutex<HashMap<(usize, u64), Arc<ExplorationSequence>>>,
}

impl SequenceStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also persists sequences under `dir`.
    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        SequenceStore {
            dir: Some(dir.into()),
            cache: Mutex::default(),
        }
    }

    /// A sequence for `bound` certified on the benchmark set and on `graph`.
    pub fn get(
        &self,
        bound: usize,
        seed: u64,
        graph: &PortGraph,
    ) -> Result<Arc<ExplorationSequence>, ExploError> {
        let cached = self
            .cache
            .lock()
            .expect("store lock")
            .get(&(bound, seed))
            .cloned();
        let seq = match cached {
            Some(seq) => seq,
            None => {
                let graphs = exploration::benchmark_graphs(bound);
                let seq = match &self.dir {
                    Some(dir) => {
                        fs::create_dir_all(dir)?;
                        exploration::load_or_build(dir, bound, seed, &graphs)?
                    }
                    None => ExplorationSequence::build(bound, seed, &graphs)?,
                };
                let seq = Arc::new(seq);
                self.cache
                    .lock()
                    .expect("store lock")
                    .insert((bound, seed), Arc::clone(&seq));
                seq
            }
        };
        if seq.certify(graph).passed() {
            Ok(seq)
        } else {
            Ok(Arc::new(exploration::certified_for(
                bound,
                seed,
                std::slice::from_ref(graph),
            )?))
        }
    }
}

/// A validated scenario with everything derived: graph, ids, placement,
/// wake schedule and exploration sequence.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub graph: Arc<PortGraph>,
    pub sequence: Arc<ExplorationSequence>,
    pub variant: Variant,
    pub strategy: StrategyKind,
    pub team_rule: TeamRule,
    pub agents: Vec<AgentSpec>,
    pub round_cap: u64,
}

impl Scenario {
    pub fn resolve(config: &ScenarioConfig, store: &SequenceStore) -> Result<Self, ScenarioError> {
        config.validate()?;
        let graph = match &config.graph_file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
                    path: path.clone(),
                    source,
                })?;
                PortGraph::parse(&text)?
            }
            None => {
                let kind = config.family.parse::<FamilyKind>()?;
                GraphFamily::new(kind, config.n, config.graph_seed).generate()?
            }
        };
        if graph.node_count() != config.n {
            return Err(ScenarioError::Invalid(vec![format!(
                "graph has {} nodes, scenario says n = {}",
                graph.node_count(),
                config.n
            )]));
        }
        let sequence = store.get(config.bound_n(), config.exploration_seed, &graph)?;
        let x_n = sequence.x_n() as u64;

        let mut rng = ChaCha8Rng::seed_from_u64(config.placement_seed);
        let (ids, byz) = assign_ids(config, &mut rng);
        let starts: Vec<NodeIdx> = match &config.starts {
            Some(s) => s.clone(),
            None => (0..config.k).map(|_| rng.gen_range(0..config.n)).collect(),
        };
        let roster: Vec<(AgentId, bool)> = ids.iter().copied().zip(byz.iter().copied()).collect();
        let policy = match config.wake_policy.as_str() {
            "explicit" => WakePolicy::Explicit(
                config
                    .wake_rounds
                    .as_deref()
                    .unwrap_or_default()
                    .iter()
                    .map(|&r| {
                        if r == 0 {
                            WakeTime::ByVisit
                        } else {
                            WakeTime::Round(r)
                        }
                    })
                    .collect(),
            ),
            other => match other.parse::<WakePolicyKind>().expect("validated") {
                WakePolicyKind::AllAtOnce => WakePolicy::AllAtOnce,
                WakePolicyKind::SingleGoodFirst => WakePolicy::SingleGoodFirst,
                WakePolicyKind::AdversarialStagger => WakePolicy::AdversarialStagger {
                    seed: config.wake_seed,
                    cap: config.wake_cap.unwrap_or(2 * x_n + 1),
                },
            },
        };
        let wake = wake_schedule(&policy, &roster)
            .map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
        let agents = (0..config.k)
            .map(|i| AgentSpec {
                id: ids[i],
                start: starts[i],
                byzantine: byz[i],
                wake: wake[i],
            })
            .collect::<Vec<_>>();

        let mut scenario = Scenario {
            config: config.clone(),
            graph: Arc::new(graph),
            sequence,
            variant: config.variant.parse().expect("validated"),
            strategy: config.strategy.parse().expect("validated"),
            team_rule: config.team_rule.parse().expect("validated"),
            agents,
            round_cap: 0,
        };
        scenario.round_cap = config.round_cap.unwrap_or(4 * scenario.sim_bound());
        Ok(scenario)
    }

    pub fn x_n(&self) -> u64 {
        self.sequence.x_n() as u64
    }

    pub fn f(&self) -> usize {
        self.config.f
    }

    pub fn lambda_good(&self) -> u64 {
        self.agents
            .iter()
            .filter(|a| !a.byzantine)
            .map(|a| a.id.0)
            .max()
            .unwrap_or(1)
    }

    pub fn lambda_all(&self) -> u64 {
        self.agents.iter().map(|a| a.id.0).max().unwrap_or(1)
    }

    pub fn ns_bound(&self) -> u64 {
        theorem1_bound(self.x_n(), self.f() as u64, self.lambda_good())
    }

    pub fn sim_bound(&self) -> u64 {
        theorem2_bound(self.x_n(), self.f() as u64, self.lambda_all())
    }

    /// Bound that applies to this scenario's variant.
    pub fn bound(&self) -> u64 {
        match self.variant {
            Variant::Ns => self.ns_bound(),
            Variant::Sim => self.sim_bound(),
        }
    }

    pub fn protocol(&self) -> Protocol {
        Protocol::new(Arc::clone(&self.sequence), self.variant)
    }

    pub fn setup(&self) -> SimSetup {
        SimSetup {
            graph: Arc::clone(&self.graph),
            protocol: self.protocol(),
            agents: self.agents.clone(),
            strategy: self.strategy,
            strategy_seed: self.config.strategy_seed,
            round_cap: self.round_cap,
        }
    }
}

/// Explicit ids, or `k` distinct draws from `1..=ID_POOL` with Byzantine ids
/// alternating from the bottom and the top of the sorted draw (all at the
/// bottom when `placement_seed % 3 == 2`).
fn assign_ids(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> (Vec<AgentId>, Vec<bool>) {
    if let Some(ids) = &config.ids {
        let byz: BTreeSet<u64> = config.byzantine.iter().flatten().copied().collect();
        let flags = if config.byzantine.is_some() {
            ids.iter().map(|id| byz.contains(id)).collect()
        } else {
            byzantine_positions(ids.len(), config.f, config.placement_seed, ids)
        };
        return (ids.iter().map(|&i| AgentId(i)).collect(), flags);
    }
    let mut ids: Vec<u64> = sample(rng, ID_POOL as usize, config.k)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect();
    ids.sort_unstable();
    let flags = byzantine_positions(ids.len(), config.f, config.placement_seed, &ids);
    (ids.into_iter().map(AgentId).collect(), flags)
}

fn byzantine_positions(k: usize, f: usize, seed: u64, ids: &[u64]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| ids[i]);
    let mut flags = vec![false; k];
    for j in 0..f {
        let rank = if seed % 3 == 2 {
            j
        } else if j % 2 == 0 {
            j / 2
        } else {
            k - 1 - j / 2
        };
        flags[order[rank]] = true;
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioConfig {
        ScenarioConfig::new(FamilyKind::Ring, 5, 1, 17)
    }

    #[test]
    fn minimal_file_round_trips() {
        let text = "family = \"ring\"\nn = 5\nf = 0\nk = 4\n";
        let c = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(c, ScenarioConfig::new(FamilyKind::Ring, 5, 0, 4));
        assert_eq!(
            ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap(),
            c
        );
    }

    #[test]
    fn team_below_abstract_rule_is_rejected() {
        let mut c = base();
        c.k = 10;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("17"), "{err}");
    }

    #[test]
    fn n_above_bound_is_rejected() {
        let mut c = base();
        c.n_bound = Some(4);
        assert!(matches!(c.validate(), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn every_violation_is_listed() {
        let mut c = base();
        c.k = 2;
        c.strategy = "sneaky".into();
        c.variant = "both".into();
        match c.validate() {
            Err(ScenarioError::Invalid(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let text = "family = \"ring\"\nn = 5\nf = 0\nk = 4\ncolour = 3\n";
        assert!(matches!(
            ScenarioConfig::from_toml_str(text),
            Err(ScenarioError::Parse(_))
        ));
    }

    #[test]
    fn default_ids_are_distinct_and_interleaved() {
        let mut c = ScenarioConfig::new(FamilyKind::Ring, 5, 2, 38);
        for seed in 0..6 {
            c.placement_seed = seed;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (ids, byz) = assign_ids(&c, &mut rng);
            assert_eq!(ids.iter().collect::<BTreeSet<_>>().len(), 38);
            assert!(ids.iter().all(|i| (1..=ID_POOL).contains(&i.0)));
            let bad: Vec<usize> = (0..38).filter(|&i| byz[i]).collect();
            assert_eq!(bad.len(), 2);
            if seed % 3 == 2 {
                assert_eq!(bad, vec![0, 1]);
            } else {
                assert_eq!(bad, vec![0, 37]);
            }
        }
    }
}
