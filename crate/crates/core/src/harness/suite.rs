//! Scenario matrices and their CSV report.

use std::fmt::Write as _;
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::check::{check, Verdict};
use super::scenario::{Scenario, ScenarioConfig, ScenarioError, SequenceStore, TeamRule};
use crate::adversary::{StrategyKind, WakePolicyKind};
use crate::portgraph::FamilyKind;
use crate::simcore::{self, Trace};

pub const CSV_HEADER: &str = "scenario,variant,n,N,k,f,strategy,wake_policy,x_n,rounds,bound,pass";

fn all_families() -> Vec<String> {
    FamilyKind::ALL
        .iter()
        .map(|k| k.name().to_string())
        .collect()
}
fn default_f() -> Vec<usize> {
    vec![0, 1, 2]
}
fn default_team_rules() -> Vec<String> {
    vec!["abstract".into(), "theorem".into()]
}
fn all_strategies() -> Vec<String> {
    StrategyKind::ALL
        .iter()
        .map(|k| k.name().to_string())
        .collect()
}
fn all_policies() -> Vec<String> {
    WakePolicyKind::ALL
        .iter()
        .map(|k| k.name().to_string())
        .collect()
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_variants() -> Vec<String> {
    vec!["ns".into()]
}
fn default_n_min() -> usize {
    3
}
fn default_n_max() -> usize {
    10
}

/// Cross product of scenario parameters. Unless `nodes` is given, the node
/// count rotates through `n_min..=n_max` with family and seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default = "all_families")]
    pub families: Vec<String>,
    #[serde(default = "default_f")]
    pub f: Vec<usize>,
    #[serde(default = "default_team_rules")]
    pub team_rules: Vec<String>,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "all_policies")]
    pub wake_policies: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<usize>>,
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_cap: Option<u64>,
    #[serde(default)]
    pub exploration_seed: u64,
}

impl Default for MatrixSpec {
    fn default() -> Self {
        toml::from_str("").expect("all fields default")
    }
}

impl MatrixSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    /// Every scenario, in a fixed order. Team rules that give the same `k`
    /// for some `f` produce that scenario once.
    pub fn enumerate(&self) -> Result<Vec<ScenarioConfig>, ScenarioError> {
        let mut out = Vec::new();
        let span = self.n_max.saturating_sub(self.n_min) + 1;
        for (fi, family) in self.families.iter().enumerate() {
            let kind = family.parse::<FamilyKind>()?;
            for &f in &self.f {
                let mut ks: Vec<(usize, &String)> = Vec::new();
                for rule in &self.team_rules {
                    let k = rule
                        .parse::<TeamRule>()
                        .map_err(|e| ScenarioError::Invalid(vec![e]))?
                        .min_team(f);
                    if !ks.iter().any(|&(seen, _)| seen == k) {
                        ks.push((k, rule));
                    }
                }
                for &(k, rule) in &ks {
                    for strategy in &self.strategies {
                        for policy in &self.wake_policies {
                            for &seed in &self.seeds {
                                let sizes = match &self.nodes {
                                    Some(list) => list.clone(),
                                    None => vec![self.n_min + (fi * 3 + seed as usize) % span],
                                };
                                for n in sizes {
                                    for variant in &self.variants {
                                        let mut c = ScenarioConfig::new(kind, n, f, k);
                                        c.name = format!(
                                            "{kind}-n{n}-f{f}-k{k}-{strategy}-{policy}-s{seed}-{variant}"
                                        );
                                        c.graph_seed = seed;
                                        c.strategy = strategy.clone();
                                        c.strategy_seed = seed;
                                        c.wake_policy = policy.clone();
                                        c.wake_seed = seed;
                                        c.placement_seed = seed;
                                        c.variant = variant.clone();
                                        c.team_rule = rule.clone();
                                        c.round_cap = self.round_cap;
                                        c.exploration_seed = self.exploration_seed;
                                        c.validate()?;
                                        out.push(c);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Result of one scenario run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub config: ScenarioConfig,
    pub x_n: u64,
    pub bound: u64,
    /// Rounds from first good wake to last good termination, or rounds
    /// executed when gathering failed.
    pub rounds: u64,
    pub verdict: Verdict,
}

impl Outcome {
    pub fn csv_row(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.name,
            c.variant,
            c.n,
            c.bound_n(),
            c.k,
            c.f,
            c.strategy,
            c.wake_policy,
            self.x_n,
            self.rounds,
            self.bound,
            self.verdict.passed()
        )
    }
}

/// Resolves, runs and checks one scenario, returning the trace as well.
pub fn run_scenario(
    config: &ScenarioConfig,
    store: &SequenceStore,
) -> Result<(Outcome, Trace), ScenarioError> {
    let scenario = Scenario::resolve(config, store)?;
    let trace =
        simcore::run(&scenario.setup()).map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
    let verdict = check(&trace, &scenario);
    let outcome = Outcome {
        config: config.clone(),
        x_n: scenario.x_n(),
        bound: scenario.bound(),
        rounds: verdict.elapsed.unwrap_or(trace.rounds),
        verdict,
    };
    Ok((outcome, trace))
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub outcomes: Vec<Outcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.verdict.passed()).count()
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for o in &self.outcomes {
            out.push_str(&o.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        let total = self.outcomes.len();
        let props = self
            .outcomes
            .iter()
            .filter(|o| o.verdict.properties_hold())
            .count();
        let mut s = format!(
            "{} scenarios: {} gathered within bound, {} with all properties holding\n",
            total,
            self.passed(),
            props
        );
        for o in self
            .outcomes
            .iter()
            .filter(|o| !o.verdict.passed() || !o.verdict.properties_hold())
        {
            let failed: Vec<&str> = o
                .verdict
                .failed_properties()
                .iter()
                .map(|p| p.name())
                .collect();
            let _ = writeln!(
                s,
                "  FAIL {}: rounds {} bound {} notes [{}] properties [{}]",
                o.config.name,
                o.rounds,
                o.bound,
                o.verdict.notes.join("; "),
                failed.join(", ")
            );
        }
        s
    }
}

/// Runs every scenario of the matrix on all available cores. The report is
/// in enumeration order regardless of scheduling.
pub fn run_suite(matrix: &MatrixSpec, store: &SequenceStore) -> Result<SuiteReport, ScenarioError> {
    let configs = matrix.enumerate()?;
    run_configs(&configs, store)
}

pub(crate) fn run_configs(
    configs: &[ScenarioConfig],
    store: &SequenceStore,
) -> Result<SuiteReport, ScenarioError> {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(configs.len().max(1));
    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Result<Outcome, ScenarioError>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("queue lock");
                    let i = *n;
                    *n += 1;
                    i
                };
                if i >= configs.len() {
                    break;
                }
                let r = run_scenario(&configs[i], store).map(|(o, _)| o);
                results.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    let outcomes = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every index ran"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SuiteReport { outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matrix_size() {
        let m = MatrixSpec::default();
        // f = 0 has a single team size, f = 1 and f = 2 have two each.
        assert_eq!(m.enumerate().unwrap().len(), 5 * 5 * 8 * 3 * 3);
    }

    #[test]
    fn empty_matrix_gives_empty_report() {
        let m = MatrixSpec {
            families: vec![],
            ..MatrixSpec::default()
        };
        let report = run_suite(&m, &SequenceStore::new()).unwrap();
        assert!(report.outcomes.is_empty());
        assert_eq!(report.csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn node_counts_rotate_within_range() {
        let m = MatrixSpec::default();
        for c in m.enumerate().unwrap() {
            assert!((3..=10).contains(&c.n));
            assert_eq!(c.bound_n(), c.n);
        }
    }
}
