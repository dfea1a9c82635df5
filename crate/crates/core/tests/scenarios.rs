use std::fs;
use std::path::{Path, PathBuf};

use byzgather::harness::{
    load_scenario, run_scenario, MatrixSpec, Scenario, ScenarioError, SequenceStore,
};
use byzgather::{FamilyKind, ScenarioConfig};

fn repo_scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn scenario_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(repo_scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    files
}

#[test]
fn shipped_scenarios_gather() {
    let store = SequenceStore::new();
    let files = scenario_files();
    assert!(files.len() >= 4);
    for path in files {
        let config = load_scenario(&path).unwrap();
        let (outcome, _) = run_scenario(&config, &store).unwrap();
        let v = &outcome.verdict;
        assert!(
            v.gathered && v.same_node,
            "{}: {:?}",
            path.display(),
            v.notes
        );
        assert!(
            v.properties_hold(),
            "{}: {:?}",
            path.display(),
            v.failed_properties()
        );
    }
}

#[test]
fn shipped_matrices_parse() {
    let dir = repo_scenarios().join("matrices");
    for entry in fs::read_dir(dir).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let configs = MatrixSpec::from_toml_str(&text)
            .unwrap()
            .enumerate()
            .unwrap();
        assert!(!configs.is_empty());
        for c in &configs {
            c.validate().unwrap();
        }
    }
}

#[test]
fn graph_file_resolves_next_to_scenario() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("g")).unwrap();
    fs::write(dir.path().join("g/tri.txt"), "3\n0 1\n1 2\n2 0\n").unwrap();
    let path = dir.path().join("s.toml");
    fs::write(
        &path,
        "family = \"ring\"\nn = 3\nf = 0\nk = 4\ngraph_file = \"g/tri.txt\"\n",
    )
    .unwrap();
    let config = load_scenario(&path).unwrap();
    assert_eq!(
        config.graph_file.as_deref(),
        Some(dir.path().join("g/tri.txt").as_path())
    );
    let scenario = Scenario::resolve(&config, &SequenceStore::new()).unwrap();
    assert_eq!(scenario.graph.node_count(), 3);
}

#[test]
fn invalid_scenario_lists_every_problem() {
    let text = "family = \"ring\"\nn = 2\nf = 1\nk = 5\nstrategy = \"bogus\"\nvariant = \"fast\"\n";
    match ScenarioConfig::from_toml_str(text) {
        Err(ScenarioError::Invalid(errs)) => assert_eq!(errs.len(), 4, "{errs:?}"),
        other => panic!("expected validation errors, got {other:?}"),
    }
    assert!(matches!(
        ScenarioConfig::from_toml_str("family = \"ring\"\nn = 3\nf = 0\nk = 4\ncolour = 1\n"),
        Err(ScenarioError::Parse(_))
    ));
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_scenario(Path::new("/nonexistent/scenario.toml")).unwrap_err();
    assert!(matches!(err, ScenarioError::Io { .. }));
}

#[test]
fn config_round_trips_through_toml() {
    let mut c = ScenarioConfig::new(FamilyKind::RandomTree, 8, 1, 17);
    c.strategy = "estf_liar".into();
    c.team_rule = "theorem".into();
    c.wake_cap = Some(5);
    assert_eq!(
        ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap(),
        c
    );
}

#[test]
fn rerun_with_fresh_store_is_identical() {
    let mut c = ScenarioConfig::new(FamilyKind::RandomConnected, 6, 1, 17);
    c.strategy = "random_walk".into();
    c.wake_policy = "adversarial_stagger".into();
    c.graph_seed = 3;
    c.wake_seed = 3;
    c.strategy_seed = 3;
    let (a, ta) = run_scenario(&c, &SequenceStore::new()).unwrap();
    let (b, tb) = run_scenario(&c, &SequenceStore::new()).unwrap();
    assert_eq!(a.csv_row(), b.csv_row());
    assert_eq!(
        ta.export(&c.to_toml_string()),
        tb.export(&c.to_toml_string())
    );
}
