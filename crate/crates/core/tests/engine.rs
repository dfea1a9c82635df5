use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use byzgather::exploration::certified_for;
use byzgather::simcore::{run, AgentSpec, SimSetup, Status, WakeTime};
use byzgather::{AgentId, ExplorationSequence, PortGraph, Protocol, StrategyKind, Trace, Variant};

fn agent(id: u64, start: usize, wake: WakeTime) -> AgentSpec {
    AgentSpec {
        id: AgentId(id),
        start,
        byzantine: false,
        wake,
    }
}

fn simulate(graph: PortGraph, seq: ExplorationSequence, agents: Vec<AgentSpec>, cap: u64) -> Trace {
    let setup = SimSetup {
        graph: Arc::new(graph),
        protocol: Protocol::new(Arc::new(seq), Variant::Ns),
        agents,
        strategy: StrategyKind::Crash,
        strategy_seed: 0,
        round_cap: cap,
    };
    run(&setup).unwrap()
}

fn path(n: usize) -> PortGraph {
    let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
    PortGraph::with_canonical_ports(n, &edges).unwrap()
}

/// Node of every agent at the end of every round up to `trace.rounds`.
fn positions(trace: &Trace) -> Vec<BTreeMap<AgentId, usize>> {
    (0..=trace.rounds)
        .map(|r| {
            trace
                .snapshot(r)
                .iter()
                .map(|rec| (rec.agent, rec.node))
                .collect()
        })
        .collect()
}

#[test]
fn crossing_an_edge_is_not_a_meeting() {
    // X = 1, P = 4, and CollectID phase x starts at round 2 + 12(x - 1).
    // Ids 1 and 2 share label bits 1..4, so for four CollectID phases they
    // move in lockstep and swap across the edge.
    let seq = || ExplorationSequence::from_offsets(vec![0], 2, 0);
    let agents = || {
        vec![
            agent(1, 0, WakeTime::Round(1)),
            agent(2, 1, WakeTime::Round(1)),
        ]
    };
    let trace = simulate(path(2), seq(), agents(), 1 + 12 * 4);
    for at in positions(&trace) {
        assert_ne!(at[&AgentId(1)], at[&AgentId(2)]);
    }
    for s in &trace.final_states {
        assert_eq!(*s.il, BTreeSet::from([s.id]));
    }

    // Bit 5 differs: agent 2 waits while agent 1 walks into it.
    let trace = simulate(path(2), seq(), agents(), 1 + 12 * 4 + 4);
    for s in &trace.final_states {
        assert_eq!(*s.il, BTreeSet::from([AgentId(1), AgentId(2)]));
    }
}

#[test]
fn lone_agent_on_single_node_walks_through_every_stage() {
    let seq = ExplorationSequence::from_offsets(vec![], 1, 0);
    let graph = PortGraph::with_canonical_ports(1, &[]).unwrap();
    let trace = simulate(graph, seq, vec![agent(1, 0, WakeTime::Round(1))], 200);
    assert!(trace.records.iter().all(|r| r.node == 0));
    let stages: BTreeSet<&str> = trace.records.iter().map(|r| r.stage).collect();
    for stage in ["cist", "mgst", "gst1", "gst2"] {
        assert!(stages.contains(stage), "missing {stage} in {stages:?}");
    }
    // Four agents are needed for a group; alone it never terminates.
    assert!(trace.capped);
    assert_eq!(trace.termination_rounds, [None]);
}

#[test]
fn visited_agent_starts_the_round_after_arrival() {
    let n = 7;
    let seq = certified_for(n, 3, &[path(n)]).unwrap();
    let x = seq.x_n() as u64;
    let solo = simulate(
        path(n),
        seq.clone(),
        vec![agent(1, 0, WakeTime::Round(1))],
        x,
    );
    let mut first_arrival: BTreeMap<usize, u64> = BTreeMap::new();
    for (r, at) in positions(&solo).iter().enumerate() {
        first_arrival.entry(at[&AgentId(1)]).or_insert(r as u64);
    }
    assert_eq!(first_arrival.len(), n);
    for (&node, &r) in first_arrival.iter().filter(|(&v, _)| v != 0) {
        let agents = vec![
            agent(1, 0, WakeTime::Round(1)),
            agent(2, node, WakeTime::ByVisit),
        ];
        let trace = simulate(path(n), seq.clone(), agents, x + 1);
        assert_eq!(
            trace.wake_rounds[1],
            Some(r + 1),
            "dormant agent on node {node}"
        );
    }
}

#[test]
fn scheduled_and_unvisited_wakes() {
    let n = 7;
    let seq = certified_for(n, 3, &[path(n)]).unwrap();
    let agents = vec![
        agent(1, 0, WakeTime::Round(1)),
        agent(2, 6, WakeTime::ByVisit),
        agent(3, 5, WakeTime::Round(1)),
    ];
    let trace = simulate(path(n), seq, agents, 1);
    assert_eq!(trace.wake_rounds, [Some(1), None, Some(1)]);
    let dormant = trace
        .snapshot(1)
        .into_iter()
        .find(|r| r.agent == AgentId(2))
        .unwrap();
    assert_eq!(dormant.status, Status::Dormant);
}

#[test]
fn co_starting_agent_wakes_with_scheduled_one() {
    let seq = certified_for(4, 0, &[]).unwrap();
    let agents = vec![
        agent(1, 2, WakeTime::Round(3)),
        agent(2, 2, WakeTime::ByVisit),
        agent(5, 0, WakeTime::Round(1)),
    ];
    let trace = simulate(path(4), seq, agents, 3);
    assert_eq!(trace.wake_rounds[0], Some(3));
    assert!(trace.wake_rounds[1].is_some_and(|r| r <= 3));
}

#[test]
fn identical_setups_give_identical_traces() {
    let seq = certified_for(5, 1, &[]).unwrap();
    let make = || {
        let agents = (1..=5)
            .map(|i| agent(i * 3, (i as usize) % 5, WakeTime::Round(i)))
            .collect();
        simulate(path(5), seq.clone(), agents, 4_000)
    };
    let (a, b) = (make(), make());
    assert_eq!(a.export(""), b.export(""));
    assert_eq!(format!("{:?}", a.events), format!("{:?}", b.events));
    assert_eq!(a.termination_rounds, b.termination_rounds);
}
