use std::sync::Arc;

use eesmr_lab::checkers::CheckerConstants;
use eesmr_lab::hypergraph::{generate_topology, TopologyKind};
use eesmr_lab::net::{DeliveryPolicy, Engine, EngineConfig, StopReason};
use eesmr_lab::protocol::{max_faults, FaultHooks, ProtocolConfig};
use eesmr_lab::SigScheme;

fn config(n: usize, k: usize, hooks: Vec<FaultHooks>, delivery: DeliveryPolicy, seed: u64) -> EngineConfig {
    let f = max_faults(n);
    EngineConfig {
        protocol: Arc::new(ProtocolConfig::new(n, f, 1000)),
        topology: generate_topology(TopologyKind::RingKcast, n, k).unwrap(),
        hooks,
        delivery,
        seed,
        scheme: SigScheme::Sim,
        priced_sig_len: None,
        target_blocks: 20,
        time_budget: 1_000_000,
        command_size: 16,
        trace: false,
        checkers: true,
        constants: CheckerConstants::default(),
    }
}

#[test]
fn fault_free_ring_commits_identical_logs() {
    for delivery in DeliveryPolicy::ALL {
        let (out, _) = Engine::new(config(7, 4, vec![FaultHooks::default(); 7], delivery, 3)).run();
        assert_eq!(out.stop, StopReason::TargetReached, "{delivery:?} {:?}", out.verdicts);
        assert!(out.verdicts.all_pass(), "{delivery:?} {:?}", out.verdicts);
        let first = &out.logs[0][..20];
        assert!(out.logs.iter().all(|l| &l[..20] == first));
    }
}

#[test]
fn silent_leader_triggers_view_change() {
    let mut hooks = vec![FaultHooks::default(); 7];
    hooks[1].mute_leader = true;
    let (out, _) = Engine::new(config(7, 4, hooks, DeliveryPolicy::SeededRandom, 9)).run();
    assert_eq!(out.stop, StopReason::TargetReached, "{:?} {:?}", out.verdicts, out.trace_tail.iter().rev().take(20).collect::<Vec<_>>());
    assert!(out.verdicts.all_pass(), "{:?}", out.verdicts);
    assert_eq!(out.view_changes.len(), 1);
    println!("{:?}", out.view_changes);
}
