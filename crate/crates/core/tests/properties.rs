use proptest::prelude::*;

use eesmr_lab::adversary::{AdversaryConfig, ProfileKind};
use eesmr_lab::energy::{CostExpr, ParamVector, Var};
use eesmr_lab::hypergraph::{certify_f_connectivity, generate_topology, TopologyKind};
use eesmr_lab::net::{DeliveryPolicy, TransmissionLedger};
use eesmr_lab::report::run_scenario;
use eesmr_lab::scenario::{Scenario, TopologySpec};

fn delivery() -> impl Strategy<Value = DeliveryPolicy> {
    prop::sample::select(DeliveryPolicy::ALL.to_vec())
}

fn profile() -> impl Strategy<Value = ProfileKind> {
    prop::sample::select(
        std::iter::once(ProfileKind::None)
            .chain(ProfileKind::SWEEP)
            .collect::<Vec<_>>(),
    )
}

fn expr() -> impl Strategy<Value = CostExpr> {
    let leaf = prop_oneof![
        (-5.0f64..5.0).prop_map(CostExpr::constant),
        prop::sample::select(Var::ALL.to_vec()).prop_map(CostExpr::var),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner).prop_map(|(a, b)| a - b),
        ]
    })
}

fn params() -> impl Strategy<Value = ParamVector> {
    prop::collection::vec(0.5f64..2.0, Var::ALL.len()).prop_map(|xs| {
        Var::ALL
            .iter()
            .zip(xs)
            .fold(ParamVector::new(), |p, (v, x)| p.set(*v, x))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expr_eval_is_a_ring_homomorphism(a in expr(), b in expr(), x in params()) {
        let (ea, eb) = (a.eval(&x).unwrap(), b.eval(&x).unwrap());
        let tol = 1e-9 * (1.0 + ea.abs() * eb.abs() + ea.abs() + eb.abs());
        prop_assert!(((a.clone() + b.clone()).eval(&x).unwrap() - (ea + eb)).abs() <= tol);
        prop_assert!(((a.clone() * b.clone()).eval(&x).unwrap() - ea * eb).abs() <= tol);
        prop_assert!((a.clone() - a).is_zero());
    }

    #[test]
    fn scenario_json_round_trips(
        n in 4usize..=13,
        seed in any::<u64>(),
        d in delivery(),
        p in profile(),
        blocks in 1u64..100,
        complete in any::<bool>(),
    ) {
        let mut sc = Scenario::ring(n, seed);
        sc.delivery = d;
        sc.adversary = AdversaryConfig::new(p);
        sc.n_blocks = blocks;
        if complete {
            sc.topology = TopologySpec::Complete;
        }
        let back = Scenario::from_json(&sc.to_json()).unwrap();
        prop_assert_eq!(&back, &sc);
        prop_assert_eq!(back.to_json(), sc.to_json());
    }

    #[test]
    fn ring_certifies_exactly_below_k(n in 3usize..=9, k in 1usize..9) {
        prop_assume!(k < n);
        let h = generate_topology(TopologyKind::RingKcast, n, k).unwrap();
        for f in 0..=n - 2 {
            let c = certify_f_connectivity(&h, f).unwrap();
            prop_assert_eq!(c.certified, f < k, "n={} k={} f={}", n, k, f);
            if let Some(w) = c.witness {
                prop_assert_eq!(w.len(), f);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tolerated_faults_keep_safety_and_liveness(
        n in 4usize..=10,
        seed in any::<u64>(),
        d in delivery(),
        p in profile(),
    ) {
        let mut sc = Scenario::ring(n, seed);
        sc.delivery = d;
        sc.adversary = AdversaryConfig::new(p);
        sc.n_blocks = 20;
        let (rep, out) = run_scenario(&sc).unwrap();
        prop_assert!(rep.passed(), "{:?}", rep.verdicts);
        let logs: Vec<_> = out.nodes.iter().filter(|s| s.correct).map(|s| &out.logs[s.id as usize]).collect();
        for l in &logs {
            prop_assert!(l.len() >= 20);
            prop_assert_eq!(&l[..20], &logs[0][..20]);
        }
    }
}

#[test]
fn complete_graph_leader_unicasts_once_per_block() {
    for n in 4..=7 {
        let mut sc = Scenario::ring(n, 2);
        sc.topology = TopologySpec::Complete;
        let (rep, out) = run_scenario(&sc).unwrap();
        assert!(rep.passed(), "{:?}", rep.verdicts);
        let leader = 1 % n;
        for usage in out.ledger.per_block.values() {
            assert_eq!(usage[leader].unicasts_sent, n as u64 - 1);
            assert_eq!(TransmissionLedger::total(usage).transmissions(), n as u64 - 1);
            assert_eq!(TransmissionLedger::total(usage).messages_relayed, 0);
        }
    }
}

#[test]
fn ring_relays_once_per_node_per_block() {
    let sc = Scenario::ring(10, 2);
    let (_, out) = run_scenario(&sc).unwrap();
    for usage in out.ledger.per_block.values() {
        assert!(usage.iter().all(|u| u.kcasts_sent == 1));
        assert_eq!(TransmissionLedger::total(usage).messages_relayed, 9);
    }
}
