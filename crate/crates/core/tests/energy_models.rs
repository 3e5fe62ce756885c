use eesmr_lab::energy::{
    self, sizes, CostTable, CryptoScheme, Fabric, KcastPricing, Medium, Primitive, Protocol, Scope, Side, Var,
};
use eesmr_lab::protocol::make_msg;
use eesmr_lab::report::run_scenario;
use eesmr_lab::scenario::Scenario;
use eesmr_lab::{Block, Digest, Keyring, MsgKind, NodeId, Payload, ProtocolMsg, QuorumCert, SigScheme};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-12)
}

#[test]
fn media_table_matches_measurements() {
    let t = CostTable::builtin();
    let rows: [(Medium, Primitive, [f64; 4]); 7] = [
        (Medium::Ble, Primitive::Send, [0.73, 1.31, 2.93, 5.91]),
        (Medium::Ble, Primitive::Recv, [0.55, 1.11, 2.64, 5.23]),
        (Medium::Ble, Primitive::Multicast, [0.58, 1.17, 2.35, 4.70]),
        (Medium::FourG, Primitive::Send, [494.84, 989.68, 1979.36, 3958.72]),
        (Medium::FourG, Primitive::Recv, [69.54, 139.08, 278.17, 556.35]),
        (Medium::Wifi, Primitive::Send, [81.2, 153.98, 310.54, 610.55]),
        (Medium::Wifi, Primitive::Recv, [66.66, 123.23, 231.52, 423.58]),
    ];
    for (m, p, want) in rows {
        for (size, w) in [256u64, 512, 1024, 2048].into_iter().zip(want) {
            let got = t.lookup(m, p, size).unwrap();
            assert!(close(got.mj, w, 1e-12), "{m} {p:?} {size}: {} vs {w}", got.mj);
            assert!(!got.extrapolated);
        }
    }
}

#[test]
fn crypto_table_matches_measurements() {
    let t = CostTable::builtin();
    let want = [
        (CryptoScheme::Bp256r1, 13.88, 27.34),
        (CryptoScheme::Secp192r1, 0.84, 1.50),
        (CryptoScheme::Secp192k1, 1.16, 2.24),
        (CryptoScheme::Secp224r1, 1.10, 2.14),
        (CryptoScheme::Secp256r1, 1.60, 3.04),
        (CryptoScheme::Secp256k1, 1.72, 3.35),
        (CryptoScheme::Rsa1024, 0.40, 0.02),
        (CryptoScheme::Rsa1260, 0.79, 0.03),
        (CryptoScheme::Rsa2048, 2.41, 0.06),
        (CryptoScheme::Hmac, 0.19, 0.19),
    ];
    for (s, sign, verify) in want {
        let c = t.crypto(s).unwrap();
        assert_eq!((c.sign, c.verify), (sign, verify), "{s:?}");
    }
}

#[test]
fn kcast_fragment_pricing() {
    let t = CostTable::builtin();
    let (send, recv) = t.kcast_cost(256, KcastPricing::Reliable).unwrap();
    let frags = 256f64 / 25.0;
    assert!(close(send.mj, frags.ceil() * 5.3, 1e-12), "{}", send.mj);
    assert!(close(recv.mj, frags.ceil() * 9.98, 1e-12), "{}", recv.mj);
    let (s, r) = t.link_rates(Medium::Ble, KcastPricing::Reliable).unwrap();
    assert!(close(s, 5.3 / 25.0 / 1000.0, 1e-12));
    assert!(close(r, 9.98 / 25.0 / 1000.0, 1e-12));
}

#[test]
fn symbolic_evaluation_examples() {
    let t = CostTable::builtin();
    let x = energy::bind(energy::structure(10, 4, 5, 16), &t, Medium::Ble, CryptoScheme::Rsa1024, KcastPricing::Reliable)
        .unwrap();
    let two_signs = energy::CostExpr::var(Var::SigmaS).scale(2.0);
    assert!(close(two_signs.eval(&x).unwrap(), 0.80, 1e-12));
    let n_verifies = energy::CostExpr::var(Var::N) * energy::CostExpr::var(Var::SigmaV);
    assert!(close(n_verifies.eval(&x).unwrap(), 0.20, 1e-12));
}

fn qc(kind: MsgKind, q: usize, keys: &std::sync::Arc<Keyring>) -> QuorumCert {
    let signers: Vec<NodeId> = (0..q as u32).map(NodeId).collect();
    let sigs = signers
        .iter()
        .map(|id| keys.signer(*id).sign(b"subject"))
        .collect();
    QuorumCert {
        kind,
        view: 3,
        subject: Digest::of(b"subject"),
        signers,
        sigs,
    }
}

/// Wire size after substituting `b`-byte signatures for the simulator's own.
fn priced(m: &ProtocolMsg, keys: &Keyring, b: usize) -> f64 {
    (m.encoded_len() as i64 + m.signature_count() as i64 * (b as i64 - keys.sig_len() as i64)) as f64
}

#[test]
fn message_sizes_match_encodings() {
    let keys = Keyring::new(SigScheme::Sim, 16, 1);
    let mut s = keys.signer(NodeId(0));
    for (n, f) in [(4usize, 1usize), (7, 3), (13, 6)] {
        for b in [40usize, 128, 256] {
            for m in [0usize, 16, 100] {
                let q = f + 1;
                let x = energy::structure(n, f, f + 1, m).set(Var::B, b as f64);
                let block = Block::new(4, Digest::of(b"p"), vec![vec![7u8; m]], NodeId(0), 3, 9, None);
                let cases: Vec<(&str, ProtocolMsg, energy::CostExpr)> = vec![
                    (
                        "propose",
                        make_msg(&mut s, Payload::Propose { block: block.clone(), justify: None }, 3, 9),
                        sizes::propose(),
                    ),
                    ("blame", make_msg(&mut s, Payload::Blame { proof: None }, 3, 9), sizes::blame()),
                    (
                        "certify",
                        make_msg(&mut s, Payload::Certify { subject: block.digest() }, 3, 0),
                        sizes::certify(),
                    ),
                    (
                        "vote",
                        make_msg(&mut s, Payload::VoteMsg { subject: block.digest() }, 3, 1),
                        sizes::vote(),
                    ),
                    (
                        "commit_update",
                        make_msg(&mut s, Payload::CommitUpdate { block: block.clone() }, 3, 0),
                        sizes::commit_update(),
                    ),
                    (
                        "blame_qc",
                        make_msg(&mut s, Payload::BlameQc { qc: qc(MsgKind::Blame, q, &keys) }, 3, 0),
                        sizes::blame_qc(),
                    ),
                    (
                        "commit_qc",
                        make_msg(
                            &mut s,
                            Payload::CommitQc { qc: Some(qc(MsgKind::Certify, q, &keys)), block: block.clone() },
                            3,
                            0,
                        ),
                        sizes::commit_qc(),
                    ),
                ];
                for (name, msg, expr) in cases {
                    let want = expr.eval(&x).unwrap();
                    assert_eq!(priced(&msg, &keys, b), want, "{name} n={n} b={b} m={m}");
                }
            }
        }
    }
}

#[test]
fn model_matches_ledger_within_ten_percent() {
    let t = CostTable::builtin();
    let mdl = energy::model(Protocol::Eesmr, Fabric::Ring, Scope::Node);
    for n in [4, 7, 10, 13] {
        let sc = Scenario::ring(n, 3);
        let (rep, _) = run_scenario(&sc).unwrap();
        assert!(rep.passed(), "{:?}", rep.verdicts);
        let f = sc.fault_bound();
        let x = energy::bind(
            energy::structure(n, f, sc.ring_degree(), sc.command_size * sc.batch_size),
            &t,
            sc.medium,
            sc.crypto,
            sc.kcast_pricing,
        )
        .unwrap();
        let model_mj = mdl.psi_b.eval(&x).unwrap() * 1000.0;
        let leader = 1 % n;
        let per_block = &rep.energy[&sc.medium].per_block_mj;
        for (i, e) in per_block.iter().enumerate() {
            if i == leader {
                continue;
            }
            assert!(close(*e, model_mj, 0.10), "n={n} node {i}: ledger {e:.1} mJ vs model {model_mj:.1} mJ");
        }
    }
}

#[test]
fn zero_traffic_costs_nothing() {
    let t = CostTable::builtin();
    let ledger = eesmr_lab::net::TransmissionLedger::new(4);
    let e = energy::ledger_to_energy(&ledger, &t, Medium::Wifi, CryptoScheme::Rsa1024, KcastPricing::Reliable).unwrap();
    assert!(e.per_node.iter().all(|x| x.total == 0.0 && x.communication == 0.0));
}

fn side(p: Protocol, medium: Medium) -> Side {
    Side {
        model: energy::model(p, Fabric::Ring, Scope::Node),
        medium,
        crypto: CryptoScheme::Rsa1024,
    }
}

#[test]
fn feasible_region_wifi_against_4g_baseline() {
    let t = CostTable::builtin();
    let ns: Vec<usize> = (4..=50).collect();
    let ms: Vec<usize> = (256..=2048).step_by(256).collect();
    let g = energy::feasible_region(
        &side(Protocol::Eesmr, Medium::Wifi),
        &side(Protocol::TrustedBaseline, Medium::FourG),
        &t,
        3,
        &ns,
        &ms,
    )
    .unwrap();
    assert_eq!(g.favorable_per_n(), vec![ms.len(); ns.len()]);
    for row in &g.delta {
        assert!(row.windows(2).all(|w| w[1] < w[0]), "advantage grows with m: {row:?}");
    }
    let csv = g.to_csv();
    assert_eq!(csv.lines().count(), ns.len() + 1);
    assert!(csv.starts_with("n,m=256,"));
}

#[test]
fn same_medium_never_beats_baseline() {
    let t = CostTable::builtin();
    for medium in Medium::ALL {
        let g = energy::feasible_region(
            &side(Protocol::Eesmr, medium),
            &side(Protocol::TrustedBaseline, medium),
            &t,
            3,
            &[4, 10, 30],
            &[0, 256, 2048],
        )
        .unwrap();
        assert!(g.delta.iter().flatten().all(|d| *d > 0.0), "{medium}: {:?}", g.delta);
    }
}

#[test]
fn steady_cost_is_flat_in_n_at_fixed_k() {
    let t = CostTable::builtin();
    let mdl = energy::model(Protocol::Eesmr, Fabric::Ring, Scope::Node);
    let at = |n: usize| {
        let x = energy::bind(energy::structure(n, (n - 1) / 2, 3, 16), &t, Medium::Ble, CryptoScheme::Rsa1024, KcastPricing::Reliable)
            .unwrap();
        mdl.psi_b.eval(&x).unwrap()
    };
    for n in 5..=30 {
        assert!(close(at(n), at(5), 1e-9), "n={n}");
    }
}
