//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eesmr_lab::adversary::{AdversaryConfig, ProfileKind};
use eesmr_lab::energy::{
    self, CostTable, CryptoScheme, Fabric, KcastPricing, Medium, Protocol, Psi, Scope,
};
use eesmr_lab::hypergraph::{
    certify_f_connectivity, degree_profile, generate_topology, necessary_condition,
    validate_independence, Edge, Hypergraph, TopologyKind,
};
use eesmr_lab::net::{DeliveryPolicy, RunOutcome, StopReason, TraceRecord, TransmissionLedger};
use eesmr_lab::report::{run_scenario, RunReport};
use eesmr_lab::scenario::{Scenario, TopologySpec};

type Outcome = Result<String, String>;
type Criterion<'a> = (usize, &'static str, Box<dyn Fn() -> Outcome + 'a>);

const NS: [usize; 4] = [4, 7, 10, 13];
const DELTA: u64 = 1000;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(sc: &Scenario) -> Result<(RunReport, RunOutcome), String> {
    run_scenario(sc).map_err(|e| format!("config error: {e}"))
}

fn field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    detail
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

/// (time, block, height) of every commit event of `node`.
fn commits(trace: &[TraceRecord], node: u32) -> Vec<(u64, String, u64)> {
    trace
        .iter()
        .filter(|r| r.node == node && r.event_kind == "commit")
        .map(|r| {
            (
                r.time,
                field(&r.detail, "block").unwrap_or("").to_string(),
                field(&r.detail, "height").and_then(|h| h.parse().ok()).unwrap_or(0),
            )
        })
        .collect()
}

fn correct_ids(out: &RunOutcome) -> Vec<u32> {
    out.nodes.iter().filter(|s| s.correct).map(|s| s.id).collect()
}

/// Logs of correct nodes must be prefixes of one another.
fn prefix_consistent(out: &RunOutcome) -> Result<(), String> {
    let logs: Vec<&Vec<_>> = out
        .nodes
        .iter()
        .filter(|s| s.correct)
        .map(|s| &out.logs[s.id as usize])
        .collect();
    for a in &logs {
        for b in &logs {
            let l = a.len().min(b.len());
            if a[..l] != b[..l] {
                return Err("correct logs diverge".into());
            }
        }
    }
    Ok(())
}

fn sweep_cell(n: usize, profile: ProfileKind, seed: u64) -> Scenario {
    let mut sc = Scenario::ring(n, seed);
    sc.adversary = AdversaryConfig::new(profile);
    sc.delivery = DeliveryPolicy::ALL[(seed % 4) as usize];
    sc.trace = true;
    sc
}

// ---- criteria 1 and 2 -------------------------------------------------------

fn liveness_budget(sc: &Scenario) -> u64 {
    let f = sc.fault_bound() as u64;
    sc.n_blocks * sc.round_period * sc.delta + (f + 1) * 21 * sc.delta
}

struct SweepStats {
    runs: usize,
    safety_failures: Vec<String>,
    liveness_failures: Vec<String>,
    timing_checked: usize,
    timing_failures: Vec<String>,
    elapsed: f64,
}

fn run_sweep() -> SweepStats {
    let start = Instant::now();
    let mut s = SweepStats {
        runs: 0,
        safety_failures: Vec::new(),
        liveness_failures: Vec::new(),
        timing_checked: 0,
        timing_failures: Vec::new(),
        elapsed: 0.0,
    };
    for n in NS {
        for profile in ProfileKind::SWEEP {
            for seed in 0..42 {
                let sc = sweep_cell(n, profile, seed);
                let tag = format!("n={n} {profile:?} seed={seed} {:?}", sc.delivery);
                s.runs += 1;
                let (rep, out) = match run(&sc) {
                    Ok(x) => x,
                    Err(e) => {
                        s.safety_failures.push(format!("{tag}: {e}"));
                        continue;
                    }
                };
                let v = &rep.verdicts;
                if let Err(e) = prefix_consistent(&out) {
                    s.safety_failures.push(format!("{tag}: {e}"));
                }
                if !(v.safety.ok() && v.extensibility.ok() && v.lock_extends_commit.ok()) {
                    s.safety_failures.push(format!("{tag}: {:?}", v.counterexample));
                }
                check_liveness(&sc, &out, &tag, &mut s.liveness_failures);
            }
        }
    }
    for n in NS {
        for delivery in DeliveryPolicy::ALL {
            for seed in 0..5 {
                let mut sc = Scenario::ring(n, seed);
                sc.delivery = delivery;
                sc.trace = true;
                let tag = format!("fault-free n={n} seed={seed} {delivery:?}");
                match run(&sc) {
                    Ok((_, out)) => {
                        s.timing_checked += 1;
                        check_liveness(&sc, &out, &tag, &mut s.liveness_failures);
                        check_commit_timing(&out, &tag, &mut s.timing_failures);
                    }
                    Err(e) => s.timing_failures.push(format!("{tag}: {e}")),
                }
            }
        }
    }
    s.elapsed = start.elapsed().as_secs_f64();
    s
}

fn check_liveness(sc: &Scenario, out: &RunOutcome, tag: &str, failures: &mut Vec<String>) {
    let budget = liveness_budget(sc);
    for id in correct_ids(out) {
        let reached = commits(&out.trace, id)
            .into_iter()
            .find(|(_, _, h)| *h >= sc.n_blocks)
            .map(|(t, _, _)| t);
        match reached {
            Some(t) if t <= budget => {}
            other => failures.push(format!("{tag}: node {id} reached target at {other:?}, budget {budget}")),
        }
    }
}

/// Every commit happens exactly 4Δ after the same node locked and relayed
/// the block.
fn check_commit_timing(out: &RunOutcome, tag: &str, failures: &mut Vec<String>) {
    for id in correct_ids(out) {
        let locked: HashMap<String, u64> = out
            .trace
            .iter()
            .filter(|r| r.node == id && r.event_kind == "lock" && r.round >= 3)
            .filter_map(|r| field(&r.detail, "block").map(|b| (b.to_string(), r.time)))
            .collect();
        for (t, b, h) in commits(&out.trace, id) {
            match locked.get(&b) {
                Some(l) if t == l + 4 * DELTA => {}
                other => failures.push(format!("{tag}: node {id} height {h} committed at {t}, relayed at {other:?}")),
            }
        }
    }
}

fn summarize(label: &str, fails: &[String]) -> Result<(), String> {
    ensure(fails.is_empty(), || {
        format!("{} {label} failures, first: {}", fails.len(), fails[0])
    })
}

fn criterion_1(s: &SweepStats) -> Outcome {
    ensure(s.runs >= 1000, || format!("only {} runs", s.runs))?;
    summarize("safety", &s.safety_failures)?;
    ensure(s.elapsed <= 600.0, || format!("sweep took {:.0}s", s.elapsed))?;
    Ok(format!("{} runs, 0 violations, {:.1}s", s.runs, s.elapsed))
}

fn criterion_2(s: &SweepStats) -> Outcome {
    summarize("liveness", &s.liveness_failures)?;
    summarize("commit timing", &s.timing_failures)?;
    Ok(format!(
        "{} runs within budget, 4Δ commit timing exact on {} fault-free runs",
        s.runs + s.timing_checked,
        s.timing_checked
    ))
}

// ---- criterion 3 ------------------------------------------------------------

fn criterion_3() -> Outcome {
    let profiles = [
        ProfileKind::SilentLeader,
        ProfileKind::Equivocator,
        ProfileKind::StaleCommitAdvertiser,
        ProfileKind::VoteWithholder,
        ProfileKind::Crash,
    ];
    let mut checked = 0;
    let mut worst = 0;
    for n in NS {
        for profile in profiles {
            for seed in 0..8 {
                let mut sc = sweep_cell(n, profile, seed);
                sc.adversary = AdversaryConfig::new(profile).with_count(1);
                let (rep, out) = run(&sc)?;
                let correct = correct_ids(&out);
                let tag = format!("n={n} {profile:?} seed={seed}");
                ensure(rep.timing.records.len() == 1, || {
                    format!("{tag}: {} view changes", rep.timing.records.len())
                })?;
                let rec = &rep.timing.records[0];
                let v = rec.from_view;
                let qc = out
                    .trace
                    .iter()
                    .filter(|r| r.event_kind == "await_quit" && r.view == v && correct.contains(&r.node))
                    .map(|r| r.time)
                    .min()
                    .ok_or_else(|| format!("{tag}: no blame certificate in trace"))?;
                let resumed = out
                    .trace
                    .iter()
                    .filter(|r| r.event_kind == "propose" && r.view == v + 1 && r.round == 3)
                    .map(|r| r.time)
                    .min()
                    .ok_or_else(|| format!("{tag}: steady state never resumed"))?;
                ensure(rec.blame_qc_at == qc && rec.resumed_at == Some(resumed), || {
                    format!("{tag}: record {rec:?} disagrees with trace ({qc}, {resumed})")
                })?;
                let d = resumed - qc;
                ensure(d <= 21 * DELTA, || format!("{tag}: view change took {d} ticks"))?;
                worst = worst.max(d);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} view changes, longest {} ticks (≤ 21Δ = {})", worst, 21 * DELTA))
}

// ---- criterion 4 ------------------------------------------------------------

fn steady_counters(sc: &Scenario) -> Result<(f64, f64), String> {
    let (rep, out) = run(sc)?;
    ensure(rep.passed(), || format!("n={} run failed: {:?}", sc.n, rep.verdicts))?;
    let g = sc.topology_graph().map_err(|e| e.to_string())?;
    let d = degree_profile(&g).big_d_out as f64;
    let n = sc.n as f64;
    let leader = 1 % sc.n;
    let ledger: &TransmissionLedger = &out.ledger;
    ensure(!ledger.per_block.is_empty(), || "no steady blocks".into())?;
    for usage in ledger.per_block.values() {
        for (i, u) in usage.iter().enumerate() {
            let max_signs = if i == leader { 2 } else { 0 };
            ensure(u.signs <= max_signs, || format!("n={} node {i} signed {} per block", sc.n, u.signs))?;
            ensure(u.verifies <= 2, || format!("n={} node {i} verified {} per block", sc.n, u.verifies))?;
        }
        let tx: u64 = usage.iter().map(|u| u.transmissions()).sum();
        ensure(tx as f64 >= n && tx as f64 <= 2.0 * n * d, || {
            format!("n={} {} transmissions per block outside [{n}, {}]", sc.n, tx, 2.0 * n * d)
        })?;
    }
    let e = &rep.energy[&sc.medium].per_block_mj;
    let others: Vec<f64> = (0..sc.n).filter(|i| *i != leader).map(|i| e[i]).collect();
    let lo = others.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = others.iter().copied().fold(0.0, f64::max);
    Ok((lo, hi))
}

fn criterion_4() -> Outcome {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for n in 4..=13 {
        let mut sc = Scenario::ring(n, 5);
        sc.f = Some(1);
        sc.k = Some(2);
        let (a, b) = steady_counters(&sc)?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let mid = (lo + hi) / 2.0;
    ensure(hi - mid <= 0.05 * mid, || {
        format!("non-leader energy per block spans {lo:.1}..{hi:.1} mJ, more than ±5%")
    })?;
    Ok(format!("ring k=2 n=4..13: non-leader energy per block {lo:.1}..{hi:.1} mJ"))
}

// ---- criterion 5 ------------------------------------------------------------

fn criterion_5() -> Outcome {
    let ell = 20u64;
    let mut report = Vec::new();
    for n in NS {
        let mut sc = Scenario::ring(n, 11);
        sc.adversary = AdversaryConfig {
            length: Some(ell as usize),
            ..AdversaryConfig::new(ProfileKind::LongChainSpammer)
        };
        sc.trace = true;
        let (rep, out) = run(&sc)?;
        ensure(rep.passed(), || format!("n={n}: {:?}", rep.verdicts))?;
        ensure(rep.timing.records.len() == 1, || format!("n={n}: {} view changes", rep.timing.records.len()))?;
        let tx = TransmissionLedger::total(&out.ledger.view_change).transmissions();
        let cap = 4 * (n * n) as u64 * (ell + 1);
        ensure(tx <= cap, || format!("n={n}: {tx} view-change transmissions > {cap}"))?;
        let resumed = rep.timing.records[0].resumed_at.ok_or("no resume")?;
        for id in correct_ids(&out) {
            let c = commits(&out.trace, id);
            let before = c.iter().filter(|(_, _, h)| *h <= ell).count() as u64;
            let after = c.iter().filter(|(t, _, _)| *t >= resumed).count() as u64;
            ensure(before >= ell, || format!("n={n} node {id}: only {before} spammer blocks committed"))?;
            ensure(after >= ell, || format!("n={n} node {id}: only {after} blocks after the view change"))?;
        }
        report.push(format!("n={n}:{tx}/{cap}"));
    }
    Ok(format!("view-change transmissions {}", report.join(" ")))
}

// ---- criterion 6 ------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn psi(p: Protocol, n: usize, f: usize, k: usize, m: usize, medium: Medium, crypto: CryptoScheme, scope: Scope) -> Psi {
    let table = CostTable::builtin();
    let x = energy::bind(energy::structure(n, f, k, m), &table, medium, crypto, KcastPricing::Reliable).unwrap();
    energy::model(p, Fabric::Ring, scope).eval(&x).unwrap()
}

fn criterion_6() -> Outcome {
    let (n, f) = (13, 6);
    let k = f + 1;
    let e = psi(Protocol::Eesmr, n, f, k, 16, Medium::Ble, CryptoScheme::Rsa1024, Scope::Leader);
    let s = psi(Protocol::SyncHotStuff, n, f, k, 16, Medium::Ble, CryptoScheme::Rsa1024, Scope::Leader);
    let steady = s.b / e.b;
    let vc = e.v / s.v;
    ensure(s.b > e.b && (2.0..=4.0).contains(&steady), || format!("steady ratio {steady:.2}"))?;
    ensure((1.3..=3.0).contains(&vc), || format!("view-change ratio {vc:.2}"))?;
    Ok(format!("steady SyncHotStuff/EESMR = {steady:.2}, view change EESMR/SyncHotStuff = {vc:.2}"))
}

// ---- criterion 7 ------------------------------------------------------------

fn f_e_oracle(p: &Psi, baseline: f64) -> i64 {
    let mut w = -1i64;
    while (w + 1) as f64 * p.w + p.b <= baseline {
        w += 1;
    }
    w
}

/// Smallest V in 0..=N at which the sign of `cost_a - cost_b` departs from
/// its sign at V = 0, accumulating block by block.
fn parity_crossing(a: &Psi, b: &Psi, n: u64) -> Option<u64> {
    let diff = |v: u64| {
        let (mut ca, mut cb) = (0.0, 0.0);
        for i in 0..n {
            if i < v {
                ca += a.w;
                cb += b.w;
            } else {
                ca += a.b;
                cb += b.b;
            }
        }
        ca - cb
    };
    let s0 = diff(0).signum();
    (1..=n).find(|v| diff(*v).signum() != s0)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n_blocks = 200u64;
    let mut crossings = 0;
    for i in 0..20 {
        let n = rng.gen_range(5..=40);
        let f = (n - 1) / 2;
        let k = rng.gen_range(2..=(f + 1).min(n - 2));
        let m = rng.gen_range(0..=2048);
        let crypto = *CryptoScheme::ALL.choose(&mut rng).unwrap();
        let medium = *[Medium::Ble, Medium::Wifi].choose(&mut rng).unwrap();
        let base_medium = *[Medium::Wifi, Medium::FourG].choose(&mut rng).unwrap();
        let a = psi(Protocol::Eesmr, n, f, k, m, medium, crypto, Scope::Node);
        let b = psi(Protocol::SyncHotStuff, n, f, k, m, medium, crypto, Scope::Node);
        let baseline = psi(Protocol::TrustedBaseline, n, f, k, m, base_medium, crypto, Scope::Node).b;
        let tag = format!("vector {i} (n={n} k={k} m={m} {medium} {crypto:?})");

        let bound = energy::f_e_bound(&a, baseline).map_err(|e| format!("{tag}: {e}"))?;
        let sim = f_e_oracle(&a, baseline);
        ensure((bound - sim).abs() <= 1, || format!("{tag}: f_e_bound {bound} vs simulated {sim}"))?;

        let nu = energy::nu_f_bound(&a, &b).map_err(|e| format!("{tag}: {e}"))?;
        let step = 1.0 / n_blocks as f64;
        match parity_crossing(&a, &b, n_blocks) {
            Some(v) => {
                let at = v as f64 / n_blocks as f64;
                ensure((at - nu).abs() <= step, || format!("{tag}: parity at V/N = {at}, nu_f = {nu}"))?;
                crossings += 1;
            }
            None => ensure(!(step..=1.0 - step).contains(&nu), || {
                format!("{tag}: nu_f = {nu} inside (0, 1) but no parity crossing")
            })?,
        }
    }
    Ok(format!("20 vectors agree; {crossings} with a parity crossing inside N = {n_blocks}"))
}

// ---- criterion 8 ------------------------------------------------------------

/// Transitive closure among nodes outside `faulty`.
fn oracle_connected(h: &Hypergraph, faulty: &[bool]) -> bool {
    let n = h.nodes;
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for e in &h.edges {
        if faulty[e.s as usize] {
            continue;
        }
        for r in &e.r {
            if !faulty[*r as usize] {
                reach[e.s as usize][*r as usize] = true;
            }
        }
    }
    for m in 0..n {
        if faulty[m] {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                if reach[i][m] && reach[m][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n).all(|i| faulty[i] || (0..n).all(|j| faulty[j] || reach[i][j]))
}

fn oracle_certify(h: &Hypergraph, f: usize) -> bool {
    (0u32..1 << h.nodes)
        .filter(|s| s.count_ones() as usize == f)
        .all(|s| {
            let faulty: Vec<bool> = (0..h.nodes).map(|i| s & (1 << i) != 0).collect();
            oracle_connected(h, &faulty)
        })
}

fn random_hypergraph(rng: &mut ChaCha8Rng) -> Option<Hypergraph> {
    let n = rng.gen_range(2..=8u32);
    let mut edges = Vec::new();
    for s in 0..n {
        for _ in 0..rng.gen_range(1..=3) {
            let mut r: Vec<u32> = (0..n).filter(|j| *j != s && rng.gen_bool(0.5)).collect();
            if r.is_empty() {
                r.push((s + 1) % n);
            }
            if !edges.iter().any(|e: &Edge| e.s == s && e.r == r) {
                edges.push(Edge { s, r });
            }
        }
    }
    Hypergraph::new(n as usize, edges).ok()
}

fn check_graph(h: &Hypergraph, tag: &str) -> Result<usize, String> {
    let p = degree_profile(h);
    let nb = necessary_condition(&p);
    let widest = h.edges.iter().map(|e| e.r.len()).max().unwrap_or(0);
    for i in 0..h.nodes {
        ensure(p.dout[i] <= widest * p.dout_edges[i], || format!("{tag}: union bound fails at node {i}"))?;
    }
    let mut cases = 0;
    for f in 0..=h.nodes {
        let c = certify_f_connectivity(h, f).map_err(|e| format!("{tag}: {e}"))?;
        let o = oracle_certify(h, f);
        ensure(c.certified == o, || format!("{tag} f={f}: certify {} vs oracle {o}", c.certified))?;
        if c.certified && f + 2 <= h.nodes {
            ensure(f as i64 <= nb.f_nec, || {
                format!("{tag} f={f}: certified beyond necessary bounds {nb:?}")
            })?;
        }
        cases += 1;
    }
    Ok(cases)
}

fn criterion_8() -> Outcome {
    let mut cases = 0;
    for n in 2..=8 {
        for k in 1..n {
            let h = generate_topology(TopologyKind::RingKcast, n, k).map_err(|e| e.to_string())?;
            cases += check_graph(&h, &format!("ring n={n} k={k}"))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut graphs = 0;
    while graphs < 300 {
        if let Some(h) = random_hypergraph(&mut rng) {
            cases += check_graph(&h, &format!("random graph {graphs}"))?;
            graphs += 1;
        }
    }
    let three = Hypergraph::new(
        4,
        vec![
            Edge { s: 0, r: vec![1, 2] },
            Edge { s: 0, r: vec![2, 3] },
            Edge { s: 0, r: vec![1, 3] },
        ],
    )
    .map_err(|e| e.to_string())?;
    let w = validate_independence(&three).map_err(|e| e.to_string())?;
    ensure(matches!(&w, Some(w) if w.node == 0), || format!("three-edge example not flagged: {w:?}"))?;
    Ok(format!("{cases} (graph, f) cases agree with the reachability oracle; three-edge redundancy detected"))
}

// ---- criterion 9 ------------------------------------------------------------

fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let n = rng.gen_range(4..=13);
    let mut sc = Scenario::ring(n, rng.gen());
    let profiles: Vec<ProfileKind> = std::iter::once(ProfileKind::None)
        .chain(ProfileKind::SWEEP)
        .collect();
    sc.adversary = AdversaryConfig::new(*profiles.choose(rng).unwrap());
    sc.delivery = *DeliveryPolicy::ALL.choose(rng).unwrap();
    sc.n_blocks = rng.gen_range(10..=30);
    if n <= 7 && rng.gen_bool(0.3) {
        sc.topology = TopologySpec::Complete;
    }
    sc.trace = true;
    sc
}

fn fingerprint(sc: &Scenario) -> Result<(String, Vec<String>), String> {
    let (rep, out) = run(sc)?;
    Ok((rep.to_json(), out.trace.iter().map(|r| r.to_json_line()).collect()))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..50 {
        let sc = random_scenario(&mut rng);
        let replay = Scenario::from_json(&sc.to_json()).map_err(|e| e.to_string())?;
        let a = fingerprint(&sc)?;
        let b = fingerprint(&replay)?;
        ensure(!a.1.is_empty(), || format!("config {i}: empty trace"))?;
        ensure(a == b, || format!("config {i} (n={} seed={}) diverged on replay", sc.n, sc.seed))?;
    }
    Ok("50 configurations replay byte-identical".into())
}

// ---- criterion 10 -----------------------------------------------------------

fn criterion_10() -> Outcome {
    let mut sc = Scenario::ring(10, 1);
    sc.adversary = AdversaryConfig::new(ProfileKind::ForkingCoalition);
    sc.allow_overcorruption = true;
    ensure(Scenario::ring(10, 1).with_overrides(&["adversary=forking_coalition"]).and_then(|s| s.validate()).is_err(), || {
        "coalition accepted without allow_overcorruption".into()
    })?;
    let (a, _) = run(&sc)?;
    let (b, _) = run(&sc)?;
    let corrupt = a.correct.iter().filter(|c| !**c).count();
    ensure(corrupt == sc.fault_bound() + 1, || format!("{corrupt} corrupt nodes"))?;
    ensure(a.stop == StopReason::Violation && !a.verdicts.safety_family_pass(), || {
        format!("no safety violation: {:?}", a.verdicts)
    })?;
    let cx = a.verdicts.counterexample.clone().ok_or("no counterexample")?;
    ensure(a.to_json() == b.to_json(), || "counterexample not reproducible".into())?;
    Ok(format!("{} at t={} node {}: {}", cx.checker, cx.time, cx.node.0, cx.detail))
}

fn main() {
    let sweep = catch_unwind(run_sweep);
    let criteria: Vec<Criterion> = vec![
        (1, "safety sweep", Box::new(|| sweep.as_ref().map_err(|_| "sweep panicked".to_string()).and_then(criterion_1))),
        (2, "liveness and commit timing", Box::new(|| sweep.as_ref().map_err(|_| "sweep panicked".to_string()).and_then(criterion_2))),
        (3, "view-change duration", Box::new(criterion_3)),
        (4, "steady-state cost counters", Box::new(criterion_4)),
        (5, "view-change amortization", Box::new(criterion_5)),
        (6, "energy-model comparison", Box::new(criterion_6)),
        (7, "f_e and nu_f consistency", Box::new(criterion_7)),
        (8, "hypergraph oracles", Box::new(criterion_8)),
        (9, "determinism", Box::new(criterion_9)),
        (10, "checker has teeth", Box::new(criterion_10)),
    ];
    let mut results = BTreeMap::new();
    for (id, name, f) in &criteria {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match &r {
            Ok(msg) => println!("criterion {id:>2} PASS  {name}: {msg}"),
            Err(msg) => println!("criterion {id:>2} FAIL  {name}: {msg}"),
        }
        results.insert(*id, r.is_ok());
    }
    let failed: Vec<_> = results.iter().filter(|(_, ok)| !**ok).map(|(id, _)| *id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
