//! Parallel seed × profile sweeps.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{AdversaryConfig, ProfileKind};
use crate::error::ConfigError;
use crate::net::DeliveryPolicy;
use crate::report::run_scenario;
use crate::scenario::Scenario;

pub const THREADS_ENV: &str = "EESMR_LAB_THREADS";

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: Scenario,
    pub seeds: Range<u64>,
    /// Empty means fault-free runs under every delivery policy.
    pub profiles: Vec<ProfileKind>,
    /// Node counts to cover; empty keeps the base `n`.
    pub ns: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRun {
    pub n: usize,
    pub profile: ProfileKind,
    pub delivery: DeliveryPolicy,
    pub seed: u64,
    pub passed: bool,
    pub failed_checkers: Vec<String>,
    pub detail: Option<String>,
    pub min_committed: usize,
    /// Mean over correct nodes of steady-state energy per block, in mJ, on
    /// the scenario's medium.
    pub per_block_mj: f64,
    pub max_view_change_deltas: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub runs: usize,
    pub failures: Vec<SweepRun>,
    pub per_block_mj: Option<Percentiles>,
    /// Mean per-block energy for fault-free-or-faulty runs, by `n`.
    pub per_block_mj_by_n: BTreeMap<usize, f64>,
    pub max_view_change_deltas: Option<f64>,
    pub results: Vec<SweepRun>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn failed(v: &crate::checkers::Verdicts) -> Vec<String> {
    [
        ("safety", v.safety),
        ("liveness", v.liveness),
        ("extensibility", v.extensibility),
        ("lock_extends_commit", v.lock_extends_commit),
        ("commit_timing", v.commit_timing),
        ("view_change_bound", v.view_change_bound),
        ("idempotence", v.idempotence),
        ("complexity", v.complexity),
    ]
    .into_iter()
    .filter(|(_, x)| !x.ok())
    .map(|(n, _)| n.to_string())
    .collect()
}

/// The scenario for one sweep cell.
pub fn cell(base: &Scenario, n: usize, profile: ProfileKind, delivery: DeliveryPolicy, seed: u64) -> Scenario {
    let mut sc = base.clone();
    if sc.n != n {
        sc.n = n;
        sc.f = None;
        sc.k = None;
    }
    sc.seed = seed;
    sc.delivery = delivery;
    sc.trace = false;
    sc.adversary = AdversaryConfig {
        profile,
        ..base.adversary.clone()
    };
    sc
}

pub fn run_cell(sc: &Scenario) -> Result<SweepRun, ConfigError> {
    let (rep, _) = run_scenario(sc)?;
    let m = &rep.energy[&sc.medium];
    let correct: Vec<f64> = m
        .per_block_mj
        .iter()
        .zip(&rep.correct)
        .filter(|(_, c)| **c)
        .map(|(e, _)| *e)
        .collect();
    let per_block_mj = correct.iter().sum::<f64>() / correct.len().max(1) as f64;
    Ok(SweepRun {
        n: sc.n,
        profile: sc.adversary.profile,
        delivery: sc.delivery,
        seed: sc.seed,
        passed: rep.passed(),
        failed_checkers: failed(&rep.verdicts),
        detail: rep.verdicts.counterexample.as_ref().map(|v| v.detail.clone()),
        min_committed: rep
            .committed
            .iter()
            .zip(&rep.correct)
            .filter(|(_, c)| **c)
            .map(|(x, _)| *x)
            .min()
            .unwrap_or(0),
        per_block_mj,
        max_view_change_deltas: rep.timing.max_view_change_deltas,
    })
}

fn pool() -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = std::env::var(THREADS_ENV).ok().and_then(|s| s.parse::<usize>().ok()) {
        b = b.num_threads(t.max(1));
    }
    b.build().expect("thread pool")
}

pub fn aggregate(mut results: Vec<SweepRun>) -> SweepReport {
    results.sort_by(|a, b| {
        (a.n, a.profile as u8, a.delivery as u8, a.seed).cmp(&(b.n, b.profile as u8, b.delivery as u8, b.seed))
    });
    let failures: Vec<SweepRun> = results.iter().filter(|r| !r.passed).cloned().collect();
    let mut energies: Vec<f64> = results.iter().map(|r| r.per_block_mj).collect();
    energies.sort_by(f64::total_cmp);
    let per_block_mj = (!energies.is_empty()).then(|| Percentiles {
        p50: percentile(&energies, 50.0),
        p90: percentile(&energies, 90.0),
        p99: percentile(&energies, 99.0),
        max: *energies.last().unwrap(),
    });
    let mut by_n: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in &results {
        let e = by_n.entry(r.n).or_default();
        e.0 += r.per_block_mj;
        e.1 += 1;
    }
    SweepReport {
        runs: results.len(),
        failures,
        per_block_mj,
        per_block_mj_by_n: by_n.into_iter().map(|(n, (s, c))| (n, s / c as f64)).collect(),
        max_view_change_deltas: results
            .iter()
            .filter_map(|r| r.max_view_change_deltas)
            .fold(None, |a: Option<f64>, d| Some(a.map_or(d, |a| a.max(d)))),
        results,
    }
}

/// Runs every cell of the matrix. Configuration errors abort the sweep;
/// checker failures are collected in the report.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport, ConfigError> {
    let ns = if spec.ns.is_empty() {
        vec![spec.base.n]
    } else {
        spec.ns.clone()
    };
    let axes: Vec<(ProfileKind, DeliveryPolicy)> = if spec.profiles.is_empty() {
        DeliveryPolicy::ALL
            .into_iter()
            .map(|d| (ProfileKind::None, d))
            .collect()
    } else {
        spec.profiles
            .iter()
            .map(|p| (*p, spec.base.delivery))
            .collect()
    };
    let mut cells = Vec::new();
    for &n in &ns {
        for &(p, d) in &axes {
            for seed in spec.seeds.clone() {
                cells.push(cell(&spec.base, n, p, d, seed));
            }
        }
    }
    if let Some(first) = cells.first() {
        first.validate()?;
    }
    let results = pool().install(|| cells.par_iter().map(run_cell).collect::<Result<Vec<_>, _>>())?;
    Ok(aggregate(results))
}
