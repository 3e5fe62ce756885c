//! Run reports.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::checkers::{Verdicts, ViewChangeRecord};
use crate::energy::{ledger_to_energy, CostTable, Medium};
use crate::error::ConfigError;
use crate::net::{Engine, RunOutcome, StopReason, TransmissionLedger, Usage};
use crate::scenario::Scenario;
use crate::types::Time;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub end_time: Time,
    pub events: u64,
    pub view_changes: usize,
    pub max_view_change_deltas: Option<f64>,
    pub records: Vec<ViewChangeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerTotals {
    pub all: Usage,
    pub steady: Usage,
    pub view_change: Usage,
    pub steady_blocks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergySummary {
    /// Total energy per node, in mJ.
    pub per_node_mj: Vec<f64>,
    /// Mean steady-state energy per proposed block, per node, in mJ.
    pub per_block_mj: Vec<f64>,
    pub view_change_mj: Vec<f64>,
    pub extrapolated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub stop: StopReason,
    pub committed: Vec<usize>,
    pub correct: Vec<bool>,
    pub verdicts: Verdicts,
    pub energy: BTreeMap<Medium, EnergySummary>,
    pub timing: Timing,
    pub ledger: LedgerTotals,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdicts.all_pass()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn mj(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    xs.map(|j| j * 1000.0).collect()
}

fn energy(sc: &Scenario, ledger: &TransmissionLedger, table: &CostTable) -> BTreeMap<Medium, EnergySummary> {
    Medium::ALL
        .into_iter()
        .map(|m| {
            let e = ledger_to_energy(ledger, table, m, sc.crypto, sc.kcast_pricing)
                .expect("validated scenario prices on the builtin table");
            let s = EnergySummary {
                per_node_mj: mj(e.per_node.iter().map(|x| x.total)),
                per_block_mj: mj(e.per_block.iter().copied()),
                view_change_mj: mj(e.view_change.iter().map(|x| x.total)),
                extrapolated: e.extrapolated,
            };
            (m, s)
        })
        .collect()
}

pub fn build_report(sc: &Scenario, out: &RunOutcome) -> RunReport {
    let table = CostTable::builtin();
    let max_vc = out
        .view_changes
        .iter()
        .filter_map(|r| r.duration_deltas)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    RunReport {
        scenario: sc.clone(),
        stop: out.stop,
        committed: out.nodes.iter().map(|s| s.committed).collect(),
        correct: out.nodes.iter().map(|s| s.correct).collect(),
        verdicts: out.verdicts.clone(),
        energy: energy(sc, &out.ledger, &table),
        timing: Timing {
            end_time: out.end_time,
            events: out.events,
            view_changes: out.view_changes.len(),
            max_view_change_deltas: max_vc,
            records: out.view_changes.clone(),
        },
        ledger: LedgerTotals {
            all: TransmissionLedger::total(&out.ledger.nodes),
            steady: TransmissionLedger::total(&out.ledger.steady),
            view_change: TransmissionLedger::total(&out.ledger.view_change),
            steady_blocks: out.ledger.per_block.len(),
        },
    }
}

/// Validates and runs one scenario.
pub fn run_scenario(sc: &Scenario) -> Result<(RunReport, RunOutcome), ConfigError> {
    let cfg = sc.engine_config()?;
    let (out, _) = Engine::new(cfg).run();
    Ok((build_report(sc, &out), out))
}
