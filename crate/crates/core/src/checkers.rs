//! Run-time oracles: safety, liveness, unique extensibility, lock-extends-commit,
//! commit timing, view-change duration, idempotence and complexity counters.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::hypergraph::{degree_profile, Hypergraph};
use crate::net::TransmissionLedger;
use crate::protocol::{CommitRecord, Dest, Node, Note, ProtocolConfig};
use crate::types::{Digest, MsgKind, NodeId, Payload, ProtocolMsg, Time, View};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckerConstants {
    /// Steady-state transmissions per committed block may not exceed `c1·n·d`.
    pub c1: f64,
    /// View-change transmissions may not exceed `c2·n²·(blocks committed after + 1)`.
    pub c2: f64,
    /// View-change duration bound, in Δ.
    pub view_change_deltas: u64,
    /// Per-view-change allowance of the liveness budget, in Δ.
    pub liveness_view_change_deltas: u64,
}

impl Default for CheckerConstants {
    fn default() -> Self {
        CheckerConstants {
            c1: 2.0,
            c2: 4.0,
            view_change_deltas: 21,
            liveness_view_change_deltas: 21,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Nothing to check in this run.
    Vacuous,
}

impl Verdict {
    pub fn ok(self) -> bool {
        self != Verdict::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub checker: String,
    pub time: Time,
    pub node: NodeId,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViewChangeRecord {
    /// View whose blame certificate started the change.
    pub from_view: View,
    pub blame_qc_at: Time,
    /// First steady-state proposal of the next view, when its leader is correct.
    pub resumed_at: Option<Time>,
    pub duration_deltas: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdicts {
    pub safety: Verdict,
    pub liveness: Verdict,
    pub extensibility: Verdict,
    pub lock_extends_commit: Verdict,
    pub commit_timing: Verdict,
    pub view_change_bound: Verdict,
    pub idempotence: Verdict,
    pub complexity: Verdict,
    pub liveness_budget: Time,
    pub steady_transmissions_per_block: Option<f64>,
    pub view_change_transmissions: u64,
    pub counterexample: Option<Violation>,
}

impl Verdicts {
    /// Checkers that must pass in every run within the fault model.
    pub fn all_pass(&self) -> bool {
        [
            self.safety,
            self.liveness,
            self.extensibility,
            self.lock_extends_commit,
            self.commit_timing,
            self.view_change_bound,
            self.idempotence,
            self.complexity,
        ]
        .iter()
        .all(|v| v.ok())
    }

    pub fn safety_family_pass(&self) -> bool {
        self.safety.ok() && self.extensibility.ok() && self.lock_extends_commit.ok()
    }
}

#[derive(Clone, Debug)]
pub struct MonitorConfig {
    pub protocol: Arc<ProtocolConfig>,
    pub correct: Vec<bool>,
    pub target_blocks: u64,
    pub constants: CheckerConstants,
}

/// Global observer. Never feeds anything back into the run.
pub struct Monitor {
    cfg: MonitorConfig,
    logs: Vec<Vec<Digest>>,
    by_height: HashMap<u64, (Digest, NodeId)>,
    committed_in_view: BTreeMap<View, (u64, Digest)>,
    reached_at: Vec<Option<Time>>,
    relayed_at: HashMap<(u32, Digest), Time>,
    sends: HashMap<(u32, Digest, Vec<u32>), u32>,
    blame_qc_at: BTreeMap<View, Time>,
    view_changes: Vec<ViewChangeRecord>,
    first_blame_qc: Option<Time>,
    safety: Verdict,
    extensibility: Verdict,
    lock_extends_commit: Verdict,
    commit_timing: Verdict,
    view_change_bound: Verdict,
    idempotence: Verdict,
    violation: Option<Violation>,
}

fn dest_key(d: &Dest) -> Vec<u32> {
    match d {
        Dest::All => vec![u32::MAX],
        Dest::To(x) => vec![x.0],
        Dest::Group(g) => g.iter().map(|x| x.0).collect(),
    }
}

impl Monitor {
    pub fn new(cfg: MonitorConfig) -> Monitor {
        let n = cfg.correct.len();
        Monitor {
            cfg,
            logs: vec![Vec::new(); n],
            by_height: HashMap::new(),
            committed_in_view: BTreeMap::new(),
            reached_at: vec![None; n],
            relayed_at: HashMap::new(),
            sends: HashMap::new(),
            blame_qc_at: BTreeMap::new(),
            view_changes: Vec::new(),
            first_blame_qc: None,
            safety: Verdict::Pass,
            extensibility: Verdict::Vacuous,
            lock_extends_commit: Verdict::Pass,
            commit_timing: Verdict::Vacuous,
            view_change_bound: Verdict::Vacuous,
            idempotence: Verdict::Pass,
            violation: None,
        }
    }

    pub fn violation(&self) -> Option<&Violation> {
        self.violation.as_ref()
    }

    pub fn view_changes(&self) -> &[ViewChangeRecord] {
        &self.view_changes
    }

    pub fn logs(&self) -> &[Vec<Digest>] {
        &self.logs
    }

    fn is_correct(&self, i: NodeId) -> bool {
        self.cfg.correct[i.index()]
    }

    fn delta(&self) -> Time {
        self.cfg.protocol.delta
    }

    fn fail(&mut self, checker: &str, time: Time, node: NodeId, detail: String) {
        if self.violation.is_none() {
            self.violation = Some(Violation {
                checker: checker.to_string(),
                time,
                node,
                detail,
            });
        }
    }

    pub fn liveness_budget(&self) -> Time {
        let p = &self.cfg.protocol;
        self.cfg.target_blocks * p.round_period
            + (p.f as u64 + 1) * self.cfg.constants.liveness_view_change_deltas * p.delta
    }

    pub fn on_send(&mut self, now: Time, node: NodeId, dest: &Dest, msg: &ProtocolMsg) {
        if !self.is_correct(node) {
            return;
        }
        let c = self
            .sends
            .entry((node.0, msg.digest(), dest_key(dest)))
            .or_default();
        *c += 1;
        if *c > 1 {
            self.idempotence = Verdict::Fail;
            self.fail(
                "idempotence",
                now,
                node,
                format!("message {} sent twice", msg.digest().short()),
            );
        }
        if let Payload::Propose { block, .. } = msg.payload() {
            if msg.round() >= 3 && msg.kind() == MsgKind::Propose {
                self.relayed_at.entry((node.0, block.digest())).or_insert(now);
            }
        }
    }

    pub fn on_note(&mut self, now: Time, node: NodeId, note: &Note) {
        if !self.is_correct(node) {
            return;
        }
        match note {
            Note::BlameQc { view } => {
                if !self.blame_qc_at.contains_key(view) {
                    self.blame_qc_at.insert(*view, now);
                    self.first_blame_qc.get_or_insert(now);
                    self.view_changes.push(ViewChangeRecord {
                        from_view: *view,
                        blame_qc_at: now,
                        resumed_at: None,
                        duration_deltas: None,
                    });
                }
            }
            Note::Proposed { view, round, .. } => {
                if *round != 3 || *view < 2 {
                    return;
                }
                let Some(start) = self.blame_qc_at.get(&(view - 1)).copied() else {
                    return;
                };
                let delta = self.delta();
                let bound = self.cfg.constants.view_change_deltas * delta;
                let rec = self
                    .view_changes
                    .iter_mut()
                    .find(|r| r.from_view == view - 1);
                if let Some(rec) = rec {
                    if rec.resumed_at.is_some() {
                        return;
                    }
                    rec.resumed_at = Some(now);
                    rec.duration_deltas = Some((now - start) as f64 / delta as f64);
                }
                if now - start > bound {
                    self.view_change_bound = Verdict::Fail;
                    self.fail(
                        "view_change_bound",
                        now,
                        node,
                        format!("view {} resumed {} ticks after blame certificate", view, now - start),
                    );
                } else if self.view_change_bound == Verdict::Vacuous {
                    self.view_change_bound = Verdict::Pass;
                }
            }
            Note::EnteredView { .. } | Note::Equivocation { .. } => {}
        }
    }

    pub fn on_commit(&mut self, now: Time, node: NodeId, view: View, rec: &CommitRecord) {
        if !self.is_correct(node) {
            return;
        }
        let b = &rec.block;
        let h = b.height();
        let d = b.digest();
        let i = node.index();
        let len = self.logs[i].len() as u64;
        if h <= len {
            if self.logs[i][h as usize - 1] != d {
                self.safety = Verdict::Fail;
                self.fail(
                    "safety",
                    now,
                    node,
                    format!(
                        "log rewrite at height {}: {} replaced by {}",
                        h,
                        self.logs[i][h as usize - 1].short(),
                        d.short()
                    ),
                );
            }
            return;
        }
        if h != len + 1 {
            self.safety = Verdict::Fail;
            self.fail("safety", now, node, format!("log gap: height {} after {}", h, len));
            return;
        }
        let expected_parent = self.logs[i].last().copied();
        if let Some(p) = expected_parent {
            if b.parent() != p {
                self.safety = Verdict::Fail;
                self.fail(
                    "safety",
                    now,
                    node,
                    format!("block {} at height {} does not extend the log", d.short(), h),
                );
            }
        }
        self.logs[i].push(d);
        match self.by_height.get(&h) {
            Some((other, who)) if *other != d => {
                let who = *who;
                let other = *other;
                self.safety = Verdict::Fail;
                self.fail(
                    "safety",
                    now,
                    node,
                    format!(
                        "height {}: {} committed {} but {} committed {}",
                        h,
                        node,
                        d.short(),
                        who,
                        other.short()
                    ),
                );
            }
            Some(_) => {}
            None => {
                self.by_height.insert(h, (d, node));
            }
        }
        let e = self.committed_in_view.entry(view).or_insert((h, d));
        if h > e.0 {
            *e = (h, d);
        }
        if let Some(armed) = rec.timer_armed_at {
            let four = 4 * self.delta();
            let relay = self.relayed_at.get(&(node.0, d)).copied();
            if now - armed != four || relay.is_some_and(|t| t != armed) {
                self.commit_timing = Verdict::Fail;
                self.fail(
                    "commit_timing",
                    now,
                    node,
                    format!("commit of {} at {} armed at {} relayed at {:?}", d.short(), now, armed, relay),
                );
            } else if self.commit_timing == Verdict::Vacuous {
                self.commit_timing = Verdict::Pass;
            }
        }
        if self.logs[i].len() as u64 >= self.cfg.target_blocks && self.reached_at[i].is_none() {
            self.reached_at[i] = Some(now);
        }
    }

    /// Invariants over one correct node's state after it handled an event.
    pub fn after_event(&mut self, now: Time, node: &Node) {
        let id = node.id();
        if !self.is_correct(id) || node.is_crashed() {
            return;
        }
        let store = node.store();
        let lock = node.locked();
        if !store.extends(&lock, &node.committed_tip()) {
            self.lock_extends_commit = Verdict::Fail;
            self.fail(
                "lock_extends_commit",
                now,
                id,
                format!("lock {} does not extend commit {}", lock.short(), node.committed_tip().short()),
            );
        }
        let best = self
            .committed_in_view
            .range(..node.view())
            .map(|(_, x)| *x)
            .max_by_key(|x| x.0);
        if let Some((h, d)) = best {
            let ok = store.ancestor_at(&lock, h).map(|b| b.digest()) == Some(d);
            if !ok {
                self.extensibility = Verdict::Fail;
                self.fail(
                    "extensibility",
                    now,
                    id,
                    format!("lock {} in view {} does not extend earlier commit {}", lock.short(), node.view(), d.short()),
                );
            } else if self.extensibility == Verdict::Vacuous {
                self.extensibility = Verdict::Pass;
            }
        }
    }

    pub fn finish(&self, ledger: &TransmissionLedger, topo: &Hypergraph) -> Verdicts {
        let n = self.cfg.correct.len();
        let budget = self.liveness_budget();
        let live = (0..n)
            .filter(|i| self.cfg.correct[*i])
            .all(|i| self.reached_at[i].is_some_and(|t| t <= budget));
        let liveness = if live { Verdict::Pass } else { Verdict::Fail };

        // Complexity, measured on the longest correct log.
        let reference = (0..n)
            .filter(|i| self.cfg.correct[*i])
            .max_by_key(|i| self.logs[*i].len())
            .map(|i| &self.logs[i]);
        let steady_total = TransmissionLedger::total(&ledger.steady).transmissions();
        let steady_blocks = reference
            .map(|l| l.iter().filter(|d| ledger.per_block.contains_key(*d)).count())
            .unwrap_or(0);
        let d = degree_profile(topo).d_out.max(1) as f64;
        let nf = n as f64;
        let per_block = (steady_blocks > 0).then(|| steady_total as f64 / steady_blocks as f64);
        let mut complexity = Verdict::Pass;
        if let Some(p) = per_block {
            if p > self.cfg.constants.c1 * nf * d {
                complexity = Verdict::Fail;
            }
        }
        let vc = TransmissionLedger::total(&ledger.view_change).transmissions();
        let after = match (self.first_blame_qc, reference) {
            (Some(_), Some(l)) => {
                let first_vc_height = self.committed_after_first_vc_height();
                l.len().saturating_sub(first_vc_height) as f64
            }
            _ => 0.0,
        };
        if vc as f64 > self.cfg.constants.c2 * nf * nf * (after + 1.0) {
            complexity = Verdict::Fail;
        }

        Verdicts {
            safety: self.safety,
            liveness,
            extensibility: self.extensibility,
            lock_extends_commit: self.lock_extends_commit,
            commit_timing: self.commit_timing,
            view_change_bound: self.view_change_bound,
            idempotence: self.idempotence,
            complexity,
            liveness_budget: budget,
            steady_transmissions_per_block: per_block,
            view_change_transmissions: vc,
            counterexample: self.violation.clone(),
        }
    }

    /// Highest height committed by any correct node in a view that ended
    /// with the first blame certificate.
    fn committed_after_first_vc_height(&self) -> usize {
        let Some((v, _)) = self.blame_qc_at.iter().next() else {
            return 0;
        };
        self.committed_in_view
            .range(..=*v)
            .map(|(_, x)| x.0 as usize)
            .max()
            .unwrap_or(0)
    }
}
