use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest as _, Sha256};

use super::delivery::DeliveryPolicy;
use super::ledger::{Bucket, TransmissionLedger};
use crate::checkers::{CheckerConstants, Monitor, MonitorConfig, Verdicts, ViewChangeRecord};
use crate::crypto::{Keyring, SigScheme};
use crate::hypergraph::Hypergraph;
use crate::protocol::{Dest, FaultHooks, Input, Node, Note, Output, ProtocolConfig, TimerId};
use crate::types::{Digest, MsgKind, NodeId, Payload, ProtocolMsg, Round, Time, View};

const TAIL: usize = 256;

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub protocol: Arc<ProtocolConfig>,
    pub topology: Hypergraph,
    /// One entry per node.
    pub hooks: Vec<FaultHooks>,
    pub delivery: DeliveryPolicy,
    pub seed: u64,
    pub scheme: SigScheme,
    /// Signature length charged on the wire instead of the simulated one.
    pub priced_sig_len: Option<usize>,
    pub target_blocks: u64,
    pub time_budget: Time,
    pub command_size: usize,
    pub trace: bool,
    pub checkers: bool,
    pub constants: CheckerConstants,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub time: Time,
    pub node: u32,
    pub event_kind: String,
    pub view: View,
    pub round: Round,
    pub detail: String,
}

impl TraceRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace record serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    TimeBudget,
    Violation,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeSummary {
    pub id: u32,
    pub correct: bool,
    pub committed: usize,
    pub view: View,
    pub signs: u64,
    pub verifies: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub end_time: Time,
    pub stop: StopReason,
    pub logs: Vec<Vec<Digest>>,
    pub nodes: Vec<NodeSummary>,
    pub ledger: TransmissionLedger,
    pub verdicts: Verdicts,
    pub view_changes: Vec<ViewChangeRecord>,
    pub trace: Vec<TraceRecord>,
    /// Last trace records before the run stopped, kept even with tracing off.
    pub trace_tail: Vec<TraceRecord>,
    pub events: u64,
}

enum Event {
    Start(usize),
    Deliver {
        to: usize,
        msg: Arc<ProtocolMsg>,
    },
    Timer(usize, TimerId),
}

/// Discrete-event engine. Events with equal due time fire in insertion order.
pub struct Engine {
    cfg: EngineConfig,
    correct: Vec<bool>,
    nodes: Vec<Node>,
    started: Vec<bool>,
    waiting: Vec<Vec<Arc<ProtocolMsg>>>,
    queue: BTreeMap<(Time, u64), Event>,
    seq: u64,
    now: Time,
    rng: ChaCha20Rng,
    ledger: TransmissionLedger,
    monitor: Monitor,
    trace: Vec<TraceRecord>,
    tail: VecDeque<TraceRecord>,
    ops: Vec<(u64, u64)>,
    events: u64,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Engine {
        let n = cfg.protocol.n;
        assert_eq!(cfg.hooks.len(), n, "one hook set per node");
        assert_eq!(cfg.topology.nodes, n, "topology size matches n");
        let keys = Keyring::new(cfg.scheme, n, cfg.seed);
        let correct: Vec<bool> = cfg.hooks.iter().map(|h| h.is_correct()).collect();
        let nodes = (0..n)
            .map(|i| {
                Node::new(
                    Arc::clone(&cfg.protocol),
                    keys.signer(NodeId(i as u32)),
                    cfg.hooks[i].clone(),
                )
            })
            .collect();
        let monitor = Monitor::new(MonitorConfig {
            protocol: Arc::clone(&cfg.protocol),
            correct: correct.clone(),
            target_blocks: cfg.target_blocks,
            constants: cfg.constants.clone(),
        });
        Engine {
            rng: ChaCha20Rng::seed_from_u64(cfg.seed),
            ledger: TransmissionLedger::new(n),
            correct,
            nodes,
            started: vec![false; n],
            waiting: vec![Vec::new(); n],
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            monitor,
            trace: Vec::new(),
            tail: VecDeque::new(),
            ops: vec![(0, 0); n],
            events: 0,
            cfg,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn correct(&self) -> &[bool] {
        &self.correct
    }

    fn push(&mut self, due: Time, ev: Event) {
        self.queue.insert((due, self.seq), ev);
        self.seq += 1;
    }

    fn commands(&self) -> Vec<Vec<u8>> {
        let count = (self.cfg.target_blocks as usize + 64) * self.cfg.protocol.batch_size.max(1);
        (0..count as u64)
            .map(|i| {
                let mut h = Sha256::new();
                h.update(self.cfg.seed.to_be_bytes());
                h.update(i.to_be_bytes());
                let out = h.finalize();
                out.iter().cycle().take(self.cfg.command_size).copied().collect()
            })
            .collect()
    }

    pub fn run(mut self) -> (RunOutcome, Vec<Node>) {
        let n = self.nodes.len();
        let cmds = self.commands();
        for i in 0..n {
            let out = self.nodes[i].handle(0, Input::Submit(cmds.clone()));
            self.absorb(i, out, None);
        }
        let delta = self.cfg.protocol.delta;
        for i in 0..n {
            let skew = self.rng.gen_range(0..=delta);
            self.push(skew, Event::Start(i));
        }

        let stop = loop {
            if self.monitor.violation().is_some() {
                break StopReason::Violation;
            }
            if self.target_reached() {
                break StopReason::TargetReached;
            }
            let Some((&(due, seq), _)) = self.queue.iter().next() else {
                break StopReason::TimeBudget;
            };
            if due > self.cfg.time_budget {
                break StopReason::TimeBudget;
            }
            let ev = self.queue.remove(&(due, seq)).expect("queued event");
            self.now = due;
            self.events += 1;
            self.step(ev);
        };
        self.finish(stop)
    }

    fn target_reached(&self) -> bool {
        (0..self.nodes.len())
            .filter(|i| self.correct[*i])
            .all(|i| self.nodes[i].log().len() as u64 >= self.cfg.target_blocks)
    }

    fn step(&mut self, ev: Event) {
        match ev {
            Event::Start(i) => {
                self.started[i] = true;
                self.dispatch(i, Input::Start, None);
                for m in std::mem::take(&mut self.waiting[i]) {
                    self.dispatch(i, Input::Deliver(&m), Some(&m));
                }
            }
            Event::Deliver { to, msg } => {
                if self.started[to] {
                    self.dispatch(to, Input::Deliver(&msg), Some(&msg));
                } else {
                    self.waiting[to].push(msg);
                }
            }
            Event::Timer(i, id) => self.dispatch(i, Input::Timer(id), None),
        }
    }

    fn dispatch(&mut self, i: usize, input: Input<'_>, delivered: Option<&ProtocolMsg>) {
        let out = self.nodes[i].handle(self.now, input);
        self.absorb(i, out, delivered);
        if self.cfg.checkers {
            self.monitor.after_event(self.now, &self.nodes[i]);
        }
    }

    fn steady_block(m: &ProtocolMsg) -> Option<Digest> {
        match m.payload() {
            Payload::Propose { block, .. } if m.kind() == MsgKind::Propose && m.round() >= 3 => {
                Some(block.digest())
            }
            _ => None,
        }
    }

    fn record(&mut self, rec: TraceRecord) {
        if self.tail.len() == TAIL {
            self.tail.pop_front();
        }
        self.tail.push_back(rec.clone());
        if self.cfg.trace {
            self.trace.push(rec);
        }
    }

    fn absorb(&mut self, i: usize, out: Output, delivered: Option<&ProtocolMsg>) {
        let id = NodeId(i as u32);
        let now = self.now;
        let view = self.nodes[i].view();

        for t in out.trace {
            self.record(TraceRecord {
                time: now,
                node: id.0,
                event_kind: t.kind.to_string(),
                view: t.view,
                round: t.round,
                detail: t.detail,
            });
        }

        // Crypto operations of this step.
        let signer = self.nodes[i].signer();
        let (signs, verifies) = (signer.sign_count(), signer.verify_count());
        let (prev_s, prev_v) = self.ops_seen(i);
        let mut ds = signs - prev_s;
        let mut dv = verifies - prev_v;
        self.set_ops_seen(i, signs, verifies);
        for note in &out.notes {
            if let Note::Proposed { block, .. } = note {
                let s = ds.min(2);
                ds -= s;
                self.ledger.record_ops(id, s, 0, Bucket::Steady(*block));
            }
        }
        if let Some(d) = delivered.and_then(Self::steady_block) {
            let v = dv.min(2);
            dv -= v;
            self.ledger.record_ops(id, 0, v, Bucket::Steady(d));
        }
        self.ledger.record_ops(id, ds, dv, Bucket::ViewChange);

        if self.cfg.checkers {
            for note in &out.notes {
                self.monitor.on_note(now, id, note);
            }
            for c in &out.commits {
                self.monitor.on_commit(now, id, view, c);
            }
        }

        for (tid, due) in out.timers {
            self.push(due.max(now), Event::Timer(i, tid));
        }

        let delta = self.cfg.protocol.delta;
        let actual_sig = self.nodes[i].signer().keyring().sig_len() as i64;
        for ob in out.sends {
            let msg = ob.msg;
            if self.cfg.checkers {
                self.monitor.on_send(now, id, &ob.dest, &msg);
            }
            let mut size = msg.encoded_len() as i64;
            if let Some(p) = self.cfg.priced_sig_len {
                size += msg.signature_count() as i64 * (p as i64 - actual_sig);
            }
            let bucket = match Self::steady_block(&msg) {
                Some(d) => Bucket::Steady(d),
                None => Bucket::ViewChange,
            };
            self.ledger.record_send(
                &self.cfg.topology,
                &self.correct,
                id,
                &ob.dest,
                msg.digest(),
                size.max(0) as u64,
                bucket,
            );
            let targets: Vec<usize> = match &ob.dest {
                Dest::All => (0..self.nodes.len()).collect(),
                Dest::To(x) => vec![x.index()],
                Dest::Group(g) => g.iter().map(|x| x.index()).collect(),
            };
            for to in targets {
                if to == i || to == msg.sender().index() || to >= self.nodes.len() {
                    continue;
                }
                let d = self.cfg.delivery.delay(
                    NodeId(to as u32),
                    self.correct[i],
                    self.correct[to],
                    delta,
                    &mut self.rng,
                );
                assert!(
                    d >= 1 && (d <= delta || !self.correct[i] || !self.correct[to]),
                    "correct-to-correct delay exceeds Δ"
                );
                self.push(
                    now + d,
                    Event::Deliver {
                        to,
                        msg: Arc::clone(&msg),
                    },
                );
            }
        }
    }

    fn ops_seen(&self, i: usize) -> (u64, u64) {
        self.ops.get(i).copied().unwrap_or((0, 0))
    }

    fn set_ops_seen(&mut self, i: usize, signs: u64, verifies: u64) {
        self.ops[i] = (signs, verifies);
    }

    fn finish(self, stop: StopReason) -> (RunOutcome, Vec<Node>) {
        let verdicts = self.monitor.finish(&self.ledger, &self.cfg.topology);
        let nodes: Vec<NodeSummary> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, nd)| NodeSummary {
                id: i as u32,
                correct: self.correct[i],
                committed: nd.log().len(),
                view: nd.view(),
                signs: nd.signer().sign_count(),
                verifies: nd.signer().verify_count(),
            })
            .collect();
        let outcome = RunOutcome {
            end_time: self.now,
            stop,
            logs: self.nodes.iter().map(|nd| nd.log().to_vec()).collect(),
            nodes,
            ledger: self.ledger,
            verdicts,
            view_changes: self.monitor.view_changes().to_vec(),
            trace: self.trace,
            trace_tail: self.tail.into_iter().collect(),
            events: self.events,
        };
        (outcome, self.nodes)
    }
}
