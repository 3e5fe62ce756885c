use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use super::helpers::{
    create_proposal, form_qc, lock_compare, make_msg, matching_qc, verify_msg, verify_qc,
};
use super::{
    CommitRecord, Dest, FaultHooks, Input, Note, Outbound, Output, Phase, ProtocolConfig,
    QuitStage, TimerId, TimerKind, TraceEvent,
};
use crate::chain::{ChainStore, Inserted};
use crate::codec::Canonical;
use crate::crypto::Signer;
use crate::types::{
    Block, Digest, MsgKind, NodeId, Payload, ProtocolMsg, QuorumCert, Round, Time, View,
};

/// One replica. Every input is processed to completion before the next one;
/// messages the node addresses to itself are handled in the same step.
pub struct Node {
    id: NodeId,
    cfg: Arc<ProtocolConfig>,
    signer: Signer,
    coalition: Vec<Signer>,
    hooks: FaultHooks,
    store: ChainStore,
    now: Time,
    started: bool,
    crashed: bool,

    v_cur: View,
    r_cur: Round,
    phase: Phase,
    b_lck: Digest,
    b_com: Digest,
    log: Vec<Digest>,
    txpool: VecDeque<Vec<u8>>,
    committed_cmds: HashSet<Vec<u8>>,

    timers: BTreeMap<u64, (TimerKind, View)>,
    next_timer: u64,
    commit_timers: BTreeMap<Digest, (u64, Time)>,
    blame_timer: Option<u64>,

    seen_proposals: BTreeMap<Round, ProtocolMsg>,
    equivocation: bool,
    proof_sent: bool,
    blamed: bool,
    blames: BTreeMap<NodeId, ProtocolMsg>,
    my_update: Option<Digest>,
    certifies: BTreeMap<NodeId, ProtocolMsg>,
    own_qc_formed: bool,
    commit_qc: Option<(Option<QuorumCert>, Digest)>,
    statuses: BTreeMap<NodeId, ProtocolMsg>,
    status_deadline_passed: bool,
    nvp: Option<ProtocolMsg>,
    votes: BTreeMap<NodeId, ProtocolMsg>,
    round2_sent: bool,
    proposals_made: usize,

    sent: HashSet<Digest>,
    handled: HashSet<Digest>,
    verified: HashSet<Digest>,
    verified_qcs: HashSet<Digest>,
    buffered: Vec<ProtocolMsg>,
    deferred: Vec<(Digest, ProtocolMsg)>,
    sync_asked: HashSet<(Digest, NodeId)>,
    sync_served: HashSet<(NodeId, View, Round)>,

    inbox: VecDeque<ProtocolMsg>,
    dirty: bool,
    out: Output,
}

impl Node {
    pub fn new(cfg: Arc<ProtocolConfig>, signer: Signer, hooks: FaultHooks) -> Node {
        let store = ChainStore::new();
        let g = store.genesis().digest();
        let coalition = hooks
            .coalition
            .iter()
            .map(|id| signer.keyring().signer(*id))
            .collect();
        Node {
            id: signer.id(),
            cfg,
            signer,
            coalition,
            hooks,
            store,
            now: 0,
            started: false,
            crashed: false,
            v_cur: 1,
            r_cur: 3,
            phase: Phase::SteadyState,
            b_lck: g,
            b_com: g,
            log: Vec::new(),
            txpool: VecDeque::new(),
            committed_cmds: HashSet::new(),
            timers: BTreeMap::new(),
            next_timer: 0,
            commit_timers: BTreeMap::new(),
            blame_timer: None,
            seen_proposals: BTreeMap::new(),
            equivocation: false,
            proof_sent: false,
            blamed: false,
            blames: BTreeMap::new(),
            my_update: None,
            certifies: BTreeMap::new(),
            own_qc_formed: false,
            commit_qc: None,
            statuses: BTreeMap::new(),
            status_deadline_passed: false,
            nvp: None,
            votes: BTreeMap::new(),
            round2_sent: false,
            proposals_made: 0,
            sent: HashSet::new(),
            handled: HashSet::new(),
            verified: HashSet::new(),
            verified_qcs: HashSet::new(),
            buffered: Vec::new(),
            deferred: Vec::new(),
            sync_asked: HashSet::new(),
            sync_served: HashSet::new(),
            inbox: VecDeque::new(),
            dirty: false,
            out: Output::default(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }
    pub fn view(&self) -> View {
        self.v_cur
    }
    pub fn round(&self) -> Round {
        self.r_cur
    }
    pub fn phase(&self) -> Phase {
        self.phase
    }
    pub fn locked(&self) -> Digest {
        self.b_lck
    }
    pub fn committed_tip(&self) -> Digest {
        self.b_com
    }
    /// Committed digests; index `h - 1` holds height `h`.
    pub fn log(&self) -> &[Digest] {
        &self.log
    }
    pub fn store(&self) -> &ChainStore {
        &self.store
    }
    pub fn signer(&self) -> &Signer {
        &self.signer
    }
    pub fn hooks(&self) -> &FaultHooks {
        &self.hooks
    }
    pub fn is_crashed(&self) -> bool {
        self.crashed
    }
    pub fn txpool_len(&self) -> usize {
        self.txpool.len()
    }
    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }
    pub fn leader(&self, v: View) -> NodeId {
        self.cfg.leader(v)
    }
    fn is_leader(&self) -> bool {
        self.cfg.leader(self.v_cur) == self.id
    }
    fn quorum(&self) -> usize {
        self.cfg.quorum()
    }
    fn delta(&self) -> Time {
        self.cfg.delta
    }

    /// Processes one input at simulated time `now`.
    pub fn handle(&mut self, now: Time, input: Input<'_>) -> Output {
        self.now = now;
        self.check_crash();
        if self.crashed {
            return Output::default();
        }
        match input {
            Input::Start => {
                if !self.started {
                    self.started = true;
                    self.trace("start", String::new());
                    self.enter_steady_round();
                }
            }
            Input::Deliver(m) => {
                if self.hooks.duplicate && !self.handled.contains(&m.digest()) {
                    self.emit(Dest::All, m.clone());
                }
                self.on_message(m.clone());
            }
            Input::Timer(id) => self.on_timer(id),
            Input::Submit(cmds) => self.txpool.extend(cmds),
        }
        self.pump();
        std::mem::take(&mut self.out)
    }

    fn pump(&mut self) {
        loop {
            if self.crashed {
                self.inbox.clear();
                return;
            }
            if let Some(m) = self.inbox.pop_front() {
                self.on_message(m);
                continue;
            }
            if self.dirty {
                self.dirty = false;
                let b = std::mem::take(&mut self.buffered);
                if b.is_empty() {
                    continue;
                }
                self.inbox.extend(b);
                continue;
            }
            break;
        }
    }

    fn check_crash(&mut self) {
        if let Some((v, r)) = self.hooks.crash_at {
            if !self.crashed && (self.v_cur, self.r_cur) >= (v, r) {
                self.crashed = true;
                self.trace("crash", String::new());
            }
        }
    }

    // ---- plumbing -------------------------------------------------------

    fn trace(&mut self, kind: &'static str, detail: String) {
        self.out.trace.push(TraceEvent {
            kind,
            view: self.v_cur,
            round: self.r_cur,
            detail,
        });
    }

    fn emit(&mut self, dest: Dest, msg: ProtocolMsg) {
        let msg = Arc::new(msg);
        if self.hooks.duplicate {
            self.out.sends.push(Outbound {
                dest: dest.clone(),
                msg: Arc::clone(&msg),
            });
        }
        self.out.sends.push(Outbound { dest, msg });
    }

    fn sign(&mut self, payload: Payload, round: Round) -> ProtocolMsg {
        let m = make_msg(&mut self.signer, payload, self.v_cur, round);
        self.verified.insert(m.digest());
        m
    }

    /// Broadcasts `m` unless this node already sent it.
    fn broadcast_once(&mut self, m: &ProtocolMsg) -> bool {
        if !self.sent.insert(m.digest()) {
            return false;
        }
        self.emit(Dest::All, m.clone());
        true
    }

    /// Broadcasts an own message and processes it locally.
    fn publish(&mut self, m: ProtocolMsg) {
        self.broadcast_once(&m);
        self.inbox.push_back(m);
    }

    fn send_to(&mut self, to: NodeId, m: ProtocolMsg) {
        if to == self.id {
            self.inbox.push_back(m);
        } else {
            self.sent.insert(m.digest());
            self.emit(Dest::To(to), m);
        }
    }

    fn done(&mut self, m: &ProtocolMsg) {
        self.handled.insert(m.digest());
    }

    fn buffer(&mut self, m: ProtocolMsg) {
        self.buffered.push(m);
    }

    fn arm(&mut self, kind: TimerKind, after: Time) -> u64 {
        let id = self.next_timer;
        self.next_timer += 1;
        self.timers.insert(id, (kind, self.v_cur));
        self.out.timers.push((TimerId(id), self.now + after));
        id
    }

    fn reset_blame_timer(&mut self, after: Time) {
        if let Some(old) = self.blame_timer.take() {
            self.timers.remove(&old);
        }
        self.blame_timer = Some(self.arm(TimerKind::Blame, after));
    }

    fn cancel_blame_timer(&mut self) {
        if let Some(old) = self.blame_timer.take() {
            self.timers.remove(&old);
        }
    }

    fn cancel_commit_timers(&mut self) {
        if self.commit_timers.is_empty() {
            return;
        }
        let n = self.commit_timers.len();
        for (_, (id, _)) in std::mem::take(&mut self.commit_timers) {
            self.timers.remove(&id);
        }
        self.trace("cancel_commit_timers", format!("count={n}"));
    }

    fn verify_cached(&mut self, m: &ProtocolMsg) -> bool {
        if self.verified.contains(&m.digest()) {
            return true;
        }
        if verify_msg(&mut self.signer, m) {
            self.verified.insert(m.digest());
            true
        } else {
            false
        }
    }

    fn qc_valid(&mut self, qc: &QuorumCert) -> bool {
        let key = Digest::of(&qc.to_canonical_bytes());
        if self.verified_qcs.contains(&key) {
            return true;
        }
        if verify_qc(&mut self.signer, qc, self.cfg.quorum()).is_ok() {
            self.verified_qcs.insert(key);
            true
        } else {
            false
        }
    }

    fn insert_block(&mut self, b: Block) -> Inserted {
        let res = self.store.insert(b);
        if let Inserted::Stored(_) = &res {
            if !self.deferred.is_empty() {
                let (ready, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.deferred)
                    .into_iter()
                    .partition(|(d, _)| self.store.contains(d));
                self.deferred = waiting;
                self.inbox.extend(ready.into_iter().map(|(_, m)| m));
            }
        }
        res
    }

    /// Makes sure `block` and its ancestry are stored. Otherwise asks the
    /// message sender for the missing chain and parks `m` until it arrives.
    fn ensure_block(&mut self, block: &Block, m: &ProtocolMsg) -> bool {
        match self.insert_block(block.clone()) {
            Inserted::Stored(_) | Inserted::AlreadyKnown => true,
            Inserted::Pending { missing } => {
                if !block.is_genesis() {
                    self.request_sync(missing, m.sender());
                    self.deferred.push((block.digest(), m.clone()));
                } else {
                    self.done(m);
                }
                false
            }
        }
    }

    fn request_sync(&mut self, want: Digest, from: NodeId) {
        if from == self.id || !self.sync_asked.insert((want, from)) {
            return;
        }
        let frontier = self.b_com;
        let m = self.sign(Payload::SyncRequest { want, frontier }, self.r_cur);
        self.trace("sync_request", format!("want={} from={}", want.short(), from));
        self.send_to(from, m);
    }

    fn reset_view_state(&mut self) {
        self.seen_proposals.clear();
        self.equivocation = false;
        self.proof_sent = false;
        self.blamed = false;
        self.blames.clear();
        self.my_update = None;
        self.certifies.clear();
        self.own_qc_formed = false;
        self.statuses.clear();
        self.status_deadline_passed = false;
        self.nvp = None;
        self.votes.clear();
        self.round2_sent = false;
        self.proposals_made = 0;
    }

    // ---- steady state ---------------------------------------------------

    fn enter_steady_round(&mut self) {
        self.phase = Phase::SteadyState;
        self.check_crash();
        if self.crashed {
            return;
        }
        self.reset_blame_timer(4 * self.delta());
        self.dirty = true;
        if let Some((v, r)) = self.hooks.blame_at {
            if v == self.v_cur && r == self.r_cur {
                self.send_blame();
            }
        }
        if !self.is_leader() || self.hooks.mute_leader {
            return;
        }
        if let Some(limit) = self.hooks.burst {
            if self.proposals_made < limit {
                self.propose();
            }
            return;
        }
        if self.r_cur == 3 {
            self.propose();
        } else {
            let r = self.r_cur;
            self.arm(TimerKind::ProposeTick(r), self.cfg.round_period);
        }
    }

    fn take_commands(&mut self) -> Vec<Vec<u8>> {
        let mut cmds = Vec::new();
        while cmds.len() < self.cfg.batch_size {
            match self.txpool.pop_front() {
                Some(c) if self.committed_cmds.contains(&c) => continue,
                Some(c) => cmds.push(c),
                None => break,
            }
        }
        cmds
    }

    fn propose(&mut self) {
        let cmds = self.take_commands();
        let (v, r) = (self.v_cur, self.r_cur);
        let block = match create_proposal(&self.store, &self.b_lck, cmds, self.id, v, r) {
            Ok(b) => b,
            Err(_) => return,
        };
        self.proposals_made += 1;
        let d = block.digest();
        if self.hooks.equivocate_at == Some(r) {
            let twin = Block::new(
                block.height(),
                block.parent(),
                block.contents().to_vec(),
                self.id,
                v,
                r,
                Some(b"twin".to_vec()),
            );
            let m1 = self.sign(
                Payload::Propose {
                    block,
                    justify: None,
                },
                r,
            );
            let m2 = self.sign(
                Payload::Propose {
                    block: twin,
                    justify: None,
                },
                r,
            );
            let others: Vec<NodeId> = (0..self.cfg.n as u32)
                .map(NodeId)
                .filter(|x| *x != self.id)
                .collect();
            let (a, b) = others.split_at(others.len() / 2);
            self.sent.insert(m1.digest());
            self.sent.insert(m2.digest());
            self.emit(Dest::Group(a.to_vec()), m1.clone());
            self.emit(Dest::Group(b.to_vec()), m2);
            self.trace("equivocate", format!("round={r}"));
            self.inbox.push_back(m1);
        } else {
            let m = self.sign(
                Payload::Propose {
                    block,
                    justify: None,
                },
                r,
            );
            self.trace("propose", format!("block={}", d.short()));
            self.publish(m);
        }
        self.out.notes.push(Note::Proposed {
            view: v,
            round: r,
            block: d,
        });
    }

    fn on_message(&mut self, m: ProtocolMsg) {
        if self.crashed || self.handled.contains(&m.digest()) {
            return;
        }
        if !self.verify_cached(&m) {
            self.done(&m);
            return;
        }
        match m.kind() {
            MsgKind::Propose => self.on_propose(m),
            MsgKind::Blame => self.on_blame(m),
            MsgKind::BlameQc => self.on_blame_qc(m),
            MsgKind::CommitUpdate => self.on_commit_update(m),
            MsgKind::Certify => self.on_certify(m),
            MsgKind::CommitQc => self.on_commit_qc(m),
            MsgKind::NewViewProposal => self.on_new_view_proposal(m),
            MsgKind::VoteMsg => self.on_vote(m),
            MsgKind::SyncRequest => self.on_sync_request(m),
            MsgKind::SyncResponse => self.on_sync_response(m),
        }
    }

    /// `Some(true)` to continue with the message, `Some(false)` when it was
    /// buffered, `None` when it was dropped.
    fn gate_view(&mut self, m: &ProtocolMsg) -> Option<bool> {
        if m.view() > self.v_cur {
            self.buffer(m.clone());
            return Some(false);
        }
        if m.view() < self.v_cur {
            self.done(m);
            return None;
        }
        Some(true)
    }

    fn on_propose(&mut self, m: ProtocolMsg) {
        if self.gate_view(&m) != Some(true) {
            return;
        }
        if m.sender() != self.leader(m.view()) {
            self.done(&m);
            return;
        }
        if m.round() == 2 {
            self.on_round2_proposal(m);
            return;
        }
        let Payload::Propose { block, justify } = m.payload() else {
            unreachable!()
        };
        let block = block.clone();
        let r = m.round();
        if r < 3
            || justify.is_some()
            || block.view() != m.view()
            || block.round() != r
            || self.quitting()
        {
            self.done(&m);
            return;
        }
        if self.phase == Phase::NewViewWait {
            self.buffer(m);
            return;
        }
        if !self.cfg.crash_variant {
            if let Some(prev) = self.seen_proposals.get(&r) {
                let prev_block = match prev.payload() {
                    Payload::Propose { block, .. } => block.digest(),
                    _ => unreachable!(),
                };
                if prev_block != block.digest() {
                    let p1 = prev.clone();
                    self.done(&m);
                    self.on_equivocation(p1, m);
                } else {
                    self.done(&m);
                }
                return;
            }
        }
        if self.phase != Phase::SteadyState || self.equivocation {
            self.done(&m);
            return;
        }
        if r > self.r_cur {
            self.buffer(m);
            return;
        }
        if r < self.r_cur {
            self.done(&m);
            return;
        }
        if !self.ensure_block(&block, &m) {
            return;
        }
        if !self.store.extends(&block.digest(), &self.b_lck) {
            self.done(&m);
            return;
        }
        self.done(&m);
        self.seen_proposals.insert(r, m.clone());
        let locked = self.store.get(&self.b_lck).cloned().expect("lock stored");
        let next = lock_compare(&locked, &block, &self.store).digest();
        if next != self.b_lck {
            self.b_lck = next;
            self.trace("lock", format!("block={} height={}", next.short(), block.height()));
        }
        self.broadcast_once(&m);
        self.arm_commit(self.b_lck);
        self.next_round();
    }

    fn arm_commit(&mut self, d: Digest) {
        if self.commit_timers.contains_key(&d) {
            return;
        }
        let id = self.arm(TimerKind::Commit(d), 4 * self.delta());
        self.commit_timers.insert(d, (id, self.now));
    }

    fn next_round(&mut self) {
        self.r_cur += 1;
        self.dirty = true;
        if self.r_cur >= 3 {
            self.enter_steady_round();
        } else {
            self.check_crash();
        }
    }

    fn on_commit_expiry(&mut self, d: Digest) {
        let Some((_, armed)) = self.commit_timers.remove(&d) else {
            return;
        };
        self.commit_chain(d, Some(armed));
    }

    fn commit_chain(&mut self, d: Digest, armed: Option<Time>) {
        let mut chain = Vec::new();
        let mut cur = self.store.get(&d);
        while let Some(b) = cur {
            if b.is_genesis() {
                break;
            }
            let h = b.height() as usize;
            if self.log.len() >= h && self.log[h - 1] == b.digest() {
                break;
            }
            chain.push(b.clone());
            cur = self.store.get(&b.parent());
        }
        if chain.is_empty() {
            return;
        }
        chain.reverse();
        let tip_h = chain.last().map(|b| b.height()).unwrap_or(0);
        let com_h = self.store.get(&self.b_com).map(|b| b.height()).unwrap_or(0);
        if tip_h >= com_h {
            self.b_com = d;
        }
        let last = chain.len() - 1;
        for (i, b) in chain.into_iter().enumerate() {
            let h = b.height() as usize;
            if self.log.len() < h {
                self.log.resize(h, Digest::ZERO);
            }
            self.log[h - 1] = b.digest();
            for c in b.contents() {
                self.committed_cmds.insert(c.clone());
            }
            self.trace(
                "commit",
                format!("block={} height={}", b.digest().short(), b.height()),
            );
            self.out.commits.push(CommitRecord {
                block: b,
                timer_armed_at: if i == last { armed } else { None },
            });
        }
    }

    // ---- blame and equivocation ----------------------------------------

    fn send_blame(&mut self) {
        if self.blamed {
            return;
        }
        self.blamed = true;
        let m = self.sign(Payload::Blame { proof: None }, 0);
        self.trace("blame", String::new());
        self.publish(m);
    }

    fn on_equivocation(&mut self, p1: ProtocolMsg, p2: ProtocolMsg) {
        if self.cfg.crash_variant || self.proof_sent {
            return;
        }
        self.proof_sent = true;
        self.equivocation = true;
        self.out.notes.push(Note::Equivocation { view: self.v_cur });
        let m = self.sign(
            Payload::Blame {
                proof: Some(Box::new((p1, p2))),
            },
            0,
        );
        self.trace("blame_equivocation", String::new());
        self.publish(m);
    }

    fn proof_valid(&mut self, view: View, p1: &ProtocolMsg, p2: &ProtocolMsg) -> bool {
        let leader = self.leader(view);
        let (b1, b2) = match (p1.payload(), p2.payload()) {
            (Payload::Propose { block: a, .. }, Payload::Propose { block: b, .. }) => {
                (a.digest(), b.digest())
            }
            _ => return false,
        };
        if p1.view() != view
            || p2.view() != view
            || p1.sender() != leader
            || p2.sender() != leader
            || p1.round() != p2.round()
            || p1.round() < 3
            || b1 == b2
        {
            return false;
        }
        self.verify_cached(p1) && self.verify_cached(p2)
    }

    fn quitting(&self) -> bool {
        matches!(self.phase, Phase::QuittingView(_))
    }

    fn on_blame(&mut self, m: ProtocolMsg) {
        if self.gate_view(&m) != Some(true) {
            return;
        }
        if self.quitting() {
            self.done(&m);
            return;
        }
        let proof = match m.payload() {
            Payload::Blame { proof } => proof.clone(),
            _ => unreachable!(),
        };
        if let Some(p) = proof.filter(|_| !self.cfg.crash_variant) {
            if !self.proof_valid(m.view(), &p.0, &p.1) {
                self.done(&m);
                return;
            }
            self.cancel_commit_timers();
            self.broadcast_once(&m);
            if !self.proof_sent {
                self.on_equivocation(p.0.clone(), p.1.clone());
            }
            if self.cfg.opt_equivocation_fast_quit {
                self.done(&m);
                self.begin_quit();
                return;
            }
        }
        self.done(&m);
        self.blames.entry(m.sender()).or_insert(m);
        if self.blames.len() >= self.quorum() {
            self.on_blame_quorum();
        }
    }

    fn on_blame_quorum(&mut self) {
        self.cancel_commit_timers();
        let msgs: Vec<&ProtocolMsg> = self.blames.values().take(self.quorum()).collect();
        let Ok(qc) = form_qc(&msgs, MsgKind::Blame, self.v_cur, self.cfg.quorum(), None) else {
            return;
        };
        let m = self.sign(Payload::BlameQc { qc }, 0);
        self.trace("blame_qc_formed", String::new());
        self.publish(m);
    }

    fn on_blame_qc(&mut self, m: ProtocolMsg) {
        if self.gate_view(&m) != Some(true) {
            return;
        }
        if self.quitting() {
            self.done(&m);
            return;
        }
        let Payload::BlameQc { qc } = m.payload() else {
            unreachable!()
        };
        let qc = qc.clone();
        if !matching_qc(&qc, MsgKind::Blame, self.v_cur) || !self.qc_valid(&qc) {
            self.done(&m);
            return;
        }
        self.done(&m);
        self.broadcast_once(&m);
        self.begin_quit();
    }

    fn begin_quit(&mut self) {
        if self.quitting() {
            return;
        }
        self.cancel_commit_timers();
        self.cancel_blame_timer();
        self.phase = Phase::QuittingView(QuitStage::AwaitQuit);
        self.out.notes.push(Note::BlameQc { view: self.v_cur });
        self.trace("await_quit", String::new());
        self.arm(TimerKind::QuitViewWait, self.delta());
        self.dirty = true;
    }

    // ---- quit view ------------------------------------------------------

    fn quit_view(&mut self) {
        self.phase = Phase::QuittingView(QuitStage::Collecting);
        self.commit_qc = None;
        self.own_qc_formed = false;
        self.certifies.clear();
        let block = if self.hooks.stale_commit {
            self.store.genesis().clone()
        } else {
            self.store.get(&self.b_com).cloned().expect("commit stored")
        };
        self.my_update = Some(block.digest());
        let m = self.sign(Payload::CommitUpdate { block }, 0);
        self.trace("quit_view", String::new());
        self.publish(m);
        self.arm(TimerKind::StatusWait5D, 5 * self.delta());
        self.dirty = true;
    }

    fn on_commit_update(&mut self, m: ProtocolMsg) {
        if self.gate_view(&m) != Some(true) {
            return;
        }
        match self.phase {
            Phase::QuittingView(QuitStage::Collecting) | Phase::QuittingView(QuitStage::Announced) => {}
            Phase::SteadyState | Phase::QuittingView(QuitStage::AwaitQuit) => {
                self.buffer(m);
                return;
            }
            Phase::NewViewWait => {
                self.done(&m);
                return;
            }
        }
        let Payload::CommitUpdate { block } = m.payload() else {
            unreachable!()
        };
        let block = block.clone();
        if !self.ensure_block(&block, &m) {
            return;
        }
        self.done(&m);
        if self.hooks.withhold_votes {
            return;
        }
        if !self.store.conflicts(&block.digest(), &self.b_lck) {
            let c = self.sign(
                Payload::Certify {
                    subject: block.digest(),
                },
                0,
            );
            self.send_to(m.sender(), c);
        }
    }

    fn on_certify(&mut self, m: ProtocolMsg) {
        if self.gate_view(&m) != Some(true) {
            return;
        }
        if !matches!(self.phase, Phase::QuittingView(QuitStage::Collecting)) {
            if matches!(
                self.phase,
                Phase::SteadyState | Phase::QuittingView(QuitStage::AwaitQuit)
            ) {
                self.buffer(m);
            } else {
                self.done(&m);
            }
            return;
        }
        let Payload::Certify { subject } = m.payload() else {
            unreachable!()
        };
        self.done(&m);
        if Some(*subject) != self.my_update || self.own_qc_formed {
            return;
        }
        self.certifies.entry(m.sender()).or_insert(m);
        if self.certifies.len() < self.quorum() {
            return;
        }
        let msgs: Vec<&ProtocolMsg> = self.certifies.values().take(self.quorum()).collect();
        let Ok(qc) = form_qc(&msgs, MsgKind::Certify, self.v_cur, self.cfg.quorum(), None) else {
            return;
        };
        self.own_qc_formed = true;
        let d = qc.subject;
        let replace = match &self.commit_qc {
            None => true,
            Some((_, cur)) => *cur != d && self.store.extends(&d, cur),
        };
        if replace {
            self.commit_qc = Some((Some(qc), d));
            self.trace("commit_qc_formed", format!("block={}", d.short()));
        }
    }

    fn status_entry_valid(&mut self, m: &ProtocolMsg, qc_view_below: View) -> bool {
        let Payload::CommitQc { qc, block } = m.payload() else {
            return false;
        };
        match qc {
            None => self.cfg.opt_lock_only_status,
            Some(qc) => {
                let qc = qc.clone();
                qc.kind == MsgKind::Certify
                    && qc.view < qc_view_below
                    && qc.subject == block.digest()
                    && self.qc_valid(&qc)
            }
        }
    }

    fn on_commit_qc(&mut self, m: ProtocolMsg) {
        if self.gate_view(&m) != Some(true) {
            return;
        }
        if m.round() == 1 {
            self.on_status(m);
            return;
        }
        match self.phase {
            Phase::QuittingView(QuitStage::Collecting) | Phase::QuittingView(QuitStage::Announced) => {}
            Phase::SteadyState | Phase::QuittingView(QuitStage::AwaitQuit) => {
                self.buffer(m);
                return;
            }
            Phase::NewViewWait => {
                self.done(&m);
                return;
            }
        }
        let Payload::CommitQc { qc, block } = m.payload() else {
            unreachable!()
        };
        let (qc, block) = (qc.clone(), block.clone());
        let Some(qc) = qc else {
            self.done(&m);
            return;
        };
        if !matching_qc(&qc, MsgKind::Certify, self.v_cur)
            || qc.subject != block.digest()
            || !self.qc_valid(&qc)
        {
            self.done(&m);
            return;
        }
        if !self.ensure_block(&block, &m) {
            return;
        }
        self.done(&m);
        let d = block.digest();
        let base = self
            .commit_qc
            .as_ref()
            .map(|(_, b)| *b)
            .unwrap_or_else(|| self.store.genesis().digest());
        if d != base && !self.store.conflicts(&d, &self.b_lck) && self.store.extends(&d, &base) {
            self.commit_qc = Some((Some(qc), d));
            self.trace("adopt_commit_qc", format!("block={}", d.short()));
        }
    }

    fn announce_commit_qc(&mut self) {
        self.phase = Phase::QuittingView(QuitStage::Announced);
        if let Some((Some(qc), d)) = self.commit_qc.clone() {
            let block = self.store.get(&d).cloned().expect("certified block stored");
            let m = self.sign(
                Payload::CommitQc {
                    qc: Some(qc),
                    block,
                },
                0,
            );
            self.broadcast_once(&m);
            self.done(&m);
        }
        self.arm(TimerKind::PostQcWait1D, self.delta());
    }

    // ---- new view -------------------------------------------------------

    fn new_view(&mut self) {
        self.v_cur += 1;
        self.r_cur = 1;
        self.phase = Phase::NewViewWait;
        self.reset_view_state();
        self.cancel_commit_timers();
        self.cancel_blame_timer();
        self.out.notes.push(Note::EnteredView { view: self.v_cur });
        self.trace("new_view", format!("leader={}", self.leader(self.v_cur)));
        self.check_crash();
        if self.crashed {
            return;
        }
        let status = if self.cfg.opt_lock_only_status {
            let block = self.store.get(&self.b_lck).cloned().expect("lock stored");
            Some(Payload::CommitQc { qc: None, block })
        } else {
            self.commit_qc.take().map(|(qc, d)| Payload::CommitQc {
                qc,
                block: self.store.get(&d).cloned().expect("certified block stored"),
            })
        };
        self.commit_qc = None;
        let leader = self.leader(self.v_cur);
        if let Some(p) = status {
            let m = self.sign(p, 1);
            self.send_to(leader, m);
        }
        self.reset_blame_timer(8 * self.delta());
        if self.is_leader() {
            self.arm(TimerKind::NewLeaderWait4D, 4 * self.delta());
        }
        self.dirty = true;
    }

    fn on_status(&mut self, m: ProtocolMsg) {
        if self.phase != Phase::NewViewWait || !self.is_leader() || self.nvp.is_some() {
            self.done(&m);
            return;
        }
        let v = self.v_cur;
        if !self.status_entry_valid(&m, v) {
            self.done(&m);
            return;
        }
        let Payload::CommitQc { block, .. } = m.payload() else {
            unreachable!()
        };
        let block = block.clone();
        if !self.ensure_block(&block, &m) {
            return;
        }
        self.done(&m);
        self.statuses.entry(m.sender()).or_insert(m);
        if self.status_deadline_passed {
            self.try_new_view_proposal();
        }
    }

    fn status_block(m: &ProtocolMsg) -> &Block {
        match m.payload() {
            Payload::CommitQc { block, .. } => block,
            _ => unreachable!(),
        }
    }

    fn rank(entries: &mut [ProtocolMsg]) {
        entries.sort_by(|a, b| {
            let (x, y) = (Self::status_block(a), Self::status_block(b));
            y.height()
                .cmp(&x.height())
                .then_with(|| x.digest().cmp(&y.digest()))
                .then_with(|| a.sender().cmp(&b.sender()))
        });
    }

    fn forged_status(&mut self) -> Vec<ProtocolMsg> {
        let g = self.store.genesis().clone();
        let (prev, v, q) = (self.v_cur - 1, self.v_cur, self.quorum());
        let certs: Vec<ProtocolMsg> = self
            .coalition
            .iter_mut()
            .take(q)
            .map(|s| make_msg(s, Payload::Certify { subject: g.digest() }, prev, 0))
            .collect();
        let refs: Vec<&ProtocolMsg> = certs.iter().collect();
        let Ok(qc) = form_qc(&refs, MsgKind::Certify, prev, q, None) else {
            return Vec::new();
        };
        self.coalition
            .iter_mut()
            .take(q)
            .map(|s| {
                make_msg(
                    s,
                    Payload::CommitQc {
                        qc: Some(qc.clone()),
                        block: g.clone(),
                    },
                    v,
                    1,
                )
            })
            .collect()
    }

    fn try_new_view_proposal(&mut self) {
        if self.nvp.is_some() || self.r_cur != 1 || self.phase != Phase::NewViewWait {
            return;
        }
        let q = self.quorum();
        let mut entries: Vec<ProtocolMsg> = if !self.coalition.is_empty() {
            self.forged_status()
        } else {
            self.statuses
                .values()
                .filter(|m| self.store.contains(&Self::status_block(m).digest()))
                .cloned()
                .collect()
        };
        if entries.len() < q {
            return;
        }
        Self::rank(&mut entries);
        entries.truncate(q);
        let parent = if self.hooks.stale_commit {
            Self::status_block(entries.last().unwrap()).clone()
        } else {
            Self::status_block(&entries[0]).clone()
        };
        let b1 = Block::new(
            parent.height() + 1,
            parent.digest(),
            Vec::new(),
            self.id,
            self.v_cur,
            1,
            None,
        );
        self.insert_block(b1.clone());
        let m = self.sign(
            Payload::NewViewProposal {
                block: b1,
                status: entries,
            },
            1,
        );
        self.trace("new_view_proposal", format!("parent={}", parent.digest().short()));
        self.publish(m);
    }

    fn on_new_view_proposal(&mut self, m: ProtocolMsg) {
        if self.gate_view(&m) != Some(true) {
            return;
        }
        if m.sender() != self.leader(self.v_cur) || self.phase != Phase::NewViewWait || self.r_cur != 1
        {
            self.done(&m);
            return;
        }
        let Payload::NewViewProposal { block, status } = m.payload() else {
            unreachable!()
        };
        let (block, status) = (block.clone(), status.clone());
        let v = self.v_cur;
        let mut senders = std::collections::BTreeSet::new();
        let mut ok = status.len() >= self.quorum()
            && m.round() == 1
            && block.view() == v
            && block.round() == 1;
        for s in &status {
            if !ok {
                break;
            }
            ok = s.kind() == MsgKind::CommitQc
                && s.view() == v
                && s.round() == 1
                && senders.insert(s.sender())
                && self.verify_cached(s)
                && self.status_entry_valid(s, v);
        }
        if !ok {
            self.done(&m);
            return;
        }
        let mut ranked = status;
        Self::rank(&mut ranked);
        let highest = Self::status_block(&ranked[0]).clone();
        let extends_highest =
            block.parent() == highest.digest() && block.height() == highest.height() + 1;
        if !extends_highest {
            self.done(&m);
            self.broadcast_once(&m);
            self.trace("reject_new_view_proposal", String::new());
            return;
        }
        self.insert_block(highest);
        if !self.ensure_block(&block, &m) {
            return;
        }
        self.done(&m);
        self.broadcast_once(&m);
        let subject = m.digest();
        self.nvp = Some(m);
        if !self.hooks.withhold_votes {
            let vote = self.sign(Payload::VoteMsg { subject }, 1);
            self.trace("vote", format!("subject={}", subject.short()));
            self.publish(vote);
        }
        self.reset_blame_timer(6 * self.delta());
        self.next_round();
    }

    fn on_vote(&mut self, m: ProtocolMsg) {
        if self.gate_view(&m) != Some(true) {
            return;
        }
        if !self.is_leader() || self.round2_sent || self.phase != Phase::NewViewWait {
            self.done(&m);
            return;
        }
        let Some(nvp_digest) = self.nvp.as_ref().map(|p| p.digest()) else {
            self.buffer(m);
            return;
        };
        let Payload::VoteMsg { subject } = m.payload() else {
            unreachable!()
        };
        self.done(&m);
        if *subject != nvp_digest {
            return;
        }
        self.votes.entry(m.sender()).or_insert(m);
        if self.votes.len() < self.quorum() {
            return;
        }
        let msgs: Vec<&ProtocolMsg> = self.votes.values().take(self.quorum()).collect();
        let Ok(qc) = form_qc(&msgs, MsgKind::VoteMsg, self.v_cur, self.cfg.quorum(), None) else {
            return;
        };
        let b1 = match self.nvp.as_ref().map(|p| p.payload()) {
            Some(Payload::NewViewProposal { block, .. }) => block.clone(),
            _ => return,
        };
        let b2 = Block::new(
            b1.height() + 1,
            b1.digest(),
            Vec::new(),
            self.id,
            self.v_cur,
            2,
            Some(qc.to_canonical_bytes()),
        );
        self.round2_sent = true;
        let p = self.sign(
            Payload::Propose {
                block: b2,
                justify: Some(qc),
            },
            2,
        );
        self.trace("round2_propose", String::new());
        self.publish(p);
    }

    fn on_round2_proposal(&mut self, m: ProtocolMsg) {
        if self.phase != Phase::NewViewWait {
            self.done(&m);
            return;
        }
        if self.r_cur == 1 {
            self.buffer(m);
            return;
        }
        if self.r_cur != 2 {
            self.done(&m);
            return;
        }
        let Payload::Propose { block, justify } = m.payload() else {
            unreachable!()
        };
        let (block, justify) = (block.clone(), justify.clone());
        let Some((nvp_digest, b1)) = self.nvp.as_ref().and_then(|p| match p.payload() {
            Payload::NewViewProposal { block, .. } => Some((p.digest(), block.clone())),
            _ => None,
        }) else {
            self.done(&m);
            return;
        };
        let ok = match &justify {
            Some(qc) => {
                let qc = qc.clone();
                matching_qc(&qc, MsgKind::VoteMsg, self.v_cur)
                    && qc.subject == nvp_digest
                    && self.qc_valid(&qc)
            }
            None => false,
        };
        if !ok
            || block.view() != self.v_cur
            || block.round() != 2
            || block.parent() != b1.digest()
            || block.height() != b1.height() + 1
        {
            self.done(&m);
            return;
        }
        if !self.ensure_block(&block, &m) {
            return;
        }
        self.done(&m);
        self.broadcast_once(&m);
        self.b_lck = block.digest();
        self.trace(
            "lock",
            format!("block={} height={}", block.digest().short(), block.height()),
        );
        self.next_round();
    }

    // ---- sync -----------------------------------------------------------

    fn on_sync_request(&mut self, m: ProtocolMsg) {
        self.done(&m);
        let Payload::SyncRequest { want, frontier } = m.payload() else {
            unreachable!()
        };
        if m.sender() == self.id
            || !self
                .sync_served
                .insert((m.sender(), m.view(), m.round()))
        {
            return;
        }
        let blocks = self.store.chain_for_sync(want, frontier);
        if blocks.is_empty() {
            return;
        }
        let resp = self.sign(Payload::SyncResponse { blocks }, self.r_cur);
        self.send_to(m.sender(), resp);
    }

    fn on_sync_response(&mut self, m: ProtocolMsg) {
        self.done(&m);
        let Payload::SyncResponse { blocks } = m.payload() else {
            unreachable!()
        };
        for b in blocks.clone() {
            self.insert_block(b);
        }
    }

    // ---- timers ---------------------------------------------------------

    fn on_timer(&mut self, id: TimerId) {
        let Some((kind, epoch)) = self.timers.remove(&id.0) else {
            return;
        };
        if epoch != self.v_cur {
            return;
        }
        match kind {
            TimerKind::Commit(d) => self.on_commit_expiry(d),
            TimerKind::Blame => {
                if self.blame_timer == Some(id.0) {
                    self.blame_timer = None;
                }
                if !self.quitting() {
                    self.send_blame();
                }
            }
            TimerKind::QuitViewWait => {
                if self.phase == Phase::QuittingView(QuitStage::AwaitQuit) {
                    self.quit_view();
                }
            }
            TimerKind::StatusWait5D => {
                if self.phase == Phase::QuittingView(QuitStage::Collecting) {
                    self.announce_commit_qc();
                }
            }
            TimerKind::PostQcWait1D => {
                if self.phase == Phase::QuittingView(QuitStage::Announced) {
                    self.new_view();
                }
            }
            TimerKind::NewLeaderWait4D => {
                self.status_deadline_passed = true;
                self.try_new_view_proposal();
            }
            TimerKind::ProposeTick(r) => {
                if r == self.r_cur && self.phase == Phase::SteadyState && !self.equivocation {
                    self.propose();
                }
            }
        }
    }
}

impl std::fmt::Debug for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Node")
            .field("id", &self.id)
            .field("view", &self.v_cur)
            .field("round", &self.r_cur)
            .field("phase", &self.phase)
            .field("locked", &self.b_lck)
            .field("committed", &self.b_com)
            .finish()
    }
}
