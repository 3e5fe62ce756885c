use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::hypergraph::Hypergraph;
use crate::protocol::Dest;
use crate::types::{Digest, NodeId};

/// Physical transmissions and crypto operations of one node.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Usage {
    pub kcasts_sent: u64,
    pub unicasts_sent: u64,
    pub messages_relayed: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// K-cast transmissions by wire size.
    pub sent_kcast: BTreeMap<u64, u64>,
    /// Unicast transmissions by wire size.
    pub sent_unicast: BTreeMap<u64, u64>,
    /// Receptions of k-casts by wire size.
    pub recv_kcast: BTreeMap<u64, u64>,
    /// Receptions of unicasts by wire size.
    pub recv_unicast: BTreeMap<u64, u64>,
    pub signs: u64,
    pub verifies: u64,
}

impl Usage {
    pub fn transmissions(&self) -> u64 {
        self.kcasts_sent + self.unicasts_sent
    }

    pub fn add(&mut self, o: &Usage) {
        self.kcasts_sent += o.kcasts_sent;
        self.unicasts_sent += o.unicasts_sent;
        self.messages_relayed += o.messages_relayed;
        self.bytes_sent += o.bytes_sent;
        self.bytes_received += o.bytes_received;
        for (mine, theirs) in [
            (&mut self.sent_kcast, &o.sent_kcast),
            (&mut self.sent_unicast, &o.sent_unicast),
            (&mut self.recv_kcast, &o.recv_kcast),
            (&mut self.recv_unicast, &o.recv_unicast),
        ] {
            for (k, v) in theirs {
                *mine.entry(*k).or_default() += v;
            }
        }
        self.signs += o.signs;
        self.verifies += o.verifies;
    }
}

/// Where a cost is charged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bucket {
    /// A steady-state proposal (round 3 onward) for this block.
    Steady(Digest),
    ViewChange,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transmission {
    pub sender: u32,
    pub edge: usize,
    pub size: u64,
}

/// Counts every physical k-cast needed to realise the logical sends over
/// the hypergraph. Each message digest is flooded once: the emitter sends
/// on all its edges and every correct node relays once, unless the
/// emitter's edges already reach everybody. A point-to-point send over an
/// existing edge uses that edge alone.
#[derive(Clone, Debug)]
pub struct TransmissionLedger {
    n: usize,
    pub nodes: Vec<Usage>,
    pub steady: Vec<Usage>,
    pub view_change: Vec<Usage>,
    pub per_block: BTreeMap<Digest, Vec<Usage>>,
    pub log: Vec<Transmission>,
    flooded: HashSet<Digest>,
}

impl TransmissionLedger {
    pub fn new(n: usize) -> TransmissionLedger {
        TransmissionLedger {
            n,
            nodes: vec![Usage::default(); n],
            steady: vec![Usage::default(); n],
            view_change: vec![Usage::default(); n],
            per_block: BTreeMap::new(),
            log: Vec::new(),
            flooded: HashSet::new(),
        }
    }

    fn each_bucket(&mut self, bucket: Bucket, mut f: impl FnMut(&mut Vec<Usage>)) {
        f(&mut self.nodes);
        match bucket {
            Bucket::ViewChange => f(&mut self.view_change),
            Bucket::Steady(d) => {
                f(&mut self.steady);
                let n = self.n;
                f(self
                    .per_block
                    .entry(d)
                    .or_insert_with(|| vec![Usage::default(); n]));
            }
        }
    }

    fn transmit(&mut self, topo: &Hypergraph, sender: u32, edge: usize, size: u64, relay: bool, bucket: Bucket) {
        let receivers = topo.edges[edge].r.clone();
        let kcast = receivers.len() > 1;
        self.log.push(Transmission { sender, edge, size });
        self.each_bucket(bucket, |v| {
            let u = &mut v[sender as usize];
            if kcast {
                u.kcasts_sent += 1;
                *u.sent_kcast.entry(size).or_default() += 1;
            } else {
                u.unicasts_sent += 1;
                *u.sent_unicast.entry(size).or_default() += 1;
            }
            if relay {
                u.messages_relayed += 1;
            }
            u.bytes_sent += size;
            for r in &receivers {
                let u = &mut v[*r as usize];
                u.bytes_received += size;
                let hist = if kcast { &mut u.recv_kcast } else { &mut u.recv_unicast };
                *hist.entry(size).or_default() += 1;
            }
        });
    }

    fn transmit_all_edges(&mut self, topo: &Hypergraph, sender: u32, size: u64, relay: bool, bucket: Bucket) {
        let edges: Vec<usize> = (0..topo.edges.len())
            .filter(|i| topo.edges[*i].s == sender)
            .collect();
        for e in edges {
            self.transmit(topo, sender, e, size, relay, bucket);
        }
    }

    /// Records the physical cost of `emitter` sending a message. Repeat
    /// emissions of an already flooded digest cost nothing.
    #[allow(clippy::too_many_arguments)]
    pub fn record_send(
        &mut self,
        topo: &Hypergraph,
        correct: &[bool],
        emitter: NodeId,
        dest: &Dest,
        digest: Digest,
        size: u64,
        bucket: Bucket,
    ) {
        if !self.flooded.insert(digest) {
            return;
        }
        if let Dest::To(x) = dest {
            if let Some(e) = topo.direct_edge(emitter.0, x.0) {
                self.transmit(topo, emitter.0, e, size, false, bucket);
                return;
            }
        }
        self.transmit_all_edges(topo, emitter.0, size, false, bucket);
        if topo.covers_all_from(emitter.0) {
            return;
        }
        for j in 0..self.n as u32 {
            if j != emitter.0 && correct[j as usize] {
                self.transmit_all_edges(topo, j, size, true, bucket);
            }
        }
    }

    pub fn record_ops(&mut self, node: NodeId, signs: u64, verifies: u64, bucket: Bucket) {
        if signs == 0 && verifies == 0 {
            return;
        }
        self.each_bucket(bucket, |v| {
            v[node.index()].signs += signs;
            v[node.index()].verifies += verifies;
        });
    }

    pub fn total(usages: &[Usage]) -> Usage {
        let mut t = Usage::default();
        for u in usages {
            t.add(u);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{generate_topology, TopologyKind};

    #[test]
    fn ring_flood_costs_one_transmission_per_node() {
        let topo = generate_topology(TopologyKind::RingKcast, 10, 3).unwrap();
        let mut l = TransmissionLedger::new(10);
        let d = Digest::of(b"m");
        l.record_send(&topo, &[true; 10], NodeId(0), &Dest::All, d, 100, Bucket::Steady(d));
        l.record_send(&topo, &[true; 10], NodeId(4), &Dest::All, d, 100, Bucket::Steady(d));
        let t = TransmissionLedger::total(&l.nodes);
        assert_eq!(t.kcasts_sent, 10);
        assert_eq!(t.bytes_received, 10 * 3 * 100);
    }

    #[test]
    fn complete_graph_suppresses_relays() {
        let topo = generate_topology(TopologyKind::CompleteUnicast, 4, 1).unwrap();
        let mut l = TransmissionLedger::new(4);
        let d = Digest::of(b"m");
        l.record_send(&topo, &[true; 4], NodeId(0), &Dest::All, d, 10, Bucket::ViewChange);
        assert_eq!(l.nodes[0].unicasts_sent, 3);
        assert_eq!(TransmissionLedger::total(&l.nodes).transmissions(), 3);
    }
}
