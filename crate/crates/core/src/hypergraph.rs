//! Directed hypergraphs of k-cast links: independence, degree metrics,
//! necessary fault bounds and exhaustive f-connectivity certification.

use std::collections::HashMap;
use std::fmt::Write as _;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// One k-cast link: a single transmission by `s` heard by every node in `r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub s: u32,
    pub r: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypergraph {
    pub nodes: usize,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    RingKcast,
    CompleteUnicast,
}

/// Largest node count the bitset routines support.
pub const MAX_NODES: usize = 128;

type Bits = u128;

fn bit(i: u32) -> Bits {
    1u128 << i
}

impl Hypergraph {
    /// Builds a graph, sorting and deduplicating receiver sets. Rejects
    /// self-loops, out-of-range ids and empty receiver sets.
    pub fn new(nodes: usize, edges: Vec<Edge>) -> Result<Hypergraph, GraphError> {
        if nodes == 0 || nodes > MAX_NODES {
            return Err(GraphError::Params(format!(
                "node count {nodes} outside 1..={MAX_NODES}"
            )));
        }
        let mut out = Vec::with_capacity(edges.len());
        for mut e in edges {
            e.r.sort_unstable();
            e.r.dedup();
            if e.s as usize >= nodes || e.r.iter().any(|x| *x as usize >= nodes) {
                return Err(GraphError::Params(format!("edge from {} names an unknown node", e.s)));
            }
            if e.r.is_empty() {
                return Err(GraphError::Params(format!("edge from {} has no receivers", e.s)));
            }
            if e.r.contains(&e.s) {
                return Err(GraphError::SelfLoop(e.s));
            }
            out.push(e);
        }
        Ok(Hypergraph { nodes, edges: out })
    }

    /// Smallest receiver-set size over all edges.
    pub fn k(&self) -> usize {
        self.edges.iter().map(|e| e.r.len()).min().unwrap_or(0)
    }

    pub fn out_edges(&self, i: u32) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.s == i)
    }

    fn mask(r: &[u32]) -> Bits {
        r.iter().fold(0, |m, x| m | bit(*x))
    }

    /// Union of receivers reachable from `i` in one hop.
    pub fn out_neighbors(&self, i: u32) -> Vec<u32> {
        let m = self.out_edges(i).fold(0, |m, e| m | Self::mask(&e.r));
        (0..self.nodes as u32).filter(|x| m & bit(*x) != 0).collect()
    }

    /// True iff every node is reached by one transmission of `i`.
    pub fn covers_all_from(&self, i: u32) -> bool {
        self.out_neighbors(i).len() + 1 == self.nodes
    }

    /// Index of an edge from `s` that reaches `to`, if any.
    pub fn direct_edge(&self, s: u32, to: u32) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| e.s == s && e.r.binary_search(&to).is_ok())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Hypergraph, GraphError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            nodes: usize,
            edges: Vec<Edge>,
        }
        let raw: Raw = serde_json::from_str(s).map_err(|e| GraphError::Params(e.to_string()))?;
        Hypergraph::new(raw.nodes, raw.edges)
    }

    /// Graphviz rendering: each hyperedge is a point node fanning out.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph H {\n  node [shape=circle];\n");
        for i in 0..self.nodes {
            let _ = writeln!(s, "  p{i};");
        }
        for (idx, e) in self.edges.iter().enumerate() {
            let _ = writeln!(s, "  e{idx} [shape=point];");
            let _ = writeln!(s, "  p{} -> e{idx} [arrowhead=none];", e.s);
            for r in &e.r {
                let _ = writeln!(s, "  e{idx} -> p{r};");
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Two distinct edge subsets of one sender with the same receiver union.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DependenceWitness {
    pub node: u32,
    /// Edge indices into `Hypergraph::edges`.
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

/// Checks edge independence per sender by enumerating subsets in order of
/// increasing size. Senders with more than 20 edges exceed the budget.
pub fn validate_independence(h: &Hypergraph) -> Result<Option<DependenceWitness>, GraphError> {
    for i in 0..h.nodes as u32 {
        let idx: Vec<usize> = (0..h.edges.len()).filter(|j| h.edges[*j].s == i).collect();
        if idx.len() > 20 {
            return Err(GraphError::Budget(1u128 << idx.len()));
        }
        let mut seen: HashMap<Bits, Vec<usize>> = HashMap::new();
        for size in 1..=idx.len() {
            for subset in idx.iter().copied().combinations(size) {
                let u = subset
                    .iter()
                    .fold(0, |m, j| m | Hypergraph::mask(&h.edges[*j].r));
                if let Some(prev) = seen.get(&u) {
                    return Ok(Some(DependenceWitness {
                        node: i,
                        first: prev.clone(),
                        second: subset,
                    }));
                }
                seen.insert(u, subset);
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeProfile {
    /// Distinct in-neighbors per node.
    pub din: Vec<usize>,
    /// Distinct out-neighbors per node.
    pub dout: Vec<usize>,
    /// Incoming edge count per node.
    pub din_edges: Vec<usize>,
    /// Outgoing edge count per node.
    pub dout_edges: Vec<usize>,
    pub d_in: usize,
    pub d_out: usize,
    pub big_d_in: usize,
    pub big_d_out: usize,
    pub k: usize,
}

impl DegreeProfile {
    /// Nodes nobody transmits to.
    pub fn isolated_receivers(&self) -> Vec<u32> {
        (0..self.din.len() as u32)
            .filter(|i| self.din[*i as usize] == 0)
            .collect()
    }
}

pub fn degree_profile(h: &Hypergraph) -> DegreeProfile {
    let n = h.nodes;
    let mut in_from: Vec<Bits> = vec![0; n];
    let mut out_to: Vec<Bits> = vec![0; n];
    let mut din_edges = vec![0; n];
    let mut dout_edges = vec![0; n];
    for e in &h.edges {
        dout_edges[e.s as usize] += 1;
        for r in &e.r {
            in_from[*r as usize] |= bit(e.s);
            out_to[e.s as usize] |= bit(*r);
            din_edges[*r as usize] += 1;
        }
    }
    let din: Vec<usize> = in_from.iter().map(|m| m.count_ones() as usize).collect();
    let dout: Vec<usize> = out_to.iter().map(|m| m.count_ones() as usize).collect();
    DegreeProfile {
        d_in: din.iter().copied().min().unwrap_or(0),
        d_out: dout.iter().copied().min().unwrap_or(0),
        big_d_in: din_edges.iter().copied().min().unwrap_or(0),
        big_d_out: dout_edges.iter().copied().min().unwrap_or(0),
        din,
        dout,
        din_edges,
        dout_edges,
        k: h.k(),
    }
}

/// The two necessary fault bounds, reported separately. A value of `-1`
/// means no fault can be tolerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NecessaryBounds {
    /// `min(d_out, d_in) - 1`.
    pub f_nec: i64,
    /// `k * min(D_in, D_out) - 1`.
    pub f_coarse: i64,
}

pub fn necessary_condition(p: &DegreeProfile) -> NecessaryBounds {
    NecessaryBounds {
        f_nec: p.d_out.min(p.d_in) as i64 - 1,
        f_coarse: (p.k * p.big_d_in.min(p.big_d_out)) as i64 - 1,
    }
}

/// Removes `faulty`: their edges vanish, receivers lose faulty members, and
/// edges left without receivers are dropped. Returns per-node out-masks.
pub fn restricted_adjacency(h: &Hypergraph, faulty: Bits) -> Vec<Bits> {
    let mut adj = vec![0; h.nodes];
    for e in &h.edges {
        if faulty & bit(e.s) != 0 {
            continue;
        }
        let r = Hypergraph::mask(&e.r) & !faulty;
        adj[e.s as usize] |= r;
    }
    adj
}

fn reach(adj: &[Bits], from: u32, alive: Bits) -> Bits {
    let mut seen = bit(from);
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        let mut next = adj[u as usize] & alive & !seen;
        seen |= next;
        while next != 0 {
            let v = next.trailing_zeros();
            next &= next - 1;
            stack.push(v);
        }
    }
    seen
}

fn strongly_connected(adj: &[Bits], alive: Bits) -> bool {
    if alive.count_ones() <= 1 {
        return true;
    }
    let start = alive.trailing_zeros();
    if reach(adj, start, alive) & alive != alive {
        return false;
    }
    let mut rev = vec![0; adj.len()];
    for (u, out) in adj.iter().enumerate() {
        let mut m = *out;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            rev[v] |= bit(u as u32);
        }
    }
    reach(&rev, start, alive) & alive == alive
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Certification {
    pub f: usize,
    pub certified: bool,
    /// A fault set whose removal disconnects the rest.
    pub witness: Option<Vec<u32>>,
    pub subsets_checked: u64,
}

/// Default cap on the number of fault subsets enumerated.
pub const SUBSET_BUDGET: u128 = 1 << 22;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Certifies that removing any `f` nodes leaves the others strongly
/// connected, by enumerating every fault set of size exactly `f`.
pub fn certify_f_connectivity(h: &Hypergraph, f: usize) -> Result<Certification, GraphError> {
    let n = h.nodes;
    if f > n {
        return Err(GraphError::Params(format!("f = {f} exceeds n = {n}")));
    }
    let total = binomial(n, f);
    if total > SUBSET_BUDGET {
        return Err(GraphError::Budget(total));
    }
    let all: Bits = if n == 128 { !0 } else { (1u128 << n) - 1 };
    let mut checked = 0u64;
    for combo in (0..n as u32).combinations(f) {
        checked += 1;
        let faulty = combo.iter().fold(0, |m, x| m | bit(*x));
        let adj = restricted_adjacency(h, faulty);
        if !strongly_connected(&adj, all & !faulty) {
            return Ok(Certification {
                f,
                certified: false,
                witness: Some(combo),
                subsets_checked: checked,
            });
        }
    }
    Ok(Certification {
        f,
        certified: true,
        witness: None,
        subsets_checked: checked,
    })
}

/// Builds a standard topology and validates edge independence.
pub fn generate_topology(kind: TopologyKind, n: usize, k: usize) -> Result<Hypergraph, GraphError> {
    if n < 2 {
        return Err(GraphError::Params(format!("need at least 2 nodes, got {n}")));
    }
    let edges = match kind {
        TopologyKind::RingKcast => {
            if k == 0 || k >= n {
                return Err(GraphError::Params(format!("ring needs 1 <= k < n, got k={k} n={n}")));
            }
            (0..n as u32)
                .map(|i| Edge {
                    s: i,
                    r: (1..=k as u32).map(|j| (i + j) % n as u32).collect(),
                })
                .collect()
        }
        TopologyKind::CompleteUnicast => (0..n as u32)
            .flat_map(|i| {
                (0..n as u32)
                    .filter(move |j| *j != i)
                    .map(move |j| Edge { s: i, r: vec![j] })
            })
            .collect(),
    };
    let h = Hypergraph::new(n, edges)?;
    if let Some(w) = validate_independence(&h)? {
        return Err(GraphError::Dependent { node: w.node });
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_profile() {
        let h = generate_topology(TopologyKind::RingKcast, 10, 3).unwrap();
        let p = degree_profile(&h);
        assert_eq!((p.d_out, p.d_in, p.big_d_out, p.big_d_in), (3, 3, 1, 3));
        assert_eq!(necessary_condition(&p).f_nec, 2);
    }

    #[test]
    fn ring_k_equal_n_rejected() {
        assert!(generate_topology(TopologyKind::RingKcast, 4, 4).is_err());
    }

    #[test]
    fn dot_mentions_every_edge() {
        let h = generate_topology(TopologyKind::RingKcast, 4, 2).unwrap();
        let dot = h.to_dot();
        assert!(dot.contains("e3 -> p1"));
        let back = Hypergraph::from_json(&h.to_json()).unwrap();
        assert_eq!(back, h);
    }
}
