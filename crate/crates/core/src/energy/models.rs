//! Operation-counting cost models.
//!
//! Every model is a per-node polynomial in [`Var`]. Communication is priced
//! as bytes times the per-byte rate of the medium (`S` to send, `R` to
//! receive) and computation as sign/verify counts times `σ_s`/`σ_v`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::{CostExpr, ParamVector, Var};
use crate::error::EnergyError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Eesmr,
    #[serde(rename = "synchs")]
    SyncHotStuff,
    TrustedBaseline,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Eesmr => "eesmr",
            Protocol::SyncHotStuff => "synchs",
            Protocol::TrustedBaseline => "baseline",
        })
    }
}

impl std::str::FromStr for Protocol {
    type Err = EnergyError;
    fn from_str(s: &str) -> Result<Protocol, EnergyError> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "eesmr" => Ok(Protocol::Eesmr),
            "synchs" | "synchotstuff" => Ok(Protocol::SyncHotStuff),
            "baseline" | "trustedbaseline" => Ok(Protocol::TrustedBaseline),
            _ => Err(EnergyError::UnknownEntry(format!("protocol {s}"))),
        }
    }
}

/// Physical interconnect the counts are laid out on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fabric {
    /// Each node k-casts to its `k` successors. Floods are relayed by every
    /// node; a point-to-point message uses the sender's edge when it reaches
    /// the target and floods otherwise.
    Ring,
    /// Pairwise unicast links; the emitter reaches everyone directly.
    Complete,
}

/// Whose energy an expression describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Leader,
    /// A single non-leader.
    Node,
    /// All `n` nodes together.
    Total,
}

/// Best-case, worst-case and view-change cost of one consensus unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolCostModel {
    pub protocol: Protocol,
    pub fabric: Fabric,
    pub scope: Scope,
    pub psi_b: CostExpr,
    pub psi_w: CostExpr,
    pub psi_v: CostExpr,
}

/// Numeric evaluation of a [`ProtocolCostModel`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psi {
    pub b: f64,
    pub w: f64,
    pub v: f64,
}

impl ProtocolCostModel {
    fn new(protocol: Protocol, fabric: Fabric, scope: Scope, b: CostExpr, v: CostExpr) -> Self {
        ProtocolCostModel {
            protocol,
            fabric,
            scope,
            psi_w: b.clone() + v.clone(),
            psi_b: b,
            psi_v: v,
        }
    }

    pub fn eval(&self, x: &ParamVector) -> Result<Psi, EnergyError> {
        Ok(Psi {
            b: self.psi_b.eval(x)?,
            w: self.psi_w.eval(x)?,
            v: self.psi_v.eval(x)?,
        })
    }
}

fn c(x: f64) -> CostExpr {
    CostExpr::constant(x)
}

fn v(x: Var) -> CostExpr {
    CostExpr::var(x)
}

/// Quorum size `f + 1`.
pub fn quorum() -> CostExpr {
    v(Var::F) + c(1.0)
}

/// Wire sizes in bytes as functions of `m` (command bytes per block) and
/// `b` (signature bytes). Blocks carry one command.
pub mod sizes {
    use super::*;

    /// Signed envelope with `sigs` signatures around a payload.
    pub fn envelope(sigs: f64, payload: CostExpr) -> CostExpr {
        c(28.0) + v(Var::B) * sigs + payload
    }

    pub fn block() -> CostExpr {
        c(69.0) + v(Var::M)
    }

    pub fn empty_block() -> CostExpr {
        c(65.0)
    }

    pub fn qc() -> CostExpr {
        c(45.0) + quorum() * (c(8.0) + v(Var::B))
    }

    pub fn propose() -> CostExpr {
        envelope(2.0, c(2.0) + block())
    }

    pub fn propose_with_qc(sigs: f64, blk: CostExpr) -> CostExpr {
        envelope(sigs, c(2.0) + blk + qc())
    }

    pub fn blame() -> CostExpr {
        envelope(2.0, c(2.0))
    }

    pub fn certify() -> CostExpr {
        envelope(2.0, c(33.0))
    }

    pub fn vote() -> CostExpr {
        envelope(2.0, c(33.0))
    }

    pub fn commit_update() -> CostExpr {
        envelope(2.0, c(1.0) + block())
    }

    pub fn blame_qc() -> CostExpr {
        envelope(2.0, c(1.0) + qc())
    }

    pub fn commit_qc() -> CostExpr {
        envelope(2.0, c(2.0) + qc() + block())
    }

    pub fn new_view_proposal() -> CostExpr {
        envelope(2.0, c(5.0) + empty_block() + quorum() * commit_qc())
    }
}

/// Accumulator for the leader, one non-leader, and the sum over all
/// non-leaders. Where non-leaders differ, `node` is the costliest one.
#[derive(Clone, Default)]
struct Tally {
    leader: CostExpr,
    node: CostExpr,
    others: CostExpr,
}

impl Tally {
    fn add3(&mut self, leader: CostExpr, node: CostExpr, others: CostExpr) {
        self.leader = self.leader.clone() + leader;
        self.node = self.node.clone() + node;
        self.others = self.others.clone() + others;
    }

    fn add(&mut self, leader: CostExpr, node: CostExpr) {
        self.add3(leader, node.clone(), node * n_minus_1());
    }

    fn both(&mut self, e: CostExpr) {
        self.add(e.clone(), e);
    }

    fn scoped(&self, scope: Scope) -> CostExpr {
        match scope {
            Scope::Leader => self.leader.clone(),
            Scope::Node => self.node.clone(),
            Scope::Total => self.leader.clone() + self.others.clone(),
        }
    }
}

fn send(bytes: &CostExpr) -> CostExpr {
    bytes.clone() * v(Var::S)
}

fn recv(bytes: &CostExpr) -> CostExpr {
    bytes.clone() * v(Var::R)
}

fn signs(k: CostExpr) -> CostExpr {
    k * v(Var::SigmaS)
}

fn verifies(k: CostExpr) -> CostExpr {
    k * v(Var::SigmaV)
}

fn n_minus_1() -> CostExpr {
    v(Var::N) - c(1.0)
}

/// Communication patterns priced on a fabric. Ring formulas assume
/// `k < n - 1`, so that a flood needs relays.
struct Comm {
    fabric: Fabric,
}

impl Comm {
    /// Per-node cost on a ring of one flooded message: one transmission and
    /// `k` receptions at every node.
    fn ring_flood(l: &CostExpr) -> CostExpr {
        send(l) + recv(l) * v(Var::K)
    }

    /// Targets a ring node cannot reach over its own edge.
    fn ring_indirect() -> CostExpr {
        v(Var::N) - c(1.0) - v(Var::K)
    }

    /// Every node floods one message of size `l`.
    fn flood_each(&self, t: &mut Tally, l: &CostExpr) {
        match self.fabric {
            Fabric::Ring => t.both(Self::ring_flood(l) * v(Var::N)),
            Fabric::Complete => t.both((send(l) + recv(l)) * n_minus_1()),
        }
    }

    /// The leader floods one message.
    fn flood_leader(&self, t: &mut Tally, l: &CostExpr) {
        match self.fabric {
            Fabric::Ring => t.both(Self::ring_flood(l)),
            Fabric::Complete => t.add(send(l) * n_minus_1(), recv(l)),
        }
    }

    /// Every node sends one distinct message to every other node. On a ring
    /// the `k` successors are reached over the sender's edge, the rest by
    /// flooding.
    fn all_to_all(&self, t: &mut Tally, l: &CostExpr) {
        match self.fabric {
            Fabric::Ring => {
                let floods = v(Var::N) * Self::ring_indirect() + v(Var::K);
                t.both(Self::ring_flood(l) * floods)
            }
            Fabric::Complete => t.both((send(l) + recv(l)) * n_minus_1()),
        }
    }

    /// Every non-leader sends one message to the leader. On a ring the
    /// leader's `k` predecessors reach it directly and the others flood.
    fn to_leader(&self, t: &mut Tally, l: &CostExpr) {
        match self.fabric {
            Fabric::Ring => {
                let k = v(Var::K);
                let floods = Self::ring_flood(l) * Self::ring_indirect();
                t.add3(
                    floods.clone() + recv(l) * k.clone(),
                    floods.clone() + send(l) + recv(l) * (k.clone() - c(1.0)),
                    floods * n_minus_1() + send(l) * k.clone() + recv(l) * k.clone() * (k - c(1.0)),
                );
            }
            Fabric::Complete => t.add(recv(l) * n_minus_1(), send(l)),
        }
    }

    /// Every node transmits once to its neighbours without forwarding.
    /// Returns how many copies each node receives.
    fn one_hop_each(&self, t: &mut Tally, l: &CostExpr) -> CostExpr {
        match self.fabric {
            Fabric::Ring => {
                t.both(send(l) + recv(l) * v(Var::K));
                v(Var::K)
            }
            Fabric::Complete => {
                t.both((send(l) + recv(l)) * n_minus_1());
                n_minus_1()
            }
        }
    }
}

fn eesmr_steady(comm: &Comm) -> Tally {
    let mut t = Tally::default();
    comm.flood_leader(&mut t, &sizes::propose());
    t.add(signs(c(2.0)), verifies(c(2.0)));
    t
}

/// A stalled leader: blame, commit-update/certify, status, new-view
/// proposal, votes and the round-2 proposal.
fn eesmr_view_change(comm: &Comm) -> Tally {
    let q = quorum();
    let mut t = Tally::default();
    let two_n1 = n_minus_1() * 2.0;

    comm.flood_each(&mut t, &sizes::blame());
    t.both(signs(c(2.0)) + verifies(two_n1.clone()));

    comm.flood_each(&mut t, &sizes::blame_qc());
    t.both(verifies(q.clone()));

    comm.flood_each(&mut t, &sizes::commit_update());
    t.both(signs(c(2.0)) + verifies(two_n1.clone()));

    comm.all_to_all(&mut t, &sizes::certify());
    t.both(signs(two_n1.clone()) + verifies(two_n1.clone()));

    comm.flood_each(&mut t, &sizes::commit_qc());
    t.both(verifies(n_minus_1() * q.clone()));

    comm.to_leader(&mut t, &sizes::commit_qc());
    t.both(signs(c(2.0)));
    t.add(verifies(n_minus_1() * (q.clone() + c(2.0))), CostExpr::zero());

    comm.flood_leader(&mut t, &sizes::new_view_proposal());
    t.add(
        signs(c(2.0)),
        verifies(c(2.0) + q.clone() * (q.clone() + c(2.0))),
    );

    comm.flood_each(&mut t, &sizes::vote());
    t.add(signs(c(2.0)) + verifies(two_n1), signs(c(2.0)));

    comm.flood_leader(&mut t, &sizes::propose_with_qc(2.0, sizes::empty_block()));
    t.add(signs(c(2.0)), verifies(c(2.0) + q));
    t
}

fn sh_vote() -> CostExpr {
    sizes::envelope(1.0, c(33.0))
}

fn synchs_steady(comm: &Comm) -> Tally {
    let q = quorum();
    let mut t = Tally::default();
    comm.flood_leader(&mut t, &sizes::propose_with_qc(1.0, sizes::block()));
    let heard = comm.one_hop_each(&mut t, &sh_vote());
    t.add(
        signs(c(2.0)) + verifies(heard.clone()),
        signs(c(1.0)) + verifies(c(1.0) + q + heard),
    );
    t
}

fn synchs_view_change(comm: &Comm) -> Tally {
    let q = quorum();
    let mut t = Tally::default();

    comm.flood_each(&mut t, &sizes::envelope(1.0, c(2.0)));
    t.both(signs(c(1.0)) + verifies(n_minus_1()));

    comm.flood_each(&mut t, &sizes::envelope(1.0, c(1.0) + sizes::qc()));
    t.both(verifies(q.clone()));

    let status = sizes::envelope(1.0, c(2.0) + sizes::qc() + sizes::block());
    comm.to_leader(&mut t, &status);
    t.add(verifies(n_minus_1() * (q.clone() + c(1.0))), signs(c(1.0)));

    let nvp = sizes::envelope(1.0, c(5.0) + sizes::block() + q.clone() * status);
    comm.flood_leader(&mut t, &nvp);
    t.add(signs(c(1.0)), verifies(c(1.0) + q.clone() * (q + c(1.0))));

    let heard = comm.one_hop_each(&mut t, &sh_vote());
    t.both(signs(c(1.0)) + verifies(heard));
    t
}

/// Every node exchanges one proposal-sized message with a trusted node over
/// its own medium. The trusted node's energy is not counted.
fn baseline_steady() -> Tally {
    let mut t = Tally::default();
    let p = sizes::propose();
    t.both(send(&p) + recv(&p));
    t
}

pub fn model(protocol: Protocol, fabric: Fabric, scope: Scope) -> ProtocolCostModel {
    let comm = Comm { fabric };
    let (b, vc) = match protocol {
        Protocol::Eesmr => (eesmr_steady(&comm), eesmr_view_change(&comm)),
        Protocol::SyncHotStuff => (synchs_steady(&comm), synchs_view_change(&comm)),
        Protocol::TrustedBaseline => (baseline_steady(), Tally::default()),
    };
    ProtocolCostModel::new(protocol, fabric, scope, b.scoped(scope), vc.scoped(scope))
}

/// All protocols on one fabric and scope.
pub fn analytic_models(fabric: Fabric, scope: Scope) -> Vec<ProtocolCostModel> {
    [Protocol::Eesmr, Protocol::SyncHotStuff, Protocol::TrustedBaseline]
        .into_iter()
        .map(|p| model(p, fabric, scope))
        .collect()
}
