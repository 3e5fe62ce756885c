use std::collections::BTreeMap;

use serde::Serialize;

use super::tables::{CostTable, CryptoScheme, KcastPricing, Medium, Primitive};
use crate::error::EnergyError;
use crate::net::{TransmissionLedger, Usage};

/// Energy of one node, in joules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct NodeEnergy {
    pub communication: f64,
    pub computation: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub medium: Medium,
    pub crypto: CryptoScheme,
    pub per_node: Vec<NodeEnergy>,
    pub steady: Vec<NodeEnergy>,
    pub view_change: Vec<NodeEnergy>,
    /// Mean steady-state energy per block that saw a proposal, per node.
    pub per_block: Vec<f64>,
    /// Some transmission size fell outside the measured table range.
    pub extrapolated: bool,
}

/// Prices the transmissions and crypto operations of one [`Usage`].
pub struct Pricer<'a> {
    pub table: &'a CostTable,
    pub medium: Medium,
    pub crypto: CryptoScheme,
    pub kcast: KcastPricing,
}

impl Pricer<'_> {
    fn hist(
        &self,
        h: &BTreeMap<u64, u64>,
        kcast: bool,
        prim: Primitive,
        flag: &mut bool,
    ) -> Result<f64, EnergyError> {
        let mut mj = 0.0;
        for (&size, &count) in h {
            let p = if kcast && self.medium == Medium::Ble {
                let (s, r) = self.table.kcast_cost(size, self.kcast)?;
                if prim == Primitive::Send {
                    s
                } else {
                    r
                }
            } else {
                self.table.lookup(self.medium, prim, size)?
            };
            *flag |= p.extrapolated;
            mj += p.mj * count as f64;
        }
        Ok(mj)
    }

    pub fn price(&self, u: &Usage, flag: &mut bool) -> Result<NodeEnergy, EnergyError> {
        let mj = self.hist(&u.sent_kcast, true, Primitive::Send, flag)?
            + self.hist(&u.sent_unicast, false, Primitive::Send, flag)?
            + self.hist(&u.recv_kcast, true, Primitive::Recv, flag)?
            + self.hist(&u.recv_unicast, false, Primitive::Recv, flag)?;
        let c = self.table.crypto(self.crypto)?;
        let communication = mj / 1000.0;
        let computation = u.signs as f64 * c.sign + u.verifies as f64 * c.verify;
        Ok(NodeEnergy {
            communication,
            computation,
            total: communication + computation,
        })
    }

    fn price_all(&self, us: &[Usage], flag: &mut bool) -> Result<Vec<NodeEnergy>, EnergyError> {
        us.iter().map(|u| self.price(u, flag)).collect()
    }
}

/// Prices a completed run's ledger on one medium and signature scheme.
pub fn ledger_to_energy(
    ledger: &TransmissionLedger,
    table: &CostTable,
    medium: Medium,
    crypto: CryptoScheme,
    kcast: KcastPricing,
) -> Result<EnergyReport, EnergyError> {
    let pricer = Pricer {
        table,
        medium,
        crypto,
        kcast,
    };
    let mut flag = false;
    let per_node = pricer.price_all(&ledger.nodes, &mut flag)?;
    let steady = pricer.price_all(&ledger.steady, &mut flag)?;
    let view_change = pricer.price_all(&ledger.view_change, &mut flag)?;
    let n = ledger.nodes.len();
    let mut per_block = vec![0.0; n];
    for us in ledger.per_block.values() {
        for (i, u) in us.iter().enumerate() {
            per_block[i] += pricer.price(u, &mut flag)?.total;
        }
    }
    let blocks = ledger.per_block.len().max(1) as f64;
    per_block.iter_mut().for_each(|x| *x /= blocks);
    Ok(EnergyReport {
        medium,
        crypto,
        per_node,
        steady,
        view_change,
        per_block,
        extrapolated: flag,
    })
}
