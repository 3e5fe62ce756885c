//! Energy cost tables, symbolic cost models and their comparison.

mod bounds;
mod expr;
mod models;
mod pricing;
mod tables;

use serde::Serialize;

pub use bounds::{f_e_bound, nu_f_bound, region, Region};
pub use expr::{CostExpr, ParamVector, Var};
pub use models::{analytic_models, model, quorum, sizes, Fabric, Protocol, ProtocolCostModel, Psi, Scope};
pub use pricing::{ledger_to_energy, EnergyReport, NodeEnergy, Pricer};
pub use tables::{
    CostTable, CryptoCost, CryptoScheme, KcastPricing, Medium, MediumTable, Primitive, Priced,
    ReliabilityPoint,
};

use crate::error::EnergyError;

/// Binds the medium and crypto entries of `x` from the cost table. Rates
/// are in joules per byte, crypto in joules.
pub fn bind(
    x: ParamVector,
    table: &CostTable,
    medium: Medium,
    crypto: CryptoScheme,
    kcast: KcastPricing,
) -> Result<ParamVector, EnergyError> {
    let (s, r) = table.link_rates(medium, kcast)?;
    let c = table.crypto(crypto)?;
    let h = table.crypto(CryptoScheme::Hmac)?;
    Ok(x.set(Var::S, s)
        .set(Var::R, r)
        .set(Var::SigmaS, c.sign)
        .set(Var::SigmaV, c.verify)
        .set(Var::B, c.signature_bytes as f64)
        .set(Var::MuS, h.sign)
        .set(Var::MuV, h.verify))
}

/// Structural parameters `n`, `f`, `k`, `m`.
pub fn structure(n: usize, f: usize, k: usize, m: usize) -> ParamVector {
    ParamVector::new()
        .set(Var::N, n as f64)
        .set(Var::F, f as f64)
        .set(Var::K, k as f64)
        .set(Var::M, m as f64)
}

/// One side of a comparison: a model and where it runs.
#[derive(Clone, Debug)]
pub struct Side {
    pub model: ProtocolCostModel,
    pub medium: Medium,
    pub crypto: CryptoScheme,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionGrid {
    pub ns: Vec<usize>,
    pub ms: Vec<usize>,
    /// `delta[i][j]` is `ψ_B(a) - ψ_B(b)` at `ns[i]`, `ms[j]`, in joules.
    pub delta: Vec<Vec<f64>>,
}

impl RegionGrid {
    /// Number of cells where `a` is cheaper, per row of `n`.
    pub fn favorable_per_n(&self) -> Vec<usize> {
        self.delta
            .iter()
            .map(|row| row.iter().filter(|d| **d < 0.0).count())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n");
        for m in &self.ms {
            s.push_str(&format!(",m={m}"));
        }
        s.push('\n');
        for (n, row) in self.ns.iter().zip(&self.delta) {
            s.push_str(&n.to_string());
            for d in row {
                s.push_str(&format!(",{d:.6}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Best-case cost difference `a - b` over an `(n, m)` grid. Each `n` uses
/// `f = (n-1)/2` and ring degree `k`.
pub fn feasible_region(
    a: &Side,
    b: &Side,
    table: &CostTable,
    k: usize,
    ns: &[usize],
    ms: &[usize],
) -> Result<RegionGrid, EnergyError> {
    let mut delta = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut row = Vec::with_capacity(ms.len());
        for &m in ms {
            let x = structure(n, (n - 1) / 2, k, m);
            let xa = bind(x.clone(), table, a.medium, a.crypto, KcastPricing::Reliable)?;
            let xb = bind(x, table, b.medium, b.crypto, KcastPricing::Reliable)?;
            row.push(a.model.psi_b.eval(&xa)? - b.model.psi_b.eval(&xb)?);
        }
        delta.push(row);
    }
    Ok(RegionGrid {
        ns: ns.to_vec(),
        ms: ms.to_vec(),
        delta,
    })
}
