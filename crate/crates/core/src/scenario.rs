//! Versioned JSON scenarios.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adversary::AdversaryConfig;
use crate::checkers::CheckerConstants;
use crate::crypto::SigScheme;
use crate::energy::{CostTable, CryptoScheme, KcastPricing, Medium};
use crate::error::ConfigError;
use crate::hypergraph::{certify_f_connectivity, generate_topology, Hypergraph, TopologyKind, MAX_NODES};
use crate::net::{DeliveryPolicy, EngineConfig};
use crate::protocol::{max_faults, LeaderRule, ProtocolConfig};
use crate::types::Time;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologySpec {
    Ring,
    Complete,
    Explicit(Hypergraph),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Optimizations {
    pub equivocation_fast_quit: bool,
    pub lock_only_status: bool,
    pub crash_variant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub n: usize,
    /// Defaults to `(n - 1) / 2`.
    #[serde(default)]
    pub f: Option<usize>,
    /// Ring degree. Defaults to `f + 1`, capped at `n - 1`.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_topology")]
    pub topology: TopologySpec,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub delivery: DeliveryPolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_blocks")]
    pub n_blocks: u64,
    /// Simulated-time cap in ticks. Defaults to twice the liveness budget.
    #[serde(default)]
    pub time_budget: Option<Time>,
    #[serde(default = "default_delta")]
    pub delta: Time,
    /// Steady-state proposal spacing, in Δ.
    #[serde(default = "one")]
    pub round_period: u64,
    #[serde(default)]
    pub leader_rule: LeaderRule,
    #[serde(default = "one_usize")]
    pub batch_size: usize,
    #[serde(default = "default_command_size")]
    pub command_size: usize,
    /// Scheme the simulator actually signs with.
    #[serde(default)]
    pub signature_scheme: SigScheme,
    /// Scheme used for pricing signatures on the wire and in energy.
    #[serde(default = "default_crypto")]
    pub crypto: CryptoScheme,
    #[serde(default = "default_medium")]
    pub medium: Medium,
    #[serde(default)]
    pub kcast_pricing: KcastPricing,
    #[serde(default)]
    pub optimizations: Optimizations,
    #[serde(default)]
    pub allow_overcorruption: bool,
    #[serde(default)]
    pub checkers: CheckerConstants,
    #[serde(default)]
    pub trace: bool,
}

fn default_topology() -> TopologySpec {
    TopologySpec::Ring
}
fn default_blocks() -> u64 {
    50
}
fn default_delta() -> Time {
    1000
}
fn one() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn default_command_size() -> usize {
    16
}
fn default_crypto() -> CryptoScheme {
    CryptoScheme::Rsa1024
}
fn default_medium() -> Medium {
    Medium::Ble
}

impl Scenario {
    /// A fault-free ring scenario with defaults everywhere else.
    pub fn ring(n: usize, seed: u64) -> Scenario {
        Scenario {
            version: SCHEMA_VERSION,
            n,
            f: None,
            k: None,
            topology: TopologySpec::Ring,
            adversary: AdversaryConfig::default(),
            delivery: DeliveryPolicy::default(),
            seed,
            n_blocks: default_blocks(),
            time_budget: None,
            delta: default_delta(),
            round_period: 1,
            leader_rule: LeaderRule::default(),
            batch_size: 1,
            command_size: default_command_size(),
            signature_scheme: SigScheme::default(),
            crypto: default_crypto(),
            medium: default_medium(),
            kcast_pricing: KcastPricing::default(),
            optimizations: Optimizations::default(),
            allow_overcorruption: false,
            checkers: CheckerConstants::default(),
            trace: false,
        }
    }

    pub fn from_json(s: &str) -> Result<Scenario, ConfigError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Applies `a.b.c=value` overrides. Values parse as JSON when they can
    /// and as strings otherwise.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Scenario, ConfigError> {
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            let o = o.as_ref();
            let (path, raw) = o
                .split_once('=')
                .ok_or_else(|| ConfigError::field(o, "override must be key=value"))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, path, value)?;
        }
        Ok(serde_json::from_value(doc)?)
    }

    pub fn fault_bound(&self) -> usize {
        self.f.unwrap_or_else(|| max_faults(self.n))
    }

    pub fn ring_degree(&self) -> usize {
        self.k
            .unwrap_or(self.fault_bound() + 1)
            .min(self.n.saturating_sub(1))
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        let mut p = ProtocolConfig::new(self.n, self.fault_bound(), self.delta);
        p.round_period = self.round_period * self.delta;
        p.leader_rule = self.leader_rule;
        p.batch_size = self.batch_size;
        p.crash_variant = self.optimizations.crash_variant;
        p.opt_equivocation_fast_quit = self.optimizations.equivocation_fast_quit;
        p.opt_lock_only_status = self.optimizations.lock_only_status;
        p
    }

    pub fn topology_graph(&self) -> Result<Hypergraph, ConfigError> {
        let g = match &self.topology {
            TopologySpec::Ring => generate_topology(TopologyKind::RingKcast, self.n, self.ring_degree()),
            TopologySpec::Complete => generate_topology(TopologyKind::CompleteUnicast, self.n, 1),
            TopologySpec::Explicit(h) => {
                if h.nodes != self.n {
                    return Err(ConfigError::field(
                        "topology.explicit.nodes",
                        format!("{} does not match n = {}", h.nodes, self.n),
                    ));
                }
                Hypergraph::new(h.nodes, h.edges.clone())
            }
        };
        g.map_err(|e| ConfigError::field("topology", e.to_string()))
    }

    /// Checks every field and the f-connectivity of the topology.
    pub fn validate(&self) -> Result<Hypergraph, ConfigError> {
        if self.version != SCHEMA_VERSION {
            return Err(ConfigError::field(
                "version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version),
            ));
        }
        if self.n < 2 || self.n > MAX_NODES {
            return Err(ConfigError::field("n", format!("must be in 2..={MAX_NODES}")));
        }
        let f = self.fault_bound();
        if f > max_faults(self.n) {
            return Err(ConfigError::field(
                "f",
                format!("{f} violates n > 2f for n = {}", self.n),
            ));
        }
        if self.k == Some(0) {
            return Err(ConfigError::field("k", "must be positive"));
        }
        let positive = [
            ("n_blocks", self.n_blocks),
            ("delta", self.delta),
            ("round_period", self.round_period),
            ("batch_size", self.batch_size as u64),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::field(*name, "must be positive"));
        }
        if self.time_budget == Some(0) {
            return Err(ConfigError::field("time_budget", "must be positive"));
        }
        let c = &self.checkers;
        if !(c.c1 > 0.0 && c.c2 > 0.0) || c.view_change_deltas == 0 {
            return Err(ConfigError::field("checkers", "constants must be positive"));
        }
        CostTable::builtin()
            .crypto(self.crypto)
            .map_err(|e| ConfigError::field("crypto", e.to_string()))?;
        let g = self.topology_graph()?;
        let cert = certify_f_connectivity(&g, f)
            .map_err(|e| ConfigError::field("topology", e.to_string()))?;
        if !cert.certified {
            return Err(ConfigError::Disconnected {
                f,
                cut: cert.witness.unwrap_or_default(),
            });
        }
        self.adversary
            .hooks(&self.protocol_config(), self.allow_overcorruption)?;
        Ok(g)
    }

    pub fn liveness_budget(&self) -> Time {
        let p = self.protocol_config();
        self.n_blocks * p.round_period
            + (p.f as u64 + 1) * self.checkers.liveness_view_change_deltas * p.delta
    }

    pub fn engine_config(&self) -> Result<EngineConfig, ConfigError> {
        let topology = self.validate()?;
        let protocol = self.protocol_config();
        let hooks = self.adversary.hooks(&protocol, self.allow_overcorruption)?;
        let sig_len = CostTable::builtin()
            .crypto(self.crypto)
            .map_err(|e| ConfigError::field("crypto", e.to_string()))?
            .signature_bytes;
        Ok(EngineConfig {
            protocol: Arc::new(protocol),
            topology,
            hooks,
            delivery: self.delivery,
            seed: self.seed,
            scheme: self.signature_scheme,
            priced_sig_len: Some(sig_len),
            target_blocks: self.n_blocks,
            time_budget: self.time_budget.unwrap_or(2 * self.liveness_budget()),
            command_size: self.command_size,
            trace: self.trace,
            checkers: true,
            constants: self.checkers.clone(),
        })
    }
}

fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        if p.is_empty() {
            return Err(ConfigError::field(path, "empty path segment"));
        }
        let map = match cur {
            Value::Object(m) => m,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just set")
            }
            _ => {
                return Err(ConfigError::field(
                    parts[..i].join("."),
                    "is not an object",
                ))
            }
        };
        if i + 1 == parts.len() {
            map.insert(p.to_string(), value);
            return Ok(());
        }
        cur = map.entry(p.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let s = Scenario::from_json(r#"{"version":1,"n":7}"#).unwrap();
        assert_eq!(s, Scenario::ring(7, 0));
        assert_eq!(s.ring_degree(), 4);
    }

    #[test]
    fn unknown_field_is_named() {
        let e = Scenario::from_json(r#"{"version":1,"n":7,"colour":1}"#).unwrap_err();
        assert!(e.to_string().contains("colour"));
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let s = Scenario::ring(7, 0)
            .with_overrides(&["adversary=equivocator", "checkers.c1=3", "seed=9"])
            .unwrap();
        assert_eq!(s.adversary.profile, crate::adversary::ProfileKind::Equivocator);
        assert_eq!(s.checkers.c1, 3.0);
        assert_eq!(s.seed, 9);
        let s = s.with_overrides(&["adversary.count=2"]).unwrap();
        assert_eq!(s.adversary.count, Some(2));
    }

    #[test]
    fn disconnected_ring_is_refused() {
        let mut s = Scenario::ring(7, 0);
        s.k = Some(1);
        s.f = Some(1);
        assert!(matches!(s.validate(), Err(ConfigError::Disconnected { .. })));
    }
}
