//! Byzantine strategies and their mapping onto node fault hooks.

use itertools::Itertools;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::ConfigError;
use crate::net::DeliveryPolicy;
use crate::protocol::{FaultHooks, ProtocolConfig};
use crate::types::{NodeId, Round, View};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    None,
    SilentLeader,
    Equivocator,
    StaleCommitAdvertiser,
    LongChainSpammer,
    VoteWithholder,
    Crash,
    MessageDuplicator,
    /// f+1 colluding nodes. Only valid with over-corruption allowed.
    ForkingCoalition,
    /// Corrupt node `i` plays `mix[i]`.
    Mixed,
}

impl ProfileKind {
    /// Profiles of the safety sweep.
    pub const SWEEP: [ProfileKind; 6] = [
        ProfileKind::SilentLeader,
        ProfileKind::Equivocator,
        ProfileKind::StaleCommitAdvertiser,
        ProfileKind::LongChainSpammer,
        ProfileKind::VoteWithholder,
        ProfileKind::Crash,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdversaryFields {
    profile: ProfileKind,
    #[serde(default)]
    count: Option<usize>,
    #[serde(default)]
    nodes: Option<Vec<u32>>,
    #[serde(default)]
    length: Option<usize>,
    #[serde(default)]
    at_round: Option<Round>,
    #[serde(default)]
    at_view: Option<View>,
    #[serde(default)]
    mix: Vec<ProfileKind>,
}

/// Scenario adversary. Deserializes from a bare profile name or an object.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdversaryConfig {
    pub profile: ProfileKind,
    /// Number of corrupt nodes when `nodes` is absent (default 1, or f+1
    /// for a forking coalition).
    pub count: Option<usize>,
    /// Explicit corrupt set; defaults to the leaders of views 1, 2, ...
    pub nodes: Option<Vec<u32>>,
    /// Burst length of a chain spammer.
    pub length: Option<usize>,
    pub at_round: Option<Round>,
    pub at_view: Option<View>,
    pub mix: Vec<ProfileKind>,
}

impl<'de> Deserialize<'de> for AdversaryConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(ProfileKind),
            Full(AdversaryFields),
        }
        let f = match Repr::deserialize(d)? {
            Repr::Name(p) => AdversaryFields {
                profile: p,
                count: None,
                nodes: None,
                length: None,
                at_round: None,
                at_view: None,
                mix: Vec::new(),
            },
            Repr::Full(f) => f,
        };
        Ok(AdversaryConfig {
            profile: f.profile,
            count: f.count,
            nodes: f.nodes,
            length: f.length,
            at_round: f.at_round,
            at_view: f.at_view,
            mix: f.mix,
        })
    }
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig::new(ProfileKind::None)
    }
}

pub const DEFAULT_SPAM_LENGTH: usize = 20;
pub const DEFAULT_EQUIVOCATION_ROUND: Round = 5;
pub const DEFAULT_CRASH_ROUND: Round = 5;
pub const DEFAULT_COALITION_BLAME_ROUND: Round = 8;

impl AdversaryConfig {
    pub fn new(profile: ProfileKind) -> AdversaryConfig {
        AdversaryConfig {
            profile,
            count: None,
            nodes: None,
            length: None,
            at_round: None,
            at_view: None,
            mix: Vec::new(),
        }
    }

    pub fn with_count(mut self, c: usize) -> AdversaryConfig {
        self.count = Some(c);
        self
    }

    pub fn with_nodes(mut self, nodes: Vec<u32>) -> AdversaryConfig {
        self.nodes = Some(nodes);
        self
    }

    fn default_count(&self, cfg: &ProtocolConfig) -> usize {
        match self.profile {
            ProfileKind::None => 0,
            ProfileKind::ForkingCoalition => cfg.f + 1,
            ProfileKind::Mixed if !self.mix.is_empty() => self.mix.len(),
            _ => 1,
        }
    }

    /// Corrupt node ids, in assignment order.
    pub fn corrupt_set(&self, cfg: &ProtocolConfig) -> Result<Vec<NodeId>, ConfigError> {
        if self.profile == ProfileKind::None {
            return Ok(Vec::new());
        }
        if let Some(nodes) = &self.nodes {
            let mut seen = std::collections::BTreeSet::new();
            for x in nodes {
                if *x as usize >= cfg.n {
                    return Err(ConfigError::field("adversary.nodes", format!("node {x} out of range")));
                }
                if !seen.insert(*x) {
                    return Err(ConfigError::field("adversary.nodes", format!("node {x} listed twice")));
                }
            }
            return Ok(nodes.iter().map(|x| NodeId(*x)).collect());
        }
        let count = self.count.unwrap_or_else(|| self.default_count(cfg));
        if count > cfg.n {
            return Err(ConfigError::field("adversary.count", "exceeds n"));
        }
        let mut out: Vec<NodeId> = Vec::new();
        let mut v = 1;
        while out.len() < count {
            let l = cfg.leader(v);
            if !out.contains(&l) {
                out.push(l);
            }
            v += 1;
            if v > 64 * cfg.n as u64 {
                // Seeded leader rule that never reaches some node: fill in order.
                for i in 0..cfg.n as u32 {
                    if out.len() < count && !out.contains(&NodeId(i)) {
                        out.push(NodeId(i));
                    }
                }
            }
        }
        Ok(out)
    }

    fn first_led_view(cfg: &ProtocolConfig, id: NodeId) -> View {
        (1..=64 * cfg.n as u64).find(|v| cfg.leader(*v) == id).unwrap_or(1)
    }

    fn hooks_for(&self, kind: ProfileKind, id: NodeId, cfg: &ProtocolConfig, corrupt: &[NodeId]) -> FaultHooks {
        let mut h = FaultHooks::default();
        match kind {
            ProfileKind::None => {}
            ProfileKind::SilentLeader => h.mute_leader = true,
            ProfileKind::Equivocator => {
                h.equivocate_at = Some(self.at_round.unwrap_or(DEFAULT_EQUIVOCATION_ROUND).max(3))
            }
            ProfileKind::StaleCommitAdvertiser => {
                h.mute_leader = true;
                h.stale_commit = true;
            }
            ProfileKind::LongChainSpammer => {
                h.burst = Some(self.length.unwrap_or(DEFAULT_SPAM_LENGTH))
            }
            ProfileKind::VoteWithholder => {
                h.mute_leader = true;
                h.withhold_votes = true;
            }
            ProfileKind::Crash => {
                let v = self.at_view.unwrap_or_else(|| Self::first_led_view(cfg, id));
                h.crash_at = Some((v, self.at_round.unwrap_or(DEFAULT_CRASH_ROUND)));
            }
            ProfileKind::MessageDuplicator => h.duplicate = true,
            ProfileKind::ForkingCoalition => {
                h.blame_at = Some((
                    self.at_view.unwrap_or(1),
                    self.at_round.unwrap_or(DEFAULT_COALITION_BLAME_ROUND),
                ));
                h.coalition = corrupt.to_vec();
            }
            ProfileKind::Mixed => unreachable!("resolved by caller"),
        }
        h
    }

    /// Per-node fault hooks. Rejects more than `f` corruptions unless
    /// `allow_overcorruption` is set.
    pub fn hooks(&self, cfg: &ProtocolConfig, allow_overcorruption: bool) -> Result<Vec<FaultHooks>, ConfigError> {
        if self.profile == ProfileKind::ForkingCoalition && !allow_overcorruption {
            return Err(ConfigError::field(
                "adversary.profile",
                "forking_coalition needs allow_overcorruption",
            ));
        }
        let corrupt = self.corrupt_set(cfg)?;
        if corrupt.len() > cfg.f && !allow_overcorruption {
            return Err(ConfigError::field(
                "adversary.count",
                format!("{} corrupt nodes exceed f = {}", corrupt.len(), cfg.f),
            ));
        }
        if self.profile == ProfileKind::Mixed && self.mix.is_empty() {
            return Err(ConfigError::field("adversary.mix", "mixed profile needs a non-empty mix"));
        }
        let mut hooks = vec![FaultHooks::default(); cfg.n];
        for (i, id) in corrupt.iter().enumerate() {
            let kind = if self.profile == ProfileKind::Mixed {
                let k = self.mix[i % self.mix.len()];
                if matches!(k, ProfileKind::Mixed | ProfileKind::ForkingCoalition) {
                    return Err(ConfigError::field("adversary.mix", format!("{k:?} cannot be mixed")));
                }
                k
            } else {
                self.profile
            };
            hooks[id.index()] = self.hooks_for(kind, *id, cfg, &corrupt);
        }
        Ok(hooks)
    }
}

/// One entry of a bounded exhaustive adversary enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdversaryCase {
    pub adversary: AdversaryConfig,
    pub delivery: DeliveryPolicy,
}

#[derive(Clone, Debug, Serialize)]
pub struct Enumeration {
    pub cases: Vec<AdversaryCase>,
    /// Set when the budget cut the enumeration short.
    pub truncated: bool,
}

const MIX_KINDS: [ProfileKind; 6] = [
    ProfileKind::SilentLeader,
    ProfileKind::StaleCommitAdvertiser,
    ProfileKind::VoteWithholder,
    ProfileKind::MessageDuplicator,
    ProfileKind::Equivocator,
    ProfileKind::Crash,
];

fn strategies(horizon: View) -> Vec<(ProfileKind, Option<View>, Option<Round>)> {
    let mut s = vec![
        (ProfileKind::SilentLeader, None, None),
        (ProfileKind::StaleCommitAdvertiser, None, None),
        (ProfileKind::VoteWithholder, None, None),
        (ProfileKind::MessageDuplicator, None, None),
        (ProfileKind::Equivocator, None, Some(3)),
        (ProfileKind::Equivocator, None, Some(5)),
    ];
    for v in 1..=horizon {
        s.push((ProfileKind::Crash, Some(v), Some(1)));
        s.push((ProfileKind::Crash, Some(v), Some(4)));
    }
    s
}

/// Every corrupt set of size at most `f` paired with every per-node strategy
/// assignment and delivery policy, in a fixed order, up to `budget` cases.
pub fn enumerate_small_adversaries(
    n: usize,
    f: usize,
    horizon: View,
    budget: usize,
) -> Result<Enumeration, ConfigError> {
    if n > 5 {
        return Err(ConfigError::field("n", "exhaustive enumeration supports n <= 5"));
    }
    if !(1..=3).contains(&horizon) {
        return Err(ConfigError::field("horizon", "must be 1..=3 views"));
    }
    if f > crate::protocol::max_faults(n) {
        return Err(ConfigError::field("f", "exceeds the tolerated fault count"));
    }
    let strats = strategies(horizon);
    let mut cases = Vec::new();
    let mut truncated = false;
    let mut add = |c: AdversaryCase, cases: &mut Vec<AdversaryCase>| {
        if cases.len() >= budget {
            truncated = true;
            false
        } else {
            cases.push(c);
            true
        }
    };
    'outer: for delivery in DeliveryPolicy::ALL {
        if !add(
            AdversaryCase {
                adversary: AdversaryConfig::default(),
                delivery,
            },
            &mut cases,
        ) {
            break;
        }
        for size in 1..=f {
            for set in (0..n as u32).combinations(size) {
                let choices = if size == 1 { strats.len() } else { MIX_KINDS.len() };
                for assignment in (0..size).map(|_| 0..choices).multi_cartesian_product() {
                    // Single-node cases carry per-strategy timing; coordinated
                    // cases combine plain profiles.
                    let adversary = if size == 1 {
                        let (p, v, r) = strats[assignment[0]];
                        AdversaryConfig {
                            profile: p,
                            nodes: Some(set.clone()),
                            at_view: v,
                            at_round: r,
                            ..AdversaryConfig::default()
                        }
                    } else {
                        AdversaryConfig {
                            profile: ProfileKind::Mixed,
                            nodes: Some(set.clone()),
                            mix: assignment.iter().map(|i| MIX_KINDS[*i]).collect(),
                            ..AdversaryConfig::default()
                        }
                    };
                    if !add(AdversaryCase { adversary, delivery }, &mut cases) {
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(Enumeration { cases, truncated })
}
