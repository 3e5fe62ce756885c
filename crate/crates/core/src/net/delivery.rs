use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::types::{NodeId, Time};

/// How the adversary schedules each (message, recipient) delivery. Every
/// delay lies in `[1, Δ]` ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryPolicy {
    /// One tick for everything.
    Eager,
    /// Exactly Δ for everything.
    MaxDelay,
    /// Uniform in `[1, Δ]` from the run's seeded stream.
    #[default]
    SeededRandom,
    /// Rushing adversary: Byzantine recipients hear everything after one
    /// tick; correct-to-correct traffic takes Δ to even ids and one tick to
    /// odd ids; Byzantine senders get random delays.
    AdversarialScript,
}

impl DeliveryPolicy {
    pub const ALL: [DeliveryPolicy; 4] = [
        DeliveryPolicy::Eager,
        DeliveryPolicy::MaxDelay,
        DeliveryPolicy::SeededRandom,
        DeliveryPolicy::AdversarialScript,
    ];

    pub fn delay(
        self,
        to: NodeId,
        from_correct: bool,
        to_correct: bool,
        delta: Time,
        rng: &mut ChaCha20Rng,
    ) -> Time {
        match self {
            DeliveryPolicy::Eager => 1,
            DeliveryPolicy::MaxDelay => delta,
            DeliveryPolicy::SeededRandom => rng.gen_range(1..=delta),
            DeliveryPolicy::AdversarialScript => {
                if !to_correct {
                    1
                } else if !from_correct {
                    rng.gen_range(1..=delta)
                } else if to.0.is_multiple_of(2) {
                    delta
                } else {
                    1
                }
            }
        }
    }
}
