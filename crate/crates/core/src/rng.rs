use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Master seed from which every stochastic consumer derives its own stream.
///
/// Child streams are keyed by a label and a counter, so the values a consumer
/// sees do not depend on the order in which other consumers ran.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed(seed)
    }

    /// Derives the seed of the child stream `(label, counter)`.
    pub fn derive(self, label: &str, counter: u64) -> RngSeed {
        let mut h = fnv1a(FNV_OFFSET, &self.0.to_le_bytes());
        h = fnv1a(h, label.as_bytes());
        // separator so ("ab", ..) and ("a", "b"..) cannot collide
        h = fnv1a(h, &[0xff]);
        h = fnv1a(h, &counter.to_le_bytes());
        RngSeed(splitmix64(h))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}
