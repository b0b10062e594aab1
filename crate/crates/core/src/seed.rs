use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Root of all randomness. Sub-seeds are derived by hashing, so identical
/// seeds and configurations reproduce results bit for bit regardless of
/// thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Independent child seed for the given stream label.
    pub fn derive(self, stream: u64) -> RngSeed {
        RngSeed(splitmix64(
            self.0 ^ splitmix64(stream.wrapping_add(0x9E37_79B9_7F4A_7C15)),
        ))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_distinct() {
        let s = RngSeed(7);
        assert_eq!(s.derive(3), s.derive(3));
        assert_ne!(s.derive(3), s.derive(4));
        assert_ne!(s.derive(3), RngSeed(8).derive(3));
        let a: u64 = s.rng().gen();
        let b: u64 = s.rng().gen();
        assert_eq!(a, b);
    }
}
