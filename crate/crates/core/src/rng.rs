//! Keyed random streams.
//!
//! Every random draw in the pipeline comes from a [`ChaCha8Rng`] whose seed is
//! a pure function of `(master_seed, purpose, index...)`. Workers can therefore
//! build the stream for any block independently and the result does not depend
//! on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Collect = 1,
    Spawn = 2,
    Mobility = 3,
    Placement = 4,
    Evaluate = 5,
    Synthetic = 6,
    Holdout = 7,
}

const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key tuple into a 64-bit seed.
pub fn derive_seed(master_seed: u64, purpose: Purpose, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master_seed ^ 0x5EED_0F_5C7A_u64);
    h = splitmix64(h ^ (purpose as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    for (pos, &i) in indices.iter().enumerate() {
        h = splitmix64(h ^ i.wrapping_add((pos as u64 + 1).wrapping_mul(0x9FB2_1C65_1E98_DF25)));
    }
    h
}

/// Builds the stream for a key tuple.
pub fn stream(master_seed: u64, purpose: Purpose, indices: &[u64]) -> StreamRng {
    let seed = derive_seed(master_seed, purpose, indices);
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
