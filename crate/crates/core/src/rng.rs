//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator whose 256-bit
//! key is derived from `(seed, purpose tag, index)` through FNV-1a and
//! SplitMix64. ChaCha8 output is specified bit-for-bit, so a stream is
//! reproducible on any platform, and distinct purposes never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(seed, tag)`.
pub fn stream(seed: u64, tag: &str) -> Rng {
    indexed_stream(seed, tag, 0)
}

/// Stream for `(seed, tag, index)`, e.g. one per test sample.
pub fn indexed_stream(seed: u64, tag: &str, index: u64) -> Rng {
    let mut state = seed ^ fnv1a(tag.as_bytes()).rotate_left(17) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derives a child seed, for handing a sub-experiment its own seed space.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut state = seed ^ fnv1a(tag.as_bytes());
    splitmix64(&mut state)
}
