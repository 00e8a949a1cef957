//! Deterministic, order-independent random streams.
//!
//! Every stochastic stage derives its generator from explicit integer
//! coordinates (base seed, path or particle index, step, purpose tag)
//! through a splitmix64 key expansion feeding ChaCha8. Streams for
//! distinct coordinates do not depend on scheduling order, so parallel
//! runs reproduce serial ones bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different roles disjoint even when the
/// remaining coordinates collide.
pub mod tag {
    pub const NOISE: u64 = 0x4e4f_4953_4531;
    pub const INITIAL: u64 = 0x494e_4954_0001;
    pub const BRIDGE: u64 = 0x4252_4447_0001;
    pub const PARTICLE_STEP: u64 = 0x5053_5445_0001;
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Advance a splitmix64 state and return the next output.
fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    mix(*state)
}

/// Fold coordinate words into a single derived seed.
pub fn derive_seed(words: &[u64]) -> u64 {
    let mut state = 0x243f_6a88_85a3_08d3u64; // fixed offset
    for &w in words {
        state = mix(state ^ mix(w));
    }
    state
}

/// ChaCha8 generator keyed by the given coordinate words.
pub fn stream(words: &[u64]) -> ChaCha8Rng {
    let mut state = derive_seed(words);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix_next(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
