// SPDX-License-Identifier: Apache-2.0

//! Counter-based random streams: every replication draws from its own
//! ChaCha8 stream, keyed by the master seed and a list of tags, so results
//! never depend on how replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream `index` under key `(master_seed, tags...)`.
pub fn stream_rng(master_seed: u64, tags: &[u64], index: u64) -> ChaCha8Rng {
    let mut state = splitmix64(master_seed);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag.wrapping_add(0xA076_1D64_78BD_642F)));
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
