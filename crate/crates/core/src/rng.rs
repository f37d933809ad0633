//! Seeded random streams.
//!
//! Every experiment draws from one root seed. Independent consumers (a
//! feature, a prosumer, a matrix row) get their own ChaCha stream keyed by a
//! label and an index, so adding a consumer never perturbs the draws of
//! another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_extend(FNV_OFFSET, bytes)
}

pub(crate) fn fnv1a_extend(mut hash: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Root stream for `seed`.
pub fn root(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `(label, index)` derived from `seed`.
pub fn substream(seed: u64, label: &str, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = fnv1a_extend(fnv1a(label.as_bytes()), &index.to_le_bytes());
    rng.set_stream(stream);
    rng
}
