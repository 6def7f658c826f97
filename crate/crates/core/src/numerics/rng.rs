//! Seeded, counter-based random streams.
//!
//! Every stochastic operation takes its generator explicitly. Streams are
//! ChaCha8 keyed by a seed and addressed by a 64-bit stream id, so the
//! stream for (seed, record 17) is the same no matter which thread or in
//! which order records are generated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer; mixes labels into a stream id.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id derived from an ordered list of labels.
pub fn stream_id(labels: &[u64]) -> u64 {
    labels.iter().fold(0x5EED_u64, |acc, &l| mix(acc ^ mix(l)))
}

/// Generator for `seed` positioned at the start of stream `labels`.
pub fn stream(seed: u64, labels: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(labels));
    rng
}

/// Stable 64-bit tag for a string label (FNV-1a).
pub fn tag(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
