//! Seed derivation for independent random streams.
//!
//! Every consumer of randomness (each environment, action sampling,
//! minibatch shuffling, IQN sampling, parameter init) draws from its own
//! ChaCha stream keyed by `(master seed, stream, index)`. Changing how much
//! one stream is consumed never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Env = 1,
    Action = 2,
    Shuffle = 3,
    Iqn = 4,
    InitTheta = 5,
    InitPhi = 6,
    InitPsi = 7,
    Eval = 8,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream as u64) ^ index)
}

pub fn stream_rng(master: u64, stream: Stream, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, stream, index))
}

/// Draws an index from an unnormalized-free probability vector.
///
/// Falls back to the last index with positive mass when rounding leaves the
/// cumulative sum just short of the uniform draw.
pub fn sample_categorical<R: rand::Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
