//! Seed derivation for reproducible random streams.
//!
//! Every random draw in a run comes from a ChaCha stream whose seed is a
//! pure function of the master seed and a short path of integers (purpose,
//! curriculum step, episode, ...). A single episode or trial can therefore be
//! replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purposes for independent streams within one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Explore = 2,
    Coin = 3,
    TieBreak = 4,
    Noise = 5,
    Trial = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed`, order-sensitive.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, parts: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, parts))
}

/// The named random streams consumed by one episode or trial.
#[derive(Debug, Clone)]
pub struct EpisodeRngs {
    pub init: Rng,
    pub explore: Rng,
    pub coin: Rng,
    pub tie: Rng,
    pub noise: Rng,
}

impl EpisodeRngs {
    pub fn new(seed: u64, path: &[u64]) -> Self {
        let named = |s: Stream| {
            let mut p = path.to_vec();
            p.push(s as u64);
            stream(seed, &p)
        };
        Self {
            init: named(Stream::Init),
            explore: named(Stream::Explore),
            coin: named(Stream::Coin),
            tie: named(Stream::TieBreak),
            noise: named(Stream::Noise),
        }
    }
}
