//! Deterministic random substreams.
//!
//! Every random draw in a run is keyed by `(seed, purpose, agent, round)` so
//! results never depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for; keeps draws for different roles independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Data = 1,
    Partition = 2,
    Init = 3,
    Batch = 4,
    Noise = 5,
    Problem = 6,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one `(agent, round)` cell of a seeded run.
pub fn substream(seed: u64, purpose: Purpose, agent: usize, round: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(purpose as u64)));
    rng.set_stream(((agent as u64) << 32) ^ round as u64);
    rng
}

/// Generator for a purpose that is not tied to an agent or round.
pub fn global(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    substream(seed, purpose, usize::MAX >> 32, 0)
}
