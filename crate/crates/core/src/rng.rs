use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// A generator for `seed` on an independent stream. Distinct `stream` values
/// never share output, so per-frame or per-worker generators can be derived
/// from one user seed without coordination.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream tags for the places that draw randomness.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const AGENT_INIT: u64 = 4;
    pub const AGENT_PL: u64 = 5;
    pub const AGENT_NL: u64 = 6;
    pub const LINK: u64 = 7;
    pub const AUGMENT: u64 = 8;
    pub const TRACE: u64 = 9;
    pub const FIXTURE: u64 = 10;
    /// Frame `k` of a generated dataset uses stream `FRAME_BASE + k`.
    pub const FRAME_BASE: u64 = 1 << 32;
}
