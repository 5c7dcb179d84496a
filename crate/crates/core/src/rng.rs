//! Seeded generator plumbing.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose seed is
//! derived from a small key: the experiment's master seed, the trial index,
//! the node index and the role of the stream. The key is folded through the
//! SplitMix64 finalizer, so two different keys give statistically unrelated
//! streams and the same key always gives the same stream. Results can be
//! reproduced from the master seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in this crate.
pub type SimRng = ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Input,
    Noise,
    Scenario,
    Topology,
    Profile,
    Sampler,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Input => 1,
            StreamRole::Noise => 2,
            StreamRole::Scenario => 3,
            StreamRole::Topology => 4,
            StreamRole::Profile => 5,
            StreamRole::Sampler => 6,
        }
    }
}

/// The SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of `(master, trial, node, role)` used as the seed of one substream.
pub fn substream_key(master: u64, trial: u64, node: u64, role: StreamRole) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ trial);
    h = splitmix64(h ^ node.rotate_left(17));
    splitmix64(h ^ role.tag().rotate_left(43))
}

pub fn substream(master: u64, trial: u64, node: u64, role: StreamRole) -> SimRng {
    SimRng::seed_from_u64(substream_key(master, trial, node, role))
}

/// A generator for one-off uses that only have a single seed.
pub fn seeded(seed: u64, role: StreamRole) -> SimRng {
    substream(seed, 0, 0, role)
}
