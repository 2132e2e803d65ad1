//! Seeded random streams.
//!
//! Every random decision in the crate draws from a [`Xoshiro256PlusPlus`]
//! stream identified by a `(seed, Purpose)` pair. The stream for a pair is
//! obtained by seeding the generator with `seed` (SplitMix64 expansion, as
//! done by `seed_from_u64`) and then applying `long_jump` once per purpose
//! index. Each long jump advances the state by 2^192 draws, so streams for
//! distinct purposes never overlap.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Shuffle,
    Dropout,
    Data,
    Subsample,
    Cluster,
}

impl Purpose {
    fn index(self) -> u32 {
        match self {
            Purpose::Init => 0,
            Purpose::Shuffle => 1,
            Purpose::Dropout => 2,
            Purpose::Data => 3,
            Purpose::Subsample => 4,
            Purpose::Cluster => 5,
        }
    }
}

pub fn stream(seed: u64, purpose: Purpose) -> Rng {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for _ in 0..purpose.index() {
        rng.long_jump();
    }
    rng
}
