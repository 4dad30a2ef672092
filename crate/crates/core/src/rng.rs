use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for `index` under a campaign/run seed.
///
/// Streams are keyed by index so results do not depend on scheduling order.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
