use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream `index` split off the master `seed`.
///
/// Every replication gets its own ChaCha stream, so results do not depend
/// on the order in which replications run.
pub fn replication_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
