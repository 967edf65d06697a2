//! Seeded random streams.
//!
//! Every random choice in the crate goes through ChaCha8 seeded from a `u64`
//! with an explicit stream id, so orderings do not depend on the platform or
//! on how many threads a run uses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// ChaCha8 generator for `(seed, stream)`. Stream 0 is the default stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fisher–Yates permutation of `0..n`.
pub fn permutation(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    use rand::Rng;

    let mut rng = stream_rng(seed, stream);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}
