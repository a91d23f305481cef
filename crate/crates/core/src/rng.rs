use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent streams drawn from one run seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Split = 1,
    Cluster = 2,
    Init = 3,
    Shuffle = 4,
    Noise = 5,
    Classifier = 6,
}

pub(crate) fn seeded(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
