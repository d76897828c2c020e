use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Dataset = 1,
    VaeInit = 2,
    VaeShuffle = 3,
    VaeNoise = 4,
    EncodeNoise = 5,
    AssignInit = 6,
    AssignShuffle = 7,
    LabelShuffle = 8,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
