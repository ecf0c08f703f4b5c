use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-seeds carved out of one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Observations,
    Coin,
    Cadd,
    Renewal,
    LongRun,
    Survival,
    Drift,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Observations => 1,
            Purpose::Coin => 2,
            Purpose::Cadd => 3,
            Purpose::Renewal => 4,
            Purpose::LongRun => 5,
            Purpose::Survival => 6,
            Purpose::Drift => 7,
        }
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed`, a purpose and an index.
pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(purpose.tag())) ^ index)
}

/// Stream `stream` of the generator keyed by `key`.
///
/// Distinct streams of one key are independent, so trial `i` of any run
/// sees the same numbers whatever order trials execute in.
pub fn stream_rng(key: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}
