use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

/// A reproducible random stream identified by `(seed, stream)`.
///
/// ChaCha supports 2^64 independent streams per key, so work items (a
/// replication, a fold, one candidate component count) each get their own
/// stream and results do not depend on thread scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derived stream for sub-task `index`.
    pub fn child(&self, index: u64) -> Self {
        const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
        let mixed =
            splitmix64(self.stream ^ splitmix64(index.wrapping_add(1).wrapping_mul(GOLDEN)));
        Self {
            seed: self.seed,
            stream: mixed,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
