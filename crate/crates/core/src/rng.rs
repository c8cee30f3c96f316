//! Seeded counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream selected by `(seed, stream_id)`; the
//! k-th draw of a stream is a pure function of `(seed, stream_id, k)`, so
//! independent streams can be consumed in any order or in parallel. Named
//! substreams of one root seed are derived with [`derive_seed`].

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::normal::inverse_normal_cdf;

const TWO_POW_MINUS_52: f64 = 1.0 / (1u64 << 52) as f64;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the substream `tag` of `root`: splitmix64 applied to the root,
/// then to each byte of the tag, then to `index`.
pub fn derive_seed(root: u64, tag: &str, index: u64) -> u64 {
    let mut h = splitmix64(root);
    for b in tag.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ index)
}

/// Named substreams of one root seed.
///
/// * `dataset()`: simulated covariates, shocks and equilibrium picks, one
///   stream per observation.
/// * `latent()`: Monte Carlo latent samples; stream 0 feeds the test
///   statistic, streams `1..=S` the critical values.
/// * `replication(r)`: root of the r-th independent replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeeds {
    root: u64,
}

impl StreamSeeds {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn dataset(&self) -> u64 {
        derive_seed(self.root, "dataset", 0)
    }

    pub fn latent(&self) -> u64 {
        derive_seed(self.root, "latent", 0)
    }

    pub fn replication(&self, r: u64) -> Self {
        Self::new(derive_seed(self.root, "replication", r))
    }
}

/// Maps 52 random bits to the midpoints of a grid on the open interval
/// (0, 1); both ends stay exactly representable.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * TWO_POW_MINUS_52
}

#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng }
    }

    /// Positions the stream at its `index`-th 64-bit draw.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(u128::from(index) * 2);
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        open_unit(self.rng.next_u64())
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }
}
