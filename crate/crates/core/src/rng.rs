//! Seeded, counter-based random streams.
//!
//! Every stream is a ChaCha12 keystream selected by `(seed, stream_id)`.
//! Noise for iteration `t` of a run lives on its own stream, so the noise a
//! run sees never depends on how many draws other parts of the program made.
//!
//! Standard normals use the Box–Muller transform on 53-bit uniforms. Both
//! outputs of a pair are used; the second is cached until the next call.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream namespaces. Combined with a key and an index by [`derive_stream`].
pub mod tags {
    pub const NOISE: u64 = 0x6e6f_6973_6500_0001;
    pub const SHUFFLE: u64 = 0x7368_7566_6c00_0002;
    pub const SYNTHETIC: u64 = 0x7379_6e74_6800_0003;
    pub const REPLACEMENT: u64 = 0x7265_706c_6100_0004;
    pub const SUBSAMPLE: u64 = 0x7375_6273_6100_0005;
    pub const MONTE_CARLO: u64 = 0x6d6f_6e74_6500_0006;
}

#[derive(Clone, Debug)]
pub struct RngState {
    inner: ChaCha12Rng,
    spare_normal: Option<f64>,
}

/// Deterministic stream for `(seed, stream_id)`.
pub fn make_rng(seed: u64, stream_id: u64) -> RngState {
    let mut inner = ChaCha12Rng::seed_from_u64(seed);
    inner.set_stream(stream_id);
    RngState {
        inner,
        spare_normal: None,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a namespace tag, a key (e.g. the noise key of a dataset) and an
/// index (e.g. the iteration) into a stream id.
pub fn derive_stream(tag: u64, key: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(tag) ^ key) ^ index)
}

impl RngState {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`.
    fn uniform_open_zero(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound`, rejection-sampled without modulo bias.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % bound;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open_zero();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
