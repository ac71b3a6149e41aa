//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 keystream. The 256-bit key is expanded from the
//! 64-bit master seed with the PCG32 expander of `rand_core::SeedableRng::seed_from_u64`,
//! and the 64-bit stream id selects the ChaCha stream (nonce). A given
//! `(seed, stream)` pair therefore produces the same words on every platform,
//! and distinct stream ids are independent keystreams under the same key.
//!
//! All floating point transforms below use `libm`, so derived samples are
//! bit-reproducible as well.

use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// A `(master seed, stream id)` pair naming one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A child stream for task `index`; children of distinct parents or
    /// distinct indices get distinct (mixed) stream ids.
    pub fn derive(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15))),
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream);
        StreamRng { inner, spare: None }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator state for one [`RngStream`], with the variate transforms the
/// samplers need.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl StreamRng {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval `(0, 1)`, 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// `+1.0` or `-1.0` with equal probability.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Standard normal via the Box–Muller transform; the second variate of
    /// each pair is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(2.0 * PI * u2);
        self.spare = Some(r * s);
        r * c
    }

    /// Standard exponential.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -libm::log(self.uniform())
    }

    /// Gamma(shape, 1) for `shape >= 1` (Marsaglia–Tsang squeeze).
    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape >= 1.0);
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / libm::sqrt(9.0 * d);
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            if u < 1.0 - 0.0331 * x * x * x * x || libm::log(u) < 0.5 * x * x + d * (1.0 - v + libm::log(v)) {
                return d * v;
            }
        }
    }

    /// Bernoulli(`p`) at 53-bit resolution.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
