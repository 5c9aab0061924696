//! Deterministic random streams.
//!
//! Every stochastic routine draws from ChaCha20 (the `rand_chacha`
//! implementation), keyed by a 64-bit seed expanded with
//! `SeedableRng::seed_from_u64` and split into independent substreams with
//! `set_stream`. A (seed, stream) pair therefore identifies a bit-exact
//! sequence on every platform, independent of evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

pub type StreamRng = ChaCha20Rng;

/// Substream `stream` of the generator keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and an entity tag (SplitMix64
/// finalizer), for nesting generators such as replication -> draw.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Chi-square draw with `dof` degrees of freedom.
pub fn chi_square<R: Rng + ?Sized>(rng: &mut R, dof: f64) -> f64 {
    // shape/scale are valid for any dof > 0
    Gamma::new(0.5 * dof, 2.0).expect("positive dof").sample(rng)
}
