//! Counter-based seed derivation and random stream construction.
//!
//! Every random quantity in a simulation is drawn from a `ChaCha8` stream
//! whose seed is derived, not shared: child seeds come from mixing a parent
//! seed with a tag and an index through a splitmix64 chain. Trials therefore
//! never consume from a common stream, which is what makes results identical
//! under any scheduling of the trial loop.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// splitmix64 finalizer; bijective on `u64`.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from `(parent, tag, index)`. Distinct argument
/// triples map to distinct-looking seeds; the mapping is pure.
pub fn derive_seed(parent: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(parent) ^ tag) ^ index)
}

/// Fresh deterministic random stream for a derived seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One draw of a circularly-symmetric complex Gaussian with unit variance
/// (`E|z|^2 = 1`): independent real and imaginary parts of variance 1/2.
pub fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Uniform phase in `[0, 2*pi)`.
pub fn uniform_phase(rng: &mut impl Rng) -> f64 {
    rng.gen_range(0.0..std::f64::consts::TAU)
}
