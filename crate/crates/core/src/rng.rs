//! Seeded, order-independent random streams.
//!
//! Each unit of parallel work (a bootstrap replicate, a Monte Carlo
//! repetition, a subsampling draw) gets its own ChaCha stream addressed by
//! `(seed, domain, index)`. Within a stream, coordinates are consumed in
//! increasing index order, so results never depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub type StreamRng = ChaCha8Rng;

/// Separates the purposes that share a user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Bootstrap,
    Truth,
    Subsample,
    Data,
    Design,
    Folds,
    Oracle,
    Other(u64),
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Bootstrap => 0x6274_7370,
            Domain::Truth => 0x7472_7574,
            Domain::Subsample => 0x7375_6273,
            Domain::Data => 0x6461_7461,
            Domain::Design => 0x6465_7367,
            Domain::Folds => 0x666f_6c64,
            Domain::Oracle => 0x6f72_636c,
            Domain::Other(t) => t.rotate_left(17) ^ 0x9e37_79b9_7f4a_7c15,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed, e.g. one per experiment repetition.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    mix64(mix64(seed ^ domain.tag()) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// The stream for work item `index` under `(seed, domain)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ domain.tag()));
    rng.set_stream(index);
    rng
}

/// One draw of `Pois(μᵢ)` per coordinate, in index order.
pub fn poisson_vector<R: Rng + ?Sized>(mu: &[f64], rng: &mut R) -> Vec<u64> {
    mu.iter().map(|&m| poisson_draw(m, rng)).collect()
}

pub fn poisson_draw<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mu).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}
