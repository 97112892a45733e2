//! Counter-style random streams.
//!
//! Every simulated object (an outer path, the inner fan of one outer point, a
//! pricing path, ...) draws from its own ChaCha8 stream selected by
//! `(seed, domain, index)`. A path's numbers therefore never depend on how
//! the work is split across threads. Normal variates use the ziggurat sampler
//! from `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a stream is used for. Distinct domains never share a stream even for
/// equal seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    OuterPaths,
    /// Inner one-step fans launched from the given grid date.
    InnerFan(usize),
    /// Fresh outer paths for a single training date.
    FreshOuter(usize),
    Pricing,
    Backward,
    Pnl,
    DenseMc,
    NetworkInit,
    Shuffle,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::OuterPaths => 1,
            Domain::InnerFan(n) => 0x1000_0000 + n as u64,
            Domain::FreshOuter(n) => 0x2000_0000 + n as u64,
            Domain::Pricing => 2,
            Domain::Backward => 3,
            Domain::Pnl => 4,
            Domain::DenseMc => 5,
            Domain::NetworkInit => 6,
            Domain::Shuffle => 7,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hands out independent streams for one `(seed, domain)` pair.
#[derive(Clone)]
pub struct Streams {
    base: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64, domain: Domain) -> Self {
        let key = splitmix64(seed ^ splitmix64(domain.tag()));
        Streams {
            base: ChaCha8Rng::seed_from_u64(key),
        }
    }

    /// Stream number `index`, positioned at its start.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        rng
    }
}

/// Convenience for a single stream.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    Streams::new(seed, domain).stream(index)
}

#[inline]
pub fn fill_normals<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for z in out.iter_mut() {
        *z = rng.sample(StandardNormal);
    }
}
