//! Counter-based random streams.
//!
//! A stream is identified by a master seed and a hashed label path. The
//! generator for a stream is ChaCha8 keyed by that pair and positioned at
//! the stream counter, so the draws never depend on thread scheduling.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

pub type StreamRng = ChaCha8Rng;

/// One component of a stream label path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label<'a> {
    Name(&'a str),
    Index(u64),
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Name(s)
    }
}

impl From<u64> for Label<'_> {
    fn from(i: u64) -> Self {
        Label::Index(i)
    }
}

impl From<usize> for Label<'_> {
    fn from(i: usize) -> Self {
        Label::Index(i as u64)
    }
}

impl From<u32> for Label<'_> {
    fn from(i: u32) -> Self {
        Label::Index(i as u64)
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A value-like handle on an independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    master_seed: u64,
    key: u64,
    counter: u64,
}

impl RngStream {
    /// The stream with an empty label.
    pub fn root(master_seed: u64) -> Self {
        Self {
            master_seed,
            key: 0x5EED_0F_5EED,
            counter: 0,
        }
    }

    fn extend(&self, tag: u64, part: u64) -> Self {
        let key = splitmix64(self.key ^ splitmix64(part.wrapping_add(tag)));
        Self {
            master_seed: self.master_seed,
            key,
            counter: 0,
        }
    }

    /// Substream labelled by an index.
    pub fn child(&self, index: u64) -> Self {
        self.extend(0x1D, index)
    }

    /// Substream labelled by a name.
    pub fn named(&self, name: &str) -> Self {
        self.extend(0x2E, fnv1a(name.as_bytes()))
    }

    pub fn label(&self, part: Label<'_>) -> Self {
        match part {
            Label::Name(s) => self.named(s),
            Label::Index(i) => self.child(i),
        }
    }

    pub fn with_counter(mut self, counter: u64) -> Self {
        self.counter = counter;
        self
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Generator positioned at this stream's counter (in 64-byte blocks).
    pub fn rng(&self) -> StreamRng {
        let mut s = splitmix64(self.master_seed) ^ self.key.rotate_left(17);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        if self.counter > 0 {
            rng.set_word_pos(self.counter as u128 * 16);
        }
        rng
    }
}

/// Stream for `(master_seed, label)`.
pub fn derive_stream(master_seed: u64, label: &[Label<'_>]) -> RngStream {
    label
        .iter()
        .fold(RngStream::root(master_seed), |s, &p| s.label(p))
}

/// Fills `out` with iid N(0, rho²) draws.
pub fn fill_gaussian(rng: &mut StreamRng, rho: f64, out: &mut [f64]) {
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = rho * z;
    }
}

/// A draw from N(0, rho² I_d) using the given stream.
pub fn gaussian_vector(stream: &RngStream, d: usize, rho: f64) -> Result<DVector<f64>> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(invalid("rho", "must be finite and nonnegative"));
    }
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    let mut v = DVector::zeros(d);
    if rho > 0.0 {
        fill_gaussian(&mut stream.rng(), rho, v.as_mut_slice());
    }
    Ok(v)
}
