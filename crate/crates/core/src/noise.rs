//! Keyed random streams.
//!
//! Every random draw in the library comes from a [`Stream`] derived from a
//! root seed by a chain of integer labels (purpose tag, draw index, time
//! step, ...). Two runs that derive the same key see the same numbers no
//! matter what else happened before, so skipping a correction step never
//! shifts the prediction noise of later steps, and results do not depend on
//! the number of worker threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Source of the two primitive variates the models consume.
///
/// Implemented by [`Stream`] for real sampling and by [`ForcedNoise`] to pin
/// draws to chosen values in tests.
pub trait Noise {
    /// A standard normal variate.
    fn normal(&mut self) -> f64;
    /// A uniform variate in `[0, 1)`.
    fn uniform(&mut self) -> f64;
}

impl<N: Noise + ?Sized> Noise for &mut N {
    fn normal(&mut self) -> f64 {
        (**self).normal()
    }
    fn uniform(&mut self) -> f64 {
        (**self).uniform()
    }
}

/// Purpose tags mixed into stream keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Initial = 1,
    Proposal = 2,
    Resample = 3,
    Trajectory = 4,
    Measurement = 5,
    Draw = 6,
    Evaluation = 7,
    Optimizer = 8,
    Simulation = 9,
    Filter = 10,
    Ancestry = 11,
    Program = 12,
}

#[inline]
fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A position in the tree of derived random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix(seed))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Child key labelled by `label`.
    #[inline]
    pub fn child(self, label: u64) -> Self {
        StreamKey(mix(self.0 ^ mix(label.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    #[inline]
    pub fn purpose(self, purpose: Purpose) -> Self {
        self.child(purpose as u64)
    }

    /// Child key labelled by each element of `labels` in turn.
    pub fn derive(self, labels: &[u64]) -> Self {
        labels.iter().fold(self, |k, &l| k.child(l))
    }

    #[inline]
    pub fn stream(self) -> Stream {
        Stream(Xoshiro256PlusPlus::seed_from_u64(self.0))
    }
}

/// Pseudo-random stream seeded from a [`StreamKey`].
#[derive(Debug, Clone)]
pub struct Stream(Xoshiro256PlusPlus);

impl Stream {
    pub fn from_seed(seed: u64) -> Self {
        StreamKey::new(seed).stream()
    }
}

impl RngCore for Stream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

impl Noise for Stream {
    #[inline]
    fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }
    #[inline]
    fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

/// Scripted noise: replays fixed values, cycling when exhausted.
///
/// Empty scripts yield `0.0`.
#[derive(Debug, Clone, Default)]
pub struct ForcedNoise {
    normals: Vec<f64>,
    uniforms: Vec<f64>,
    next_normal: usize,
    next_uniform: usize,
}

impl ForcedNoise {
    /// All draws are zero.
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn normals(values: impl Into<Vec<f64>>) -> Self {
        ForcedNoise { normals: values.into(), ..Self::default() }
    }

    pub fn uniforms(values: impl Into<Vec<f64>>) -> Self {
        ForcedNoise { uniforms: values.into(), ..Self::default() }
    }

    pub fn with_uniforms(mut self, values: impl Into<Vec<f64>>) -> Self {
        self.uniforms = values.into();
        self
    }
}

fn cycle(values: &[f64], cursor: &mut usize) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let v = values[*cursor % values.len()];
    *cursor += 1;
    v
}

impl Noise for ForcedNoise {
    fn normal(&mut self) -> f64 {
        cycle(&self.normals, &mut self.next_normal)
    }
    fn uniform(&mut self) -> f64 {
        cycle(&self.uniforms, &mut self.next_uniform)
    }
}
