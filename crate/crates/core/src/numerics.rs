//! Numeric substrate: unitary DFT, Gaussian tail function, reproducible
//! random streams and compensated summation.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Complex baseband sample.
pub type Sample = Complex64;

/// Transform direction. `Inverse` uses the `e^{+j2πql/L}` kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// A planned unitary DFT of one fixed length.
///
/// Both directions are scaled by `1/√L`, so the transform preserves the
/// Euclidean norm and `forward(inverse(x)) == x`.
#[derive(Clone)]
pub struct Dft {
    len: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

impl Dft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::ZeroLengthTransform);
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            scale: 1.0 / (len as f64).sqrt(),
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms `buf` in place. Panics if `buf.len()` differs from the
    /// planned length.
    pub fn process(&self, buf: &mut [Sample], direction: Direction) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match direction {
            Direction::Forward => self.forward.process(buf),
            Direction::Inverse => self.inverse.process(buf),
        }
        for x in buf.iter_mut() {
            *x *= self.scale;
        }
    }
}

/// One-shot unitary DFT of arbitrary length.
pub fn dft(x: &[Sample], direction: Direction) -> Result<Vec<Sample>> {
    let plan = Dft::new(x.len())?;
    let mut out = x.to_vec();
    plan.process(&mut out, direction);
    Ok(out)
}

/// Direct O(L²) evaluation of the unitary DFT sum.
///
/// Kept as an independent reference for the planned transform.
pub fn naive_dft(x: &[Sample], direction: Direction) -> Result<Vec<Sample>> {
    let len = x.len();
    if len == 0 {
        return Err(Error::ZeroLengthTransform);
    }
    let sign = match direction {
        Direction::Forward => -1.0,
        Direction::Inverse => 1.0,
    };
    let scale = 1.0 / (len as f64).sqrt();
    Ok((0..len)
        .map(|q| {
            let acc: Sample = x
                .iter()
                .enumerate()
                .map(|(l, &v)| {
                    // Reduce the index product first to keep the angle small.
                    let k = (q * l) % len;
                    v * Sample::from_polar(1.0, sign * 2.0 * PI * k as f64 / len as f64)
                })
                .sum();
            acc * scale
        })
        .collect())
}

/// Upper-tail probability of the standard normal distribution.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Mixes a list of words into a single 64-bit stream identifier.
///
/// Used to give every Monte-Carlo work item (frame, grid point, purpose)
/// its own stream independent of the order work is scheduled in.
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut h = 0x243f_6a88_85a3_08d3_u64;
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible random stream addressed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id selecting one of 2^64 independent
/// keystreams under the same key.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream under the same seed, addressed by `parts`.
    pub fn substream(&self, parts: &[u64]) -> RngStream {
        let mut all = Vec::with_capacity(parts.len() + 1);
        all.push(self.stream_id);
        all.extend_from_slice(parts);
        RngStream::new(self.seed, stream_id(&all))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn bit(&mut self) -> bool {
        self.rng.next_u32() & 1 == 1
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Circularly-symmetric complex Gaussian with `variance_per_dim` on each of
/// the real and imaginary parts.
pub fn gaussian_pair(rng: &mut RngStream, variance_per_dim: f64) -> Result<Sample> {
    if !(variance_per_dim >= 0.0) || !variance_per_dim.is_finite() {
        return Err(Error::InvalidVariance(variance_per_dim));
    }
    let sd = variance_per_dim.sqrt();
    let re = rng.standard_normal();
    let im = rng.standard_normal();
    Ok(Sample::new(sd * re, sd * im))
}

/// Neumaier-compensated running sum.
///
/// Partial sums from parallel workers can be merged in any order with an
/// error far below 1e-12 relative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
