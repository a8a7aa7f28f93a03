//! Bernoulli-Gaussian impulsive noise and a log-normal multipath channel.
//!
//! All variances are per real dimension, measured against a transmit signal
//! with unit variance per dimension (`E|s|² = 2`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gaussian_pair, RngStream, Sample};

/// Noise environment: impulse probability plus background and impulsive
/// power ratios in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    p: f64,
    snr_db: f64,
    sinr_db: f64,
}

impl NoiseConfig {
    /// `snr_db` / `sinr_db` may be `+∞` to switch a component off.
    pub fn new(p: f64, snr_db: f64, sinr_db: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidNoise(format!(
                "probability out of range: {p}"
            )));
        }
        for (name, v) in [("snr_db", snr_db), ("sinr_db", sinr_db)] {
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::InvalidNoise(format!(
                    "{name} must be a number or +inf, got {v}"
                )));
            }
        }
        Ok(Self { p, snr_db, sinr_db })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn sinr_db(&self) -> f64 {
        self.sinr_db
    }

    /// σ_w², background variance per dimension.
    pub fn background_variance(&self) -> f64 {
        db_to_variance(self.snr_db)
    }

    /// σ_i², impulsive variance per dimension.
    pub fn impulse_variance(&self) -> f64 {
        db_to_variance(self.sinr_db)
    }

    /// Mixture components `(weight, per-dimension variance)`: the
    /// background-only state and the background-plus-impulse state.
    pub fn mixture(&self) -> [(f64, f64); 2] {
        let w = self.background_variance();
        [(1.0 - self.p, w), (self.p, w + self.impulse_variance())]
    }

    /// Mean total-noise variance per dimension.
    pub fn total_variance(&self) -> f64 {
        self.mixture().iter().map(|(wt, v)| wt * v).sum()
    }

    pub fn with_sinr(&self, sinr_db: f64) -> Result<Self> {
        Self::new(self.p, self.snr_db, sinr_db)
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(p, self.snr_db, self.sinr_db)
    }
}

fn db_to_variance(db: f64) -> f64 {
    if db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-db / 10.0)
    }
}

/// Which samples carried an impulse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpulseMask {
    pub flags: Vec<bool>,
}

impl ImpulseMask {
    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Adds background and gated impulsive noise to every sample.
///
/// Every sample consumes the same number of draws regardless of `p` and the
/// variances, so runs that differ only in SINR share one noise realization
/// up to scale.
pub fn add_noise(
    samples: &[Sample],
    cfg: &NoiseConfig,
    rng: &mut RngStream,
) -> (Vec<Sample>, ImpulseMask) {
    let sw = cfg.background_variance().sqrt();
    let si = cfg.impulse_variance().sqrt();
    let mut flags = Vec::with_capacity(samples.len());
    let out = samples
        .iter()
        .map(|&s| {
            let w = unit_pair(rng);
            let hit = rng.uniform() < cfg.p;
            let g = unit_pair(rng);
            flags.push(hit);
            let mut r = s + w * sw;
            if hit {
                r += g * si;
            }
            r
        })
        .collect();
    (out, ImpulseMask { flags })
}

/// Background noise only (the impulse-free hypothesis).
pub fn add_background_noise(
    samples: &[Sample],
    cfg: &NoiseConfig,
    rng: &mut RngStream,
) -> Vec<Sample> {
    let sw = cfg.background_variance().sqrt();
    samples.iter().map(|&s| s + unit_pair(rng) * sw).collect()
}

fn unit_pair(rng: &mut RngStream) -> Sample {
    gaussian_pair(rng, 1.0).expect("unit variance is valid")
}

/// Density of one real dimension of the total noise: a two-component
/// zero-mean Gaussian mixture.
pub fn total_noise_pdf(x: f64, cfg: &NoiseConfig) -> f64 {
    cfg.mixture()
        .iter()
        .filter(|(w, _)| *w > 0.0)
        .map(|&(w, v)| w * gaussian_pdf(x, v))
        .sum()
}

fn gaussian_pdf(x: f64, var: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Linear time-invariant multipath channel applied by circular convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveChannel {
    taps: Vec<Sample>,
    scale: f64,
}

impl SelectiveChannel {
    /// Normalizes `raw` to unit total power gain.
    pub fn normalized(raw: Vec<Sample>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidChannel(
                "channel needs at least one tap".into(),
            ));
        }
        let energy: f64 = raw.iter().map(|t| t.norm_sqr()).sum();
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::InvalidChannel(
                "tap energy must be positive and finite".into(),
            ));
        }
        let scale = 1.0 / energy.sqrt();
        Ok(Self {
            taps: raw.into_iter().map(|t| t * scale).collect(),
            scale,
        })
    }

    pub fn taps(&self) -> &[Sample] {
        &self.taps
    }

    /// Factor that was applied to the raw taps.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `Σ_k h_k e^{−j2πfk/N}` at bin `f` of an `N`-point grid.
    pub fn frequency_response(&self, bin: usize, n: usize) -> Sample {
        self.taps
            .iter()
            .enumerate()
            .map(|(k, h)| {
                h * Sample::from_polar(1.0, -2.0 * PI * ((bin * k) % n) as f64 / n as f64)
            })
            .sum()
    }
}

pub fn apply_selective(samples: &[Sample], ch: &SelectiveChannel) -> Result<Vec<Sample>> {
    let n = samples.len();
    if ch.taps.len() > n {
        return Err(Error::InvalidChannel(format!(
            "{} taps exceed frame length {n}",
            ch.taps.len()
        )));
    }
    Ok((0..n)
        .map(|i| {
            ch.taps
                .iter()
                .enumerate()
                .map(|(k, h)| h * samples[(i + n - k) % n])
                .sum()
        })
        .collect())
}

/// Unnormalized taps: log-normal magnitudes `exp(σ·Z)` with uniform phase.
pub fn sample_lognormal_taps(
    rng: &mut RngStream,
    n_taps: usize,
    sigma_ln: f64,
) -> Result<Vec<Sample>> {
    if n_taps == 0 {
        return Err(Error::InvalidChannel(
            "channel needs at least one tap".into(),
        ));
    }
    if !(sigma_ln >= 0.0) || !sigma_ln.is_finite() {
        return Err(Error::InvalidChannel(format!(
            "log-std must be ≥ 0, got {sigma_ln}"
        )));
    }
    Ok((0..n_taps)
        .map(|_| {
            let mag = (sigma_ln * rng.standard_normal()).exp();
            let phase = 2.0 * PI * rng.uniform();
            Sample::from_polar(mag, phase)
        })
        .collect())
}

pub fn sample_selective(
    rng: &mut RngStream,
    n_taps: usize,
    sigma_ln: f64,
) -> Result<SelectiveChannel> {
    SelectiveChannel::normalized(sample_lognormal_taps(rng, n_taps, sigma_ln)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dft, q_function, CompensatedSum, Direction};

    fn zeros(n: usize) -> Vec<Sample> {
        vec![Sample::new(0.0, 0.0); n]
    }

    #[test]
    fn variances_from_db() {
        let c = NoiseConfig::new(0.01, 25.0, -15.0).unwrap();
        assert!((c.background_variance() - 10f64.powf(-2.5)).abs() < 1e-15);
        assert!((c.impulse_variance() - 10f64.powf(1.5)).abs() < 1e-12);
        let [(p0, v0), (p1, v1)] = c.mixture();
        assert_eq!(p0 + p1, 1.0);
        assert_eq!(v1, v0 + c.impulse_variance());
    }

    #[test]
    fn invalid_noise_rejected() {
        assert!(NoiseConfig::new(1.5, 25.0, -15.0).is_err());
        assert!(NoiseConfig::new(-0.1, 25.0, -15.0).is_err());
        assert!(NoiseConfig::new(0.1, f64::NAN, -15.0).is_err());
        assert!(NoiseConfig::new(0.1, f64::INFINITY, f64::INFINITY).is_ok());
    }

    #[test]
    fn noiseless_limit_is_exact() {
        let c = NoiseConfig::new(0.0, f64::INFINITY, -10.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        let x: Vec<Sample> = (0..100)
            .map(|k| Sample::new(k as f64, -(k as f64)))
            .collect();
        let (y, mask) = add_noise(&x, &c, &mut rng);
        assert_eq!(y, x);
        assert_eq!(mask.count(), 0);
    }

    #[test]
    fn full_impulse_probability_variance() {
        let c = NoiseConfig::new(1.0, 10.0, 0.0).unwrap();
        let mut rng = RngStream::new(2, 0);
        let n = 1_000_000;
        let (y, mask) = add_noise(&zeros(n), &c, &mut rng);
        assert_eq!(mask.count(), n);
        let v: CompensatedSum = y.iter().map(|s| s.norm_sqr()).collect();
        let per_dim = v.value() / (2 * n) as f64;
        let want = c.background_variance() + c.impulse_variance();
        assert!((per_dim / want - 1.0).abs() < 0.01);
    }

    #[test]
    fn impulse_count_concentration() {
        let c = NoiseConfig::new(0.01, 25.0, -15.0).unwrap();
        let mut rng = RngStream::new(3, 0);
        let n = 1_000_000;
        let (_, mask) = add_noise(&zeros(n), &c, &mut rng);
        let expected = n as f64 * 0.01;
        let tol = 3.0 * (n as f64 * 0.01 * 0.99).sqrt();
        assert!((mask.count() as f64 - expected).abs() <= tol);
    }

    #[test]
    fn mixture_variance_within_one_percent() {
        // At p = 0.01 the estimate is dominated by ~1e4 impulses (≈1.4%
        // relative error), so the 1% moment check runs at p = 0.1.
        let c = NoiseConfig::new(0.1, 10.0, 0.0).unwrap();
        let mut rng = RngStream::new(13, 0);
        let n = 1_000_000;
        let (y, _) = add_noise(&zeros(n), &c, &mut rng);
        let v: CompensatedSum = y.iter().map(|s| s.norm_sqr()).collect();
        let per_dim = v.value() / (2 * n) as f64;
        assert!((per_dim / c.total_variance() - 1.0).abs() < 0.01);
    }

    #[test]
    fn mask_has_no_lag_one_correlation() {
        let c = NoiseConfig::new(0.1, 25.0, -15.0).unwrap();
        let mut rng = RngStream::new(4, 0);
        let n = 1_000_000;
        let (_, mask) = add_noise(&zeros(n), &c, &mut rng);
        let x: Vec<f64> = mask.flags.iter().map(|&b| b as u8 as f64).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let cov = x
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        assert!((cov / var).abs() < 0.01);
    }

    #[test]
    fn pdf_reduces_to_gaussian_without_impulses() {
        let c = NoiseConfig::new(0.0, 10.0, -10.0).unwrap();
        for x in [-1.0, -0.1, 0.0, 0.3, 2.0] {
            assert!((total_noise_pdf(x, &c) - gaussian_pdf(x, 0.1)).abs() < 1e-14);
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        let c = NoiseConfig::new(0.01, 25.0, -15.0).unwrap();
        // Simpson on [-60, 60]: far beyond 10 sd of the wide component.
        let (a, b, n) = (-60.0, 60.0, 2_000_000usize);
        let h = (b - a) / n as f64;
        let mut s = CompensatedSum::new();
        s.add(total_noise_pdf(a, &c) + total_noise_pdf(b, &c));
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s.add(w * total_noise_pdf(a + i as f64 * h, &c));
        }
        assert!((s.value() * h / 3.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn histogram_matches_pdf_chi_square() {
        // Bin edges chosen so every bin has a large expected count; the last
        // bins are open-ended tails. Bin probabilities are computed from the
        // mixture CDF via the Q-function.
        let c = NoiseConfig::new(0.05, 10.0, -5.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        let n = 1_000_000;
        let (y, _) = add_noise(&zeros(n), &c, &mut rng);
        let cdf = |x: f64| -> f64 {
            c.mixture()
                .iter()
                .map(|&(w, v)| w * (1.0 - q_function(x / v.sqrt())))
                .sum()
        };
        let mut edges = vec![f64::NEG_INFINITY];
        let mut e = -3.0;
        while e <= 3.0 + 1e-9 {
            edges.push(e);
            e += 0.1;
        }
        edges.push(f64::INFINITY);
        let mut counts = vec![0usize; edges.len() - 1];
        for s in &y {
            let idx = edges.partition_point(|&b| b <= s.re) - 1;
            counts[idx] += 1;
        }
        let mut chi2 = 0.0;
        for (i, &cnt) in counts.iter().enumerate() {
            let lo = if edges[i].is_finite() {
                cdf(edges[i])
            } else {
                0.0
            };
            let hi = if edges[i + 1].is_finite() {
                cdf(edges[i + 1])
            } else {
                1.0
            };
            let exp = (hi - lo) * n as f64;
            assert!(exp > 50.0);
            chi2 += (cnt as f64 - exp).powi(2) / exp;
        }
        // 62 bins → 61 degrees of freedom; the 0.99 quantile is 88.4.
        assert_eq!(counts.len(), 62);
        assert!(chi2 < 88.4, "chi2 = {chi2}");
    }

    #[test]
    fn impulse_and_delay_channels() {
        let x: Vec<Sample> = (0..8).map(|k| Sample::new(k as f64, 1.0)).collect();
        let id = SelectiveChannel::normalized(vec![Sample::new(1.0, 0.0)]).unwrap();
        assert_eq!(apply_selective(&x, &id).unwrap(), x);
        let delay =
            SelectiveChannel::normalized(vec![Sample::new(0.0, 0.0), Sample::new(1.0, 0.0)])
                .unwrap();
        let y = apply_selective(&x, &delay).unwrap();
        for k in 0..8 {
            assert_eq!(y[k], x[(k + 7) % 8]);
        }
        let long = SelectiveChannel::normalized(vec![Sample::new(1.0, 0.0); 9]).unwrap();
        assert!(apply_selective(&x, &long).is_err());
    }

    #[test]
    fn single_tone_sees_channel_frequency_response() {
        let n = 64;
        let mut rng = RngStream::new(6, 0);
        let ch = sample_selective(&mut rng, 4, 0.5).unwrap();
        for bin in [0, 1, 5, 31, 63] {
            let mut spec = zeros(n);
            spec[bin] = Sample::new(1.0, 0.0);
            let tone = dft(&spec, Direction::Inverse).unwrap();
            let out = apply_selective(&tone, &ch).unwrap();
            let out_spec = dft(&out, Direction::Forward).unwrap();
            let h = ch.frequency_response(bin, n);
            // Also check the response against the DFT of the zero-padded taps.
            let mut padded = zeros(n);
            padded[..4].copy_from_slice(ch.taps());
            let taps_spec = dft(&padded, Direction::Forward).unwrap();
            assert!((taps_spec[bin] * (n as f64).sqrt() - h).norm() < 1e-12);
            for (k, v) in out_spec.iter().enumerate() {
                let want = if k == bin { h } else { Sample::new(0.0, 0.0) };
                assert!((v - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn selective_draw_properties() {
        let mut rng = RngStream::new(7, 0);
        let ch = sample_selective(&mut rng, 1, 0.0).unwrap();
        assert!((ch.taps()[0].norm() - 1.0).abs() < 1e-15);
        for _ in 0..100 {
            let ch = sample_selective(&mut rng, 4, 0.5).unwrap();
            let e: f64 = ch.taps().iter().map(|t| t.norm_sqr()).sum();
            assert!((e - 1.0).abs() < 1e-12);
        }
        assert!(sample_selective(&mut rng, 0, 0.5).is_err());
        assert!(sample_selective(&mut rng, 4, -1.0).is_err());
    }

    #[test]
    fn unit_gain_channel_preserves_average_power() {
        let mut rng = RngStream::new(11, 0);
        let n = 256;
        let (mut pin, mut pout) = (0.0, 0.0);
        for _ in 0..2000 {
            let ch = sample_selective(&mut rng, 4, 0.5).unwrap();
            let x: Vec<Sample> = (0..n)
                .map(|_| gaussian_pair(&mut rng, 1.0).unwrap())
                .collect();
            let y = apply_selective(&x, &ch).unwrap();
            pin += x.iter().map(|s| s.norm_sqr()).sum::<f64>();
            pout += y.iter().map(|s| s.norm_sqr()).sum::<f64>();
        }
        assert!((pout / pin - 1.0).abs() < 0.01);
    }

    #[test]
    fn lognormal_magnitudes_pass_ks() {
        let mut rng = RngStream::new(8, 0);
        let sigma = 0.5;
        let mut mags: Vec<f64> = (0..10_000)
            .flat_map(|_| sample_lognormal_taps(&mut rng, 4, sigma).unwrap())
            .map(|t| t.norm())
            .collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = mags.len() as f64;
        let d = mags
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - q_function(x.ln() / sigma);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // KS critical value at α = 0.01.
        assert!(d < 1.628 / n.sqrt(), "D = {d}");
    }
}
