//! Figures of merit: PAPR CCDF, noise-detection error probability, output
//! SNR (Monte-Carlo and closed form) and end-to-end bit error rate.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{add_background_noise, NoiseConfig};
use crate::error::{Error, Result};
use crate::link::Link;
use crate::modem::{Modem, ModemConfig};
use crate::numerics::{q_function, CompensatedSum, RngStream, Sample};
use crate::preprocess::{Nonlinearity, Preprocessor};

/// Output SNRs are reported no higher than this.
pub const SNR_DB_CAP: f64 = 200.0;

/// CCDF points backed by fewer exceedances are flagged low-confidence.
pub const MIN_CONFIDENT_EXCEEDANCES: usize = 20;

const PDE_STREAM: u64 = 0x0050_4445;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcdfPoint {
    pub papr_o_db: f64,
    pub ccdf: f64,
    pub exceedances: usize,
}

impl CcdfPoint {
    pub fn low_confidence(&self) -> bool {
        self.exceedances < MIN_CONFIDENT_EXCEEDANCES
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcdfCurve {
    pub points: Vec<CcdfPoint>,
    pub n_samples: usize,
}

/// Fraction of PAPR samples strictly above each threshold. Samples and
/// thresholds share one unit (dB throughout this crate).
pub fn ccdf(papr_samples: &[f64], grid: &[f64]) -> Result<CcdfCurve> {
    if papr_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = papr_samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let points = grid
        .iter()
        .map(|&t| {
            let exceedances = n - sorted.partition_point(|&x| x <= t);
            CcdfPoint {
                papr_o_db: t,
                ccdf: exceedances as f64 / n as f64,
                exceedances,
            }
        })
        .collect();
    Ok(CcdfCurve {
        points,
        n_samples: n,
    })
}

/// Smallest sample value `x` whose exceedance fraction is at most `level`.
pub fn papr_at_ccdf(papr_samples: &[f64], level: f64) -> Result<f64> {
    if papr_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = papr_samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((level * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
    Ok(sorted[k])
}

/// PAPR in dB of `frames` random frames, frame `i` drawn from its own
/// substream of `rng`.
pub fn papr_samples_db(
    cfg: &ModemConfig,
    oversampling: usize,
    frames: usize,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    let modem = Modem::new(*cfg)?;
    (0..frames as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.substream(&[i]);
            let (_, _, f) = modem.random_frame(&mut r);
            crate::modem::papr_db(f.samples(), oversampling)
        })
        .collect()
}

/// Probability that an impulse-free sample's envelope exceeds `threshold`,
/// weighted by the probability of the impulse-free state.
pub fn p_detection_error(
    cfg: &ModemConfig,
    noise: &NoiseConfig,
    threshold: f64,
    trials: usize,
    rng: &RngStream,
) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    Ok(p_detection_error_curve(cfg, noise, &[threshold], trials, rng)?[0])
}

/// `p_detection_error` over many thresholds on one set of frames.
pub fn p_detection_error_curve(
    cfg: &ModemConfig,
    noise: &NoiseConfig,
    thresholds: &[f64],
    trials: usize,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let modem = Modem::new(*cfg)?;
    let mut envelopes: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut r = rng.substream(&[PDE_STREAM, i]);
            let (_, _, f) = modem.random_frame(&mut r);
            add_background_noise(f.samples(), noise, &mut r)
                .into_iter()
                .map(|s| s.norm())
        })
        .collect();
    envelopes.sort_by(f64::total_cmp);
    let n = envelopes.len() as f64;
    let clean = 1.0 - noise.p();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let above = envelopes.len() - envelopes.partition_point(|&e| e <= t);
            clean * above as f64 / n
        })
        .collect())
}

/// How the Monte-Carlo scaling constant `R₁` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingForm {
    /// `R₁ = ½·E[Re{y s̄*}]`, the least-squares gain for `E|s̄|² = 2`.
    #[default]
    Correlation,
    /// `R₁ = ½·E[|y s̄*|²]` taken literally; kept only for auditing.
    FourthMoment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrEstimate {
    pub gamma_linear: f64,
    pub gamma_db: f64,
    /// Samples behind the estimate; zero for closed-form values.
    pub n_samples: usize,
    pub r1: f64,
}

impl SnrEstimate {
    fn from_parts(signal: f64, distortion: f64, r1: f64, n_samples: usize) -> Self {
        let cap = 10f64.powf(SNR_DB_CAP / 10.0);
        let gamma = if distortion > 0.0 {
            (signal / distortion).min(cap)
        } else {
            cap
        };
        Self {
            gamma_linear: gamma,
            gamma_db: (10.0 * gamma.log10()).min(SNR_DB_CAP),
            n_samples,
            r1,
        }
    }
}

/// Mergeable sufficient statistics for the output SNR of one
/// (reference, preprocessed) sample stream.
#[derive(Debug, Clone, Copy, Default)]
pub struct SnrAccumulator {
    cross: CompensatedSum,
    signal: CompensatedSum,
    output: CompensatedSum,
    fourth: CompensatedSum,
    n: usize,
}

impl SnrAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, reference: Sample, output: Sample) {
        let c = output * reference.conj();
        self.cross.add(c.re);
        self.signal.add(reference.norm_sqr());
        self.output.add(output.norm_sqr());
        self.fourth.add(c.norm_sqr());
        self.n += 1;
    }

    pub fn extend(&mut self, reference: &[Sample], output: &[Sample]) {
        for (&s, &y) in reference.iter().zip(output) {
            self.push(s, y);
        }
    }

    pub fn merge(&mut self, other: &SnrAccumulator) {
        self.cross.merge(&other.cross);
        self.signal.merge(&other.signal);
        self.output.merge(&other.output);
        self.fourth.merge(&other.fourth);
        self.n += other.n;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn estimate(&self, form: ScalingForm) -> Result<SnrEstimate> {
        if self.n == 0 {
            return Err(Error::EmptySamples);
        }
        let n = self.n as f64;
        let r1 = match form {
            ScalingForm::Correlation => 0.5 * self.cross.value() / n,
            ScalingForm::FourthMoment => 0.5 * self.fourth.value() / n,
        };
        Ok(snr_from_moments(
            r1,
            self.cross.value() / n,
            self.signal.value() / n,
            self.output.value() / n,
            self.n,
        ))
    }
}

/// `E|R s|² / E|y − R s|²` from the three second moments.
pub(crate) fn snr_from_moments(
    r1: f64,
    cross: f64,
    signal: f64,
    output: f64,
    n: usize,
) -> SnrEstimate {
    let sig = r1 * r1 * signal;
    let dist = output - 2.0 * r1 * cross + r1 * r1 * signal;
    SnrEstimate::from_parts(sig, dist, r1, n)
}

/// Monte-Carlo output SNR of a preprocessed stream against the signal it
/// carries.
pub fn output_snr_mc(sent: &[Sample], received_preprocessed: &[Sample]) -> Result<SnrEstimate> {
    if sent.len() != received_preprocessed.len() {
        return Err(Error::DimensionMismatch {
            expected: sent.len(),
            got: received_preprocessed.len(),
        });
    }
    let mut acc = SnrAccumulator::new();
    acc.extend(sent, received_preprocessed);
    acc.estimate(ScalingForm::Correlation)
}

/// Which closed-form output-power term to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticForm {
    /// Output power integrated directly from the Gaussian-signal model.
    #[default]
    Derived,
    /// `E_o = 2 + 2 Σ p_i (σ_i² − Γ) exp(−T²/(2(1+σ_i²)))` taken literally.
    Printed,
}

/// Closed-form output SNR for a complex-Gaussian transmit signal with unit
/// variance per dimension in Bernoulli-Gaussian noise.
///
/// Conditioned on mixture state `i` the received envelope is Rayleigh with
/// per-dimension variance `v_i = 1 + σ_i²`, `σ₀² = σ_w²`,
/// `σ₁² = σ_w² + σ_i²`. With `a_i = T²/(2v_i)`:
///
/// * gain `R₂ = Σ p_i [1 − e^{−a_i} − TΞ_i]`, where nulling uses
///   `TΞ_i = a_i e^{−a_i}` and clipping uses
///   `TΞ_i = −T √(π/(2v_i)) Q(T/√v_i)`;
/// * output power `E_o = Σ p_i [2v_i − (2v_i + T²) e^{−a_i}]` for nulling and
///   `Σ p_i 2v_i (1 − e^{−a_i})` for clipping;
/// * `γ = 2R₂² / (E_o − 2R₂²)`.
pub fn output_snr_analytic(
    threshold: f64,
    noise: &NoiseConfig,
    mode: Nonlinearity,
    form: AnalyticForm,
) -> Result<SnrEstimate> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let t = threshold;
    let mut gain = 0.0;
    let mut power = match form {
        AnalyticForm::Derived => 0.0,
        AnalyticForm::Printed => 2.0,
    };
    for (weight, var) in noise.mixture() {
        if weight == 0.0 {
            continue;
        }
        let v = 1.0 + var;
        let a = t * t / (2.0 * v);
        let tail = (-a).exp();
        // T·Ξ; both branches vanish as T → ∞.
        let t_xi = if t.is_infinite() {
            0.0
        } else {
            match mode {
                Nonlinearity::Nulling => a * tail,
                Nonlinearity::Clipping => -t * (PI / (2.0 * v)).sqrt() * q_function(t / v.sqrt()),
            }
        };
        gain += weight * (1.0 - tail - t_xi);
        power += match form {
            AnalyticForm::Derived => {
                let t2_tail = if t.is_infinite() { 0.0 } else { t * t * tail };
                match mode {
                    Nonlinearity::Nulling => weight * (2.0 * v * (1.0 - tail) - t2_tail),
                    Nonlinearity::Clipping => weight * 2.0 * v * (1.0 - tail),
                }
            }
            AnalyticForm::Printed => {
                let gamma = match mode {
                    Nonlinearity::Nulling => 1.0 + var,
                    Nonlinearity::Clipping => 1.0 + t * t + var,
                };
                if t.is_infinite() {
                    0.0
                } else {
                    2.0 * weight * (var - gamma) * tail
                }
            }
        };
    }
    let denom = power - 2.0 * gain * gain;
    if !(denom > 0.0) {
        return Err(Error::AnalyticOutOfRange(denom));
    }
    Ok(SnrEstimate::from_parts(2.0 * gain * gain, denom, gain, 0))
}

/// Bit errors over bits sent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BerCount {
    pub errors: u64,
    pub bits: u64,
}

impl BerCount {
    pub fn rate(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    pub fn merge(&mut self, other: &BerCount) {
        self.errors += other.errors;
        self.bits += other.bits;
    }
}

/// Hard-decision errors after preprocessing, demodulating and demapping one
/// received frame.
pub fn count_bit_errors(
    modem: &Modem,
    pp: &Preprocessor,
    received: &[Sample],
    bits: &[bool],
) -> Result<BerCount> {
    let y = pp.apply(received);
    let grid = modem.demodulate(&y)?;
    let decided = modem.demap(&grid)?;
    let errors = decided.iter().zip(bits).filter(|(a, b)| a != b).count() as u64;
    Ok(BerCount {
        errors,
        bits: bits.len() as u64,
    })
}

/// End-to-end Monte-Carlo bit error rate over a flat channel.
pub fn ber(
    cfg: &ModemConfig,
    noise: &NoiseConfig,
    pp: &Preprocessor,
    trials: usize,
    rng: &RngStream,
) -> Result<f64> {
    Ok(ber_count(cfg, noise, pp, trials, rng)?.rate())
}

pub fn ber_count(
    cfg: &ModemConfig,
    noise: &NoiseConfig,
    pp: &Preprocessor,
    trials: usize,
    rng: &RngStream,
) -> Result<BerCount> {
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let link = Link::new(*cfg, *noise, None)?;
    let counts = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let f = link.realize(rng, i)?;
            count_bit_errors(link.modem(), pp, &f.received, &f.bits)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = BerCount::default();
    for c in &counts {
        total.merge(c);
    }
    Ok(total)
}

/// Monte-Carlo output SNR for one preprocessor over `trials` frames.
pub fn output_snr_link(
    link: &Link,
    pp: &Preprocessor,
    trials: usize,
    rng: &RngStream,
) -> Result<SnrEstimate> {
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let parts = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let f = link.realize(rng, i)?;
            let mut acc = SnrAccumulator::new();
            acc.extend(&f.reference, &pp.apply(&f.received));
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = SnrAccumulator::new();
    for p in &parts {
        acc.merge(p);
    }
    acc.estimate(ScalingForm::Correlation)
}
