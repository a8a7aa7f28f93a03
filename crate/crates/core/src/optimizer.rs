//! Exhaustive threshold search and the (M, p, SINR) sweeps built on it.
//!
//! Every threshold of a grid point is scored on the same set of simulated
//! frames. For the output-SNR objective the frames are reduced once to
//! per-sample statistics sorted by received envelope; the SNR at any
//! threshold is then a pair of prefix sums, so a grid of thousands of
//! thresholds costs one sort.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::NoiseConfig;
use crate::error::{Error, Result};
use crate::link::{ChannelModel, FrameRealization, Link};
use crate::metrics::{
    count_bit_errors, output_snr_analytic, snr_from_moments, AnalyticForm, BerCount, SnrEstimate,
};
use crate::modem::{ModemConfig, QamOrder};
use crate::numerics::{CompensatedSum, RngStream, Sample};
use crate::preprocess::Nonlinearity;

/// Amplitude bound on the threshold search: 20·σ_s with σ_s² = 2.
pub const MAX_THRESHOLD: f64 = 20.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self {
            lo: 0.05,
            hi: 20.0,
            step: 0.05,
        }
    }
}

impl ThresholdGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0) || !(self.step > 0.0) || !(self.hi >= self.lo) {
            return Err(Error::InvalidSweep(format!(
                "threshold grid needs 0 < lo ≤ hi and step > 0, got {self:?}"
            )));
        }
        if self.hi > MAX_THRESHOLD {
            return Err(Error::InvalidSweep(format!(
                "threshold grid upper bound {} exceeds {MAX_THRESHOLD:.4}",
                self.hi
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MaxOutputSnr,
    MinBer,
}

/// How the output-SNR objective is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    #[default]
    MonteCarlo,
    /// Closed form; only meaningful for `M = 1` over a flat channel.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n_subcarriers: usize,
    pub qam: QamOrder,
    pub m_values: Vec<usize>,
    pub p_values: Vec<f64>,
    pub sinr_grid_db: Vec<f64>,
    pub snr_db: f64,
    pub nonlinearity: Nonlinearity,
    pub threshold_grid: ThresholdGrid,
    pub objective: Objective,
    pub evaluator: Evaluator,
    pub frames_per_point: usize,
    pub channel: Option<ChannelModel>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSweep(m));
        if self.m_values.is_empty() || self.p_values.is_empty() || self.sinr_grid_db.is_empty() {
            return bad("m_values, p_values and sinr_grid_db must be non-empty".into());
        }
        for &m in &self.m_values {
            ModemConfig::new(self.n_subcarriers, m, self.qam)?;
        }
        for &p in &self.p_values {
            NoiseConfig::new(p, self.snr_db, 0.0)?;
        }
        for &s in &self.sinr_grid_db {
            if !s.is_finite() {
                return bad(format!("SINR grid values must be finite, got {s}"));
            }
        }
        self.threshold_grid.validate()?;
        if self.frames_per_point == 0 && self.evaluator == Evaluator::MonteCarlo {
            return Err(Error::ZeroTrials);
        }
        if self.evaluator == Evaluator::Analytic {
            if self.objective != Objective::MaxOutputSnr {
                return bad("the analytic evaluator only scores output SNR".into());
            }
            if self.m_values.iter().any(|&m| m != 1) || self.channel.is_some() {
                return bad("the analytic evaluator models M = 1 over a flat channel".into());
            }
        }
        if self.objective == Objective::MinBer && self.channel.is_some() {
            return bad("BER is simulated over the flat channel only".into());
        }
        Ok(())
    }

    /// All (M, p, SINR) points in row order: M outermost, SINR innermost.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &m in &self.m_values {
            for &p in &self.p_values {
                for &sinr_db in &self.sinr_grid_db {
                    out.push(SweepPoint { m, p, sinr_db });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub m: usize,
    pub p: f64,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumRecord {
    pub m: usize,
    pub p: f64,
    pub sinr_db: f64,
    pub nonlinearity: Nonlinearity,
    pub objective: Objective,
    pub optimal_threshold: f64,
    /// Output SNR in dB, or bit error rate.
    pub objective_value: f64,
    /// The optimum sits on the first or last grid threshold.
    pub boundary: bool,
    pub n_samples: usize,
}

/// Objective values over a threshold grid; `None` where evaluation failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdScan {
    pub thresholds: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub objective: Objective,
    pub n_samples: usize,
}

impl ThresholdScan {
    /// Best grid index; ties go to the smaller threshold.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.values.iter().enumerate() {
            let Some(v) = *v else { continue };
            let better = match (best, self.objective) {
                (None, _) => true,
                (Some((_, b)), Objective::MaxOutputSnr) => v > b,
                (Some((_, b)), Objective::MinBer) => v < b,
            };
            if better {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Per-sample statistics of a set of frames sorted by received envelope,
/// with prefix sums for O(log n) output-SNR evaluation at any threshold.
#[derive(Debug, Clone)]
pub struct SnrSweepTable {
    envelopes: Vec<f64>,
    /// Prefix sums over the sorted samples; entry `k` covers the first `k`.
    cross: Vec<f64>,
    power: Vec<f64>,
    unit_cross: Vec<f64>,
    signal: f64,
}

impl SnrSweepTable {
    pub fn new(frames: &[(Vec<Sample>, Vec<Sample>)]) -> Result<Self> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        let mut signal = CompensatedSum::new();
        for (reference, received) in frames {
            if reference.len() != received.len() {
                return Err(Error::DimensionMismatch {
                    expected: reference.len(),
                    got: received.len(),
                });
            }
            for (&s, &r) in reference.iter().zip(received) {
                signal.add(s.norm_sqr());
                let env = r.norm();
                let cross = (r * s.conj()).re;
                let unit = if env > 0.0 { cross / env } else { 0.0 };
                rows.push((env, cross, unit));
            }
        }
        if rows.is_empty() {
            return Err(Error::EmptySamples);
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = rows.len();
        let mut envelopes = Vec::with_capacity(n);
        let mut cross = Vec::with_capacity(n + 1);
        let mut power = Vec::with_capacity(n + 1);
        let mut unit_cross = Vec::with_capacity(n + 1);
        let (mut c, mut p, mut u) = (
            CompensatedSum::new(),
            CompensatedSum::new(),
            CompensatedSum::new(),
        );
        cross.push(0.0);
        power.push(0.0);
        unit_cross.push(0.0);
        for (env, cr, un) in rows {
            envelopes.push(env);
            c.add(cr);
            p.add(env * env);
            u.add(un);
            cross.push(c.value());
            power.push(p.value());
            unit_cross.push(u.value());
        }
        Ok(Self {
            envelopes,
            cross,
            power,
            unit_cross,
            signal: signal.value(),
        })
    }

    pub fn len(&self) -> usize {
        self.envelopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envelopes.is_empty()
    }

    pub fn snr(&self, mode: Nonlinearity, threshold: f64) -> SnrEstimate {
        let n = self.len();
        let kept = self.envelopes.partition_point(|&e| e <= threshold);
        let (cross, output) = match mode {
            Nonlinearity::Nulling => (self.cross[kept], self.power[kept]),
            Nonlinearity::Clipping => {
                let clipped = (n - kept) as f64;
                (
                    self.cross[kept] + threshold * (self.unit_cross[n] - self.unit_cross[kept]),
                    self.power[kept] + threshold * threshold * clipped,
                )
            }
        };
        let nf = n as f64;
        let r1 = 0.5 * cross / nf;
        snr_from_moments(r1, cross / nf, self.signal / nf, output / nf, n)
    }
}

/// Frames depend only on the stream and frame index, so every grid point
/// of a sweep reuses the same payload and noise draws.
fn realize_all(link: &Link, rng: &RngStream, frames: usize) -> Result<Vec<FrameRealization>> {
    (0..frames as u64)
        .into_par_iter()
        .map(|i| link.realize(rng, i))
        .collect()
}

/// Scores every grid threshold at one sweep point.
pub fn scan_thresholds(
    point: SweepPoint,
    spec: &SweepSpec,
    rng: &RngStream,
) -> Result<ThresholdScan> {
    let thresholds = spec.threshold_grid.points();
    let noise = NoiseConfig::new(point.p, spec.snr_db, point.sinr_db)?;
    let mode = spec.nonlinearity;
    match (spec.objective, spec.evaluator) {
        (Objective::MaxOutputSnr, Evaluator::Analytic) => {
            if point.m != 1 {
                return Err(Error::InvalidSweep(
                    "the analytic evaluator models M = 1 only".into(),
                ));
            }
            let values = thresholds
                .iter()
                .map(|&t| {
                    output_snr_analytic(t, &noise, mode, AnalyticForm::Derived)
                        .ok()
                        .map(|e| e.gamma_db)
                })
                .collect();
            Ok(ThresholdScan {
                thresholds,
                values,
                objective: Objective::MaxOutputSnr,
                n_samples: 0,
            })
        }
        (Objective::MaxOutputSnr, Evaluator::MonteCarlo) => {
            let cfg = ModemConfig::new(spec.n_subcarriers, point.m, spec.qam)?;
            let link = Link::new(cfg, noise, spec.channel)?;
            let frames = realize_all(&link, rng, spec.frames_per_point)?;
            let pairs: Vec<(Vec<Sample>, Vec<Sample>)> = frames
                .into_iter()
                .map(|f| (f.reference, f.received))
                .collect();
            let table = SnrSweepTable::new(&pairs)?;
            let values = thresholds
                .iter()
                .map(|&t| Some(table.snr(mode, t).gamma_db))
                .collect();
            Ok(ThresholdScan {
                thresholds,
                values,
                objective: Objective::MaxOutputSnr,
                n_samples: table.len(),
            })
        }
        (Objective::MinBer, Evaluator::MonteCarlo) => {
            let cfg = ModemConfig::new(spec.n_subcarriers, point.m, spec.qam)?;
            let link = Link::new(cfg, noise, None)?;
            let frames = realize_all(&link, rng, spec.frames_per_point)?;
            let values = thresholds
                .par_iter()
                .map(|&t| {
                    let pp = mode.with_threshold(t)?;
                    let mut total = BerCount::default();
                    for f in &frames {
                        total.merge(&count_bit_errors(link.modem(), &pp, &f.received, &f.bits)?);
                    }
                    Ok(total.rate())
                })
                .map(|r: Result<f64>| r.ok())
                .collect();
            Ok(ThresholdScan {
                thresholds,
                values,
                objective: Objective::MinBer,
                n_samples: spec.frames_per_point * cfg.bits_per_frame(),
            })
        }
        (Objective::MinBer, Evaluator::Analytic) => Err(Error::InvalidSweep(
            "the analytic evaluator only scores output SNR".into(),
        )),
    }
}

/// Exhaustive search for the best threshold at one sweep point.
pub fn optimize_threshold(
    point: SweepPoint,
    spec: &SweepSpec,
    rng: &RngStream,
) -> Result<OptimumRecord> {
    let scan = scan_thresholds(point, spec, rng)?;
    let best = scan.best().ok_or(Error::AllGridPointsFailed)?;
    Ok(OptimumRecord {
        m: point.m,
        p: point.p,
        sinr_db: point.sinr_db,
        nonlinearity: spec.nonlinearity,
        objective: spec.objective,
        optimal_threshold: scan.thresholds[best],
        objective_value: scan.values[best].expect("best index has a value"),
        boundary: best == 0 || best + 1 == scan.thresholds.len(),
        n_samples: scan.n_samples,
    })
}

/// Optimizes every (M, p, SINR) point of the spec.
pub fn run_sweep(spec: &SweepSpec, rng: &RngStream) -> Result<Vec<OptimumRecord>> {
    spec.validate()?;
    // Points run one at a time; the frames and thresholds inside each point
    // are what run in parallel, which bounds peak memory to one point.
    spec.points()
        .into_iter()
        .map(|pt| {
            optimize_threshold(pt, spec, rng).map_err(|e| Error::GridPoint {
                m: pt.m,
                p: pt.p,
                sinr_db: pt.sinr_db,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{output_snr_mc, ScalingForm, SnrAccumulator};

    fn spec() -> SweepSpec {
        SweepSpec {
            n_subcarriers: 256,
            qam: QamOrder::Qam4,
            m_values: vec![1],
            p_values: vec![0.01],
            sinr_grid_db: vec![-15.0],
            snr_db: 25.0,
            nonlinearity: Nonlinearity::Nulling,
            threshold_grid: ThresholdGrid::default(),
            objective: Objective::MaxOutputSnr,
            evaluator: Evaluator::MonteCarlo,
            frames_per_point: 100,
            channel: None,
        }
    }

    #[test]
    fn grid_points() {
        let g = ThresholdGrid {
            lo: 1.0,
            hi: 2.0,
            step: 0.25,
        };
        assert_eq!(g.points(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(ThresholdGrid::default().points().len(), 400);
        assert!(ThresholdGrid {
            lo: 0.0,
            hi: 2.0,
            step: 0.1
        }
        .validate()
        .is_err());
        assert!(ThresholdGrid {
            lo: 1.0,
            hi: 2.0,
            step: 0.0
        }
        .validate()
        .is_err());
        assert!(ThresholdGrid {
            lo: 1.0,
            hi: 40.0,
            step: 0.1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn table_matches_direct_preprocessing() {
        let cfg = ModemConfig::new(256, 4, QamOrder::Qam4).unwrap();
        let noise = NoiseConfig::new(0.05, 25.0, -10.0).unwrap();
        let link = Link::new(cfg, noise, None).unwrap();
        let rng = RngStream::new(1, 0);
        let frames = realize_all(&link, &rng, 50).unwrap();
        let pairs: Vec<_> = frames
            .iter()
            .map(|f| (f.reference.clone(), f.received.clone()))
            .collect();
        let table = SnrSweepTable::new(&pairs).unwrap();
        for mode in [Nonlinearity::Nulling, Nonlinearity::Clipping] {
            for t in [0.3, 1.0, 2.5, 3.0, 7.0, 25.0] {
                let pp = mode.with_threshold(t).unwrap();
                let mut acc = SnrAccumulator::new();
                for f in &frames {
                    acc.extend(&f.reference, &pp.apply(&f.received));
                }
                let direct = acc.estimate(ScalingForm::Correlation).unwrap();
                let fast = table.snr(mode, t);
                assert!(
                    (direct.gamma_db - fast.gamma_db).abs() < 1e-9,
                    "{mode:?} {t}"
                );
                assert!((direct.r1 - fast.r1).abs() < 1e-12);
            }
        }
        let one = &frames[0];
        let direct = output_snr_mc(&one.reference, &one.received).unwrap();
        let t1 = SnrSweepTable::new(&[(one.reference.clone(), one.received.clone())]).unwrap();
        assert!((t1.snr(Nonlinearity::Nulling, f64::MAX).gamma_db - direct.gamma_db).abs() < 1e-9);
    }

    #[test]
    fn single_threshold_grid_returns_it() {
        let mut s = spec();
        s.threshold_grid = ThresholdGrid {
            lo: 2.5,
            hi: 2.5,
            step: 1.0,
        };
        let rec = optimize_threshold(
            SweepPoint {
                m: 1,
                p: 0.01,
                sinr_db: -15.0,
            },
            &s,
            &RngStream::new(2, 0),
        )
        .unwrap();
        assert_eq!(rec.optimal_threshold, 2.5);
        assert!(rec.boundary);
    }

    #[test]
    fn argmax_dominates_every_grid_point() {
        let s = spec();
        let rng = RngStream::new(3, 0);
        let pt = SweepPoint {
            m: 16,
            p: 0.01,
            sinr_db: -15.0,
        };
        let scan = scan_thresholds(pt, &s, &rng).unwrap();
        let rec = optimize_threshold(pt, &s, &rng).unwrap();
        for v in scan.values.iter().flatten() {
            assert!(rec.objective_value >= *v);
        }
        let idx = scan.best().unwrap();
        assert!(scan.values[..idx]
            .iter()
            .flatten()
            .all(|&v| v < rec.objective_value));
    }

    #[test]
    fn ties_go_to_smaller_threshold() {
        let scan = ThresholdScan {
            thresholds: vec![1.0, 2.0, 3.0, 4.0],
            values: vec![None, Some(5.0), Some(5.0), Some(4.0)],
            objective: Objective::MaxOutputSnr,
            n_samples: 0,
        };
        assert_eq!(scan.best(), Some(1));
        let ber = ThresholdScan {
            values: vec![Some(0.1), Some(0.0), Some(0.0), Some(0.2)],
            objective: Objective::MinBer,
            ..scan.clone()
        };
        assert_eq!(ber.best(), Some(1));
        let none = ThresholdScan {
            values: vec![None; 4],
            ..scan
        };
        assert_eq!(none.best(), None);
    }

    #[test]
    fn analytic_argmax_is_stable_under_refinement() {
        let mut s = spec();
        s.evaluator = Evaluator::Analytic;
        for mode in [Nonlinearity::Nulling, Nonlinearity::Clipping] {
            s.nonlinearity = mode;
            for sinr in [-30.0, -15.0, -5.0] {
                let pt = SweepPoint {
                    m: 1,
                    p: 0.01,
                    sinr_db: sinr,
                };
                s.threshold_grid = ThresholdGrid {
                    lo: 0.1,
                    hi: 20.0,
                    step: 0.1,
                };
                let coarse = optimize_threshold(pt, &s, &RngStream::new(0, 0)).unwrap();
                s.threshold_grid = ThresholdGrid {
                    lo: 0.01,
                    hi: 20.0,
                    step: 0.01,
                };
                let fine = optimize_threshold(pt, &s, &RngStream::new(0, 0)).unwrap();
                assert!((coarse.optimal_threshold - fine.optimal_threshold).abs() <= 0.1 + 1e-9);
                assert!(fine.objective_value >= coarse.objective_value - 1e-12);
            }
        }
    }

    #[test]
    fn analytic_failures_are_skipped_or_reported() {
        let mut s = spec();
        s.evaluator = Evaluator::Analytic;
        s.m_values = vec![16];
        assert!(s.validate().is_err());
        s.m_values = vec![1];
        s.objective = Objective::MinBer;
        assert!(s.validate().is_err());
    }

    #[test]
    fn sweep_singleton_equals_direct_call_and_is_deterministic() {
        let s = spec();
        let rng = RngStream::new(4, 0);
        let sweep = run_sweep(&s, &rng).unwrap();
        assert_eq!(sweep.len(), 1);
        let direct = optimize_threshold(s.points()[0], &s, &rng).unwrap();
        assert_eq!(sweep[0], direct);
        assert_eq!(run_sweep(&s, &rng).unwrap(), sweep);
    }

    #[test]
    fn sweep_errors_name_the_failing_point() {
        let mut s = spec();
        s.frames_per_point = 0;
        assert!(run_sweep(&s, &RngStream::new(0, 0)).is_err());
        let s = spec();
        let err = optimize_threshold(
            SweepPoint {
                m: 3,
                p: 0.01,
                sinr_db: -15.0,
            },
            &s,
            &RngStream::new(0, 0),
        );
        assert!(err.is_err());
        let mut s = spec();
        s.m_values = vec![1, 7];
        assert!(matches!(s.validate(), Err(Error::InvalidModem(_))));
    }

    #[test]
    fn min_ber_objective_runs() {
        let mut s = spec();
        s.objective = Objective::MinBer;
        s.nonlinearity = Nonlinearity::Clipping;
        s.frames_per_point = 20;
        s.threshold_grid = ThresholdGrid {
            lo: 0.5,
            hi: 6.0,
            step: 0.5,
        };
        let rec = optimize_threshold(
            SweepPoint {
                m: 1,
                p: 0.1,
                sinr_db: -10.0,
            },
            &s,
            &RngStream::new(5, 0),
        )
        .unwrap();
        assert!(rec.objective_value >= 0.0 && rec.objective_value < 0.5);
        assert_eq!(rec.n_samples, 20 * 512);
    }
}
