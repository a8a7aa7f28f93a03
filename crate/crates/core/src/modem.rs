//! Vector-OFDM transmitter and receiver.
//!
//! A frame of `N` QAM symbols is blocked column-wise into an `M × L`
//! matrix whose columns are the vector blocks. The transmitter runs a
//! length-`L` inverse DFT across each row; the time-domain frame is read out
//! so that sample `qM + m` is row `m` of output block `q`. The receiver
//! reverses both steps. `M = 1` is conventional OFDM and `M = N` is single
//! carrier transmission.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Dft, Direction, RngStream, Sample};

/// Square QAM constellation sizes supported by the mapper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum QamOrder {
    Qam4,
    Qam16,
    Qam64,
}

impl QamOrder {
    pub fn order(self) -> u32 {
        match self {
            QamOrder::Qam4 => 4,
            QamOrder::Qam16 => 16,
            QamOrder::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.order().trailing_zeros() as usize
    }

    /// Amplitude levels per real dimension.
    pub fn levels_per_dim(self) -> usize {
        1 << (self.bits_per_symbol() / 2)
    }
}

impl TryFrom<u32> for QamOrder {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            4 => Ok(QamOrder::Qam4),
            16 => Ok(QamOrder::Qam16),
            64 => Ok(QamOrder::Qam64),
            other => Err(Error::InvalidModem(format!(
                "QAM order must be one of 4, 16, 64; got {other}"
            ))),
        }
    }
}

impl From<QamOrder> for u32 {
    fn from(q: QamOrder) -> u32 {
        q.order()
    }
}

/// Blocking geometry and constellation of one modem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModemConfig {
    n_subcarriers: usize,
    vb_size: usize,
    qam: QamOrder,
}

impl ModemConfig {
    pub fn new(n_subcarriers: usize, vb_size: usize, qam: QamOrder) -> Result<Self> {
        if n_subcarriers == 0 || vb_size == 0 {
            return Err(Error::InvalidModem("N and M must be positive".into()));
        }
        if !n_subcarriers.is_multiple_of(vb_size) {
            return Err(Error::InvalidModem(format!(
                "M must divide N (N={n_subcarriers}, M={vb_size})"
            )));
        }
        Ok(Self {
            n_subcarriers,
            vb_size,
            qam,
        })
    }

    /// Total symbols (and time samples) per frame, `N`.
    pub fn n(&self) -> usize {
        self.n_subcarriers
    }

    /// Vector block size, `M`.
    pub fn m(&self) -> usize {
        self.vb_size
    }

    /// Number of vector blocks, `L = N / M`.
    pub fn l(&self) -> usize {
        self.n_subcarriers / self.vb_size
    }

    pub fn qam(&self) -> QamOrder {
        self.qam
    }

    pub fn bits_per_frame(&self) -> usize {
        self.n_subcarriers * self.qam.bits_per_symbol()
    }
}

/// Frequency-domain symbols as an `M × L` matrix.
///
/// Stored in symbol order, so entry `(row, col)` is symbol `col·M + row`
/// and column `l` is the `l`-th vector block.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    rows: usize,
    cols: usize,
    symbols: Vec<Sample>,
}

impl SymbolGrid {
    pub fn from_symbols(rows: usize, cols: usize, symbols: Vec<Sample>) -> Result<Self> {
        if symbols.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: symbols.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            symbols,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Sample {
        self.symbols[col * self.rows + row]
    }

    /// The `l`-th vector block.
    pub fn column(&self, col: usize) -> &[Sample] {
        &self.symbols[col * self.rows..(col + 1) * self.rows]
    }

    /// All symbols in transmission order `S_0 … S_{N−1}`.
    pub fn symbols(&self) -> &[Sample] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<Sample> {
        self.symbols
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.symbols)
    }
}

/// Time-domain transmit frame `s̄_0 … s̄_{N−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrame {
    samples: Vec<Sample>,
}

impl TimeFrame {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

fn mean_power(x: &[Sample]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Gray-coded square QAM with unit variance per real dimension.
#[derive(Debug, Clone)]
struct Constellation {
    order: QamOrder,
    levels: usize,
    scale: f64,
}

impl Constellation {
    fn new(order: QamOrder) -> Self {
        let levels = order.levels_per_dim();
        // Mean of (2i - (L-1))² over i is (L² - 1)/3.
        let scale = (3.0 / ((levels * levels - 1) as f64)).sqrt();
        Self {
            order,
            levels,
            scale,
        }
    }

    fn bits_per_dim(&self) -> usize {
        self.order.bits_per_symbol() / 2
    }

    /// Gray-coded bits (MSB first) to a signed amplitude. Zero bits map to
    /// the most positive level.
    fn amplitude(&self, bits: &[bool]) -> f64 {
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let index = gray_to_binary(gray);
        ((self.levels - 1) as f64 - 2.0 * index as f64) * self.scale
    }

    fn decide(&self, x: f64, out: &mut Vec<bool>) {
        let top = (self.levels - 1) as f64;
        let index = ((top - x / self.scale) / 2.0).round().clamp(0.0, top) as usize;
        let gray = index ^ (index >> 1);
        for k in (0..self.bits_per_dim()).rev() {
            out.push((gray >> k) & 1 == 1);
        }
    }

    fn map(&self, bits: &[bool]) -> Sample {
        let half = self.bits_per_dim();
        Sample::new(self.amplitude(&bits[..half]), self.amplitude(&bits[half..]))
    }

    /// Minimum distance between constellation points.
    fn min_distance(&self) -> f64 {
        2.0 * self.scale
    }
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// A VOFDM transmitter/receiver pair with its length-`L` transform planned
/// once.
#[derive(Debug, Clone)]
pub struct Modem {
    cfg: ModemConfig,
    constellation: Constellation,
    dft: Dft,
}

impl Modem {
    pub fn new(cfg: ModemConfig) -> Result<Self> {
        Ok(Self {
            cfg,
            constellation: Constellation::new(cfg.qam),
            dft: Dft::new(cfg.l())?,
        })
    }

    pub fn config(&self) -> &ModemConfig {
        &self.cfg
    }

    /// Minimum Euclidean distance of the constellation.
    pub fn min_distance(&self) -> f64 {
        self.constellation.min_distance()
    }

    pub fn map(&self, bits: &[bool]) -> Result<SymbolGrid> {
        let expected = self.cfg.bits_per_frame();
        if bits.len() != expected {
            return Err(Error::BitCount {
                expected,
                got: bits.len(),
            });
        }
        let symbols = bits
            .chunks_exact(self.cfg.qam.bits_per_symbol())
            .map(|b| self.constellation.map(b))
            .collect();
        SymbolGrid::from_symbols(self.cfg.m(), self.cfg.l(), symbols)
    }

    pub fn demap(&self, grid: &SymbolGrid) -> Result<Vec<bool>> {
        self.check_grid(grid)?;
        let mut bits = Vec::with_capacity(self.cfg.bits_per_frame());
        for s in grid.symbols() {
            self.constellation.decide(s.re, &mut bits);
            self.constellation.decide(s.im, &mut bits);
        }
        Ok(bits)
    }

    /// Row-wise inverse DFT of the symbol grid, read out block by block.
    pub fn modulate(&self, grid: &SymbolGrid) -> Result<TimeFrame> {
        self.check_grid(grid)?;
        let (m, l) = (self.cfg.m(), self.cfg.l());
        let mut out = vec![Sample::new(0.0, 0.0); self.cfg.n()];
        let mut row = vec![Sample::new(0.0, 0.0); l];
        for r in 0..m {
            for (c, v) in row.iter_mut().enumerate() {
                *v = grid.symbols[c * m + r];
            }
            self.dft.process(&mut row, Direction::Inverse);
            for (q, v) in row.iter().enumerate() {
                out[q * m + r] = *v;
            }
        }
        Ok(TimeFrame::new(out))
    }

    /// Blocks the received samples column-wise into `M × L` and applies the
    /// forward DFT along each row.
    pub fn demodulate(&self, samples: &[Sample]) -> Result<SymbolGrid> {
        if samples.len() != self.cfg.n() {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.n(),
                got: samples.len(),
            });
        }
        let (m, l) = (self.cfg.m(), self.cfg.l());
        let mut symbols = vec![Sample::new(0.0, 0.0); self.cfg.n()];
        let mut row = vec![Sample::new(0.0, 0.0); l];
        for r in 0..m {
            for (q, v) in row.iter_mut().enumerate() {
                *v = samples[q * m + r];
            }
            self.dft.process(&mut row, Direction::Forward);
            for (c, v) in row.iter().enumerate() {
                symbols[c * m + r] = *v;
            }
        }
        SymbolGrid::from_symbols(m, l, symbols)
    }

    /// Draws a uniformly random payload and returns it with its symbol grid
    /// and transmit frame.
    pub fn random_frame(&self, rng: &mut RngStream) -> (Vec<bool>, SymbolGrid, TimeFrame) {
        let bits = random_bits(rng, self.cfg.bits_per_frame());
        let grid = self.map(&bits).expect("bit count matches config");
        let frame = self.modulate(&grid).expect("grid matches config");
        (bits, grid, frame)
    }

    fn check_grid(&self, grid: &SymbolGrid) -> Result<()> {
        if grid.rows != self.cfg.m() || grid.cols != self.cfg.l() {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.n(),
                got: grid.rows * grid.cols,
            });
        }
        Ok(())
    }
}

pub fn random_bits(rng: &mut RngStream, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.bit()).collect()
}

pub fn qam_map(bits: &[bool], cfg: &ModemConfig) -> Result<SymbolGrid> {
    Modem::new(*cfg)?.map(bits)
}

pub fn qam_demap(grid: &SymbolGrid, cfg: &ModemConfig) -> Result<Vec<bool>> {
    Modem::new(*cfg)?.demap(grid)
}

pub fn vofdm_modulate(grid: &SymbolGrid, cfg: &ModemConfig) -> Result<TimeFrame> {
    Modem::new(*cfg)?.modulate(grid)
}

pub fn vofdm_demodulate(samples: &[Sample], cfg: &ModemConfig) -> Result<SymbolGrid> {
    Modem::new(*cfg)?.demodulate(samples)
}

/// Conventional OFDM transmitter: one `N`-point inverse DFT of the symbol
/// sequence.
pub fn ofdm_modulate(symbols: &[Sample]) -> Result<TimeFrame> {
    let plan = Dft::new(symbols.len())?;
    let mut out = symbols.to_vec();
    plan.process(&mut out, Direction::Inverse);
    Ok(TimeFrame::new(out))
}

/// Peak sample power over mean sample power of one frame.
pub fn papr(frame: &[Sample]) -> Result<f64> {
    let mean = mean_power(frame);
    if !(mean > 0.0) {
        return Err(Error::UndefinedPapr);
    }
    let peak = frame.iter().map(|s| s.norm_sqr()).fold(0.0, f64::max);
    Ok(peak / mean)
}

/// Band-limited interpolation of a frame by an integer factor, by
/// zero-padding its `N`-point spectrum. Used for oversampled PAPR.
pub fn oversample(frame: &[Sample], factor: usize) -> Result<Vec<Sample>> {
    if factor == 0 {
        return Err(Error::InvalidModem(
            "oversampling factor must be ≥ 1".into(),
        ));
    }
    if factor == 1 {
        return Ok(frame.to_vec());
    }
    let n = frame.len();
    let fwd = Dft::new(n)?;
    let inv = Dft::new(n * factor)?;
    let mut spec = frame.to_vec();
    fwd.process(&mut spec, Direction::Forward);
    let mut padded = vec![Sample::new(0.0, 0.0); n * factor];
    let pos = n.div_ceil(2);
    padded[..pos].copy_from_slice(&spec[..pos]);
    padded[n * factor - (n - pos)..].copy_from_slice(&spec[pos..]);
    inv.process(&mut padded, Direction::Inverse);
    let gain = (factor as f64).sqrt();
    for v in padded.iter_mut() {
        *v *= gain;
    }
    Ok(padded)
}

/// PAPR in dB after optional oversampling.
pub fn papr_db(frame: &[Sample], oversampling: usize) -> Result<f64> {
    let ratio = if oversampling <= 1 {
        papr(frame)?
    } else {
        papr(&oversample(frame, oversampling)?)?
    };
    Ok(10.0 * ratio.log10())
}
