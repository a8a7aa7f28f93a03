//! Vector-OFDM link simulation over Bernoulli-Gaussian impulsive noise.
//!
//! The transmit chain maps bits to square QAM, blocks `N` symbols into an
//! `M × L` grid and runs a length-`L` inverse DFT across each row. The
//! channel adds background Gaussian noise plus Bernoulli-gated Gaussian
//! impulses (optionally after a log-normal multipath channel). The receiver
//! applies a nulling or clipping front end before demodulation.
//!
//! [`metrics`] measures PAPR statistics, noise-detection error, output SNR
//! and BER; [`optimizer`] searches the front-end threshold exhaustively.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod link;
pub mod metrics;
pub mod modem;
pub mod numerics;
pub mod optimizer;
pub mod preprocess;

pub use error::{Error, Result};
pub use numerics::Sample;
