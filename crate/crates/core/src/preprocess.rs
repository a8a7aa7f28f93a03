//! Memoryless receiver front-end nonlinearities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Sample;

/// The nonlinearity applied to each received sample before demodulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preprocessor {
    Identity,
    /// Zero any sample whose envelope exceeds the threshold.
    Nulling {
        threshold: f64,
    },
    /// Clamp the envelope to the threshold, keeping the phase.
    Clipping {
        threshold: f64,
    },
}

/// The two thresholded nonlinearities, without a threshold attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Nulling,
    Clipping,
}

impl Nonlinearity {
    pub fn with_threshold(self, threshold: f64) -> Result<Preprocessor> {
        match self {
            Nonlinearity::Nulling => Preprocessor::nulling(threshold),
            Nonlinearity::Clipping => Preprocessor::clipping(threshold),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Nulling => "nulling",
            Nonlinearity::Clipping => "clipping",
        }
    }
}

fn check(threshold: f64) -> Result<f64> {
    // +∞ is allowed: it is the pass-through limit.
    if threshold > 0.0 && !threshold.is_nan() {
        Ok(threshold)
    } else {
        Err(Error::InvalidThreshold(threshold))
    }
}

impl Preprocessor {
    pub fn nulling(threshold: f64) -> Result<Self> {
        Ok(Preprocessor::Nulling {
            threshold: check(threshold)?,
        })
    }

    pub fn clipping(threshold: f64) -> Result<Self> {
        Ok(Preprocessor::Clipping {
            threshold: check(threshold)?,
        })
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Preprocessor::Identity => None,
            Preprocessor::Nulling { threshold } | Preprocessor::Clipping { threshold } => {
                Some(threshold)
            }
        }
    }

    #[inline]
    pub fn apply_sample(&self, r: Sample) -> Sample {
        match *self {
            Preprocessor::Identity => r,
            Preprocessor::Nulling { threshold } => {
                if r.norm() <= threshold {
                    r
                } else {
                    Sample::new(0.0, 0.0)
                }
            }
            Preprocessor::Clipping { threshold } => {
                let mag = r.norm();
                if mag <= threshold {
                    r
                } else {
                    r * (threshold / mag)
                }
            }
        }
    }

    pub fn apply(&self, samples: &[Sample]) -> Vec<Sample> {
        samples.iter().map(|&r| self.apply_sample(r)).collect()
    }

    pub fn apply_in_place(&self, samples: &mut [Sample]) {
        for r in samples.iter_mut() {
            *r = self.apply_sample(*r);
        }
    }
}
