//! One simulated frame through transmitter, channel and noise.
//!
//! Each frame index owns its own random streams, keyed by purpose, so a
//! frame's payload is the same for every `M`, and its noise is the same for
//! every SINR and `M` up to scale. Comparisons across those parameters then
//! run on common random numbers.

use serde::{Deserialize, Serialize};

use crate::channel::{add_noise, apply_selective, sample_selective, ImpulseMask, NoiseConfig};
use crate::error::{Error, Result};
use crate::modem::{Modem, ModemConfig};
use crate::numerics::{RngStream, Sample};

const PAYLOAD: u64 = 0x5041_594c;
const NOISE: u64 = 0x4e4f_4953;
const CHANNEL: u64 = 0x4348_414e;

/// Log-normal multipath model, re-drawn per frame and known at the
/// receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub n_taps: usize,
    pub sigma_ln: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            n_taps: 4,
            sigma_ln: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameRealization {
    pub bits: Vec<bool>,
    /// Signal component of `received`: the transmit frame, after the
    /// multipath channel when one is configured.
    pub reference: Vec<Sample>,
    pub received: Vec<Sample>,
    pub mask: ImpulseMask,
}

#[derive(Debug, Clone)]
pub struct Link {
    modem: Modem,
    noise: NoiseConfig,
    channel: Option<ChannelModel>,
}

impl Link {
    pub fn new(
        modem: ModemConfig,
        noise: NoiseConfig,
        channel: Option<ChannelModel>,
    ) -> Result<Self> {
        if let Some(ch) = channel {
            if ch.n_taps == 0 || ch.n_taps > modem.n() {
                return Err(Error::InvalidChannel(format!(
                    "tap count must be in 1..={}, got {}",
                    modem.n(),
                    ch.n_taps
                )));
            }
        }
        Ok(Self {
            modem: Modem::new(modem)?,
            noise,
            channel,
        })
    }

    pub fn modem(&self) -> &Modem {
        &self.modem
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    pub fn realize(&self, base: &RngStream, frame: u64) -> Result<FrameRealization> {
        let mut payload = base.substream(&[PAYLOAD, frame]);
        let (bits, _, tx) = self.modem.random_frame(&mut payload);
        let reference = match self.channel {
            Some(ch) => {
                let mut rng = base.substream(&[CHANNEL, frame]);
                let h = sample_selective(&mut rng, ch.n_taps, ch.sigma_ln)?;
                apply_selective(tx.samples(), &h)?
            }
            None => tx.into_samples(),
        };
        let mut noise_rng = base.substream(&[NOISE, frame]);
        let (received, mask) = add_noise(&reference, &self.noise, &mut noise_rng);
        Ok(FrameRealization {
            bits,
            reference,
            received,
            mask,
        })
    }
}
