use vofdm_core::channel::NoiseConfig;
use vofdm_core::link::{ChannelModel, Link};
use vofdm_core::metrics::{ber, output_snr_link};
use vofdm_core::modem::{ModemConfig, QamOrder};
use vofdm_core::numerics::RngStream;
use vofdm_core::preprocess::Preprocessor;

fn link(m: usize, sinr_db: f64, channel: Option<ChannelModel>) -> Link {
    let cfg = ModemConfig::new(256, m, QamOrder::Qam4).unwrap();
    Link::new(cfg, NoiseConfig::new(0.05, 25.0, sinr_db).unwrap(), channel).unwrap()
}

#[test]
fn frames_are_reproducible() {
    let base = RngStream::new(3, 0);
    let a = link(16, -15.0, None).realize(&base, 9).unwrap();
    let b = link(16, -15.0, None).realize(&base, 9).unwrap();
    assert_eq!(a.received, b.received);
    assert_eq!(a.bits, b.bits);
    let c = link(16, -15.0, None).realize(&base, 10).unwrap();
    assert_ne!(a.bits, c.bits);
}

#[test]
fn payload_and_impulses_are_shared_across_m_and_sinr() {
    let base = RngStream::new(4, 0);
    let a = link(1, -10.0, None).realize(&base, 0).unwrap();
    let b = link(64, -30.0, None).realize(&base, 0).unwrap();
    assert_eq!(a.bits, b.bits);
    assert_eq!(a.mask, b.mask);
    assert!(a.mask.count() > 0);
}

#[test]
fn noiseless_link_decodes_every_bit() {
    let cfg = ModemConfig::new(256, 8, QamOrder::Qam64).unwrap();
    let noise = NoiseConfig::new(0.0, f64::INFINITY, f64::INFINITY).unwrap();
    let rng = RngStream::new(5, 0);
    assert_eq!(
        ber(&cfg, &noise, &Preprocessor::Identity, 20, &rng).unwrap(),
        0.0
    );
}

#[test]
fn nulling_beats_pass_through_under_strong_impulses() {
    let l = link(64, -20.0, None);
    let rng = RngStream::new(6, 0);
    let raw = output_snr_link(&l, &Preprocessor::Identity, 300, &rng).unwrap();
    let nulled = output_snr_link(&l, &Preprocessor::nulling(3.0).unwrap(), 300, &rng).unwrap();
    assert!(
        nulled.gamma_db > raw.gamma_db + 10.0,
        "{} vs {}",
        nulled.gamma_db,
        raw.gamma_db
    );
}

#[test]
fn multipath_reference_keeps_unit_average_power() {
    let l = link(4, -15.0, Some(ChannelModel::default()));
    let base = RngStream::new(7, 0);
    let frames = 2000;
    let power: f64 = (0..frames)
        .map(|i| {
            let f = l.realize(&base, i).unwrap();
            f.reference.iter().map(|s| s.norm_sqr()).sum::<f64>() / f.reference.len() as f64
        })
        .sum::<f64>()
        / frames as f64;
    assert!((power / 2.0 - 1.0).abs() < 0.02, "{power}");
}

#[test]
fn too_many_taps_is_rejected() {
    let cfg = ModemConfig::new(16, 4, QamOrder::Qam4).unwrap();
    let noise = NoiseConfig::new(0.01, 25.0, -15.0).unwrap();
    let ch = ChannelModel {
        n_taps: 17,
        sigma_ln: 0.5,
    };
    assert!(Link::new(cfg, noise, Some(ch)).is_err());
}
