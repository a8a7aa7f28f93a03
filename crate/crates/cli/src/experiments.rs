//! One function per experiment kind, each turning a resolved config into a
//! result table. Grid loops here are sequential; the frame- and
//! threshold-level work below them runs on the rayon pool.

use vofdm_core::channel::NoiseConfig;
use vofdm_core::metrics::{
    ccdf, output_snr_analytic, p_detection_error_curve, papr_samples_db, AnalyticForm,
};
use vofdm_core::modem::{ModemConfig, QamOrder};
use vofdm_core::numerics::RngStream;
use vofdm_core::optimizer::{
    run_sweep, scan_thresholds, Objective, SweepPoint, SweepSpec, ThresholdGrid,
};
use vofdm_core::Result;

use crate::config::{ExperimentKind, ResolvedConfig};
use crate::output::{Cell, Table};

pub fn run_experiment(cfg: &ResolvedConfig) -> Result<Table> {
    let rng = RngStream::new(cfg.seed, 0);
    let mut table = match cfg.experiment {
        ExperimentKind::Ccdf => ccdf_table(cfg, &rng)?,
        ExperimentKind::Pde => pde_table(cfg, &rng)?,
        ExperimentKind::SnrVsThreshold | ExperimentKind::SnrVsThresholdSelective => {
            snr_table(cfg, &rng)?
        }
        ExperimentKind::OptimizeNulling | ExperimentKind::OptimizeClipping => {
            optimum_table(cfg, &rng, Objective::MaxOutputSnr)?
        }
        ExperimentKind::BerVsSinr => optimum_table(cfg, &rng, Objective::MinBer)?,
    };
    table.notes.insert(
        0,
        format!("experiment={} seed={}", cfg.experiment, cfg.seed),
    );
    table.notes.push(match cfg.channel {
        Some(ch) => format!(
            "channel=lognormal n_taps={} sigma_ln={}",
            ch.n_taps, ch.sigma_ln
        ),
        None => "channel=flat".into(),
    });
    Ok(table)
}

fn qam(cfg: &ResolvedConfig) -> Result<QamOrder> {
    QamOrder::try_from(cfg.modem.qam_order)
}

/// The serde name of a unit enum variant.
fn label<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn grid(cfg: &ResolvedConfig) -> ThresholdGrid {
    let g = cfg.threshold_grid;
    ThresholdGrid {
        lo: g.lo,
        hi: g.hi,
        step: g.step,
    }
}

fn ccdf_table(cfg: &ResolvedConfig, rng: &RngStream) -> Result<Table> {
    let mut t = Table::new(vec![
        "m",
        "papr_o_db",
        "ccdf",
        "exceedances",
        "n_frames",
        "low_confidence",
    ]);
    t.notes
        .push(format!("oversampling={}", cfg.modem.oversampling));
    let levels = cfg.papr_grid_db.points();
    for &m in &cfg.m_values {
        let mc = ModemConfig::new(cfg.modem.n_subcarriers, m, qam(cfg)?)?;
        // Every M sees the same payload bits.
        let samples = papr_samples_db(&mc, cfg.modem.oversampling, cfg.trials, rng)?;
        let curve = ccdf(&samples, &levels)?;
        t.count("papr_frames", curve.n_samples as u64);
        for p in &curve.points {
            t.push(vec![
                m.into(),
                p.papr_o_db.into(),
                p.ccdf.into(),
                p.exceedances.into(),
                curve.n_samples.into(),
                p.low_confidence().into(),
            ]);
        }
    }
    Ok(t)
}

fn pde_table(cfg: &ResolvedConfig, rng: &RngStream) -> Result<Table> {
    let mut t = Table::new(vec!["m", "p", "snr_db", "threshold", "p_de", "n_samples"]);
    let thresholds = cfg.threshold_grid.points();
    for &m in &cfg.m_values {
        let mc = ModemConfig::new(cfg.modem.n_subcarriers, m, qam(cfg)?)?;
        for &p in &cfg.p_values {
            let noise = NoiseConfig::new(p, cfg.noise.snr_db, cfg.noise.sinr_db)?;
            let curve = p_detection_error_curve(&mc, &noise, &thresholds, cfg.trials, rng)?;
            let n = cfg.trials * mc.n();
            t.count("pde_samples", n as u64);
            for (&th, &v) in thresholds.iter().zip(&curve) {
                t.push(vec![
                    m.into(),
                    p.into(),
                    cfg.noise.snr_db.into(),
                    th.into(),
                    v.into(),
                    n.into(),
                ]);
            }
        }
    }
    Ok(t)
}

fn spec_for(cfg: &ResolvedConfig, objective: Objective) -> Result<SweepSpec> {
    Ok(SweepSpec {
        n_subcarriers: cfg.modem.n_subcarriers,
        qam: qam(cfg)?,
        m_values: cfg.m_values.clone(),
        p_values: cfg.p_values.clone(),
        sinr_grid_db: cfg.sinr_grid_db.clone(),
        snr_db: cfg.noise.snr_db,
        nonlinearity: cfg.nonlinearities[0],
        threshold_grid: grid(cfg),
        objective,
        evaluator: cfg.evaluator,
        frames_per_point: cfg.trials,
        channel: cfg.channel,
    })
}

fn snr_table(cfg: &ResolvedConfig, rng: &RngStream) -> Result<Table> {
    let mut t = Table::new(vec![
        "m",
        "p",
        "sinr_db",
        "nonlinearity",
        "threshold",
        "snr_mc_db",
        "snr_analytic_db",
        "n_samples",
    ]);
    let base = spec_for(cfg, Objective::MaxOutputSnr)?;
    base.validate()?;
    for &m in &cfg.m_values {
        for &p in &cfg.p_values {
            for &sinr_db in &cfg.sinr_grid_db {
                let noise = NoiseConfig::new(p, cfg.noise.snr_db, sinr_db)?;
                for &nl in &cfg.nonlinearities {
                    let spec = SweepSpec {
                        nonlinearity: nl,
                        ..base.clone()
                    };
                    let scan = scan_thresholds(SweepPoint { m, p, sinr_db }, &spec, rng)?;
                    t.count("snr_samples", scan.n_samples as u64);
                    let analytic = m == 1 && cfg.channel.is_none();
                    for (&th, v) in scan.thresholds.iter().zip(&scan.values) {
                        let an = if analytic {
                            output_snr_analytic(th, &noise, nl, AnalyticForm::Derived)
                                .ok()
                                .map(|e| e.gamma_db)
                        } else {
                            None
                        };
                        t.push(vec![
                            m.into(),
                            p.into(),
                            sinr_db.into(),
                            nl.name().into(),
                            th.into(),
                            (*v).into(),
                            an.into(),
                            scan.n_samples.into(),
                        ]);
                    }
                }
            }
        }
    }
    Ok(t)
}

fn optimum_table(cfg: &ResolvedConfig, rng: &RngStream, objective: Objective) -> Result<Table> {
    let value_col = match objective {
        Objective::MaxOutputSnr => "output_snr_db",
        Objective::MinBer => "ber",
    };
    let mut t = Table::new(vec![
        "m",
        "p",
        "sinr_db",
        "nonlinearity",
        "optimal_threshold",
        value_col,
        "boundary",
        "n_samples",
    ]);
    t.notes.push(format!(
        "evaluator={} objective={}",
        label(&cfg.evaluator),
        label(&objective)
    ));
    let base = spec_for(cfg, objective)?;
    for &nl in &cfg.nonlinearities {
        let spec = SweepSpec {
            nonlinearity: nl,
            ..base.clone()
        };
        for r in run_sweep(&spec, rng)? {
            t.count(value_col, r.n_samples as u64);
            t.push(vec![
                r.m.into(),
                r.p.into(),
                r.sinr_db.into(),
                nl.name().into(),
                r.optimal_threshold.into(),
                r.objective_value.into(),
                r.boundary.into(),
                Cell::Int(r.n_samples as u64),
            ]);
        }
    }
    Ok(t)
}
