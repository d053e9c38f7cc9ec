//! Seeded Monte-Carlo execution and replica sweeps.
//!
//! Each trial is a pure function of (spec, quantizer index, sweep index,
//! trial index); all estimators of a trial share one generated block, so
//! estimator comparisons are paired by seed. Aggregation merges integer
//! error counts and error sums, so results do not depend on thread count or
//! completion order.

use rayon::prelude::*;

use super::config::{Estimator, ExperimentSpec, HarnessError, QuantizerCfg, SweepVariable};
use crate::estimators::{
    detect_known_channel, jcd_estimate, pilot_only_pipeline, ObservationMatrix,
};
use crate::metrics::{ber_qpsk, mse_normalized};
use crate::model::{generate_block, Constellation, SystemConfig};
use crate::numerics::SeedSpec;
use crate::replica::{
    achievable_rate, predict_ber_qpsk, solve_fixed_point, DataPrior, ReplicaConfig, ReplicaMode,
    ReplicaSolution,
};

/// One aggregated simulation row (one estimator at one sweep point for one
/// quantizer).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub estimator: String,
    pub bits: String,
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub trials: usize,
    pub ber: Option<f64>,
    pub ber_pred: Option<f64>,
    pub mse_x2: f64,
    pub mse_x2_pred: Option<f64>,
    pub mse_h: Option<f64>,
    pub mse_h_pred: Option<f64>,
    pub rate_pred: Option<f64>,
    pub converged_frac: f64,
    pub wall_time: f64,
}

/// One replica fixed-point row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRow {
    pub mode: String,
    pub bits: String,
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub q_h: f64,
    pub q_x2: f64,
    pub qt_h: f64,
    pub qt_x2: f64,
    pub mse_h: f64,
    pub mse_x2: f64,
    pub ber_pred: Option<f64>,
    pub rate_pred: f64,
    pub free_entropy: f64,
    pub converged: bool,
}

fn data_prior(c: Constellation) -> DataPrior {
    match c {
        Constellation::Qpsk => DataPrior::Qpsk,
        Constellation::CircularGaussian => DataPrior::Gaussian,
    }
}

/// Replica configuration matching one simulated sweep point.
pub(crate) fn replica_config(
    spec: &ExperimentSpec,
    sweep_value: f64,
    quantizer: &QuantizerCfg,
    mode: ReplicaMode,
) -> Result<ReplicaConfig, HarnessError> {
    let s = &spec.system;
    let k = s.k as f64;
    let (alpha, noise_var) = match spec.sweep.variable {
        SweepVariable::SnrDb => (s.n as f64 / k, 10f64.powf(-sweep_value / 10.0)),
        SweepVariable::Alpha => (sweep_value, s.noise_var),
    };
    Ok(ReplicaConfig {
        mode,
        alpha,
        beta1: s.t1 as f64 / k,
        beta2: s.t2 as f64 / k,
        noise_var,
        channel_var: s.channel_var,
        pilot_power: s.pilot_power,
        data_power: s.data_power,
        data_prior: data_prior(s.data_constellation),
        quantizer: quantizer.to_spec()?,
        damping: 0.5,
        max_iter: 10_000,
        tol: 1e-10,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct EstAccum {
    bit_errors: u64,
    bits: u64,
    mse_x2_sum: f64,
    mse_h_sum: f64,
    mse_h_count: u64,
    converged: u64,
}

impl EstAccum {
    fn merge(mut self, other: &EstAccum) -> EstAccum {
        self.bit_errors += other.bit_errors;
        self.bits += other.bits;
        self.mse_x2_sum += other.mse_x2_sum;
        self.mse_h_sum += other.mse_h_sum;
        self.mse_h_count += other.mse_h_count;
        self.converged += other.converged;
        self
    }
}

fn run_trial(
    cfg: &SystemConfig,
    estimators: &[Estimator],
    gamp: &crate::estimators::GampOptions,
    seed: SeedSpec,
) -> Result<Vec<EstAccum>, HarnessError> {
    let block = generate_block(cfg, seed);
    let obs = ObservationMatrix::from_block(&block, &cfg.quantizer);
    let is_qpsk = cfg.data_constellation == Constellation::Qpsk;
    let mut out = Vec::with_capacity(estimators.len());
    for est in estimators {
        let mut acc = EstAccum::default();
        let fail = |e: crate::estimators::EstimatorError| HarnessError::Config(e.to_string());
        match est {
            Estimator::Jcd => {
                let r = jcd_estimate(&obs, &block.x1, cfg, gamp).map_err(fail)?;
                if is_qpsk {
                    let (e, n) = ber_qpsk(&r.x2hat_hard, &block.x2);
                    acc.bit_errors = e;
                    acc.bits = n;
                }
                acc.mse_x2_sum = mse_normalized(&r.x2hat_soft, &block.x2, cfg.data_power);
                acc.mse_h_sum = mse_normalized(&r.hhat, &block.h, cfg.channel_var);
                acc.mse_h_count = 1;
                acc.converged = r.converged as u64;
            }
            Estimator::KnownCsi => {
                let obs_data = obs.columns(cfg.t1, cfg.t());
                let r = detect_known_channel(&obs_data, &block.h, cfg, gamp).map_err(fail)?;
                if is_qpsk {
                    let (e, n) = ber_qpsk(&r.x2hat_hard, &block.x2);
                    acc.bit_errors = e;
                    acc.bits = n;
                }
                acc.mse_x2_sum = mse_normalized(&r.x2hat_soft, &block.x2, cfg.data_power);
                acc.converged = r.converged as u64;
            }
            Estimator::PilotOnly => {
                let (hhat, r) =
                    pilot_only_pipeline(&obs, &block.ytilde_rep, &block.x1, cfg, gamp)
                        .map_err(fail)?;
                if is_qpsk {
                    let (e, n) = ber_qpsk(&r.x2hat_hard, &block.x2);
                    acc.bit_errors = e;
                    acc.bits = n;
                }
                acc.mse_x2_sum = mse_normalized(&r.x2hat_soft, &block.x2, cfg.data_power);
                acc.mse_h_sum = mse_normalized(&hhat, &block.h, cfg.channel_var);
                acc.mse_h_count = 1;
                acc.converged = r.converged as u64;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Monte-Carlo run over all (quantizer, sweep point, estimator) cells.
/// Deterministic for a fixed master seed regardless of thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, HarnessError> {
    spec.validate()?;
    let n_sweep = spec.sweep.grid.len();
    let prior = data_prior(spec.system.data_constellation);
    let mut rows = Vec::new();
    for (qi, qcfg) in spec.quantizers.iter().enumerate() {
        for (si, &sweep_value) in spec.sweep.grid.iter().enumerate() {
            let started = std::time::Instant::now();
            let cfg = spec.system_config(sweep_value, qcfg)?;
            let base_stream = ((qi * n_sweep + si) * spec.trials) as u64;
            let per_trial: Result<Vec<Vec<EstAccum>>, HarnessError> = (0..spec.trials)
                .into_par_iter()
                .map(|trial| {
                    run_trial(
                        &cfg,
                        &spec.estimators,
                        &spec.gamp,
                        SeedSpec::new(spec.master_seed, base_stream + trial as u64),
                    )
                })
                .collect();
            let per_trial = per_trial?;

            // replica predictions shared by all trials at this point
            let solve = |mode| -> Result<ReplicaSolution, HarnessError> {
                let rc = replica_config(spec, sweep_value, qcfg, mode)?;
                solve_fixed_point(&rc).map_err(|e| HarnessError::Config(e.to_string()))
            };
            let jcd_pred = if spec.replica && spec.estimators.contains(&Estimator::Jcd) {
                Some(solve(ReplicaMode::Jcd)?)
            } else {
                None
            };
            let csi_pred = if spec.replica && spec.estimators.contains(&Estimator::KnownCsi) {
                Some(solve(ReplicaMode::PerfectCsi)?)
            } else {
                None
            };
            let wall_time = started.elapsed().as_secs_f64();

            for (ei, est) in spec.estimators.iter().enumerate() {
                let acc = per_trial
                    .iter()
                    .map(|t| &t[ei])
                    .fold(EstAccum::default(), |a, b| a.merge(b));
                let pred = match est {
                    Estimator::Jcd => jcd_pred.as_ref(),
                    Estimator::KnownCsi => csi_pred.as_ref(),
                    Estimator::PilotOnly => None,
                };
                rows.push(ResultRow {
                    experiment: spec.name.clone(),
                    estimator: est.label().into(),
                    bits: qcfg.bits_label(),
                    sweep_variable: spec.sweep.variable.label().into(),
                    sweep_value,
                    trials: spec.trials,
                    ber: (acc.bits > 0).then(|| acc.bit_errors as f64 / acc.bits as f64),
                    ber_pred: pred.and_then(|p| {
                        (prior == DataPrior::Qpsk).then(|| predict_ber_qpsk(p.qt_x2))
                    }),
                    mse_x2: acc.mse_x2_sum / spec.trials as f64,
                    mse_x2_pred: pred.map(|p| p.mse_x2 / spec.system.data_power),
                    mse_h: (acc.mse_h_count > 0)
                        .then(|| acc.mse_h_sum / acc.mse_h_count as f64),
                    mse_h_pred: pred.map(|p| p.mse_h / spec.system.channel_var),
                    rate_pred: pred
                        .map(|p| achievable_rate(prior, spec.system.data_power, p.qt_x2, 1.0)),
                    converged_frac: acc.converged as f64 / spec.trials as f64,
                    wall_time,
                });
            }
        }
    }
    Ok(rows)
}

/// Replica-only sweep over all (mode, quantizer, sweep point) cells.
pub fn run_replica_sweep(spec: &ExperimentSpec) -> Result<Vec<ReplicaRow>, HarnessError> {
    spec.validate()?;
    let prior = data_prior(spec.system.data_constellation);
    let mut cells = Vec::new();
    for mode in &spec.replica_modes {
        for qcfg in &spec.quantizers {
            for &sweep_value in &spec.sweep.grid {
                cells.push((*mode, *qcfg, sweep_value));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(mode, qcfg, sweep_value)| {
            let rc = replica_config(spec, sweep_value, &qcfg, mode)?;
            let sol = solve_fixed_point(&rc).map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok(ReplicaRow {
                mode: match mode {
                    ReplicaMode::Jcd => "jcd".into(),
                    ReplicaMode::PerfectCsi => "perfect-csi".into(),
                },
                bits: qcfg.bits_label(),
                sweep_variable: spec.sweep.variable.label().into(),
                sweep_value,
                q_h: sol.q_h,
                q_x2: sol.q_x2,
                qt_h: sol.qt_h,
                qt_x2: sol.qt_x2,
                mse_h: sol.mse_h,
                mse_x2: sol.mse_x2,
                ber_pred: (prior == DataPrior::Qpsk).then(|| predict_ber_qpsk(sol.qt_x2)),
                rate_pred: achievable_rate(prior, spec.system.data_power, sol.qt_x2, 1.0),
                free_entropy: sol.free_entropy,
                converged: sol.converged,
            })
        })
        .collect()
}
