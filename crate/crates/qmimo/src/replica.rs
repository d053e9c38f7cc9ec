//! Asymptotic performance prediction via a coupled scalar fixed point.
//!
//! In the large-system limit the joint estimator decouples into scalar
//! channels characterized by overlap parameters (q_h, q_x2) and effective
//! SNRs (qt_h, qt_x2). This module iterates the self-consistency equations,
//! ranks competing fixed points by free entropy, and converts the solution
//! into MSE, BER and achievable-rate predictions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{integrate_dv, q_function};
use crate::quantizer::{bin_prob, bin_prob_deriv, QuantizerSpec};

#[derive(Debug, Error)]
pub enum ReplicaError {
    #[error("invalid replica configuration: {0}")]
    BadConfig(String),
}

/// Prior of the data symbols in the asymptotic analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataPrior {
    Qpsk,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplicaMode {
    /// Channel and data jointly estimated from pilots plus data block.
    Jcd,
    /// Channel overlap pinned at its prior power (genie-aided CSI).
    PerfectCsi,
}

/// Inputs of the fixed-point solver. Ratios are in the large-system sense:
/// alpha = N/K, beta1 = T1/K, beta2 = T2/K.
#[derive(Debug, Clone)]
pub struct ReplicaConfig {
    pub mode: ReplicaMode,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub noise_var: f64,
    pub channel_var: f64,
    pub pilot_power: f64,
    pub data_power: f64,
    pub data_prior: DataPrior,
    pub quantizer: QuantizerSpec,
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl ReplicaConfig {
    pub fn validate(&self) -> Result<(), ReplicaError> {
        let positive = [
            ("alpha", self.alpha),
            ("beta2", self.beta2),
            ("noise_var", self.noise_var),
            ("channel_var", self.channel_var),
            ("data_power", self.data_power),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(ReplicaError::BadConfig(format!("{name} must be positive")));
            }
        }
        if self.beta1 < 0.0 || self.pilot_power < 0.0 {
            return Err(ReplicaError::BadConfig(
                "beta1 and pilot_power must be nonnegative".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(ReplicaError::BadConfig("damping must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Converged overlaps and derived predictions.
#[derive(Debug, Clone, Copy)]
pub struct ReplicaSolution {
    pub q_h: f64,
    pub q_x2: f64,
    pub qt_h: f64,
    pub qt_x2: f64,
    pub mse_h: f64,
    pub mse_x2: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub free_entropy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Number of distinct initializations that converged.
    pub candidates: usize,
}

/// Measurement-channel Fisher-like quantity: chi = sum_b Int Dv
/// (Psi_b'(sqrt(rho) v))^2 / Psi_b(sqrt(rho) v), with rho = q_h q_x and
/// effective noise sigma^2 = noise_var + c_h c_x - rho. Unquantized limit is
/// 1/sigma^2.
pub fn chi(q_h: f64, q_x: f64, c_h: f64, c_x: f64, noise_var: f64, spec: &QuantizerSpec) -> f64 {
    let rho = (q_h * q_x).max(0.0);
    let s2 = (noise_var + c_h * c_x - rho).max(1e-300);
    match spec {
        QuantizerSpec::Unquantized => 1.0 / s2,
        QuantizerSpec::FiniteBit { .. } => {
            let levels = spec.levels();
            let sqrt_rho = rho.sqrt();
            integrate_dv(|v| {
                let mean = sqrt_rho * v / std::f64::consts::SQRT_2;
                let mut tot = 0.0;
                for b in 1..=levels {
                    let psi = bin_prob(spec, b, mean, s2).expect("valid bin");
                    if psi > 1e-300 {
                        // d Psi / d V carries a 1/sqrt(2) relative to the
                        // derivative in the per-dimension mean
                        let dpsi = bin_prob_deriv(spec, b, mean, s2).expect("valid bin");
                        tot += dpsi * dpsi / (2.0 * psi);
                    }
                }
                tot
            })
        }
    }
}

/// MMSE of a unit-free scalar prior observed at effective SNR qt.
pub fn scalar_mmse(prior: DataPrior, c: f64, qt: f64) -> f64 {
    if qt <= 0.0 {
        return c;
    }
    match prior {
        DataPrior::Gaussian => c / (1.0 + c * qt),
        DataPrior::Qpsk => {
            let rho = c * qt;
            let sqrt_rho = rho.sqrt();
            let mean_tanh = integrate_dv(|z| (rho + sqrt_rho * z).tanh());
            (c * (1.0 - mean_tanh)).max(0.0)
        }
    }
}

fn lncosh(u: f64) -> f64 {
    let u = u.abs();
    u + (-2.0 * u).exp().ln_1p() - std::f64::consts::LN_2
}

/// Mutual information (nats) of BPSK over a real AWGN channel at SNR rho:
/// I = rho - Int Dz lncosh(rho + sqrt(rho) z). Saturates at ln 2.
pub fn i_bpsk(rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let sqrt_rho = rho.sqrt();
    (rho - integrate_dv(|z| lncosh(rho + sqrt_rho * z))).clamp(0.0, std::f64::consts::LN_2)
}

/// Per-observation output term of the free entropy,
/// G(rho) = sum_b Int Dv Psi_b ln Psi_b with sigma^2 = noise_var + cc - rho.
fn g_out(rho: f64, cc: f64, noise_var: f64, spec: &QuantizerSpec) -> f64 {
    let s2 = (noise_var + cc - rho).max(1e-300);
    match spec {
        QuantizerSpec::Unquantized => {
            -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * s2).ln()
        }
        QuantizerSpec::FiniteBit { .. } => {
            let levels = spec.levels();
            let sqrt_rho = rho.max(0.0).sqrt();
            integrate_dv(|v| {
                let mean = sqrt_rho * v / std::f64::consts::SQRT_2;
                let mut tot = 0.0;
                for b in 1..=levels {
                    let psi = bin_prob(spec, b, mean, s2)
                        .expect("valid bin")
                        .clamp(1e-300, 1.0);
                    tot += psi * psi.ln();
                }
                tot
            })
        }
    }
}

fn prior_info(prior: DataPrior, c: f64, qt: f64) -> f64 {
    match prior {
        DataPrior::Gaussian => (1.0 + c * qt).ln(),
        // two independent BPSK dimensions at per-dimension SNR c*qt
        DataPrior::Qpsk => 2.0 * i_bpsk(c * qt),
    }
}

/// Replica free entropy of an overlap pair. Each complex observation
/// contributes two real quantized dimensions, hence the factor 2 on the
/// output terms; stationarity then reproduces the fixed-point equations.
pub fn free_entropy(cfg: &ReplicaConfig, q_h: f64, q_x2: f64) -> f64 {
    let (c_h, c_x1, c_x2) = (cfg.channel_var, cfg.pilot_power, cfg.data_power);
    let chi1 = chi(q_h, c_x1, c_h, c_x1, cfg.noise_var, &cfg.quantizer);
    let chi2 = chi(q_h, q_x2, c_h, c_x2, cfg.noise_var, &cfg.quantizer);
    let qt_h = cfg.beta1 * c_x1 * chi1 + cfg.beta2 * q_x2 * chi2;
    let qt_x2 = cfg.alpha * q_h * chi2;
    let g1 = g_out(q_h * c_x1, c_h * c_x1, cfg.noise_var, &cfg.quantizer);
    let g2 = g_out(q_h * q_x2, c_h * c_x2, cfg.noise_var, &cfg.quantizer);
    let i_h = (1.0 + c_h * qt_h).ln();
    let i_x2 = prior_info(cfg.data_prior, c_x2, qt_x2);
    2.0 * cfg.alpha * (cfg.beta1 * g1 + cfg.beta2 * g2) - cfg.alpha * i_h - cfg.beta2 * i_x2
        + cfg.alpha * (c_h - q_h) * qt_h
        + cfg.beta2 * (c_x2 - q_x2) * qt_x2
}

struct Candidate {
    solution: ReplicaSolution,
}

fn iterate_from(cfg: &ReplicaConfig, q_h0: f64, q_x0: f64) -> Candidate {
    let (c_h, c_x1, c_x2) = (cfg.channel_var, cfg.pilot_power, cfg.data_power);
    let pinned_h = cfg.mode == ReplicaMode::PerfectCsi;
    let mut q_h = if pinned_h { c_h } else { q_h0 };
    let mut q_x2 = q_x0;
    let (mut chi1, mut chi2) = (0.0, 0.0);
    let (mut qt_h, mut qt_x2) = (0.0, 0.0);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..cfg.max_iter {
        chi1 = chi(q_h, c_x1, c_h, c_x1, cfg.noise_var, &cfg.quantizer);
        chi2 = chi(q_h, q_x2, c_h, c_x2, cfg.noise_var, &cfg.quantizer);
        qt_h = cfg.beta1 * c_x1 * chi1 + cfg.beta2 * q_x2 * chi2;
        qt_x2 = cfg.alpha * q_h * chi2;
        let mse_h = c_h / (1.0 + c_h * qt_h);
        let mse_x2 = scalar_mmse(cfg.data_prior, c_x2, qt_x2);
        let q_h_new = if pinned_h { c_h } else { c_h - mse_h };
        let q_x2_new = c_x2 - mse_x2;
        let delta = (q_h_new - q_h).abs().max((q_x2_new - q_x2).abs());
        q_h = cfg.damping * q_h_new + (1.0 - cfg.damping) * q_h;
        q_x2 = cfg.damping * q_x2_new + (1.0 - cfg.damping) * q_x2;
        iterations = it + 1;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    let mse_h = if pinned_h {
        0.0
    } else {
        c_h / (1.0 + c_h * qt_h)
    };
    let mse_x2 = scalar_mmse(cfg.data_prior, c_x2, qt_x2);
    Candidate {
        solution: ReplicaSolution {
            q_h,
            q_x2,
            qt_h,
            qt_x2,
            mse_h,
            mse_x2,
            chi1,
            chi2,
            free_entropy: free_entropy(cfg, q_h, q_x2),
            converged,
            iterations,
            candidates: 0,
        },
    }
}

/// Damped fixed-point iteration from three initializations (near zero
/// overlap, near full overlap, midpoint); when several converge to distinct
/// points the one with the largest free entropy is returned.
pub fn solve_fixed_point(cfg: &ReplicaConfig) -> Result<ReplicaSolution, ReplicaError> {
    cfg.validate()?;
    let (c_h, c_x2) = (cfg.channel_var, cfg.data_power);
    let eps = 1e-8;
    let inits = [
        (eps * c_h, eps * c_x2),
        ((1.0 - eps) * c_h, (1.0 - eps) * c_x2),
        (0.5 * c_h, 0.5 * c_x2),
    ];
    let mut best: Option<ReplicaSolution> = None;
    let mut n_converged = 0usize;
    for (qh0, qx0) in inits {
        let cand = iterate_from(cfg, qh0, qx0).solution;
        if cand.converged {
            n_converged += 1;
        }
        let better = match &best {
            None => true,
            // prefer converged candidates, then higher free entropy
            Some(b) => {
                (cand.converged && !b.converged)
                    || (cand.converged == b.converged && cand.free_entropy > b.free_entropy)
            }
        };
        if better {
            best = Some(cand);
        }
    }
    let mut solution = best.expect("at least one candidate");
    solution.candidates = n_converged;
    Ok(solution)
}

/// Predicted uncoded QPSK bit error rate at effective data SNR qt_x2
/// (per-dimension decision SNR is qt_x2 itself for unit symbol power).
pub fn predict_ber_qpsk(qt_x2: f64) -> f64 {
    if qt_x2 <= 0.0 {
        return 0.5;
    }
    q_function(qt_x2.sqrt())
}

/// Achievable rate in bits per (data) channel use. `pilot_discount` rescales
/// for pilot overhead; pass 1.0 for the raw per-symbol rate.
pub fn achievable_rate(prior: DataPrior, c: f64, qt_x2: f64, pilot_discount: f64) -> f64 {
    let nats = match prior {
        DataPrior::Gaussian => (1.0 + c * qt_x2).ln(),
        DataPrior::Qpsk => 2.0 * i_bpsk(c * qt_x2),
    };
    nats / std::f64::consts::LN_2 * pilot_discount
}
