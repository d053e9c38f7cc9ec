//! The scalar B-bit uniform quantizer: bin geometry, bin probabilities
//! Psi_b and their derivative, and truncated-Gaussian posterior moments.
//!
//! Complex samples are quantized per real dimension with the half-open bin
//! convention `(r_{b-1}, r_b]`. The bin-probability functions carry the
//! Gaussian variance as an explicit parameter so the same code serves the
//! likelihood (v = noise variance) and the replica analysis
//! (v = sigma_w^2 + c_H c_X - q_H q_X).

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{q_function, std_normal_cdf, std_normal_pdf};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum QuantizerError {
    #[error("bit depth must be in 1..=12, got {0}")]
    BadBits(u32),
    #[error("step size must be positive, got {0}")]
    BadStep(f64),
    #[error("variance must be positive, got {0}")]
    BadVariance(f64),
    #[error("bin index {index} out of range 1..={levels}")]
    BadBin { index: usize, levels: usize },
    #[error("truncation interval mass underflows")]
    DegenerateMass,
    #[error("empty truncation interval: lo {lo} >= hi {hi}")]
    EmptyInterval { lo: f64, hi: f64 },
}

/// Scalar ADC description. `Unquantized` is a pass-through marker so every
/// downstream consumer is quantization-agnostic.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantizerSpec {
    FiniteBit {
        bits: u32,
        step: f64,
        /// Interior thresholds r_1..r_{2^B - 1}; r_0 and r_{2^B} are +-inf.
        thresholds: Vec<f64>,
        /// Representative level of each of the 2^B bins.
        representatives: Vec<f64>,
    },
    Unquantized,
}

/// Per-dimension bin indices of one quantized complex sample, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinIndexPair {
    pub re_bin: usize,
    pub im_bin: usize,
}

/// Uniform B-bit quantizer with thresholds r_b = (-2^{B-1} + b) * step.
pub fn make_quantizer(bits: u32, step: f64) -> Result<QuantizerSpec, QuantizerError> {
    if !(1..=12).contains(&bits) {
        return Err(QuantizerError::BadBits(bits));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(QuantizerError::BadStep(step));
    }
    let levels = 1usize << bits;
    let thresholds: Vec<f64> = (1..levels)
        .map(|b| (b as f64 - (levels / 2) as f64) * step)
        .collect();
    let mut representatives: Vec<f64> = (1..levels)
        .map(|b| thresholds[b - 1] - step / 2.0)
        .collect();
    // top bin mirrors the interior rule: r_{2^B-1} + step/2
    representatives.push(thresholds[levels - 2] + step / 2.0);
    Ok(QuantizerSpec::FiniteBit {
        bits,
        step,
        thresholds,
        representatives,
    })
}

impl QuantizerSpec {
    pub fn is_unquantized(&self) -> bool {
        matches!(self, QuantizerSpec::Unquantized)
    }

    /// Number of bins per real dimension (finite-bit mode only).
    pub fn levels(&self) -> usize {
        match self {
            QuantizerSpec::FiniteBit { bits, .. } => 1usize << bits,
            QuantizerSpec::Unquantized => 0,
        }
    }

    /// Extended threshold r_b for b in 0..=2^B.
    pub fn threshold(&self, b: usize) -> f64 {
        match self {
            QuantizerSpec::FiniteBit { thresholds, .. } => {
                if b == 0 {
                    f64::NEG_INFINITY
                } else if b > thresholds.len() {
                    f64::INFINITY
                } else {
                    thresholds[b - 1]
                }
            }
            QuantizerSpec::Unquantized => f64::NAN,
        }
    }

    /// Half-open support (lo, hi] of bin b.
    pub fn bin_bounds(&self, b: usize) -> (f64, f64) {
        (self.threshold(b - 1), self.threshold(b))
    }

    pub fn representative(&self, b: usize) -> f64 {
        match self {
            QuantizerSpec::FiniteBit {
                representatives, ..
            } => representatives[b - 1],
            QuantizerSpec::Unquantized => f64::NAN,
        }
    }

    fn scalar_bin(&self, y: f64) -> usize {
        match self {
            QuantizerSpec::FiniteBit { thresholds, .. } => {
                // half-open bins: y = r_b lands in bin b
                thresholds.partition_point(|&r| r < y) + 1
            }
            QuantizerSpec::Unquantized => 0,
        }
    }
}

/// Quantize one complex sample; returns per-dimension bin indices and the
/// representative point. In unquantized mode the sample passes through.
pub fn quantize(spec: &QuantizerSpec, y: Complex64) -> (BinIndexPair, Complex64) {
    match spec {
        QuantizerSpec::FiniteBit { .. } => {
            let re_bin = spec.scalar_bin(y.re);
            let im_bin = spec.scalar_bin(y.im);
            let rep = Complex64::new(spec.representative(re_bin), spec.representative(im_bin));
            (BinIndexPair { re_bin, im_bin }, rep)
        }
        QuantizerSpec::Unquantized => (
            BinIndexPair {
                re_bin: 0,
                im_bin: 0,
            },
            y,
        ),
    }
}

fn check_bin(spec: &QuantizerSpec, b: usize) -> Result<(), QuantizerError> {
    let levels = spec.levels();
    if b == 0 || b > levels {
        return Err(QuantizerError::BadBin { index: b, levels });
    }
    Ok(())
}

/// Psi_b(x; v) = Phi(sqrt(2)(r_b - x)/sqrt(v)) - Phi(sqrt(2)(r_{b-1} - x)/sqrt(v)),
/// computed as a difference of complementary CDFs on the tail side.
pub fn bin_prob(spec: &QuantizerSpec, b: usize, x: f64, v: f64) -> Result<f64, QuantizerError> {
    if !(v > 0.0) {
        return Err(QuantizerError::BadVariance(v));
    }
    check_bin(spec, b)?;
    let (lo, hi) = spec.bin_bounds(b);
    let s = v.sqrt();
    let a = SQRT_2 * (lo - x) / s;
    let c = SQRT_2 * (hi - x) / s;
    let p = if a >= 0.0 {
        q_function(a) - q_function(c)
    } else {
        std_normal_cdf(c) - std_normal_cdf(a)
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Analytic derivative of [`bin_prob`] with respect to `x`.
pub fn bin_prob_deriv(
    spec: &QuantizerSpec,
    b: usize,
    x: f64,
    v: f64,
) -> Result<f64, QuantizerError> {
    if !(v > 0.0) {
        return Err(QuantizerError::BadVariance(v));
    }
    check_bin(spec, b)?;
    let (lo, hi) = spec.bin_bounds(b);
    let s = v.sqrt();
    let pdf_at = |r: f64| {
        if r.is_finite() {
            std_normal_pdf(SQRT_2 * (r - x) / s)
        } else {
            0.0
        }
    };
    Ok((SQRT_2 / s) * (pdf_at(lo) - pdf_at(hi)))
}

/// Mean and variance of N(mean, var) conditioned on the interval (lo, hi],
/// via tail-safe ratios. Signals [`QuantizerError::DegenerateMass`] when the
/// interval probability underflows; callers clamp at the nearest boundary.
pub fn truncated_gauss_moments(
    lo: f64,
    hi: f64,
    mean: f64,
    var: f64,
) -> Result<(f64, f64), QuantizerError> {
    if !(var > 0.0) {
        return Err(QuantizerError::BadVariance(var));
    }
    if !(lo < hi) {
        return Err(QuantizerError::EmptyInterval { lo, hi });
    }
    let sigma = var.sqrt();
    let alpha = (lo - mean) / sigma;
    let beta = (hi - mean) / sigma;

    let mass = if alpha >= 0.0 {
        q_function(alpha) - q_function(beta)
    } else if beta <= 0.0 {
        std_normal_cdf(beta) - std_normal_cdf(alpha)
    } else {
        std_normal_cdf(beta) - std_normal_cdf(alpha)
    };
    if mass < 1e-300 {
        return Err(QuantizerError::DegenerateMass);
    }
    let phi_at = |t: f64| if t.is_finite() { std_normal_pdf(t) } else { 0.0 };
    let t_phi = |t: f64| if t.is_finite() { t * std_normal_pdf(t) } else { 0.0 };
    let lambda = (phi_at(alpha) - phi_at(beta)) / mass;
    let delta = (t_phi(alpha) - t_phi(beta)) / mass;
    let post_mean = mean + sigma * lambda;
    let post_var = (var * (1.0 + delta - lambda * lambda)).clamp(1e-15 * var, var);
    Ok((post_mean, post_var))
}
