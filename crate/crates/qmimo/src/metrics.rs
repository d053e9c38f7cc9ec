//! Error metrics for one simulated block.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Raw counts and normalized errors accumulated over a trial.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrialMetrics {
    pub bit_errors: u64,
    pub bits_total: u64,
    pub mse_h: f64,
    pub mse_x2: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl TrialMetrics {
    pub fn ber(&self) -> f64 {
        if self.bits_total == 0 {
            return 0.0;
        }
        self.bit_errors as f64 / self.bits_total as f64
    }
}

/// QPSK carries one bit per real dimension; a bit error is a sign mismatch.
/// Returns (errors, total bits).
pub fn ber_qpsk(estimate: &DMatrix<Complex64>, truth: &DMatrix<Complex64>) -> (u64, u64) {
    assert_eq!(estimate.shape(), truth.shape(), "shape mismatch in ber_qpsk");
    let mut errors = 0u64;
    for (e, t) in estimate.iter().zip(truth.iter()) {
        if e.re.signum() != t.re.signum() {
            errors += 1;
        }
        if e.im.signum() != t.im.signum() {
            errors += 1;
        }
    }
    (errors, 2 * (estimate.nrows() * estimate.ncols()) as u64)
}

/// Per-entry mean-square error normalized by the per-entry power of the
/// truth's prior (pass e.g. channel_var or data_power).
pub fn mse_normalized(
    estimate: &DMatrix<Complex64>,
    truth: &DMatrix<Complex64>,
    prior_power: f64,
) -> f64 {
    assert_eq!(estimate.shape(), truth.shape(), "shape mismatch in mse");
    let n = (estimate.nrows() * estimate.ncols()) as f64;
    (estimate - truth).map(|d| d.norm_sqr()).sum() / (n * prior_power)
}
