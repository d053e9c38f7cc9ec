//! Browser bindings for the interactive demo page.
//!
//! Three operations are exposed, all pure and synchronous so the page needs
//! no framework: a predicted BER-vs-SNR curve, a predicted rate-vs-alpha
//! curve, and the quantizer transfer characteristic.

use wasm_bindgen::prelude::*;

use qmimo::quantizer::quantize;
use qmimo::replica::{
    achievable_rate, predict_ber_qpsk, solve_fixed_point, DataPrior, ReplicaConfig, ReplicaMode,
};
use qmimo::{make_quantizer, QuantizerSpec};

fn quantizer_spec(bits: u32, step: f64) -> Result<QuantizerSpec, JsError> {
    if bits == 0 {
        return Ok(QuantizerSpec::Unquantized);
    }
    make_quantizer(bits, step).map_err(|e| JsError::new(&e.to_string()))
}

fn replica_cfg(
    quantizer: QuantizerSpec,
    mode: ReplicaMode,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    noise_var: f64,
    prior: DataPrior,
) -> ReplicaConfig {
    ReplicaConfig {
        mode,
        alpha,
        beta1,
        beta2,
        noise_var,
        channel_var: 1.0,
        pilot_power: 1.0,
        data_power: 1.0,
        data_prior: prior,
        quantizer,
        damping: 0.5,
        max_iter: 10_000,
        tol: 1e-10,
    }
}

/// Predicted uncoded QPSK BER at each SNR point (dB). `bits = 0` selects the
/// unquantized receiver; `perfect_csi` pins the channel overlap.
#[wasm_bindgen]
pub fn replica_ber_curve(
    bits: u32,
    step: f64,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    snr_db: Vec<f64>,
    perfect_csi: bool,
) -> Result<Vec<f64>, JsError> {
    let spec = quantizer_spec(bits, step)?;
    let mode = if perfect_csi {
        ReplicaMode::PerfectCsi
    } else {
        ReplicaMode::Jcd
    };
    snr_db
        .iter()
        .map(|&snr| {
            let cfg = replica_cfg(
                spec.clone(),
                mode,
                alpha,
                beta1,
                beta2,
                10f64.powf(-snr / 10.0),
                DataPrior::Qpsk,
            );
            let sol = solve_fixed_point(&cfg).map_err(|e| JsError::new(&e.to_string()))?;
            Ok(predict_ber_qpsk(sol.qt_x2))
        })
        .collect()
}

/// Predicted achievable rate (bits per data symbol, Gaussian signaling) at
/// each antenna ratio alpha.
#[wasm_bindgen]
pub fn replica_rate_curve(
    bits: u32,
    step: f64,
    beta1: f64,
    beta2: f64,
    noise_var: f64,
    alphas: Vec<f64>,
) -> Result<Vec<f64>, JsError> {
    let spec = quantizer_spec(bits, step)?;
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = replica_cfg(
                spec.clone(),
                ReplicaMode::Jcd,
                alpha,
                beta1,
                beta2,
                noise_var,
                DataPrior::Gaussian,
            );
            let sol = solve_fixed_point(&cfg).map_err(|e| JsError::new(&e.to_string()))?;
            Ok(achievable_rate(DataPrior::Gaussian, 1.0, sol.qt_x2, 1.0))
        })
        .collect()
}

/// Quantizer transfer characteristic: the representative value of each input
/// sample (real dimension).
#[wasm_bindgen]
pub fn quantizer_response(bits: u32, step: f64, inputs: Vec<f64>) -> Result<Vec<f64>, JsError> {
    let spec = quantizer_spec(bits, step)?;
    Ok(inputs
        .iter()
        .map(|&x| quantize(&spec, num_complex::Complex64::new(x, 0.0)).1.re)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ber_curve_is_monotone() {
        let curve =
            replica_ber_curve(3, 0.5, 4.0, 1.0, 9.0, vec![0.0, 4.0, 8.0, 12.0], false).unwrap();
        for w in curve.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn unquantized_beats_one_bit() {
        let snr = vec![6.0];
        let unq = replica_ber_curve(0, 0.5, 4.0, 1.0, 9.0, snr.clone(), false).unwrap();
        let one = replica_ber_curve(1, 0.5, 4.0, 1.0, 9.0, snr, false).unwrap();
        assert!(unq[0] < one[0]);
    }

    #[test]
    fn rate_curve_grows_with_alpha() {
        let rates = replica_rate_curve(3, 0.5, 1.0, 9.0, 0.1, vec![2.0, 8.0, 20.0]).unwrap();
        assert!(rates[0] < rates[1] && rates[1] < rates[2]);
    }

    #[test]
    fn quantizer_response_matches_levels() {
        let out = quantizer_response(1, 0.5, vec![-1.0, -0.1, 0.1, 1.0]).unwrap();
        assert_abs_diff_eq!(out[0], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out[2], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out[3], 0.25, epsilon = 1e-15);
    }
}
