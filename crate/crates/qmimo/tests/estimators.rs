//! Integration checks of the message-passing estimators against independent
//! closed-form oracles and their stated invariants.

use nalgebra::DMatrix;
use num_complex::Complex64;

use qmimo::estimators::{detect_known_channel, jcd_estimate, ObservationMatrix};
use qmimo::model::{generate_block, Constellation, SystemConfig};
use qmimo::numerics::SeedSpec;
use qmimo::quantizer::{make_quantizer, QuantizerSpec};
use qmimo::GampOptions;

fn config(
    k: usize,
    n: usize,
    t1: usize,
    t2: usize,
    snr_db: f64,
    data: Constellation,
    quantizer: QuantizerSpec,
) -> SystemConfig {
    SystemConfig {
        k,
        n,
        t1,
        t2,
        noise_var: 10f64.powf(-snr_db / 10.0),
        channel_var: 1.0,
        pilot_power: 1.0,
        data_power: 1.0,
        pilot_constellation: Constellation::Qpsk,
        data_constellation: data,
        quantizer,
    }
}

#[test]
fn jcd_high_snr_unquantized_recovers_data_exactly() {
    let cfg = config(
        8,
        32,
        8,
        24,
        30.0,
        Constellation::Qpsk,
        QuantizerSpec::Unquantized,
    );
    let mut total_errors = 0;
    for trial in 0..5 {
        let block = generate_block(&cfg, SeedSpec::new(100, trial));
        let obs = ObservationMatrix::from_block(&block, &cfg.quantizer);
        let r = jcd_estimate(&obs, &block.x1, &cfg, &GampOptions::default()).unwrap();
        let (e, _) = qmimo::metrics::ber_qpsk(&r.x2hat_hard, &block.x2);
        total_errors += e;
        let mse_h = qmimo::metrics::mse_normalized(&r.hhat, &block.h, cfg.channel_var);
        assert!(mse_h < 1e-2, "trial {trial}: channel mse {mse_h}");
    }
    assert_eq!(total_errors, 0);
}

/// With the channel known, no quantization and a Gaussian prior, the GAMP
/// fixed point must agree with the closed-form LMMSE estimate
/// xhat = c A^H (c A A^H + noise I)^{-1} y, A = H/sqrt(K).
#[test]
fn known_channel_gaussian_matches_lmmse_oracle() {
    let cfg = config(
        16,
        64,
        16,
        48,
        10.0,
        Constellation::CircularGaussian,
        QuantizerSpec::Unquantized,
    );
    let opts = GampOptions {
        max_iter: 200,
        tol: 1e-12,
        ..Default::default()
    };
    let block = generate_block(&cfg, SeedSpec::new(5, 0));
    let obs_data = ObservationMatrix::from_block(&block, &cfg.quantizer).columns(cfg.t1, cfg.t());
    let r = detect_known_channel(&obs_data, &block.h, &cfg, &opts).unwrap();

    let a = &block.h / Complex64::new((cfg.k as f64).sqrt(), 0.0);
    let gram = &a * a.adjoint() * Complex64::new(cfg.data_power, 0.0)
        + DMatrix::<Complex64>::identity(cfg.n, cfg.n) * Complex64::new(cfg.noise_var, 0.0);
    let gram_inv = gram.lu().try_inverse().unwrap();
    let y2: DMatrix<Complex64> = block.y.view((0, cfg.t1), (cfg.n, cfg.t2)).into();
    let lmmse = a.adjoint() * gram_inv * y2 * Complex64::new(cfg.data_power, 0.0);

    let rms = ((&r.x2hat_soft - &lmmse).map(|d| d.norm_sqr()).sum()
        / (cfg.k * cfg.t2) as f64)
        .sqrt();
    assert!(rms < 1e-3, "RMS deviation from LMMSE oracle: {rms}");
}

/// Posterior variances must track actual squared errors (consistency of the
/// algorithm's own error estimate).
#[test]
fn posterior_variance_tracks_empirical_error() {
    let cfg = config(
        16,
        64,
        16,
        144,
        8.0,
        Constellation::Qpsk,
        make_quantizer(3, 0.5).unwrap(),
    );
    let trials = 20;
    let (mut pred, mut emp) = (0.0, 0.0);
    for trial in 0..trials {
        let block = generate_block(&cfg, SeedSpec::new(77, trial));
        let obs = ObservationMatrix::from_block(&block, &cfg.quantizer);
        let r = jcd_estimate(&obs, &block.x1, &cfg, &GampOptions::default()).unwrap();
        pred += r.per_iteration.last().unwrap().mean_xvar;
        emp += qmimo::metrics::mse_normalized(&r.x2hat_soft, &block.x2, cfg.data_power);
    }
    pred /= trials as f64;
    emp /= trials as f64;
    // mean_xvar averages over the whole block including pinned pilots
    let pred_data = pred * cfg.t() as f64 / cfg.t2 as f64;
    assert!(
        (pred_data - emp).abs() < 0.5 * emp.max(1e-4),
        "predicted {pred_data} vs empirical {emp}"
    );
}

#[test]
fn invariants_hold_along_iterations() {
    let cfg = config(
        8,
        32,
        8,
        24,
        6.0,
        Constellation::Qpsk,
        make_quantizer(2, 0.5).unwrap(),
    );
    for trial in 0..10 {
        let block = generate_block(&cfg, SeedSpec::new(9, trial));
        let obs = ObservationMatrix::from_block(&block, &cfg.quantizer);
        let r = jcd_estimate(&obs, &block.x1, &cfg, &GampOptions::default()).unwrap();
        assert!(!r.per_iteration.is_empty());
        for diag in &r.per_iteration {
            assert!(diag.min_variance > 0.0, "variance not positive");
            assert_eq!(diag.pilot_deviation, 0.0, "pilot columns drifted");
            assert!(diag.residual_metric.is_finite());
        }
    }
}

#[test]
fn convergence_flag_reflects_tolerance() {
    let cfg = config(
        8,
        32,
        8,
        24,
        10.0,
        Constellation::Qpsk,
        QuantizerSpec::Unquantized,
    );
    let block = generate_block(&cfg, SeedSpec::new(4, 0));
    let obs = ObservationMatrix::from_block(&block, &cfg.quantizer);
    let strict = GampOptions {
        max_iter: 2,
        tol: 1e-30,
        ..Default::default()
    };
    let r = jcd_estimate(&obs, &block.x1, &cfg, &strict).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations_used, 2);
    let normal = GampOptions::default();
    let r = jcd_estimate(&obs, &block.x1, &cfg, &normal).unwrap();
    assert!(r.converged);
    assert!(r.per_iteration.last().unwrap().xhat_change < normal.tol);
}
