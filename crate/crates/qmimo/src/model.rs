//! Block-fading quantized MIMO model: configuration, random block
//! realizations, and the forward map Z = (1/sqrt(K)) H X.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::SeedSpec;
use crate::quantizer::{quantize, BinIndexPair, QuantizerSpec};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: H is {hn}x{hk}, X is {xk}x{xt}")]
    DimensionMismatch {
        hn: usize,
        hk: usize,
        xk: usize,
        xt: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constellation {
    Qpsk,
    CircularGaussian,
}

/// Dimensions, powers and quantizer of one simulated uplink.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub k: usize,
    pub n: usize,
    pub t1: usize,
    pub t2: usize,
    pub noise_var: f64,
    pub channel_var: f64,
    pub pilot_power: f64,
    pub data_power: f64,
    pub pilot_constellation: Constellation,
    pub data_constellation: Constellation,
    pub quantizer: QuantizerSpec,
}

impl SystemConfig {
    pub fn t(&self) -> usize {
        self.t1 + self.t2
    }

    pub fn alpha(&self) -> f64 {
        self.n as f64 / self.k as f64
    }

    pub fn beta1(&self) -> f64 {
        self.t1 as f64 / self.k as f64
    }

    pub fn beta2(&self) -> f64 {
        self.t2 as f64 / self.k as f64
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.k == 0 || self.n == 0 || self.t1 == 0 || self.t2 == 0 {
            return bad("dimensions k, n, t1, t2 must be positive");
        }
        for (name, v) in [
            ("noise_var", self.noise_var),
            ("channel_var", self.channel_var),
            ("pilot_power", self.pilot_power),
            ("data_power", self.data_power),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.pilot_constellation != Constellation::Qpsk {
            return bad("pilot constellation must be qpsk");
        }
        Ok(())
    }
}

/// One realization of the block: channel, symbols, noise, noiseless output,
/// and the quantized observation (as bin indices plus representatives).
#[derive(Debug, Clone)]
pub struct BlockInstance {
    pub h: DMatrix<Complex64>,
    pub x1: DMatrix<Complex64>,
    pub x2: DMatrix<Complex64>,
    pub w: DMatrix<Complex64>,
    pub z: DMatrix<Complex64>,
    /// Unquantized receive signal Z + W.
    pub y: DMatrix<Complex64>,
    /// Column-major N x T bin indices (finite-bit mode; empty otherwise).
    pub ytilde: Vec<BinIndexPair>,
    /// Representative levels of `ytilde`; equals `y` in unquantized mode.
    pub ytilde_rep: DMatrix<Complex64>,
}

fn draw_standard_complex(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / std::f64::consts::SQRT_2
}

fn draw_symbol(rng: &mut impl Rng, constellation: Constellation, power: f64) -> Complex64 {
    match constellation {
        Constellation::Qpsk => {
            let re = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let im = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Complex64::new(re, im) * (power / 2.0).sqrt()
        }
        Constellation::CircularGaussian => draw_standard_complex(rng) * power.sqrt(),
    }
}

/// Z = (1/sqrt(K)) H X.
pub fn forward(
    h: &DMatrix<Complex64>,
    x: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>, ModelError> {
    if h.ncols() != x.nrows() {
        return Err(ModelError::DimensionMismatch {
            hn: h.nrows(),
            hk: h.ncols(),
            xk: x.nrows(),
            xt: x.ncols(),
        });
    }
    let k = h.ncols() as f64;
    Ok(h * x / Complex64::new(k.sqrt(), 0.0))
}

/// Draw a full block realization, deterministic in `seed`.
pub fn generate_block(config: &SystemConfig, seed: SeedSpec) -> BlockInstance {
    let mut rng = seed.rng();
    let (n, k, t1, t2) = (config.n, config.k, config.t1, config.t2);
    let t = t1 + t2;

    let sigma_h = config.channel_var.sqrt();
    let h = DMatrix::from_fn(n, k, |_, _| draw_standard_complex(&mut rng) * sigma_h);
    let x1 = DMatrix::from_fn(k, t1, |_, _| {
        draw_symbol(&mut rng, config.pilot_constellation, config.pilot_power)
    });
    let x2 = DMatrix::from_fn(k, t2, |_, _| {
        draw_symbol(&mut rng, config.data_constellation, config.data_power)
    });
    let sigma_w = config.noise_var.sqrt();
    let w = DMatrix::from_fn(n, t, |_, _| draw_standard_complex(&mut rng) * sigma_w);

    let mut x = DMatrix::zeros(k, t);
    x.view_mut((0, 0), (k, t1)).copy_from(&x1);
    x.view_mut((0, t1), (k, t2)).copy_from(&x2);
    let z = forward(&h, &x).expect("dimensions agree by construction");
    let y = &z + &w;

    let (ytilde, ytilde_rep) = match &config.quantizer {
        QuantizerSpec::FiniteBit { .. } => {
            let mut bins = Vec::with_capacity(n * t);
            let rep = DMatrix::from_fn(n, t, |i, j| {
                let (b, r) = quantize(&config.quantizer, y[(i, j)]);
                bins.push(b);
                r
            });
            (bins, rep)
        }
        QuantizerSpec::Unquantized => (Vec::new(), y.clone()),
    };

    BlockInstance {
        h,
        x1,
        x2,
        w,
        z,
        y,
        ytilde,
        ytilde_rep,
    }
}

impl BlockInstance {
    /// Bin indices of entry (i, j), finite-bit mode only.
    pub fn bins(&self, i: usize, j: usize) -> BinIndexPair {
        self.ytilde[j * self.y.nrows() + i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::make_quantizer;
    use approx::assert_abs_diff_eq;

    fn test_config(quantizer: QuantizerSpec) -> SystemConfig {
        SystemConfig {
            k: 50,
            n: 200,
            t1: 50,
            t2: 450,
            noise_var: 1.0,
            channel_var: 1.0,
            pilot_power: 1.0,
            data_power: 1.0,
            pilot_constellation: Constellation::Qpsk,
            data_constellation: Constellation::Qpsk,
            quantizer,
        }
    }

    #[test]
    fn forward_trivial_cases() {
        let h = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let x = DMatrix::from_element(1, 1, Complex64::new(2.0, 0.0));
        let z = forward(&h, &x).unwrap();
        assert_abs_diff_eq!(z[(0, 0)].re, 2.0, epsilon = 1e-15);

        let h = DMatrix::from_element(3, 4, Complex64::new(1.0, 0.0));
        let x0 = DMatrix::zeros(4, 2);
        assert!(forward(&h, &x0).unwrap().iter().all(|z| z.norm() == 0.0));

        let x = DMatrix::from_element(4, 2, Complex64::new(1.0, 0.0));
        let z = forward(&h, &x).unwrap();
        // all-ones: every entry K/sqrt(K) = 2
        for e in z.iter() {
            assert_abs_diff_eq!(e.re, 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn forward_rejects_mismatch() {
        let h = DMatrix::<Complex64>::zeros(3, 4);
        let x = DMatrix::<Complex64>::zeros(5, 2);
        assert!(forward(&h, &x).is_err());
    }

    #[test]
    fn noiseless_unquantized_passthrough() {
        let mut cfg = test_config(QuantizerSpec::Unquantized);
        cfg.noise_var = 1e-300; // validate() requires > 0
        let block = generate_block(&cfg, SeedSpec::new(1, 0));
        for (rep, z) in block.ytilde_rep.iter().zip(block.z.iter()) {
            assert_abs_diff_eq!((rep - z).norm(), 0.0, epsilon = 1e-140);
        }
    }

    #[test]
    fn empirical_powers() {
        let cfg = test_config(make_quantizer(3, 0.5).unwrap());
        let block = generate_block(&cfg, SeedSpec::new(42, 0));
        let p_x2: f64 =
            block.x2.iter().map(|x| x.norm_sqr()).sum::<f64>() / (cfg.k * cfg.t2) as f64;
        assert!((p_x2 - cfg.data_power).abs() < 0.05 * cfg.data_power);
        let p_h: f64 =
            block.h.iter().map(|h| h.norm_sqr()).sum::<f64>() / (cfg.k * cfg.n) as f64;
        assert!((p_h - cfg.channel_var).abs() < 0.05 * cfg.channel_var);
    }

    #[test]
    fn qpsk_points_exact() {
        let cfg = test_config(make_quantizer(3, 0.5).unwrap());
        let block = generate_block(&cfg, SeedSpec::new(5, 1));
        let a = (cfg.data_power / 2.0).sqrt();
        for s in block.x2.iter() {
            assert_abs_diff_eq!(s.re.abs(), a, epsilon = 1e-15);
            assert_abs_diff_eq!(s.im.abs(), a, epsilon = 1e-15);
        }
    }

    #[test]
    fn determinism() {
        let cfg = test_config(make_quantizer(2, 0.5).unwrap());
        let a = generate_block(&cfg, SeedSpec::new(9, 7));
        let b = generate_block(&cfg, SeedSpec::new(9, 7));
        assert_eq!(a.h, b.h);
        assert_eq!(a.x2, b.x2);
        assert_eq!(a.ytilde, b.ytilde);
        let c = generate_block(&cfg, SeedSpec::new(9, 8));
        assert_ne!(a.h, c.h);
    }

    #[test]
    fn moment_statistics() {
        // z-test at 5 sigma on ~1e6 draws of H, X entries
        let mut cfg = test_config(make_quantizer(3, 0.5).unwrap());
        cfg.n = 1000;
        cfg.k = 100;
        cfg.t1 = 100;
        cfg.t2 = 900;
        let block = generate_block(&cfg, SeedSpec::new(123, 0));
        let n_h = (cfg.n * cfg.k) as f64;
        let mean_h: Complex64 = block.h.iter().sum::<Complex64>() / n_h;
        // |H|^2 has variance sigma_h^4 per entry, mean has std sigma_h/sqrt(n)
        assert!(mean_h.norm() < 5.0 * cfg.channel_var.sqrt() / n_h.sqrt() + 1e-12);
        let pow_h = block.h.iter().map(|h| h.norm_sqr()).sum::<f64>() / n_h;
        assert!((pow_h - cfg.channel_var).abs() < 5.0 * cfg.channel_var / n_h.sqrt());

        let n_x = (cfg.k * cfg.t2) as f64;
        let mean_x: Complex64 = block.x2.iter().sum::<Complex64>() / n_x;
        assert!(mean_x.norm() < 5.0 * cfg.data_power.sqrt() / n_x.sqrt());
    }
}
