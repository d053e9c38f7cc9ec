//! Special functions, Gauss-Hermite quadrature against the standard Gaussian
//! measure, and deterministic counter-based random streams.
//!
//! Everything here is pure and thread-safe. The quadrature rules integrate
//! against `Dv = (1/sqrt(2*pi)) exp(-v^2/2) dv`, i.e. weights sum to one and
//! nodes are in standard-normal units.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("quadrature order must be at least 2, got {0}")]
    OrderTooSmall(usize),
    #[error("tridiagonal eigensolver failed to converge at order {0}")]
    EigFailure(usize),
}

/// Standard normal CDF, accurate on the log scale out to |x| ~ 38.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper-tail probability Q(x) = 1 - Phi(x), computed without cancellation.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / TWO_PI.sqrt()
}

/// Gauss-Hermite rule renormalized to the standard Gaussian measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss-Hermite rule of the given order for integrals against `Dv`.
///
/// Built by Golub-Welsch on the probabilists' Hermite Jacobi matrix, so the
/// nodes come out directly in standard-normal units and the weights sum to 1.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule, NumericsError> {
    if order < 2 {
        return Err(NumericsError::OrderTooSmall(order));
    }
    let diag = vec![0.0; order];
    let off: Vec<f64> = (1..order).map(|k| (k as f64).sqrt()).collect();
    let (nodes, first) = tridiag_eig(diag, off).ok_or(NumericsError::EigFailure(order))?;
    let mut pairs: Vec<(f64, f64)> = nodes
        .into_iter()
        .zip(first.into_iter().map(|z| z * z))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
        order,
    })
}

/// Shared cache of quadrature rules; rule construction is O(order^2).
fn cached_rule(order: usize) -> &'static QuadratureRule {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static QuadratureRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(order)
        .or_insert_with(|| Box::leak(Box::new(gauss_hermite(order).expect("order >= 2"))))
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 64;
const MAX_QUADRATURE_ORDER: usize = 1024;

/// Integrate `f` against `Dv`, doubling the order from 64 until two successive
/// evaluations agree to 1e-12 relative (integrands here are smooth but can be
/// sharply peaked at high SNR). The tight agreement threshold matters: the
/// fixed-point solver stops on residuals of 1e-10, so quadrature noise from
/// order switching between iterations has to sit well below that.
pub fn integrate_dv(mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut order = DEFAULT_QUADRATURE_ORDER;
    let mut prev = cached_rule(order).integrate(&mut f);
    while order < MAX_QUADRATURE_ORDER {
        order *= 2;
        let next = cached_rule(order).integrate(&mut f);
        if (next - prev).abs() <= 1e-12 * next.abs().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Symmetric tridiagonal eigensolver (implicit QL with Wilkinson shifts)
/// tracking only the first row of the eigenvector matrix, which is all
/// Golub-Welsch needs for the weights.
fn tridiag_eig(mut d: Vec<f64>, off: Vec<f64>) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut e = off;
    e.push(0.0);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Some((d, z))
}

/// Key of a reproducible random stream: identical `(master_seed, stream_id)`
/// always yields an identical stream, independent of execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Counter-based generator keyed by (master_seed, stream_id, counter);
    /// distinct stream ids give non-overlapping streams by construction.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
