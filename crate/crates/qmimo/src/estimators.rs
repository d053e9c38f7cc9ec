//! GAMP-based joint channel-and-data estimation for the quantized block, the
//! known-channel GAMP detector, and the pilot-only LS baseline.
//!
//! The bilinear recursion follows the BiG-AMP scheme: plug-in output moments
//! with Onsager correction, scaled residual messages from the output
//! denoiser, per-entry pseudo-data for both factors, and per-entry input
//! denoising. The channel factor is handled as A = H/sqrt(K) (i.i.d. prior
//! variance sigma_h^2/K), which absorbs the forward scaling of the model.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::model::{Constellation, SystemConfig};
use crate::quantizer::{truncated_gauss_moments, BinIndexPair, QuantizerSpec};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("pseudo-channel variance must be positive, got {0}")]
    BadVariance(f64),
    #[error("pilot Gram matrix is rank deficient")]
    RankDeficientPilots,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Per-entry prior of an unknown in the bilinear model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    Known(Complex64),
    Qpsk { power: f64 },
    CircularGaussian { power: f64 },
    ChannelGaussian { variance: f64 },
}

impl PriorSpec {
    pub fn power(&self) -> f64 {
        match *self {
            PriorSpec::Known(v) => v.norm_sqr(),
            PriorSpec::Qpsk { power } | PriorSpec::CircularGaussian { power } => power,
            PriorSpec::ChannelGaussian { variance } => variance,
        }
    }
}

/// Posterior mean/variance of a prior variable observed through the
/// pseudo-channel r = x + noise of (complex) variance v.
pub fn denoise_input(
    r: Complex64,
    v: f64,
    prior: &PriorSpec,
) -> Result<(Complex64, f64), EstimatorError> {
    if !(v > 0.0) {
        return Err(EstimatorError::BadVariance(v));
    }
    Ok(match *prior {
        PriorSpec::Known(x0) => (x0, 0.0),
        PriorSpec::CircularGaussian { power: c }
        | PriorSpec::ChannelGaussian { variance: c } => {
            let gain = c / (c + v);
            (r * gain, c * v / (c + v))
        }
        PriorSpec::Qpsk { power: c } => {
            let amp = (c / 2.0).sqrt();
            let scale = (2.0 * c).sqrt() / v;
            let mean = Complex64::new(
                amp * (scale * r.re).tanh(),
                amp * (scale * r.im).tanh(),
            );
            (mean, (c - mean.norm_sqr()).max(0.0))
        }
    })
}

/// What the receiver saw for one entry: bin indices (finite-bit ADC) or the
/// exact sample (unquantized mode).
#[derive(Debug, Clone, Copy)]
pub enum Observation {
    Bins(BinIndexPair),
    Exact(Complex64),
}

/// Column-major N x T observation matrix.
#[derive(Debug, Clone)]
pub struct ObservationMatrix {
    pub entries: Vec<Observation>,
    pub nrows: usize,
    pub ncols: usize,
}

impl ObservationMatrix {
    pub fn from_block(block: &crate::model::BlockInstance, spec: &QuantizerSpec) -> Self {
        let (nrows, ncols) = (block.y.nrows(), block.y.ncols());
        let entries = if spec.is_unquantized() {
            block.y.iter().map(|&y| Observation::Exact(y)).collect()
        } else {
            block.ytilde.iter().map(|&b| Observation::Bins(b)).collect()
        };
        Self {
            entries,
            nrows,
            ncols,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Observation {
        self.entries[j * self.nrows + i]
    }

    /// Sub-matrix of columns `from..to`.
    pub fn columns(&self, from: usize, to: usize) -> ObservationMatrix {
        let mut entries = Vec::with_capacity(self.nrows * (to - from));
        for j in from..to {
            for i in 0..self.nrows {
                entries.push(self.get(i, j));
            }
        }
        ObservationMatrix {
            entries,
            nrows: self.nrows,
            ncols: to - from,
        }
    }
}

/// Posterior moments of Z given Z ~ CN(phat, pvar) and the quantized (or
/// exact) observation of Z + W, W ~ CN(0, noise_var).
pub fn denoise_output(
    obs: Observation,
    phat: Complex64,
    pvar: f64,
    noise_var: f64,
    spec: &QuantizerSpec,
) -> (Complex64, f64) {
    match obs {
        Observation::Exact(y) => {
            // linear AWGN update
            let gain = pvar / (pvar + noise_var);
            (phat + (y - phat) * gain, pvar * (1.0 - gain))
        }
        Observation::Bins(bins) => denoise_output_quantized(bins, phat, pvar, noise_var, spec),
    }
}

/// Quantized-output denoiser. Per real dimension: truncated-Gaussian moments
/// of Y = Z + W over the observed bin, mapped back to Z by joint-Gaussian
/// conditioning (cov(Z, Y) = pvar/2 per dimension).
pub fn denoise_output_quantized(
    bins: BinIndexPair,
    phat: Complex64,
    pvar: f64,
    noise_var: f64,
    spec: &QuantizerSpec,
) -> (Complex64, f64) {
    let y_var = (pvar + noise_var) / 2.0;
    let gain = pvar / (pvar + noise_var);
    let dim = |mu: f64, bin: usize| -> (f64, f64) {
        let (lo, hi) = spec.bin_bounds(bin);
        let (my, vy) = match truncated_gauss_moments(lo, hi, mu, y_var) {
            Ok(m) => m,
            Err(_) => {
                // interval mass underflowed: clamp at the nearest boundary
                let target = if lo.is_finite() && (hi.is_infinite() || (mu - lo).abs() < (mu - hi).abs()) {
                    lo
                } else {
                    hi
                };
                (target, 1e-12 * y_var)
            }
        };
        let zm = mu + gain * (my - mu);
        let zv = 0.5 * pvar * (1.0 - gain) + gain * gain * vy;
        (zm, zv)
    };
    let (zr, vr) = dim(phat.re, bins.re_bin);
    let (zi, vi) = dim(phat.im, bins.im_bin);
    let zvar = (vr + vi).min(pvar);
    (Complex64::new(zr, zi), zvar)
}

/// Knobs of the damped BiG-AMP iteration. `damping` is the fraction of the
/// previous iterate retained in each update (0 = undamped).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GampOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
    pub variance_floor: f64,
}

impl Default for GampOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-6,
            damping: 0.7,
            variance_floor: 1e-12,
        }
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct IterationDiag {
    pub iteration: usize,
    pub xhat_change: f64,
    pub mean_xvar: f64,
    pub mean_hvar: f64,
    pub residual_metric: f64,
    /// Smallest variance held by the iteration (xvar, pvar, svar).
    pub min_variance: f64,
    /// Largest deviation of the pilot columns of xhat from the pilots.
    pub pilot_deviation: f64,
}

/// Joint channel-and-data estimate of one block.
#[derive(Debug, Clone)]
pub struct JcdResult {
    pub hhat: DMatrix<Complex64>,
    pub x2hat_soft: DMatrix<Complex64>,
    pub x2hat_hard: DMatrix<Complex64>,
    pub per_iteration: Vec<IterationDiag>,
    pub converged: bool,
    pub iterations_used: usize,
}

/// Data-only estimate (channel known or previously estimated).
#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub x2hat_soft: DMatrix<Complex64>,
    pub x2hat_hard: DMatrix<Complex64>,
    pub per_iteration: Vec<IterationDiag>,
    pub converged: bool,
    pub iterations_used: usize,
}

enum ChannelFactor {
    /// Estimate A = H/sqrt(K) with i.i.d. CN(0, variance) prior.
    Estimate { variance: f64 },
    /// A fixed and known exactly.
    Known(DMatrix<Complex64>),
}

struct BilinearProblem<'a> {
    obs: &'a ObservationMatrix,
    quantizer: &'a QuantizerSpec,
    noise_var: f64,
    channel: ChannelFactor,
    /// First `pinned_cols` columns of X are known pilots.
    pinned: Option<&'a DMatrix<Complex64>>,
    data_prior: PriorSpec,
    k: usize,
}

struct GampRun {
    xhat: DMatrix<Complex64>,
    #[allow(dead_code)]
    xvar: DMatrix<f64>,
    ahat: DMatrix<Complex64>,
    #[allow(dead_code)]
    avar: DMatrix<f64>,
    per_iteration: Vec<IterationDiag>,
    converged: bool,
    iterations_used: usize,
}

const PSEUDO_VAR_CEILING: f64 = 1e12;

fn run_bigamp(problem: &BilinearProblem, opts: &GampOptions) -> GampRun {
    let n = problem.obs.nrows;
    let t = problem.obs.ncols;
    let k = problem.k;
    let floor = opts.variance_floor;
    // weight on the freshly computed quantity
    let delta = 1.0 - opts.damping;
    let t1 = problem.pinned.map_or(0, |p| p.ncols());
    let data_power = problem.data_prior.power();
    let var_ceiling = 1e6 * data_power.max(1.0);

    // initialization: prior means, prior variances; pilots pinned
    let mut xhat = DMatrix::<Complex64>::zeros(k, t);
    let mut xvar = DMatrix::<f64>::from_element(k, t, data_power);
    if let Some(pilots) = problem.pinned {
        xhat.view_mut((0, 0), (k, t1)).copy_from(pilots);
        xvar.view_mut((0, 0), (k, t1)).fill(floor);
    }
    let (mut ahat, mut avar, a_prior_var) = match &problem.channel {
        ChannelFactor::Estimate { variance } => (
            DMatrix::<Complex64>::zeros(n, k),
            DMatrix::<f64>::from_element(n, k, *variance),
            *variance,
        ),
        ChannelFactor::Known(a) => (a.clone(), DMatrix::<f64>::zeros(n, k), 0.0),
    };

    let mut shat = DMatrix::<Complex64>::zeros(n, t);
    let mut svar = DMatrix::<f64>::zeros(n, t);
    let mut v_prev: Option<DMatrix<f64>> = None;
    let mut per_iteration = Vec::new();
    let mut converged = false;
    let mut iterations_used = 0;
    // plateau averages recover the fixed point when the iterate ends up in a
    // small limit cycle around it instead of converging; the accumulator is
    // reset while the change metric is still shrinking (transient phase)
    let mut xhat_tail = DMatrix::<Complex64>::zeros(k, t);
    let mut ahat_tail = DMatrix::<Complex64>::zeros(n, k);
    let mut tail_count = 0usize;
    let mut best_change = f64::INFINITY;

    for iter in 0..opts.max_iter {
        let ah2 = ahat.map(|z| z.norm_sqr());
        let xh2 = xhat.map(|z| z.norm_sqr());

        // plug-in output moments with Onsager correction
        let vbar = &ah2 * &xvar + &avar * &xh2;
        let mut v = (&vbar + &avar * &xvar).map(|e| e.max(floor));
        if let Some(prev) = &v_prev {
            v = delta * v + (1.0 - delta) * prev;
        }
        let pbar = &ahat * &xhat
            - DMatrix::from_fn(n, t, |i, j| shat[(i, j)] * vbar[(i, j)]);

        // output denoising and scaled residuals
        let mut shat_new = DMatrix::<Complex64>::zeros(n, t);
        let mut svar_new = DMatrix::<f64>::zeros(n, t);
        let mut residual = 0.0;
        for j in 0..t {
            for i in 0..n {
                let pv = v[(i, j)];
                let (zhat, zvar) = denoise_output(
                    problem.obs.get(i, j),
                    pbar[(i, j)],
                    pv,
                    problem.noise_var,
                    problem.quantizer,
                );
                shat_new[(i, j)] = (zhat - pbar[(i, j)]) / pv;
                svar_new[(i, j)] = ((1.0 - zvar / pv) / pv).max(floor);
                residual += (zhat - pbar[(i, j)]).norm_sqr();
            }
        }
        residual /= (n * t) as f64;
        shat = shat_new.zip_map(&shat, |new, old| new * delta + old * (1.0 - delta));
        svar = delta * svar_new + (1.0 - delta) * &svar;

        // pseudo-data for X
        let ah2_t = ah2.transpose();
        let vr_inv = &ah2_t * &svar; // K x T
        let onsager_x = avar.transpose() * &svar; // K x T
        let corr_x = ahat.adjoint() * &shat; // K x T
        let mut rhat = DMatrix::<Complex64>::zeros(k, t);
        let mut rvar = DMatrix::<f64>::zeros(k, t);
        for j in 0..t {
            for i in 0..k {
                let vr = (1.0 / vr_inv[(i, j)].max(1.0 / PSEUDO_VAR_CEILING))
                    .min(PSEUDO_VAR_CEILING);
                rvar[(i, j)] = vr;
                rhat[(i, j)] = xhat[(i, j)] * (1.0 - vr * onsager_x[(i, j)])
                    + corr_x[(i, j)] * vr;
            }
        }

        // pseudo-data for A (skipped when the channel is known)
        let (qhat, qvar) = if a_prior_var > 0.0 {
            let xh2_t = xh2.transpose();
            let vq_inv = &svar * &xh2_t; // N x K
            let onsager_a = &svar * xvar.transpose(); // N x K
            let corr_a = &shat * xhat.adjoint(); // N x K
            let mut qhat = DMatrix::<Complex64>::zeros(n, k);
            let mut qvar = DMatrix::<f64>::zeros(n, k);
            for j in 0..k {
                for i in 0..n {
                    let vq = (1.0 / vq_inv[(i, j)].max(1.0 / PSEUDO_VAR_CEILING))
                        .min(PSEUDO_VAR_CEILING);
                    qvar[(i, j)] = vq;
                    qhat[(i, j)] = ahat[(i, j)] * (1.0 - vq * onsager_a[(i, j)])
                        + corr_a[(i, j)] * vq;
                }
            }
            (Some(qhat), Some(qvar))
        } else {
            (None, None)
        };

        // input denoising: X
        let mut xhat_new = xhat.clone();
        let mut xvar_new = xvar.clone();
        for j in t1..t {
            for i in 0..k {
                let (m, var) =
                    denoise_input(rhat[(i, j)], rvar[(i, j)], &problem.data_prior)
                        .expect("rvar floored positive");
                xhat_new[(i, j)] = m;
                xvar_new[(i, j)] = var.clamp(floor, var_ceiling);
            }
        }
        let change = (&xhat_new - &xhat).map(|d| d.norm_sqr()).sum() / (k * t) as f64;
        xhat = xhat_new.zip_map(&xhat, |new, old| new * delta + old * (1.0 - delta));
        let xvar_new = delta * xvar_new + (1.0 - delta) * &xvar;
        let mut pilot_deviation = 0.0f64;
        if let Some(pilots) = problem.pinned {
            for j in 0..t1 {
                for i in 0..k {
                    pilot_deviation = pilot_deviation.max((xhat[(i, j)] - pilots[(i, j)]).norm());
                }
            }
            // keep pilots exact regardless of damping round-off
            xhat.view_mut((0, 0), (k, t1)).copy_from(pilots);
        }
        xvar = xvar_new;

        // input denoising: A
        if let (Some(qhat), Some(qvar)) = (qhat, qvar) {
            let prior = PriorSpec::ChannelGaussian {
                variance: a_prior_var,
            };
            let mut ahat_new = DMatrix::<Complex64>::zeros(n, k);
            let mut avar_new = DMatrix::<f64>::zeros(n, k);
            for j in 0..k {
                for i in 0..n {
                    let (m, var) = denoise_input(qhat[(i, j)], qvar[(i, j)], &prior)
                        .expect("qvar floored positive");
                    ahat_new[(i, j)] = m;
                    avar_new[(i, j)] = var.clamp(floor, 1e6 * a_prior_var.max(1.0));
                }
            }
            ahat = ahat_new.zip_map(&ahat, |new, old| new * delta + old * (1.0 - delta));
            avar = delta * avar_new + (1.0 - delta) * &avar;
        }

        let min_variance = xvar
            .min()
            .min(v.min())
            .min(svar.min());
        v_prev = Some(v);
        iterations_used = iter + 1;
        if iter > 0 && change < 0.9 * best_change {
            best_change = change;
            xhat_tail.fill(Complex64::new(0.0, 0.0));
            ahat_tail.fill(Complex64::new(0.0, 0.0));
            tail_count = 0;
        } else {
            xhat_tail += &xhat;
            ahat_tail += &ahat;
            tail_count += 1;
        }
        per_iteration.push(IterationDiag {
            iteration: iter,
            xhat_change: change,
            mean_xvar: xvar.mean(),
            mean_hvar: avar.mean() * k as f64,
            residual_metric: residual,
            min_variance,
            pilot_deviation,
        });
        // iteration 0 cannot move xhat when ahat starts at zero, so the
        // change metric is meaningful only from the second iteration on
        if iter > 0 && change < opts.tol {
            converged = true;
            break;
        }
    }

    if !converged && tail_count >= 5 {
        let w = Complex64::new(1.0 / tail_count as f64, 0.0);
        xhat = xhat_tail * w;
        ahat = ahat_tail * w;
        if let Some(pilots) = problem.pinned {
            xhat.view_mut((0, 0), (k, t1)).copy_from(pilots);
        }
    }

    GampRun {
        xhat,
        xvar,
        ahat,
        avar,
        per_iteration,
        converged,
        iterations_used,
    }
}

/// Hard decision: nearest constellation point of each soft output. For the
/// circular-Gaussian "constellation" the soft output is returned as-is.
pub fn hard_decide(
    soft: &DMatrix<Complex64>,
    constellation: Constellation,
    power: f64,
) -> DMatrix<Complex64> {
    match constellation {
        Constellation::Qpsk => {
            let amp = (power / 2.0).sqrt();
            soft.map(|s| Complex64::new(amp * s.re.signum(), amp * s.im.signum()))
        }
        Constellation::CircularGaussian => soft.clone(),
    }
}

fn data_prior(config: &SystemConfig) -> PriorSpec {
    match config.data_constellation {
        Constellation::Qpsk => PriorSpec::Qpsk {
            power: config.data_power,
        },
        Constellation::CircularGaussian => PriorSpec::CircularGaussian {
            power: config.data_power,
        },
    }
}

/// Damped BiG-AMP over the full block with pilot columns pinned, data columns
/// under their constellation prior and channel entries CN(0, sigma_h^2).
pub fn jcd_estimate(
    obs: &ObservationMatrix,
    x1: &DMatrix<Complex64>,
    config: &SystemConfig,
    opts: &GampOptions,
) -> Result<JcdResult, EstimatorError> {
    if obs.nrows != config.n || obs.ncols != config.t() {
        return Err(EstimatorError::DimensionMismatch(format!(
            "observations are {}x{}, config says {}x{}",
            obs.nrows,
            obs.ncols,
            config.n,
            config.t()
        )));
    }
    if x1.nrows() != config.k || x1.ncols() != config.t1 {
        return Err(EstimatorError::DimensionMismatch(format!(
            "pilots are {}x{}, config says {}x{}",
            x1.nrows(),
            x1.ncols(),
            config.k,
            config.t1
        )));
    }
    let problem = BilinearProblem {
        obs,
        quantizer: &config.quantizer,
        noise_var: config.noise_var,
        channel: ChannelFactor::Estimate {
            variance: config.channel_var / config.k as f64,
        },
        pinned: Some(x1),
        data_prior: data_prior(config),
        k: config.k,
    };
    let run = run_bigamp(&problem, opts);
    let sqrt_k = Complex64::new((config.k as f64).sqrt(), 0.0);
    let x2hat_soft = run.xhat.view((0, config.t1), (config.k, config.t2)).into();
    let x2hat_hard = hard_decide(&x2hat_soft, config.data_constellation, config.data_power);
    Ok(JcdResult {
        hhat: run.ahat * sqrt_k,
        x2hat_soft,
        x2hat_hard,
        per_iteration: run.per_iteration,
        converged: run.converged,
        iterations_used: run.iterations_used,
    })
}

/// Standard GAMP detection of the data block with the channel fixed; channel
/// variance messages are identically zero.
pub fn detect_known_channel(
    obs_data: &ObservationMatrix,
    h: &DMatrix<Complex64>,
    config: &SystemConfig,
    opts: &GampOptions,
) -> Result<DetectionResult, EstimatorError> {
    if h.nrows() != config.n || h.ncols() != config.k {
        return Err(EstimatorError::DimensionMismatch(format!(
            "channel is {}x{}, config says {}x{}",
            h.nrows(),
            h.ncols(),
            config.n,
            config.k
        )));
    }
    if obs_data.nrows != config.n {
        return Err(EstimatorError::DimensionMismatch(format!(
            "observations have {} rows, config says {}",
            obs_data.nrows, config.n
        )));
    }
    let a = h / Complex64::new((config.k as f64).sqrt(), 0.0);
    let problem = BilinearProblem {
        obs: obs_data,
        quantizer: &config.quantizer,
        noise_var: config.noise_var,
        channel: ChannelFactor::Known(a),
        pinned: None,
        data_prior: data_prior(config),
        k: config.k,
    };
    let run = run_bigamp(&problem, opts);
    let x2hat_hard = hard_decide(&run.xhat, config.data_constellation, config.data_power);
    Ok(DetectionResult {
        x2hat_soft: run.xhat,
        x2hat_hard,
        per_iteration: run.per_iteration,
        converged: run.converged,
        iterations_used: run.iterations_used,
    })
}

/// LS channel estimate from the pilot sub-block:
/// hhat = sqrt(K) R X1^H (X1 X1^H)^{-1}, R the quantized representatives.
pub fn ls_channel_estimate(
    y1_rep: &DMatrix<Complex64>,
    x1: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>, EstimatorError> {
    let k = x1.nrows();
    if y1_rep.ncols() != x1.ncols() {
        return Err(EstimatorError::DimensionMismatch(format!(
            "representatives have {} columns, pilots {}",
            y1_rep.ncols(),
            x1.ncols()
        )));
    }
    if x1.ncols() < k {
        return Err(EstimatorError::RankDeficientPilots);
    }
    let gram = x1 * x1.adjoint();
    let gram_inv = gram
        .lu()
        .try_inverse()
        .ok_or(EstimatorError::RankDeficientPilots)?;
    let sqrt_k = Complex64::new((k as f64).sqrt(), 0.0);
    Ok(y1_rep * x1.adjoint() * gram_inv * sqrt_k)
}

/// Pilot-only receiver: LS channel estimate on the pilot sub-block, then
/// known-channel GAMP on the data sub-block treating the estimate as exact.
pub fn pilot_only_pipeline(
    obs: &ObservationMatrix,
    y_rep: &DMatrix<Complex64>,
    x1: &DMatrix<Complex64>,
    config: &SystemConfig,
    opts: &GampOptions,
) -> Result<(DMatrix<Complex64>, DetectionResult), EstimatorError> {
    let t1 = config.t1;
    let y1_rep: DMatrix<Complex64> = y_rep.view((0, 0), (config.n, t1)).into();
    let hhat = ls_channel_estimate(&y1_rep, x1)?;
    let obs_data = obs.columns(t1, config.t());
    let detection = detect_known_channel(&obs_data, &hhat, config, opts)?;
    Ok((hhat, detection))
}
