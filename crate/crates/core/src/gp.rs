//! Per-state GP model: data standardization, marginal-likelihood
//! hyperparameter fitting, and the conditional-derivative matrices.
//!
//! Given kernel blocks C, 'C, C', C'' on the observation grid, the
//! derivative of the GP conditioned on the states is Gaussian with mean
//! `D x` and covariance `A` where
//!
//! ```text
//! D = 'C C^-1
//! A = C'' - 'C C^-1 C'
//! ```

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::kernels::{build_cov_blocks, kernel_matrix, CovBlocks, KernelFamily, KernelParams};
use crate::linalg::{factor_spd, FactoredSpd, BASE_JITTER_REL};
use crate::nelder_mead;
use crate::stats;

/// Relative diagonal regularization of the state-prior covariance used for
/// sampling. A smooth kernel on a dense grid makes the bare C numerically
/// singular, asserting per-site precision that reflects kernel smoothness
/// rather than information; without this floor, single-site Metropolis
/// moves stall near zero acceptance at any practical proposal scale.
pub const STATE_PRIOR_REG_REL: f64 = 1e-4;

/// Per-state affine transform taking observations to zero mean, unit scale.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardization {
    pub mean: f64,
    /// Population standard deviation of the observations; strictly positive.
    pub scale: f64,
}

impl Standardization {
    pub fn identity() -> Self {
        Standardization { mean: 0.0, scale: 1.0 }
    }
}

/// Standardize a state vector to zero mean and unit population standard
/// deviation.
pub fn standardize(y: &[f64]) -> Result<(Vec<f64>, Standardization)> {
    if y.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 observations to standardize, got {}",
            y.len()
        )));
    }
    let mean = stats::mean(y);
    let scale = stats::population_std(y);
    if !mean.is_finite() || !scale.is_finite() {
        return Err(Error::InvalidInput("non-finite observations".into()));
    }
    if scale <= 0.0 {
        return Err(Error::DegenerateData(
            "constant observations have zero scale".into(),
        ));
    }
    let y_tilde = y.iter().map(|v| (v - mean) / scale).collect();
    Ok((y_tilde, Standardization { mean, scale }))
}

/// Log marginal likelihood of standardized observations under a zero-mean GP
/// with kernel `kernel` and observation noise `noise_sd`:
/// `-1/2 y^T (C + s^2 I)^-1 y - 1/2 log|C + s^2 I| - n/2 log 2pi`.
pub fn log_marginal_likelihood(
    y_tilde: &[f64],
    times: &[f64],
    kernel: &KernelParams,
    noise_sd: f64,
) -> Result<f64> {
    let factored = noisy_factor(times, kernel, noise_sd, y_tilde.len())?;
    let y = DVector::from_column_slice(y_tilde);
    Ok(crate::linalg::mvn_logpdf_centered(&factored, &y))
}

/// Sum of `log_marginal_likelihood` over several series sharing one time
/// grid and one set of hyperparameters; the covariance is factored once.
pub fn log_marginal_likelihood_pooled(
    series: &[Vec<f64>],
    times: &[f64],
    kernel: &KernelParams,
    noise_sd: f64,
) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::InvalidInput("no series given".into()));
    }
    let factored = noisy_factor(times, kernel, noise_sd, series[0].len())?;
    let mut total = 0.0;
    for s in series {
        if s.len() != times.len() {
            return Err(Error::InvalidInput(format!(
                "series length {} does not match {} times",
                s.len(),
                times.len()
            )));
        }
        let y = DVector::from_column_slice(s);
        total += crate::linalg::mvn_logpdf_centered(&factored, &y);
    }
    Ok(total)
}

fn noisy_factor(
    times: &[f64],
    kernel: &KernelParams,
    noise_sd: f64,
    n_obs: usize,
) -> Result<FactoredSpd> {
    if n_obs != times.len() {
        return Err(Error::InvalidInput(format!(
            "{} observations but {} times",
            n_obs,
            times.len()
        )));
    }
    if !noise_sd.is_finite() || noise_sd <= 0.0 {
        return Err(Error::InvalidInput(format!("noise sd must be positive, got {noise_sd}")));
    }
    let mut m = kernel_matrix(kernel, times)?;
    let s2 = noise_sd * noise_sd;
    for i in 0..m.nrows() {
        m[(i, i)] += s2;
    }
    // The noise term already regularizes the diagonal, so try an exact
    // factorization first and only escalate jitter on failure.
    factor_spd(&m, 0.0)
}

/// Controls for the multi-start maximum-likelihood fit.
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub restarts: usize,
    /// Seed for the start-point schedule; the fit is deterministic given it.
    pub seed: u64,
    pub max_evals: usize,
    /// Simplex-diameter convergence threshold in log-hyperparameter space.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { restarts: 10, seed: 0, max_evals: 2000, tol: 1e-6 }
    }
}

/// Maximize the marginal likelihood over kernel hyperparameters and noise sd
/// for a single standardized series.
pub fn fit_hyperparameters(
    y_tilde: &[f64],
    times: &[f64],
    family: KernelFamily,
    opts: &FitOptions,
) -> Result<(KernelParams, f64)> {
    let series = [y_tilde.to_vec()];
    fit_hyperparameters_pooled(&series, times, family, opts)
}

/// Maximize the pooled marginal likelihood over several standardized series
/// that share one GP (same kernel and noise for every series).
///
/// Derivative-free Nelder-Mead search in log-hyperparameter space from
/// `opts.restarts` log-uniform random start points; returns the best point
/// seen, which is never worse than any start point.
pub fn fit_hyperparameters_pooled(
    series: &[Vec<f64>],
    times: &[f64],
    family: KernelFamily,
    opts: &FitOptions,
) -> Result<(KernelParams, f64)> {
    if times.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 observation times to fit hyperparameters, got {}",
            times.len()
        )));
    }
    if series.is_empty() {
        return Err(Error::InvalidInput("no series given".into()));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(Error::InvalidInput("times must span a positive interval".into()));
    }

    let ranges = start_ranges(family, span);
    let dim = ranges.len();
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);

    let mut objective = |z: &[f64]| -> f64 {
        if z.iter().any(|v| !v.is_finite() || v.abs() > 25.0) {
            return f64::INFINITY;
        }
        let (kernel, noise_sd) = decode(family, z);
        match log_marginal_likelihood_pooled(series, times, &kernel, noise_sd) {
            Ok(l) if l.is_finite() => -l,
            _ => f64::INFINITY,
        }
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..opts.restarts {
        let z0: Vec<f64> = ranges
            .iter()
            .map(|&(lo, hi)| {
                let u: f64 = rng.random();
                lo.ln() + u * (hi.ln() - lo.ln())
            })
            .collect();
        let out = nelder_mead::minimize(&mut objective, &z0, 0.3, opts.tol, opts.max_evals);
        if out.fx.is_finite() && best.as_ref().is_none_or(|(_, f)| out.fx < *f) {
            best = Some((out.x, out.fx));
        }
    }

    let (z, neg_ll) = best.ok_or_else(|| {
        Error::FitFailure(format!(
            "no start point produced a finite marginal likelihood over {} restarts",
            opts.restarts
        ))
    })?;
    debug_assert_eq!(z.len(), dim);
    debug_assert!(neg_ll.is_finite());
    let (kernel, noise_sd) = decode(family, &z);
    Ok((kernel, noise_sd))
}

/// Log-uniform sampling ranges for the start points, in natural units.
/// The trailing entry is always the noise sd.
fn start_ranges(family: KernelFamily, span: f64) -> Vec<(f64, f64)> {
    match family {
        KernelFamily::Rbf | KernelFamily::Matern52 => vec![
            (0.1, 10.0),                  // signal variance
            (0.05 * span, 2.0 * span),    // lengthscale
            (0.01, 1.0),                  // noise sd (standardized units)
        ],
        KernelFamily::Sigmoid => vec![
            (0.1, 10.0),                  // signal variance
            (0.1, 10.0),                  // offset
            (0.1 / span, 10.0 / span),    // slope
            (0.01, 1.0),                  // noise sd
        ],
    }
}

fn decode(family: KernelFamily, z: &[f64]) -> (KernelParams, f64) {
    match family {
        KernelFamily::Rbf => (
            KernelParams::Rbf { signal_variance: z[0].exp(), lengthscale: z[1].exp() },
            z[2].exp(),
        ),
        KernelFamily::Matern52 => (
            KernelParams::Matern52 { signal_variance: z[0].exp(), lengthscale: z[1].exp() },
            z[2].exp(),
        ),
        KernelFamily::Sigmoid => (
            KernelParams::Sigmoid {
                signal_variance: z[0].exp(),
                offset: z[1].exp(),
                slope: z[2].exp(),
            },
            z[3].exp(),
        ),
    }
}

/// Conditional-derivative matrices from the covariance blocks, computed via
/// factorization solves. `A` is symmetrized after assembly.
pub fn derivative_matrices(blocks: &CovBlocks) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let factored = factor_spd(&blocks.c, BASE_JITTER_REL)?;
    // D = 'C C^-1  <=>  D^T = C^-1 'C^T = C^-1 C'.
    let d = factored.chol.solve(&blocks.cd).transpose();
    let mut a = &blocks.ddc - &d * &blocks.cd;
    let at = a.transpose();
    a = (a + at) / 2.0;
    Ok((d, a))
}

/// A fitted per-state GP: standardization constants, hyperparameters, fitted
/// noise, the covariance blocks on the observation grid and the
/// conditional-derivative matrices, plus the cached factorization of the
/// regularized C (see [`STATE_PRIOR_REG_REL`]) used as the sampling prior.
pub struct GpStateFit {
    pub standardization: Standardization,
    pub kernel: KernelParams,
    /// Observation-noise sd in standardized units.
    pub noise_sd: f64,
    pub blocks: CovBlocks,
    pub d: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub(crate) c_factor: FactoredSpd,
}

impl GpStateFit {
    /// Assemble a fit from already-determined hyperparameters.
    pub fn new(
        standardization: Standardization,
        kernel: KernelParams,
        noise_sd: f64,
        times: &[f64],
    ) -> Result<Self> {
        if !(standardization.scale > 0.0) || !standardization.scale.is_finite() {
            return Err(Error::InvalidInput(format!(
                "standardization scale must be positive, got {}",
                standardization.scale
            )));
        }
        if !noise_sd.is_finite() || noise_sd <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise sd must be positive, got {noise_sd}"
            )));
        }
        let blocks = build_cov_blocks(&kernel, times)?;
        let (d, a) = derivative_matrices(&blocks)?;
        let c_factor = factor_spd(&blocks.c, STATE_PRIOR_REG_REL)?;
        Ok(GpStateFit { standardization, kernel, noise_sd, blocks, d, a, c_factor })
    }

    /// Standardize, fit hyperparameters by maximum likelihood and assemble
    /// the derivative model in one step.
    pub fn fit(
        y: &[f64],
        times: &[f64],
        family: KernelFamily,
        opts: &FitOptions,
    ) -> Result<Self> {
        let (y_tilde, st) = standardize(y)?;
        let (kernel, noise_sd) = fit_hyperparameters(&y_tilde, times, family, opts)?;
        GpStateFit::new(st, kernel, noise_sd, times)
    }

    pub fn n_obs(&self) -> usize {
        self.blocks.c.nrows()
    }
}
