//! The gradient-matching joint log-density over latent states and ODE
//! parameters, in the standardized per-state form.
//!
//! For state k with standardization (mu_k, s_k), fitted kernel blocks and
//! noise sd sigma_k, the contribution is
//!
//! ```text
//!   log N(xt_k / s_k | 0, C_k)                        GP prior on states
//! + log N(y_k / s_k  | x_k / s_k, sigma_k^2 I)        observation model
//! + log N(f_k(x, th) / s_k | D_k xt_k / s_k, A_k + gamma I)   gradient match
//! ```
//!
//! with `xt_k = x_k - mu_k 1`. The vector field is evaluated on the
//! unstandardized states; only its value is rescaled. No numerical
//! integration is involved anywhere in the evaluation.

use nalgebra::{DMatrix, DVector};

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::gp::GpStateFit;
use crate::linalg::{factor_spd, FactoredSpd};
use crate::systems::OdeSystem;

const LN_2PI: f64 = 1.8378770664093453;

pub type LogPriorFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Everything needed to evaluate the joint density: per-state GP fits, the
/// gradient-matching slack `gamma`, the system, and the observations.
///
/// The parameter prior is uniform over the system's bounds by default
/// (contributing zero inside the bounds and negative infinity outside); an
/// extra log-prior term can be layered on top with [`with_log_prior`].
///
/// [`with_log_prior`]: DensityContext::with_log_prior
pub struct DensityContext {
    fits: Vec<GpStateFit>,
    gamma: f64,
    system: OdeSystem,
    observations: TimeSeries,
    log_prior: Option<Box<LogPriorFn>>,
    // Cached per state: y_k / s_k and the factored (A_k + gamma I).
    obs_scaled: Vec<DVector<f64>>,
    ag_factors: Vec<FactoredSpd>,
    n: usize,
}

impl DensityContext {
    pub fn new(
        fits: Vec<GpStateFit>,
        gamma: f64,
        system: OdeSystem,
        observations: TimeSeries,
    ) -> Result<Self> {
        observations.validate()?;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        if fits.len() != system.dim() {
            return Err(Error::InvalidInput(format!(
                "{} GP fits for a {}-dimensional system",
                fits.len(),
                system.dim()
            )));
        }
        if observations.n_states() != system.dim() {
            return Err(Error::InvalidInput(format!(
                "{} observed states for a {}-dimensional system",
                observations.n_states(),
                system.dim()
            )));
        }
        let n = observations.len();
        let mut obs_scaled = Vec::with_capacity(fits.len());
        let mut ag_factors = Vec::with_capacity(fits.len());
        for (k, fit) in fits.iter().enumerate() {
            if fit.n_obs() != n {
                return Err(Error::InvalidInput(format!(
                    "GP fit for state {k} covers {} points but there are {n} observations",
                    fit.n_obs()
                )));
            }
            let s = fit.standardization.scale;
            obs_scaled.push(DVector::from_iterator(
                n,
                observations.observations[k].iter().map(|y| y / s),
            ));
            let mut ag = fit.a.clone();
            for i in 0..n {
                ag[(i, i)] += gamma;
            }
            // gamma already sits on the diagonal; factor exactly when possible.
            ag_factors.push(factor_spd(&ag, 0.0)?);
        }
        Ok(DensityContext {
            fits,
            gamma,
            system,
            observations,
            log_prior: None,
            obs_scaled,
            ag_factors,
            n,
        })
    }

    /// Add a log-prior over theta applied on top of the bounds check.
    pub fn with_log_prior(
        mut self,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.log_prior = Some(Box::new(f));
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn system(&self) -> &OdeSystem {
        &self.system
    }

    pub fn observations(&self) -> &TimeSeries {
        &self.observations
    }

    pub fn fits(&self) -> &[GpStateFit] {
        &self.fits
    }

    pub fn n_times(&self) -> usize {
        self.n
    }

    /// Log prior over theta: 0 inside the bounds (plus any extra prior),
    /// negative infinity outside.
    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        if !self.system.theta_in_bounds(theta) {
            return f64::NEG_INFINITY;
        }
        match &self.log_prior {
            Some(f) => f(theta),
            None => 0.0,
        }
    }

    /// Evaluate the vector field column-by-column over the state matrix.
    /// Returns None if the field errors or produces a non-finite value,
    /// which callers turn into a rejected (-inf) density.
    fn field_matrix(&self, x: &DMatrix<f64>, theta: &[f64]) -> Option<DMatrix<f64>> {
        let dim = self.system.dim();
        let mut field = DMatrix::zeros(dim, self.n);
        let mut col = vec![0.0; dim];
        let mut out = vec![0.0; dim];
        for j in 0..self.n {
            for k in 0..dim {
                col[k] = x[(k, j)];
            }
            if self.system.eval_into(&col, theta, &mut out).is_err() {
                return None;
            }
            for k in 0..dim {
                if !out[k].is_finite() {
                    return None;
                }
                field[(k, j)] = out[k];
            }
        }
        Some(field)
    }

    /// Log-density contribution of state k given the full latent state
    /// matrix (the field couples states, so all of x is needed).
    pub fn state_log_density(&self, x: &DMatrix<f64>, k: usize, theta: &[f64]) -> f64 {
        match self.field_matrix(x, theta) {
            Some(field) => self.state_terms(x, k, &field),
            None => f64::NEG_INFINITY,
        }
    }

    /// Joint log-density over all states plus the parameter prior.
    pub fn joint_log_density(&self, x: &DMatrix<f64>, theta: &[f64]) -> f64 {
        let prior = self.log_prior(theta);
        if prior == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let field = match self.field_matrix(x, theta) {
            Some(f) => f,
            None => return f64::NEG_INFINITY,
        };
        let mut total = prior;
        for k in 0..self.fits.len() {
            total += self.state_terms(x, k, &field);
            if total == f64::NEG_INFINITY {
                return total;
            }
        }
        total
    }

    fn state_terms(&self, x: &DMatrix<f64>, k: usize, field: &DMatrix<f64>) -> f64 {
        let fit = &self.fits[k];
        let n = self.n;
        let nf = n as f64;
        let mu = fit.standardization.mean;
        let s = fit.standardization.scale;
        let sigma = fit.noise_sd;

        // Standardized latent states for state k.
        let z = DVector::from_iterator(n, (0..n).map(|j| (x[(k, j)] - mu) / s));

        // GP prior: N(z | 0, C).
        let solved = fit.c_factor.chol.solve(&z);
        let term_prior =
            -0.5 * z.dot(&solved) - 0.5 * fit.c_factor.log_det - 0.5 * nf * LN_2PI;

        // Observation model: N(y/s | x/s, sigma^2 I), diagonal.
        let mut sq = 0.0;
        for j in 0..n {
            let r = self.obs_scaled[k][j] - x[(k, j)] / s;
            sq += r * r;
        }
        let term_obs = -0.5 * sq / (sigma * sigma) - nf * sigma.ln() - 0.5 * nf * LN_2PI;

        // Gradient match: N(f_k/s | D z, A + gamma I).
        let mean = &fit.d * &z;
        let resid = DVector::from_iterator(n, (0..n).map(|j| field[(k, j)] / s - mean[j]));
        let ag = &self.ag_factors[k];
        let solved = ag.chol.solve(&resid);
        let term_grad = -0.5 * resid.dot(&solved) - 0.5 * ag.log_det - 0.5 * nf * LN_2PI;

        term_prior + term_obs + term_grad
    }
}
