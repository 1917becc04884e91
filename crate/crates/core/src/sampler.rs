//! One-chain componentwise Gaussian random-walk Metropolis-Hastings over all
//! latent state values and ODE parameters.
//!
//! A sweep visits every state component in (state, time) order and then
//! every parameter once; the post-sweep state is recorded. The first
//! `n_burnin` sweeps are discarded and the posterior summaries are means
//! over the remaining `n_mcmc` sweeps.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::DensityContext;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_mcmc: usize,
    pub n_burnin: usize,
    /// Proposal sd for state components, in standardized state units.
    pub state_proposal_sd: f64,
    /// Proposal sd for parameters, in natural parameter units.
    pub param_proposal_sd: f64,
    pub rng_seed: u64,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
}

fn default_thinning() -> usize {
    1
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_mcmc < 1 || self.n_burnin < 1 || self.thinning < 1 {
            return Err(Error::InvalidInput(
                "n_mcmc, n_burnin and thinning must all be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("state_proposal_sd", self.state_proposal_sd),
            ("param_proposal_sd", self.param_proposal_sd),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Current latent states (K x N) and parameters of the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub x: DMatrix<f64>,
    pub theta: Vec<f64>,
}

/// One scalar degree of freedom of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    State { state: usize, time: usize },
    Param { index: usize },
}

/// An unnormalized log-density the sampler can walk over. The gradient-
/// matching [`DensityContext`] is the production target; tests substitute
/// simple analytic targets.
pub trait TargetDensity {
    /// (K, N) shape of the latent state block; either may be zero.
    fn state_dims(&self) -> (usize, usize);
    fn param_count(&self) -> usize;
    fn log_density(&self, state: &ChainState) -> f64;
    /// Natural-unit scale of state k; state proposals are
    /// `state_proposal_sd * scale` so one sd is meaningful across states.
    fn state_proposal_scale(&self, _state: usize) -> f64 {
        1.0
    }
}

impl TargetDensity for DensityContext {
    fn state_dims(&self) -> (usize, usize) {
        (self.system().dim(), self.n_times())
    }

    fn param_count(&self) -> usize {
        self.system().param_count()
    }

    fn log_density(&self, state: &ChainState) -> f64 {
        self.joint_log_density(&state.x, &state.theta)
    }

    fn state_proposal_scale(&self, state: usize) -> f64 {
        self.fits()[state].standardization.scale
    }
}

/// Acceptance bookkeeping over the whole run (burn-in included); every
/// component is proposed exactly once per sweep.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct AcceptanceStats {
    /// Accept counts for state components in (state, time) order, length K*N.
    pub state_accepted: Vec<u64>,
    /// Accept counts per parameter, length P.
    pub param_accepted: Vec<u64>,
    pub proposals_per_component: u64,
}

impl AcceptanceStats {
    pub fn aggregate_rate(&self) -> f64 {
        let comps = (self.state_accepted.len() + self.param_accepted.len()) as u64;
        let total = comps * self.proposals_per_component;
        if total == 0 {
            return 0.0;
        }
        let accepted: u64 = self.state_accepted.iter().sum::<u64>()
            + self.param_accepted.iter().sum::<u64>();
        accepted as f64 / total as f64
    }

    pub fn state_rates(&self) -> Vec<f64> {
        self.rates(&self.state_accepted)
    }

    pub fn param_rates(&self) -> Vec<f64> {
        self.rates(&self.param_accepted)
    }

    fn rates(&self, counts: &[u64]) -> Vec<f64> {
        counts
            .iter()
            .map(|&c| {
                if self.proposals_per_component == 0 {
                    0.0
                } else {
                    c as f64 / self.proposals_per_component as f64
                }
            })
            .collect()
    }
}

/// Posterior summaries and retained (thinned) samples from one chain.
#[derive(Clone, Debug)]
pub struct ChainResult {
    pub posterior_mean_x: DMatrix<f64>,
    pub posterior_mean_theta: Vec<f64>,
    /// Thinned post-burn-in theta samples; `floor(n_mcmc / thinning)` rows.
    pub theta_samples: Vec<Vec<f64>>,
    /// Joint log-density at each retained sample.
    pub log_density_samples: Vec<f64>,
    pub acceptance: AcceptanceStats,
    /// Set when the chain never accepted a proposal.
    pub warning: Option<String>,
}

/// Propose a Gaussian increment on one component and accept with probability
/// `min(1, exp(delta log-density))`; the proposal is symmetric so no
/// correction term appears. Returns whether the proposal was accepted, and
/// maintains `log_density` as the density of the (possibly updated) state.
pub fn mh_component_step<T: TargetDensity, R: Rng>(
    target: &T,
    state: &mut ChainState,
    log_density: &mut f64,
    component: Component,
    cfg: &McmcConfig,
    rng: &mut R,
) -> bool {
    let eps: f64 = rng.sample(StandardNormal);
    let old_value = match component {
        Component::State { state: k, time: i } => {
            let old = state.x[(k, i)];
            state.x[(k, i)] = old + cfg.state_proposal_sd * target.state_proposal_scale(k) * eps;
            old
        }
        Component::Param { index } => {
            let old = state.theta[index];
            state.theta[index] = old + cfg.param_proposal_sd * eps;
            old
        }
    };

    let proposed = target.log_density(state);
    let delta = proposed - *log_density;
    // NaN deltas compare false on both branches and are rejected.
    let accept = delta >= 0.0 || rng.random::<f64>() < delta.exp();
    if accept {
        *log_density = proposed;
    } else {
        match component {
            Component::State { state: k, time: i } => state.x[(k, i)] = old_value,
            Component::Param { index } => state.theta[index] = old_value,
        }
    }
    accept
}

/// Run `n_burnin + n_mcmc` full sweeps from `initial` and summarize the
/// post-burn-in sweeps.
pub fn run_chain<T: TargetDensity>(
    initial: ChainState,
    target: &T,
    cfg: &McmcConfig,
) -> Result<ChainResult> {
    cfg.validate()?;
    let (dim_k, dim_n) = target.state_dims();
    let n_params = target.param_count();
    if initial.x.nrows() != dim_k || initial.x.ncols() != dim_n {
        return Err(Error::InvalidInput(format!(
            "initial states are {}x{}, target expects {}x{}",
            initial.x.nrows(),
            initial.x.ncols(),
            dim_k,
            dim_n
        )));
    }
    if initial.theta.len() != n_params {
        return Err(Error::InvalidInput(format!(
            "initial theta has {} entries, target expects {}",
            initial.theta.len(),
            n_params
        )));
    }

    let mut state = initial;
    let mut log_density = target.log_density(&state);
    if !log_density.is_finite() {
        return Err(Error::InvalidInput(
            "initial chain state has zero density (out-of-bounds theta or invalid field)".into(),
        ));
    }

    let mut components = Vec::with_capacity(dim_k * dim_n + n_params);
    for k in 0..dim_k {
        for i in 0..dim_n {
            components.push(Component::State { state: k, time: i });
        }
    }
    for j in 0..n_params {
        components.push(Component::Param { index: j });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.rng_seed);
    let total_sweeps = cfg.n_burnin + cfg.n_mcmc;

    let mut accepted = vec![0u64; components.len()];
    let mut mean_x = DMatrix::zeros(dim_k, dim_n);
    let mut mean_theta = vec![0.0; n_params];
    let n_thinned = cfg.n_mcmc / cfg.thinning;
    let mut theta_samples = Vec::with_capacity(n_thinned);
    let mut log_density_samples = Vec::with_capacity(n_thinned);

    for sweep in 0..total_sweeps {
        for (c_idx, &component) in components.iter().enumerate() {
            if mh_component_step(target, &mut state, &mut log_density, component, cfg, &mut rng) {
                accepted[c_idx] += 1;
            }
        }
        if sweep >= cfg.n_burnin {
            let retained_idx = sweep - cfg.n_burnin;
            mean_x += &state.x;
            for (m, t) in mean_theta.iter_mut().zip(&state.theta) {
                *m += t;
            }
            if (retained_idx + 1).is_multiple_of(cfg.thinning) {
                theta_samples.push(state.theta.clone());
                log_density_samples.push(log_density);
            }
        }
    }

    mean_x /= cfg.n_mcmc as f64;
    for m in &mut mean_theta {
        *m /= cfg.n_mcmc as f64;
    }

    let acceptance = AcceptanceStats {
        state_accepted: accepted[..dim_k * dim_n].to_vec(),
        param_accepted: accepted[dim_k * dim_n..].to_vec(),
        proposals_per_component: total_sweeps as u64,
    };
    let warning = if !components.is_empty() && accepted.iter().all(|&a| a == 0) {
        Some("chain never accepted a proposal; summaries are degenerate".into())
    } else {
        None
    };

    Ok(ChainResult {
        posterior_mean_x: mean_x,
        posterior_mean_theta: mean_theta,
        theta_samples,
        log_density_samples,
        acceptance,
        warning,
    })
}

/// Per-component acceptance report with components outside [0.1, 0.5]
/// flagged for proposal-sd retuning.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub aggregate_rate: f64,
    pub state_rates: Vec<f64>,
    pub param_rates: Vec<f64>,
    pub flagged: Vec<String>,
}

pub fn tune_diagnostics(result: &ChainResult) -> DiagnosticsReport {
    let state_rates = result.acceptance.state_rates();
    let param_rates = result.acceptance.param_rates();
    let mut flagged = Vec::new();
    for (i, &r) in state_rates.iter().enumerate() {
        if !(0.1..=0.5).contains(&r) {
            flagged.push(format!("state[{i}]: {r:.3}"));
        }
    }
    for (j, &r) in param_rates.iter().enumerate() {
        if !(0.1..=0.5).contains(&r) {
            flagged.push(format!("param[{j}]: {r:.3}"));
        }
    }
    DiagnosticsReport {
        aggregate_rate: result.acceptance.aggregate_rate(),
        state_rates,
        param_rates,
        flagged,
    }
}
