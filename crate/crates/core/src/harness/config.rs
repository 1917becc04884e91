//! Declarative experiment configuration (one JSON document).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::systems::OdeSystem;

/// Observation-time specification: an explicit list, or an evenly spaced
/// grid given by a count and an interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservationSpec {
    Times { times: Vec<f64> },
    Even { count: usize, t_min: f64, t_max: f64 },
}

/// Observation-noise specification; SNR resolves per state to
/// `std(noiseless signal) / snr`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Sd { sd: f64 },
    PerState { sd_per_state: Vec<f64> },
    Snr { snr: f64 },
}

/// Sampler settings; the per-realization RNG seed is derived from the
/// experiment seed, not stored here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub n_mcmc: usize,
    pub n_burnin: usize,
    pub state_proposal_sd: f64,
    pub param_proposal_sd: f64,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
}

fn default_thinning() -> usize {
    1
}

fn default_realizations() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name of a registered system: "lotka_volterra",
    /// "protein_transduction" or "fitzhugh_nagumo".
    pub system: String,
    /// Ground-truth parameters used for data generation.
    pub theta_true: Vec<f64>,
    /// True initial state at the first observation time.
    pub x0: Vec<f64>,
    pub observations: ObservationSpec,
    pub noise: NoiseSpec,
    pub kernel_family: KernelFamily,
    /// Fit one GP (kernel and noise) to all standardized states jointly.
    #[serde(default)]
    pub shared_gp: bool,
    /// Gradient-matching slack; required by `infer` and `benchmark`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Candidate gammas for `select-gamma`; defaults to eight values
    /// log-spaced between 1e-4 and 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<Vec<f64>>,
    pub mcmc: McmcSettings,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    pub seed: u64,
    /// Default output path; the CLI `--out` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Internal RK4 step; defaults to span/2000.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator_step: Option<f64>,
    /// Initial chain parameters; defaults to the bound midpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_init: Option<Vec<f64>>,
    /// Evaluate inferred parameters from the estimated initial state rather
    /// than the true one.
    #[serde(default)]
    pub evaluate_from_estimated_x0: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&text)
    }

    pub fn system(&self) -> Result<OdeSystem> {
        OdeSystem::by_name(&self.system)
    }

    pub fn observation_times(&self) -> Vec<f64> {
        match &self.observations {
            ObservationSpec::Times { times } => times.clone(),
            ObservationSpec::Even { count, t_min, t_max } => (0..*count)
                .map(|i| t_min + (t_max - t_min) * i as f64 / (*count as f64 - 1.0))
                .collect(),
        }
    }

    pub fn integrator_step_or_default(&self) -> f64 {
        match self.integrator_step {
            Some(h) => h,
            None => {
                let times = self.observation_times();
                (times[times.len() - 1] - times[0]) / 2000.0
            }
        }
    }

    pub fn required_gamma(&self) -> Result<f64> {
        self.gamma
            .ok_or_else(|| Error::Config("this command requires a 'gamma' value".into()))
    }

    /// The gamma candidates for selection: the configured grid, or eight
    /// values log-spaced between 1e-4 and 1.
    pub fn gamma_candidates(&self) -> Vec<f64> {
        match &self.gamma_grid {
            Some(grid) => {
                let mut g = grid.clone();
                g.sort_by(|a, b| a.partial_cmp(b).expect("non-finite gamma"));
                g
            }
            None => default_gamma_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let system = self.system()?;
        if self.theta_true.len() != system.param_count() {
            return Err(Error::Config(format!(
                "theta_true has {} entries, system '{}' has {} parameters",
                self.theta_true.len(),
                self.system,
                system.param_count()
            )));
        }
        if self.theta_true.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("theta_true must be finite".into()));
        }
        if self.x0.len() != system.dim() {
            return Err(Error::Config(format!(
                "x0 has {} entries, system '{}' has dimension {}",
                self.x0.len(),
                self.system,
                system.dim()
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("x0 must be finite".into()));
        }

        let times = self.observation_times();
        if times.len() < 2 {
            return Err(Error::Config("need at least 2 observation times".into()));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::Config(
                    "observation times must be finite and strictly increasing".into(),
                ));
            }
        }

        match &self.noise {
            NoiseSpec::Sd { sd } => {
                if !sd.is_finite() || *sd < 0.0 {
                    return Err(Error::Config(format!("noise sd must be >= 0, got {sd}")));
                }
            }
            NoiseSpec::PerState { sd_per_state } => {
                if sd_per_state.len() != system.dim() {
                    return Err(Error::Config(format!(
                        "sd_per_state has {} entries for dimension {}",
                        sd_per_state.len(),
                        system.dim()
                    )));
                }
                if sd_per_state.iter().any(|s| !s.is_finite() || *s < 0.0) {
                    return Err(Error::Config("per-state noise sds must be >= 0".into()));
                }
            }
            NoiseSpec::Snr { snr } => {
                if !snr.is_finite() || *snr <= 0.0 {
                    return Err(Error::Config(format!("snr must be > 0, got {snr}")));
                }
            }
        }

        if let Some(g) = self.gamma {
            if !g.is_finite() || g <= 0.0 {
                return Err(Error::Config(format!("gamma must be > 0, got {g}")));
            }
        }
        if let Some(grid) = &self.gamma_grid {
            if grid.is_empty() {
                return Err(Error::Config("gamma_grid must be nonempty".into()));
            }
            if grid.iter().any(|g| !g.is_finite() || *g <= 0.0) {
                return Err(Error::Config("gamma_grid entries must be > 0".into()));
            }
        }

        if self.mcmc.n_mcmc < 1 || self.mcmc.n_burnin < 1 || self.mcmc.thinning < 1 {
            return Err(Error::Config(
                "mcmc counts (n_mcmc, n_burnin, thinning) must be at least 1".into(),
            ));
        }
        if !(self.mcmc.state_proposal_sd > 0.0) || !(self.mcmc.param_proposal_sd > 0.0) {
            return Err(Error::Config("mcmc proposal sds must be > 0".into()));
        }
        if self.realizations < 1 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if let Some(init) = &self.theta_init {
            if init.len() != system.param_count() {
                return Err(Error::Config(format!(
                    "theta_init has {} entries for {} parameters",
                    init.len(),
                    system.param_count()
                )));
            }
            if !system.theta_in_bounds(init) {
                return Err(Error::Config("theta_init is outside the parameter bounds".into()));
            }
        }
        if let Some(h) = self.integrator_step {
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::Config(format!("integrator_step must be > 0, got {h}")));
            }
        }
        Ok(())
    }
}

/// Eight gamma values logarithmically spaced between 1e-4 and 1.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..8).map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 7.0)).collect()
}
