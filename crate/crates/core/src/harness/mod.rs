//! Experiment orchestration: synthetic data generation, the two-step
//! fit-then-sample pipeline, gamma selection, multi-realization benchmarks
//! and result persistence.
//!
//! Every run is keyed by (config seed, realization index); noise draws,
//! hyperparameter restarts and the chain each get an independently derived
//! seed, so realizations can execute concurrently without affecting results.

mod config;
mod record;

pub use config::{default_gamma_grid, ExperimentConfig, McmcSettings, NoiseSpec, ObservationSpec};
pub use record::{
    aggregate_outcomes, choose_gamma, write_json, write_outputs, AcceptanceSummary,
    AggregateStats, EvalRecord, FittedGp, GammaScore, GammaSelection, RealizationOutcome,
    RealizationRecord, ResultRecord,
};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::TimeSeries;
use crate::density::DensityContext;
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparameters_pooled, standardize, FitOptions, GpStateFit, Standardization};
use crate::integrator::{integrate, trajectory_rmse, Trajectory};
use crate::sampler::{run_chain, ChainState, McmcConfig};
use crate::stats;

// Seed-derivation purposes; each (seed, purpose, realization) triple yields
// an independent, platform-stable stream.
const PURPOSE_NOISE: u64 = 1;
const PURPOSE_CHAIN: u64 = 2;
const PURPOSE_FIT: u64 = 3;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, purpose: u64, realization: u64, extra: u64) -> u64 {
    let mut s = seed;
    let mut s = splitmix64(&mut s) ^ purpose;
    let mut s = splitmix64(&mut s) ^ realization;
    let mut s = splitmix64(&mut s) ^ extra;
    splitmix64(&mut s)
}

/// Integrate the ground truth and add i.i.d. Gaussian observation noise
/// using a seed derived from (config seed, realization index). Returns the
/// noisy observations together with the noiseless truth.
pub fn generate_data(
    config: &ExperimentConfig,
    realization: usize,
) -> Result<(TimeSeries, Trajectory)> {
    config.validate()?;
    let system = config.system()?;
    let times = config.observation_times();
    let truth = integrate(
        &system,
        &config.theta_true,
        &config.x0,
        &times,
        config.integrator_step_or_default(),
    )?;

    let sds = resolve_noise_sds(config, &truth);
    let mut rng =
        ChaCha20Rng::seed_from_u64(derive_seed(config.seed, PURPOSE_NOISE, realization as u64, 0));
    let mut observations = Vec::with_capacity(truth.n_states());
    for (k, series) in truth.states.iter().enumerate() {
        let noisy = series
            .iter()
            .map(|v| {
                let eps: f64 = rng.sample(StandardNormal);
                v + sds[k] * eps
            })
            .collect();
        observations.push(noisy);
    }
    Ok((TimeSeries::new(times, observations)?, truth))
}

fn resolve_noise_sds(config: &ExperimentConfig, truth: &Trajectory) -> Vec<f64> {
    match &config.noise {
        NoiseSpec::Sd { sd } => vec![*sd; truth.n_states()],
        NoiseSpec::PerState { sd_per_state } => sd_per_state.clone(),
        NoiseSpec::Snr { snr } => truth
            .states
            .iter()
            .map(|s| stats::population_std(s) / snr)
            .collect(),
    }
}

/// Run the full pipeline for one realization: standardize each state, fit
/// the GP hyperparameters by maximum likelihood, build the derivative
/// matrices, sample states and parameters, then integrate the posterior-mean
/// parameters and score the trajectory against the ground truth.
///
/// Integration happens exactly twice (data generation and evaluation),
/// never inside the sampling loop.
pub fn run_realization(config: &ExperimentConfig, realization: usize) -> Result<RealizationRecord> {
    let gamma = config.required_gamma()?;
    run_realization_with_gamma(config, realization, gamma).map(|(record, _)| record)
}

fn run_realization_with_gamma(
    config: &ExperimentConfig,
    realization: usize,
    gamma: f64,
) -> Result<(RealizationRecord, TimeSeries)> {
    let start = std::time::Instant::now();
    let system = config.system()?;
    let (observations, truth) = generate_data(config, realization)?;
    let times = observations.times.clone();

    // Step 1: standardize and fit the GP model to the data.
    let mut standardized: Vec<(Vec<f64>, Standardization)> = Vec::new();
    for series in &observations.observations {
        standardized.push(standardize(series)?);
    }
    let fits = fit_state_gps(config, realization, &times, &standardized)?;
    let fitted_gps: Vec<FittedGp> = fits
        .iter()
        .map(|f| FittedGp { kernel: f.kernel, noise_sd: f.noise_sd })
        .collect();

    // Step 2: infer states and parameters by componentwise random-walk MH.
    let ctx = DensityContext::new(fits, gamma, system.clone(), observations.clone())?;
    let initial = ChainState {
        x: DMatrix::from_fn(system.dim(), times.len(), |k, i| {
            observations.observations[k][i]
        }),
        theta: initial_theta(config, &system),
    };
    let mcmc = McmcConfig {
        n_mcmc: config.mcmc.n_mcmc,
        n_burnin: config.mcmc.n_burnin,
        state_proposal_sd: config.mcmc.state_proposal_sd,
        param_proposal_sd: config.mcmc.param_proposal_sd,
        rng_seed: derive_seed(config.seed, PURPOSE_CHAIN, realization as u64, 0),
        thinning: config.mcmc.thinning,
    };
    let chain = run_chain(initial, &ctx, &mcmc)?;

    // Evaluation: integrate the inferred parameters and compare at the
    // observation times.
    let eval_x0: Vec<f64> = if config.evaluate_from_estimated_x0 {
        (0..system.dim()).map(|k| chain.posterior_mean_x[(k, 0)]).collect()
    } else {
        config.x0.clone()
    };
    let inferred = integrate(
        &system,
        &chain.posterior_mean_theta,
        &eval_x0,
        &times,
        config.integrator_step_or_default(),
    )?;
    let rmse = trajectory_rmse(&truth, &inferred)?;

    let state_rates = chain.acceptance.state_rates();
    let record = RealizationRecord {
        index: realization,
        theta_hat: chain.posterior_mean_theta.clone(),
        x_hat: (0..system.dim())
            .map(|k| (0..times.len()).map(|i| chain.posterior_mean_x[(k, i)]).collect())
            .collect(),
        rmse_per_state: rmse,
        inferred_trajectory: inferred.states,
        fitted_gps,
        acceptance: AcceptanceSummary {
            aggregate: chain.acceptance.aggregate_rate(),
            state_mean: stats::mean(&state_rates),
            per_param: chain.acceptance.param_rates(),
        },
        theta_trace: chain.theta_samples,
        log_density_trace: chain.log_density_samples,
        warning: chain.warning,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    Ok((record, observations))
}

fn fit_state_gps(
    config: &ExperimentConfig,
    realization: usize,
    times: &[f64],
    standardized: &[(Vec<f64>, Standardization)],
) -> Result<Vec<GpStateFit>> {
    if config.shared_gp {
        let series: Vec<Vec<f64>> = standardized.iter().map(|(y, _)| y.clone()).collect();
        let opts = FitOptions {
            seed: derive_seed(config.seed, PURPOSE_FIT, realization as u64, 0),
            ..Default::default()
        };
        let (kernel, noise_sd) =
            fit_hyperparameters_pooled(&series, times, config.kernel_family, &opts)?;
        standardized
            .iter()
            .map(|(_, st)| GpStateFit::new(*st, kernel, noise_sd, times))
            .collect()
    } else {
        standardized
            .iter()
            .enumerate()
            .map(|(k, (y_tilde, st))| {
                let opts = FitOptions {
                    seed: derive_seed(config.seed, PURPOSE_FIT, realization as u64, k as u64 + 1),
                    ..Default::default()
                };
                let series = [y_tilde.clone()];
                let (kernel, noise_sd) =
                    fit_hyperparameters_pooled(&series, times, config.kernel_family, &opts)?;
                GpStateFit::new(*st, kernel, noise_sd, times)
            })
            .collect()
    }
}

fn initial_theta(config: &ExperimentConfig, system: &crate::systems::OdeSystem) -> Vec<f64> {
    match &config.theta_init {
        Some(init) => init.clone(),
        None => system.bounds().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
    }
}

/// Run one realization and wrap it as a single-entry result record.
pub fn run_single(config: &ExperimentConfig, realization: usize) -> Result<ResultRecord> {
    config.validate()?;
    config.required_gamma()?;
    let start = std::time::Instant::now();
    let system = config.system()?;
    let outcome = match run_realization(config, realization) {
        Ok(record) => RealizationOutcome::Ok(record),
        Err(e) => RealizationOutcome::Failed { index: realization, error: e.to_string() },
    };
    let outcomes = vec![outcome];
    let aggregate = record::aggregate_outcomes(&outcomes, system.dim());
    Ok(ResultRecord {
        config: config.clone(),
        realizations: outcomes,
        aggregate,
        total_wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Run the pipeline once per candidate gamma on realization 0 and score each
/// run by how well the inferred trajectory fits the noisy observations
/// (pooled RMSE over states and times). Ties go to the larger gamma.
pub fn select_gamma(config: &ExperimentConfig) -> Result<GammaSelection> {
    config.validate()?;
    let candidates = config.gamma_candidates();
    let scores: Vec<GammaScore> = candidates
        .par_iter()
        .map(|&gamma| match run_realization_with_gamma(config, 0, gamma) {
            Ok((record, observations)) => {
                let mut sq = 0.0;
                let mut count = 0usize;
                for (k, series) in record.inferred_trajectory.iter().enumerate() {
                    for (i, v) in series.iter().enumerate() {
                        let r = v - observations.observations[k][i];
                        sq += r * r;
                        count += 1;
                    }
                }
                GammaScore {
                    gamma,
                    observation_rmse: Some((sq / count as f64).sqrt()),
                    error: None,
                }
            }
            Err(e) => GammaScore { gamma, observation_rmse: None, error: Some(e.to_string()) },
        })
        .collect();

    let chosen_gamma = record::choose_gamma(&scores).ok_or_else(|| {
        Error::Numerical("every gamma candidate failed; see per-gamma errors".into())
    })?;
    Ok(GammaSelection { chosen_gamma, scores })
}

/// Run every realization (in parallel), aggregate the per-state RMSE
/// quantiles over the successes, and report per-realization failures
/// without aborting the others.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    config.required_gamma()?;
    let start = std::time::Instant::now();
    let system = config.system()?;
    let outcomes: Vec<RealizationOutcome> = (0..config.realizations)
        .into_par_iter()
        .map(|r| match run_realization(config, r) {
            Ok(record) => RealizationOutcome::Ok(record),
            Err(e) => RealizationOutcome::Failed { index: r, error: e.to_string() },
        })
        .collect();
    let aggregate = record::aggregate_outcomes(&outcomes, system.dim());
    Ok(ResultRecord {
        config: config.clone(),
        realizations: outcomes,
        aggregate,
        total_wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Integrate an explicit parameter vector from the true initial state and
/// report the per-state RMSE against the noiseless ground truth.
pub fn evaluate_theta(config: &ExperimentConfig, theta: &[f64]) -> Result<EvalRecord> {
    config.validate()?;
    let system = config.system()?;
    if theta.len() != system.param_count() {
        return Err(Error::InvalidInput(format!(
            "theta has {} entries, system '{}' has {} parameters",
            theta.len(),
            config.system,
            system.param_count()
        )));
    }
    let times = config.observation_times();
    let h = config.integrator_step_or_default();
    let truth = integrate(&system, &config.theta_true, &config.x0, &times, h)?;
    let candidate = integrate(&system, theta, &config.x0, &times, h)?;
    Ok(EvalRecord {
        theta: theta.to_vec(),
        rmse_per_state: trajectory_rmse(&truth, &candidate)?,
    })
}
