//! Persisted experiment outcomes: the JSON result record plus CSV plot data.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::kernels::KernelParams;
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedGp {
    pub kernel: KernelParams,
    pub noise_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    pub aggregate: f64,
    pub state_mean: f64,
    pub per_param: Vec<f64>,
}

/// Inference outcome for one noise realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub theta_hat: Vec<f64>,
    /// Posterior-mean latent states, `x_hat[k][i]`.
    pub x_hat: Vec<Vec<f64>>,
    /// RMSE at the observation times between the ground truth and the
    /// trajectory integrated from `theta_hat`.
    pub rmse_per_state: Vec<f64>,
    /// The trajectory integrated from `theta_hat`, on the observation grid.
    pub inferred_trajectory: Vec<Vec<f64>>,
    pub fitted_gps: Vec<FittedGp>,
    pub acceptance: AcceptanceSummary,
    /// Thinned post-burn-in parameter samples.
    pub theta_trace: Vec<Vec<f64>>,
    pub log_density_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    /// Excluded from the determinism contract.
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RealizationOutcome {
    Ok(RealizationRecord),
    Failed { index: usize, error: String },
}

impl RealizationOutcome {
    pub fn record(&self) -> Option<&RealizationRecord> {
        match self {
            RealizationOutcome::Ok(r) => Some(r),
            RealizationOutcome::Failed { .. } => None,
        }
    }
}

/// Per-state RMSE quantiles over the successful realizations, following the
/// boxplot convention: median line, central-50% box (q25/q75) and
/// central-75% whiskers (q12.5/q87.5).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub success_count: usize,
    pub rmse_median: Vec<f64>,
    pub rmse_q25: Vec<f64>,
    pub rmse_q75: Vec<f64>,
    pub rmse_q12_5: Vec<f64>,
    pub rmse_q87_5: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub realizations: Vec<RealizationOutcome>,
    pub aggregate: AggregateStats,
    /// Excluded from the determinism contract.
    pub total_wall_clock_s: f64,
}

impl ResultRecord {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn success_count(&self) -> usize {
        self.aggregate.success_count
    }
}

/// Recompute the per-state RMSE quantiles from a set of outcomes; the
/// result depends only on the multiset of successful records, not their
/// order.
pub fn aggregate_outcomes(outcomes: &[RealizationOutcome], n_states: usize) -> AggregateStats {
    let successes: Vec<&RealizationRecord> =
        outcomes.iter().filter_map(|o| o.record()).collect();
    let mut median = Vec::new();
    let mut q25 = Vec::new();
    let mut q75 = Vec::new();
    let mut q12_5 = Vec::new();
    let mut q87_5 = Vec::new();
    if !successes.is_empty() {
        for k in 0..n_states {
            let values: Vec<f64> = successes.iter().map(|r| r.rmse_per_state[k]).collect();
            median.push(stats::quantile(&values, 0.5));
            q25.push(stats::quantile(&values, 0.25));
            q75.push(stats::quantile(&values, 0.75));
            q12_5.push(stats::quantile(&values, 0.125));
            q87_5.push(stats::quantile(&values, 0.875));
        }
    }
    AggregateStats {
        success_count: successes.len(),
        rmse_median: median,
        rmse_q25: q25,
        rmse_q75: q75,
        rmse_q12_5: q12_5,
        rmse_q87_5: q87_5,
    }
}

/// Write the JSON record plus the CSV plot data next to it:
/// `<base>_rmse.csv`, `<base>_theta_hist.csv` (50 bins per parameter,
/// pooled over realizations) and `<base>_trajectory_bands.csv`.
pub fn write_outputs(record: &ResultRecord, out_path: impl AsRef<Path>) -> Result<()> {
    let out_path = out_path.as_ref();
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let json = serde_json::to_string_pretty(record)?;
    std::fs::write(out_path, json + "\n")?;

    let base = out_path.with_extension("");
    write_rmse_csv(record, &csv_path(&base, "rmse"))?;
    write_theta_hist_csv(record, &csv_path(&base, "theta_hist"))?;
    write_trajectory_bands_csv(record, &csv_path(&base, "trajectory_bands"))?;
    Ok(())
}

fn csv_path(base: &Path, suffix: &str) -> PathBuf {
    let mut name = base.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!("_{suffix}.csv"));
    base.with_file_name(name)
}

fn write_rmse_csv(record: &ResultRecord, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "realization,state,rmse")?;
    for outcome in &record.realizations {
        if let Some(r) = outcome.record() {
            for (k, rmse) in r.rmse_per_state.iter().enumerate() {
                writeln!(f, "{},{},{}", r.index, k, rmse)?;
            }
        }
    }
    Ok(())
}

fn write_theta_hist_csv(record: &ResultRecord, path: &Path) -> Result<()> {
    let n_params = record
        .realizations
        .iter()
        .filter_map(|o| o.record())
        .map(|r| r.theta_hat.len())
        .next()
        .unwrap_or(0);
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "param,bin_lo,bin_hi,count")?;
    for j in 0..n_params {
        let pooled: Vec<f64> = record
            .realizations
            .iter()
            .filter_map(|o| o.record())
            .flat_map(|r| r.theta_trace.iter().map(move |s| s[j]))
            .collect();
        for (lo, hi, count) in stats::histogram(&pooled, 50) {
            writeln!(f, "{j},{lo},{hi},{count}")?;
        }
    }
    Ok(())
}

fn write_trajectory_bands_csv(record: &ResultRecord, path: &Path) -> Result<()> {
    let successes: Vec<&RealizationRecord> =
        record.realizations.iter().filter_map(|o| o.record()).collect();
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "state,time,median,q12_5,q25,q75,q87_5")?;
    let Some(first) = successes.first() else {
        return Ok(());
    };
    let times = record.config.observation_times();
    let n_states = first.inferred_trajectory.len();
    for k in 0..n_states {
        for (i, t) in times.iter().enumerate() {
            let values: Vec<f64> = successes
                .iter()
                .map(|r| r.inferred_trajectory[k][i])
                .collect();
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                k,
                t,
                stats::quantile(&values, 0.5),
                stats::quantile(&values, 0.125),
                stats::quantile(&values, 0.25),
                stats::quantile(&values, 0.75),
                stats::quantile(&values, 0.875),
            )?;
        }
    }
    Ok(())
}

/// Outcome of a gamma-grid search: the per-gamma observation-fit scores and
/// the winner (smallest score; ties resolve to the larger gamma).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSelection {
    pub chosen_gamma: f64,
    pub scores: Vec<GammaScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaScore {
    pub gamma: f64,
    /// Pooled RMSE of the inferred trajectory against the noisy
    /// observations; absent when this gamma's run failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Pick the smallest observation-fit score from scores sorted by ascending
/// gamma; exact ties resolve to the larger gamma. None when every candidate
/// failed.
pub fn choose_gamma(scores: &[GammaScore]) -> Option<f64> {
    let mut chosen: Option<(f64, f64)> = None;
    for s in scores {
        if let Some(rmse) = s.observation_rmse {
            if chosen.is_none_or(|(_, best)| rmse <= best) {
                chosen = Some((s.gamma, rmse));
            }
        }
    }
    chosen.map(|(g, _)| g)
}

/// Outcome of evaluating one explicit parameter vector against freshly
/// integrated ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub theta: Vec<f64>,
    pub rmse_per_state: Vec<f64>,
}

pub fn write_json(value: &impl Serialize, out_path: impl AsRef<Path>) -> Result<()> {
    let out_path = out_path.as_ref();
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let json = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(out_path, json + "\n")?;
    Ok(())
}
