//! Observation container shared by the GP fit, the density and the harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observation times plus per-state noisy observations;
/// `observations[k][i]` is state k at `times[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub observations: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, observations: Vec<Vec<f64>>) -> Result<Self> {
        let ts = TimeSeries { times, observations };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::InvalidInput("empty observation times".into()));
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidInput(
                    "observation times must be strictly increasing".into(),
                ));
            }
        }
        if self.observations.is_empty() {
            return Err(Error::InvalidInput("no observed states".into()));
        }
        for (k, obs) in self.observations.iter().enumerate() {
            if obs.len() != self.times.len() {
                return Err(Error::InvalidInput(format!(
                    "state {k} has {} observations for {} times",
                    obs.len(),
                    self.times.len()
                )));
            }
            if obs.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("state {k} has non-finite values")));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.observations.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `time,obs_0,...,obs_{K-1}`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        write!(w, "time")?;
        for k in 0..self.n_states() {
            write!(w, ",obs_{k}")?;
        }
        writeln!(w)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for k in 0..self.n_states() {
                write!(w, ",{}", self.observations[k][i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
