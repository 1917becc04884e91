//! Fixed-step classical Runge-Kutta integration, used to generate ground
//! truth and to evaluate inferred parameters. The sampler itself never
//! integrates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::OdeSystem;

/// States on a time grid; `states[k][i]` is state k at `times[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `time,state_0,...,state_{K-1}`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        write!(w, "time")?;
        for k in 0..self.n_states() {
            write!(w, ",state_{k}")?;
        }
        writeln!(w)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for k in 0..self.n_states() {
                write!(w, ",{}", self.states[k][i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrate `system` from `x0` at `times[0]` across the output grid with
/// classical RK4 at fixed internal step `h`, sub-stepping between output
/// times and taking a final partial step to land exactly on each one.
pub fn integrate(
    system: &OdeSystem,
    theta: &[f64],
    x0: &[f64],
    times: &[f64],
    h: f64,
) -> Result<Trajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("step size must be positive, got {h}")));
    }
    if times.is_empty() {
        return Err(Error::InvalidInput("empty output grid".into()));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidInput(format!(
                "output times must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if x0.len() != system.dim() {
        return Err(Error::InvalidInput(format!(
            "initial state has {} entries for a {}-dimensional system",
            x0.len(),
            system.dim()
        )));
    }

    let dim = system.dim();
    let mut state = x0.to_vec();
    let mut out = vec![Vec::with_capacity(times.len()); dim];
    for k in 0..dim {
        out[k].push(state[k]);
    }

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    for w in times.windows(2) {
        let (t_start, t_end) = (w[0], w[1]);
        let dt = t_end - t_start;
        let n_full = (dt / h).floor() as usize;
        let rem = dt - n_full as f64 * h;
        for j in 0..n_full {
            let t = t_start + j as f64 * h;
            rk4_step(system, theta, t, h, &mut state, &mut k1, &mut k2, &mut k3, &mut k4, &mut tmp)?;
        }
        if rem > 1e-12 * dt.max(h) {
            let t = t_start + n_full as f64 * h;
            rk4_step(system, theta, t, rem, &mut state, &mut k1, &mut k2, &mut k3, &mut k4, &mut tmp)?;
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t_end });
        }
        for k in 0..dim {
            out[k].push(state[k]);
        }
    }

    Ok(Trajectory { times: times.to_vec(), states: out })
}

#[allow(clippy::too_many_arguments)]
fn rk4_step(
    system: &OdeSystem,
    theta: &[f64],
    t: f64,
    h: f64,
    state: &mut [f64],
    k1: &mut [f64],
    k2: &mut [f64],
    k3: &mut [f64],
    k4: &mut [f64],
    tmp: &mut [f64],
) -> Result<()> {
    let eval = |x: &[f64], out: &mut [f64], at: f64| -> Result<()> {
        system
            .eval_into(x, theta, out)
            .map_err(|_| Error::Divergence { time: at })
    };

    eval(state, k1, t)?;
    for i in 0..state.len() {
        tmp[i] = state[i] + 0.5 * h * k1[i];
    }
    eval(tmp, k2, t + 0.5 * h)?;
    for i in 0..state.len() {
        tmp[i] = state[i] + 0.5 * h * k2[i];
    }
    eval(tmp, k3, t + 0.5 * h)?;
    for i in 0..state.len() {
        tmp[i] = state[i] + h * k3[i];
    }
    eval(tmp, k4, t + h)?;
    for i in 0..state.len() {
        state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if !state[i].is_finite() {
            return Err(Error::Divergence { time: t + h });
        }
    }
    Ok(())
}

/// Per-state root-mean-square difference between two trajectories on an
/// identical grid.
pub fn trajectory_rmse(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    if a.times != b.times {
        return Err(Error::InvalidInput("trajectory time grids differ".into()));
    }
    if a.n_states() != b.n_states() {
        return Err(Error::InvalidInput(format!(
            "trajectories have {} vs {} states",
            a.n_states(),
            b.n_states()
        )));
    }
    let n = a.len() as f64;
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| {
            (sa.iter().zip(sb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt()
        })
        .collect())
}
