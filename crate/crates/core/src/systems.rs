//! Benchmark ODE systems as pluggable vector fields with metadata.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type FieldFn = dyn Fn(&[f64], &[f64], &mut [f64]) -> Result<()> + Send + Sync;

/// A named dynamical system `xdot = f(x, theta)` with parameter bounds.
///
/// Custom systems are built with [`OdeSystem::new`]; the three shipped
/// benchmarks are addressed by name through [`OdeSystem::by_name`].
#[derive(Clone)]
pub struct OdeSystem {
    name: String,
    dim: usize,
    param_count: usize,
    bounds: Vec<(f64, f64)>,
    state_names: Vec<String>,
    field: Arc<FieldFn>,
}

impl fmt::Debug for OdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("param_count", &self.param_count)
            .finish()
    }
}

impl OdeSystem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        param_count: usize,
        bounds: Vec<(f64, f64)>,
        state_names: Vec<String>,
        field: impl Fn(&[f64], &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("system dimension must be positive".into()));
        }
        if bounds.len() != param_count {
            return Err(Error::InvalidInput(format!(
                "{} bounds for {} parameters",
                bounds.len(),
                param_count
            )));
        }
        if state_names.len() != dim {
            return Err(Error::InvalidInput(format!(
                "{} state names for dimension {}",
                state_names.len(),
                dim
            )));
        }
        for &(lo, hi) in &bounds {
            if !(lo < hi) {
                return Err(Error::InvalidInput(format!("empty parameter bound [{lo}, {hi}]")));
            }
        }
        Ok(OdeSystem {
            name: name.into(),
            dim,
            param_count,
            bounds,
            state_names,
            field: Arc::new(field),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn theta_in_bounds(&self, theta: &[f64]) -> bool {
        theta.len() == self.param_count
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(t, (lo, hi))| t.is_finite() && *t >= *lo && *t <= *hi)
    }

    /// Evaluate the vector field into a caller-provided buffer.
    pub fn eval_into(&self, x: &[f64], theta: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim || out.len() != self.dim || theta.len() != self.param_count {
            return Err(Error::InvalidInput(format!(
                "field '{}' expects {} states and {} parameters, got {} and {}",
                self.name,
                self.dim,
                self.param_count,
                x.len(),
                theta.len()
            )));
        }
        (self.field)(x, theta, out)
    }

    pub fn eval(&self, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, theta, &mut out)?;
        Ok(out)
    }

    /// Resolve one of the shipped benchmark systems by its config name.
    pub fn by_name(name: &str) -> Result<OdeSystem> {
        match name {
            "lotka_volterra" => Ok(lotka_volterra()),
            "protein_transduction" => Ok(protein_transduction()),
            "fitzhugh_nagumo" => Ok(fitzhugh_nagumo()),
            other => Err(Error::Config(format!("unknown system '{other}'"))),
        }
    }
}

/// Two-species predator-prey dynamics:
/// `x1' = th1 x1 - th2 x1 x2`, `x2' = -th3 x2 + th4 x1 x2`.
pub fn lotka_volterra() -> OdeSystem {
    OdeSystem::new(
        "lotka_volterra",
        2,
        4,
        vec![(0.0, 100.0); 4],
        vec!["prey".into(), "predator".into()],
        |x, th, out| {
            out[0] = th[0] * x[0] - th[1] * x[0] * x[1];
            out[1] = -th[2] * x[1] + th[3] * x[0] * x[1];
            Ok(())
        },
    )
    .expect("static system definition")
}

/// Five-state signalling cascade with a Michaelis-Menten dephosphorylation
/// term; states (S, dS, R, R_S, R_pp), six rate parameters.
pub fn protein_transduction() -> OdeSystem {
    OdeSystem::new(
        "protein_transduction",
        5,
        6,
        vec![(0.0, 100.0); 6],
        vec!["S".into(), "dS".into(), "R".into(), "R_S".into(), "R_pp".into()],
        |x, th, out| {
            let (s, r, r_s, r_pp) = (x[0], x[2], x[3], x[4]);
            let denom = th[5] + r_pp;
            if denom == 0.0 {
                return Err(Error::Singularity(
                    "protein_transduction: th6 + R_pp = 0".into(),
                ));
            }
            let mm = th[4] * r_pp / denom;
            out[0] = -th[0] * s - th[1] * s * r + th[2] * r_s;
            out[1] = th[0] * s;
            out[2] = -th[1] * s * r + th[2] * r_s + mm;
            out[3] = th[1] * s * r - th[2] * r_s - th[3] * r_s;
            out[4] = th[3] * r_s - mm;
            Ok(())
        },
    )
    .expect("static system definition")
}

/// Spiking neuron dynamics (V, R):
/// `V' = th1 (V - V^3/3 + R)`, `R' = (V - th2 + th3 R) / th1`.
pub fn fitzhugh_nagumo() -> OdeSystem {
    OdeSystem::new(
        "fitzhugh_nagumo",
        2,
        3,
        vec![(0.1, 100.0), (-100.0, 100.0), (-100.0, 100.0)],
        vec!["V".into(), "R".into()],
        |x, th, out| {
            if th[0] == 0.0 {
                return Err(Error::Singularity("fitzhugh_nagumo: th1 = 0".into()));
            }
            let (v, r) = (x[0], x[1]);
            out[0] = th[0] * (v - v * v * v / 3.0 + r);
            out[1] = (v - th[1] + th[2] * r) / th[0];
            Ok(())
        },
    )
    .expect("static system definition")
}
