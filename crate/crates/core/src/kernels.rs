//! Kernel functions with analytic value, first-derivative and mixed
//! second-derivative evaluations.
//!
//! The derivative evaluations are what make the derivative-GP construction
//! possible: for a kernel k(a, b) the four covariance blocks are
//!
//! * `c[i][j]   = k(t_i, t_j)`            cov(x_i, x_j)
//! * `dc[i][j]  = dk/da (t_i, t_j)`       cov(xdot_i, x_j)
//! * `cd        = dc^T`                   cov(x_i, xdot_j)
//! * `ddc[i][j] = d2k/da db (t_i, t_j)`   cov(xdot_i, xdot_j)

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel functional form, without hyperparameter values. This is what an
/// experiment config names; the fitted [`KernelParams`] carry the values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Rbf,
    Matern52,
    Sigmoid,
}

/// Kernel hyperparameters. Serializes with an explicit family tag, e.g.
/// `{"family": "rbf", "signal_variance": 1.0, "lengthscale": 0.5}`.
///
/// The sigmoid kernel is the arcsine (neural-network) kernel
/// `k(s, t) = v * asin((b^2 s t + a^2) / sqrt((b^2 s^2 + a^2 + 1)(b^2 t^2 + a^2 + 1)))`
/// with offset `a` and slope `b`; it is nonstationary, which suits
/// logarithmically spaced observation times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelParams {
    Rbf { signal_variance: f64, lengthscale: f64 },
    Matern52 { signal_variance: f64, lengthscale: f64 },
    Sigmoid { signal_variance: f64, offset: f64, slope: f64 },
}

impl KernelParams {
    pub fn family(&self) -> KernelFamily {
        match self {
            KernelParams::Rbf { .. } => KernelFamily::Rbf,
            KernelParams::Matern52 { .. } => KernelFamily::Matern52,
            KernelParams::Sigmoid { .. } => KernelFamily::Sigmoid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields: &[(&str, f64)] = match self {
            KernelParams::Rbf { signal_variance, lengthscale }
            | KernelParams::Matern52 { signal_variance, lengthscale } => &[
                ("signal_variance", *signal_variance),
                ("lengthscale", *lengthscale),
            ],
            KernelParams::Sigmoid { signal_variance, offset, slope } => &[
                ("signal_variance", *signal_variance),
                ("offset", *offset),
                ("slope", *slope),
            ],
        };
        for (name, v) in fields {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "kernel {name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// A characteristic time scale, used to pick finite-difference steps.
    pub fn characteristic_time(&self) -> f64 {
        match self {
            KernelParams::Rbf { lengthscale, .. }
            | KernelParams::Matern52 { lengthscale, .. } => *lengthscale,
            KernelParams::Sigmoid { slope, .. } => 1.0 / slope,
        }
    }
}

fn check_finite(a: f64, b: f64) -> Result<()> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput(format!(
            "kernel arguments must be finite, got ({a}, {b})"
        )));
    }
    Ok(())
}

/// k(a, b). Symmetric in its arguments for every implemented family.
pub fn kernel_eval(params: &KernelParams, a: f64, b: f64) -> Result<f64> {
    params.validate()?;
    check_finite(a, b)?;
    Ok(eval_unchecked(params, a, b))
}

/// dk/da evaluated at (a, b).
pub fn kernel_deriv_a(params: &KernelParams, a: f64, b: f64) -> Result<f64> {
    params.validate()?;
    check_finite(a, b)?;
    Ok(deriv_a_unchecked(params, a, b))
}

/// dk/db evaluated at (a, b); equals dk/da at (b, a) because every
/// implemented kernel is symmetric.
pub fn kernel_deriv_b(params: &KernelParams, a: f64, b: f64) -> Result<f64> {
    params.validate()?;
    check_finite(a, b)?;
    Ok(deriv_a_unchecked(params, b, a))
}

/// d2k/(da db) evaluated at (a, b).
pub fn kernel_deriv_ab(params: &KernelParams, a: f64, b: f64) -> Result<f64> {
    params.validate()?;
    check_finite(a, b)?;
    Ok(deriv_ab_unchecked(params, a, b))
}

fn eval_unchecked(params: &KernelParams, a: f64, b: f64) -> f64 {
    match *params {
        KernelParams::Rbf { signal_variance, lengthscale } => {
            let u = a - b;
            signal_variance * (-u * u / (2.0 * lengthscale * lengthscale)).exp()
        }
        KernelParams::Matern52 { signal_variance, lengthscale } => {
            let u = a - b;
            let r = u.abs();
            let q = 5f64.sqrt() / lengthscale;
            signal_variance
                * (1.0 + q * r + 5.0 * u * u / (3.0 * lengthscale * lengthscale))
                * (-q * r).exp()
        }
        KernelParams::Sigmoid { signal_variance, offset, slope } => {
            let g = SigmoidGeom::new(offset, slope, a, b);
            signal_variance * g.z.asin()
        }
    }
}

fn deriv_a_unchecked(params: &KernelParams, a: f64, b: f64) -> f64 {
    match *params {
        KernelParams::Rbf { signal_variance, lengthscale } => {
            let u = a - b;
            let l2 = lengthscale * lengthscale;
            -signal_variance * u / l2 * (-u * u / (2.0 * l2)).exp()
        }
        KernelParams::Matern52 { signal_variance, lengthscale } => {
            // Closed form in r = |a - b|; the apparent |r| singularity cancels
            // and the expression below is smooth through r = 0.
            let u = a - b;
            let r = u.abs();
            let l2 = lengthscale * lengthscale;
            let q = 5f64.sqrt() / lengthscale;
            -signal_variance * 5.0 / (3.0 * l2) * u * (1.0 + q * r) * (-q * r).exp()
        }
        KernelParams::Sigmoid { signal_variance, offset, slope } => {
            let g = SigmoidGeom::new(offset, slope, a, b);
            signal_variance * g.dz_da() / (1.0 - g.z * g.z).sqrt()
        }
    }
}

fn deriv_ab_unchecked(params: &KernelParams, a: f64, b: f64) -> f64 {
    match *params {
        KernelParams::Rbf { signal_variance, lengthscale } => {
            let u = a - b;
            let l2 = lengthscale * lengthscale;
            signal_variance * (1.0 / l2 - u * u / (l2 * l2)) * (-u * u / (2.0 * l2)).exp()
        }
        KernelParams::Matern52 { signal_variance, lengthscale } => {
            // Limit at r = 0 is 5 v / (3 l^2).
            let u = a - b;
            let r = u.abs();
            let l2 = lengthscale * lengthscale;
            let q = 5f64.sqrt() / lengthscale;
            signal_variance * 5.0 / (3.0 * l2) * (1.0 + q * r - 5.0 * u * u / l2) * (-q * r).exp()
        }
        KernelParams::Sigmoid { signal_variance, offset, slope } => {
            let g = SigmoidGeom::new(offset, slope, a, b);
            let one_minus_z2 = 1.0 - g.z * g.z;
            let za = g.dz_da();
            let zb = g.dz_db();
            let zab = g.dz_dadb();
            signal_variance * (g.z * za * zb / one_minus_z2.powf(1.5) + zab / one_minus_z2.sqrt())
        }
    }
}

/// Shared intermediates of the arcsine kernel at (a, b).
struct SigmoidGeom {
    w: f64, // slope^2
    c: f64, // offset^2
    a: f64,
    b: f64,
    p: f64,  // w a b + c
    qa: f64, // w a^2 + c + 1
    qb: f64, // w b^2 + c + 1
    z: f64,  // p / sqrt(qa qb), strictly inside (-1, 1)
}

impl SigmoidGeom {
    fn new(offset: f64, slope: f64, a: f64, b: f64) -> Self {
        let w = slope * slope;
        let c = offset * offset;
        let p = w * a * b + c;
        let qa = w * a * a + c + 1.0;
        let qb = w * b * b + c + 1.0;
        let z = p / (qa * qb).sqrt();
        SigmoidGeom { w, c, a, b, p, qa, qb, z }
    }

    fn dz_da(&self) -> f64 {
        self.w * (self.b - self.a * self.p / self.qa) / (self.qa * self.qb).sqrt()
    }

    fn dz_db(&self) -> f64 {
        self.w * (self.a - self.b * self.p / self.qb) / (self.qa * self.qb).sqrt()
    }

    fn dz_dadb(&self) -> f64 {
        let wa = self.b - self.a * self.p / self.qa;
        self.w / (self.qa * self.qb).sqrt()
            * ((self.c + 1.0) / self.qa - self.w * self.b * wa / self.qb)
    }
}

/// The four covariance blocks of the joint (states, state-derivatives) GP on
/// a fixed time grid.
#[derive(Clone, Debug)]
pub struct CovBlocks {
    /// cov(x, x): k(t_i, t_j).
    pub c: DMatrix<f64>,
    /// cov(xdot, x): dk/da at (t_i, t_j).
    pub dc: DMatrix<f64>,
    /// cov(x, xdot): transpose of `dc`.
    pub cd: DMatrix<f64>,
    /// cov(xdot, xdot): d2k/(da db) at (t_i, t_j).
    pub ddc: DMatrix<f64>,
}

/// Kernel matrix on an arbitrary (not necessarily sorted) set of times.
pub fn kernel_matrix(params: &KernelParams, times: &[f64]) -> Result<DMatrix<f64>> {
    params.validate()?;
    for &t in times {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite time {t}")));
        }
    }
    let n = times.len();
    Ok(DMatrix::from_fn(n, n, |i, j| eval_unchecked(params, times[i], times[j])))
}

/// Build all four covariance blocks on a strictly increasing time grid.
pub fn build_cov_blocks(params: &KernelParams, times: &[f64]) -> Result<CovBlocks> {
    params.validate()?;
    if times.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    for &t in times {
        if !t.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite time {t}")));
        }
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidInput(format!(
                "times must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let n = times.len();
    let c = DMatrix::from_fn(n, n, |i, j| eval_unchecked(params, times[i], times[j]));
    let dc = DMatrix::from_fn(n, n, |i, j| deriv_a_unchecked(params, times[i], times[j]));
    let cd = dc.transpose();
    let ddc = DMatrix::from_fn(n, n, |i, j| deriv_ab_unchecked(params, times[i], times[j]));
    Ok(CovBlocks { c, dc, cd, ddc })
}
