//! Shared test oracles, deliberately independent of the library's
//! computation paths: dense multivariate-normal log-densities via explicit
//! inverse and determinant, central finite differences, and adaptive
//! Simpson quadrature.

#![allow(dead_code)] // not every test binary uses every oracle

use nalgebra::{DMatrix, DVector};

use gpgm::density::DensityContext;
use gpgm::gp::{GpStateFit, Standardization, STATE_PRIOR_REG_REL};
use gpgm::kernels::{kernel_eval, KernelParams};
use gpgm::systems::OdeSystem;
use gpgm::TimeSeries;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Multivariate normal log-density computed with an explicit inverse and
/// determinant (no Cholesky anywhere).
pub fn dense_mvn_logpdf(mean: &DVector<f64>, cov: &DMatrix<f64>, at: &DVector<f64>) -> f64 {
    let n = mean.len() as f64;
    let inv = cov.clone().try_inverse().expect("oracle covariance not invertible");
    let det = cov.determinant();
    assert!(det > 0.0, "oracle covariance must have positive determinant");
    let r = at - mean;
    -0.5 * (&r.transpose() * &inv * &r)[(0, 0)] - 0.5 * det.ln() - 0.5 * n * LN_2PI
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -0.5 * r * r / var - 0.5 * var.ln() - 0.5 * LN_2PI
}

/// Adaptive Simpson quadrature on [a, b] with absolute tolerance `eps`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, eps * 0.5, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, eps * 0.5, depth - 1)
        }
    }

    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, eps, 40)
}

/// Nested adaptive Simpson over an axis-aligned box.
pub fn adaptive_simpson_2d(
    f: &dyn Fn(f64, f64) -> f64,
    lo: [f64; 2],
    hi: [f64; 2],
    eps: f64,
) -> f64 {
    let inner_eps = eps / (hi[0] - lo[0]).max(1.0);
    adaptive_simpson(
        &|x| adaptive_simpson(&|y| f(x, y), lo[1], hi[1], inner_eps),
        lo[0],
        hi[0],
        eps,
    )
}

/// Central finite difference of a univariate function.
pub fn central_diff(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central cross difference d2f/(dx dy).
pub fn cross_diff(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h)
}

pub fn linear_system(bound: f64) -> OdeSystem {
    OdeSystem::new("linear", 1, 1, vec![(-bound, bound)], vec!["x".into()], |x, th, out| {
        out[0] = th[0] * x[0];
        Ok(())
    })
    .unwrap()
}

/// Independent evaluation of the full per-state log-density: prior and
/// observation terms from dense formulas, gradient term by numerically
/// marginalizing the derivative variable out of
/// N(w | D z, A) * N(f/s | w, gamma I).
pub fn quadrature_state_log_density(
    fit: &GpStateFit,
    times: &[f64],
    y: &[f64],
    x: &[f64],
    f_over_s: &[f64],
    gamma: f64,
) -> f64 {
    let n = times.len();
    let s = fit.standardization.scale;
    let mu = fit.standardization.mean;
    let z = DVector::from_iterator(n, x.iter().map(|v| (v - mu) / s));

    // Prior: dense MVN with the regularized covariance, rebuilt from
    // pointwise kernel evaluations.
    let mut c = DMatrix::from_fn(n, n, |i, j| {
        kernel_eval(&fit.kernel, times[i], times[j]).unwrap()
    });
    let reg = STATE_PRIOR_REG_REL * c.diagonal().iter().sum::<f64>() / n as f64;
    for i in 0..n {
        c[(i, i)] += reg;
    }
    let term_prior = dense_mvn_logpdf(&DVector::zeros(n), &c, &z);

    let term_obs: f64 = (0..n)
        .map(|i| normal_logpdf(y[i] / s, x[i] / s, fit.noise_sd * fit.noise_sd))
        .sum();

    let m1 = &fit.d * &z;
    let a = fit.a.clone();
    let integral = match n {
        1 => {
            let sd0 = a[(0, 0)].sqrt();
            let lo = (m1[0] - 12.0 * sd0).min(f_over_s[0] - 12.0 * gamma.sqrt());
            let hi = (m1[0] + 12.0 * sd0).max(f_over_s[0] + 12.0 * gamma.sqrt());
            adaptive_simpson(
                &|w| {
                    (normal_logpdf(w, m1[0], a[(0, 0)])
                        + normal_logpdf(f_over_s[0], w, gamma))
                    .exp()
                },
                lo,
                hi,
                1e-13,
            )
        }
        2 => {
            let mut lo = [0.0; 2];
            let mut hi = [0.0; 2];
            for i in 0..2 {
                let sd = a[(i, i)].sqrt();
                lo[i] = (m1[i] - 10.0 * sd).min(f_over_s[i] - 10.0 * gamma.sqrt());
                hi[i] = (m1[i] + 10.0 * sd).max(f_over_s[i] + 10.0 * gamma.sqrt());
            }
            let mean = DVector::from_column_slice(&[m1[0], m1[1]]);
            adaptive_simpson_2d(
                &|w0, w1| {
                    let w = DVector::from_column_slice(&[w0, w1]);
                    (dense_mvn_logpdf(&mean, &a, &w)
                        + normal_logpdf(f_over_s[0], w0, gamma)
                        + normal_logpdf(f_over_s[1], w1, gamma))
                    .exp()
                },
                lo,
                hi,
                1e-11,
            )
        }
        _ => panic!("quadrature oracle only supports n in {{1, 2}}"),
    };
    term_prior + term_obs + integral.ln()
}

/// Closed-form state log-density versus the quadrature oracle for a
/// one-state linear field; returns (closed, oracle).
pub fn marginalization_case(times: &[f64], y: &[f64], x: &[f64], theta: f64, gamma: f64) -> (f64, f64) {
    let kernel = KernelParams::Rbf { signal_variance: 1.3, lengthscale: 0.8 };
    let st = Standardization { mean: 0.25, scale: 1.2 };
    let fit = GpStateFit::new(st, kernel, 0.8, times).unwrap();
    if times.len() == 2 {
        let eig = fit.a.clone().symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > 1e-3), "oracle needs a well-conditioned A: {eig:?}");
    }

    let system = linear_system(10.0);
    let observations = TimeSeries::new(times.to_vec(), vec![y.to_vec()]).unwrap();
    let f_over_s: Vec<f64> = x.iter().map(|v| theta * v / fit.standardization.scale).collect();

    let oracle = quadrature_state_log_density(&fit, times, y, x, &f_over_s, gamma);
    let ctx = DensityContext::new(vec![fit], gamma, system, observations).unwrap();
    let xm = DMatrix::from_fn(1, times.len(), |_, i| x[i]);
    let closed = ctx.state_log_density(&xm, 0, &[theta]);
    (closed, oracle)
}

#[test]
fn simpson_integrates_a_gaussian() {
    let total = adaptive_simpson(&|x| normal_logpdf(x, 0.3, 2.0).exp(), -20.0, 20.0, 1e-12);
    assert!((total - 1.0).abs() < 1e-9, "got {total}");
}

#[test]
fn dense_mvn_matches_scalar_normal() {
    let mean = DVector::from_element(1, 0.5);
    let cov = DMatrix::from_element(1, 1, 2.0);
    let at = DVector::from_element(1, -0.3);
    let a = dense_mvn_logpdf(&mean, &cov, &at);
    let b = normal_logpdf(-0.3, 0.5, 2.0);
    assert!((a - b).abs() < 1e-12);
}
