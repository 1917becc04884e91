//! Compact Nelder-Mead simplex minimizer used for hyperparameter fitting.
//!
//! Runs until the simplex diameter falls below `tol` or the evaluation
//! budget is exhausted, and reports the best point seen across the whole
//! run (which by construction is never worse than the start point).

pub struct NmOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    #[allow(dead_code)] // inspected by tests
    pub evals: usize,
}

const ALPHA: f64 = 1.0; // reflection
const GAMMA: f64 = 2.0; // expansion
const RHO: f64 = 0.5; // contraction
const SIGMA: f64 = 0.5; // shrink

pub fn minimize<F>(
    f: &mut F,
    x0: &[f64],
    initial_step: f64,
    tol: f64,
    max_evals: usize,
) -> NmOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    assert!(dim > 0);

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: x0 plus one axis-offset vertex per dimension.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += initial_step;
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let mut best = simplex[0].clone();
    for vtx in &simplex {
        if vtx.1 < best.1 {
            best = vtx.clone();
        }
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if simplex[0].1 < best.1 {
            best = simplex[0].clone();
        }
        if diameter(&simplex) < tol {
            break;
        }

        // Centroid of all but the worst vertex.
        let worst = simplex[dim].clone();
        let mut centroid = vec![0.0; dim];
        for (v, _) in simplex.iter().take(dim) {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim as f64;
            }
        }

        let reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + ALPHA * (c - w))
            .collect();
        let f_r = eval(&reflected, &mut evals);

        if f_r < simplex[0].1 {
            // Try expanding past the reflection.
            let expanded: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + GAMMA * (c - w))
                .collect();
            let f_e = eval(&expanded, &mut evals);
            simplex[dim] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
        } else if f_r < simplex[dim - 1].1 {
            simplex[dim] = (reflected, f_r);
        } else {
            let contracted: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + RHO * (w - c))
                .collect();
            let f_c = eval(&contracted, &mut evals);
            if f_c < worst.1 {
                simplex[dim] = (contracted, f_c);
            } else {
                // Shrink toward the best vertex.
                let best_v = simplex[0].0.clone();
                for vtx in simplex.iter_mut().skip(1) {
                    for (x, b) in vtx.0.iter_mut().zip(&best_v) {
                        *x = b + SIGMA * (*x - b);
                    }
                    vtx.1 = eval(&vtx.0.clone(), &mut evals);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    if simplex[0].1 < best.1 {
        best = simplex[0].clone();
    }
    NmOutcome { x: best.0, fx: best.1, evals }
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..simplex.len() {
        for j in (i + 1)..simplex.len() {
            let dist = simplex[i]
                .0
                .iter()
                .zip(&simplex[j].0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d = d.max(dist);
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let mut f = |x: &[f64]| (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2);
        let out = minimize(&mut f, &[0.0, 0.0], 0.5, 1e-9, 2000);
        assert!((out.x[0] - 2.0).abs() < 1e-4, "x0 = {}", out.x[0]);
        assert!((out.x[1] + 1.0).abs() < 1e-4, "x1 = {}", out.x[1]);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let mut f =
            |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let out = minimize(&mut f, &[-1.2, 1.0], 0.5, 1e-10, 4000);
        assert!((out.x[0] - 1.0).abs() < 1e-3);
        assert!((out.x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn never_worse_than_start() {
        let mut f = |x: &[f64]| x[0].sin() * 10.0 + x[0] * x[0];
        let start = [3.0f64];
        let f_start = start[0].sin() * 10.0 + start[0] * start[0];
        let out = minimize(&mut f, &start, 0.3, 1e-8, 200);
        assert!(out.fx <= f_start);
    }

    #[test]
    fn respects_eval_budget() {
        let mut count = 0usize;
        let mut f = |x: &[f64]| {
            count += 1;
            x[0] * x[0]
        };
        let out = minimize(&mut f, &[10.0], 1.0, 0.0, 50);
        assert!(out.evals <= 52); // budget checked per iteration, not per eval
        assert_eq!(out.evals, count);
    }

    #[test]
    fn survives_infinite_regions() {
        let mut f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::INFINITY
            } else {
                (x[0] - 1.0).powi(2)
            }
        };
        let out = minimize(&mut f, &[0.5], 0.4, 1e-9, 1000);
        assert!((out.x[0] - 1.0).abs() < 1e-4);
    }
}
