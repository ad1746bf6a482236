//! Levenberg–Marquardt least squares with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iters: usize,
    /// Stop once the cost `½‖r‖²` is below this.
    pub cost_target: f64,
    /// Stop once an accepted step lowers the cost by less than this
    /// fraction.
    pub rel_improvement: f64,
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iters: 300, cost_target: 1e-26, rel_improvement: 1e-12, fd_step: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct LmResult {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], m: usize, h: f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let step = h * x[k].abs().max(1.0);
        xp[k] = x[k] + step;
        let rp = f(&xp);
        xp[k] = x[k] - step;
        let rm = f(&xp);
        xp[k] = x[k];
        for i in 0..m {
            j[(i, k)] = (rp[i] - rm[i]) / (2.0 * step);
        }
    }
    j
}

/// Minimizes `½‖f(x)‖²` from `x0`.
pub fn levenberg_marquardt<F: Fn(&[f64]) -> Vec<f64>>(f: F, x0: &[f64], opts: &LmOptions) -> LmResult {
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let n = x.len();
    let mut iterations = 0;
    while iterations < opts.max_iters && cost > opts.cost_target {
        iterations += 1;
        let j = jacobian(&f, &x, r.len(), opts.fd_step);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rt = f(&trial);
            let ct = cost_of(&rt);
            if ct < cost {
                let improvement = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if improvement < opts.rel_improvement {
                    return LmResult { x, cost, iterations };
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    LmResult { x, cost, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_rosenbrock_as_least_squares() {
        let f = |x: &[f64]| vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]];
        let res = levenberg_marquardt(f, &[-1.2, 1.0], &LmOptions::default());
        assert!((res.x[0] - 1.0).abs() < 1e-8 && (res.x[1] - 1.0).abs() < 1e-8, "{:?}", res);
    }

    #[test]
    fn nonzero_residual_minimum() {
        // Best fit of a constant to {1, 2, 4}.
        let f = |x: &[f64]| vec![x[0] - 1.0, x[0] - 2.0, x[0] - 4.0];
        let res = levenberg_marquardt(f, &[0.0], &LmOptions::default());
        assert!((res.x[0] - 7.0 / 3.0).abs() < 1e-8);
    }
}
