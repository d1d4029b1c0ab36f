//! Damped Gauss–Newton (Levenberg–Marquardt) least squares with a
//! finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the gradient infinity norm falls below this.
    pub gtol: f64,
    /// Stop when the relative step size falls below this.
    pub xtol: f64,
    /// Stop when the relative cost reduction of an accepted step falls below this.
    pub ftol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 500, gtol: 1e-14, xtol: 1e-13, ftol: 1e-16 }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub x: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub n_residuals: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Diagonal of `J^T J` at the solution.
    pub jtj_diag: Vec<f64>,
}

impl LmResult {
    pub fn rms(&self) -> f64 {
        (self.cost / self.n_residuals.max(1) as f64).sqrt()
    }
}

fn jacobian<F>(f: &mut F, x: &[f64], r0: &DVector<f64>) -> Option<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let m = r0.len();
    let mut j = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let h = 1e-7 * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let rp = f(&xp);
        xp[k] = x[k] - h;
        let rm = f(&xp);
        xp[k] = x[k];
        match (rp, rm) {
            (Some(rp), Some(rm)) => {
                for i in 0..m {
                    j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            // one-sided difference at a domain edge
            (Some(rp), None) => {
                for i in 0..m {
                    j[(i, k)] = (rp[i] - r0[i]) / h;
                }
            }
            (None, Some(rm)) => {
                for i in 0..m {
                    j[(i, k)] = (r0[i] - rm[i]) / h;
                }
            }
            (None, None) => return None,
        }
    }
    Some(j)
}

/// Minimizes `sum r_i(x)^2`. The residual function returns `None` outside
/// its domain; such trial steps are rejected and the damping increased.
/// Returns `None` when the starting point itself is outside the domain.
pub fn levenberg_marquardt<F>(mut f: F, x0: &[f64], opts: &LmOptions) -> Option<LmResult>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut r = DVector::from_vec(f(&x)?);
    let m = r.len();
    let mut cost = r.norm_squared();
    let mut j = jacobian(&mut f, &x, &r)?;
    let mut lambda: Option<f64> = None;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() < opts.gtol || cost < 1e-30 {
            converged = true;
            break;
        }
        let diag: Vec<f64> = (0..x.len()).map(|k| jtj[(k, k)].max(1e-30)).collect();
        let lam = *lambda.get_or_insert_with(|| 1e-3 * diag.iter().cloned().fold(0.0, f64::max));
        iterations += 1;

        let mut a = jtj.clone();
        for k in 0..x.len() {
            a[(k, k)] += lam * diag[k];
        }
        let step = match a.clone().cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => match a.lu().solve(&(-&g)) {
                Some(s) => s,
                None => {
                    lambda = Some(lam * nu);
                    nu *= 2.0;
                    continue;
                }
            },
        };
        let x_new: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let trial = f(&x_new).map(DVector::from_vec);
        let accepted = match trial {
            Some(r_new) if r_new.iter().all(|v| v.is_finite()) => {
                let cost_new = r_new.norm_squared();
                // predicted reduction of the linearized model
                let predicted = -(2.0 * step.dot(&g) + (&j * &step).norm_squared());
                let rho = if predicted > 0.0 { (cost - cost_new) / predicted } else { -1.0 };
                if rho > 0.0 {
                    let rel_drop = (cost - cost_new) / cost.max(1e-300);
                    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let small_step = step.norm() < opts.xtol * (x_norm + opts.xtol);
                    x = x_new;
                    r = r_new;
                    cost = cost_new;
                    lambda = Some(lam * (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3)));
                    nu = 2.0;
                    j = jacobian(&mut f, &x, &r)?;
                    if small_step || rel_drop < opts.ftol {
                        converged = true;
                    }
                    true
                } else {
                    false
                }
            }
            _ => false,
        };
        if converged {
            break;
        }
        if !accepted {
            lambda = Some(lam * nu);
            nu *= 2.0;
            if lam > 1e30 {
                // cannot make progress: at a minimum to working precision
                converged = true;
                break;
            }
        }
    }
    let jtj_diag = (0..x.len()).map(|k| j.column(k).norm_squared()).collect();
    Some(LmResult { x, cost, n_residuals: m, iterations, converged, jtj_diag })
}
