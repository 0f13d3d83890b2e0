//! Damped Newton iteration with a central finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub fd_step: f64,
    /// Step shrink factor during backtracking.
    pub backtrack: f64,
    pub armijo: f64,
    pub max_iter: usize,
    /// Success threshold on the max-norm of the residual.
    pub tol: f64,
    /// Iteration stops early once the residual falls below this.
    pub polish_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-7,
            backtrack: 0.5,
            armijo: 1e-4,
            max_iter: 100,
            tol: 1e-10,
            polish_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn merit(v: &[f64]) -> f64 {
    0.5 * v.iter().map(|x| x * x).sum::<f64>()
}

/// Jacobian by central differences, falling back to one-sided differences
/// where a perturbed point leaves the residual's domain.
pub fn fd_jacobian<R>(residual: &R, x: &[f64], r0: &[f64], step: f64) -> Result<DMatrix<f64>>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fwd = residual(&xp);
        xp[j] = x[j] - h;
        let bwd = residual(&xp);
        xp[j] = x[j];
        match (fwd, bwd) {
            (Ok(a), Ok(b)) => {
                for i in 0..m {
                    jac[(i, j)] = (a[i] - b[i]) / (2.0 * h);
                }
            }
            (Ok(a), Err(_)) => {
                for i in 0..m {
                    jac[(i, j)] = (a[i] - r0[i]) / h;
                }
            }
            (Err(_), Ok(b)) => {
                for i in 0..m {
                    jac[(i, j)] = (r0[i] - b[i]) / h;
                }
            }
            (Err(e), Err(_)) => return Err(e),
        }
    }
    Ok(jac)
}

/// Solves `residual(x) = 0` from `x0`.
///
/// The residual may return an error to mark points outside its domain; the
/// line search then shrinks the step.
pub fn damped_newton<R>(residual: R, x0: &[f64], options: &NewtonOptions) -> Result<NewtonOutcome>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut r = residual(&x)?;
    let mut norm = max_norm(&r);
    let mut iterations = 0;
    while iterations < options.max_iter {
        if norm < options.polish_tol || !norm.is_finite() {
            break;
        }
        iterations += 1;
        let jac = fd_jacobian(&residual, &x, &r, options.fd_step)?;
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };
        let m0 = merit(&r);
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-10 {
            let trial: Vec<f64> = x
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a + lambda * s)
                .collect();
            if let Ok(rt) = residual(&trial) {
                let mt = merit(&rt);
                if mt.is_finite() && mt <= (1.0 - 2.0 * options.armijo * lambda) * m0 {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            lambda *= options.backtrack;
        }
        match accepted {
            Some((xt, rt)) => {
                x = xt;
                r = rt;
                norm = max_norm(&r);
            }
            None => break,
        }
    }
    if norm < options.tol {
        Ok(NewtonOutcome {
            x,
            residual: norm,
            iterations,
        })
    } else {
        Err(Error::NoConvergence {
            iterations,
            residual: norm,
        })
    }
}
