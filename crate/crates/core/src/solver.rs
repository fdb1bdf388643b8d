//! Preconditioned conjugate gradients for symmetric positive-definite systems.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    /// Defaults to `10 N` when `None`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    /// Preconditioned residual norm `sqrt(r^T M^-1 r)` per iteration, starting with the initial one.
    pub residual_history: Vec<f64>,
}

/// Failed solve: the best iterate is kept alongside the report.
#[derive(Debug)]
pub struct SolveFailure {
    pub error: Error,
    pub solution: Vec<f64>,
    pub report: SolveReport,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` from a zero initial guess.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], opts: &CgOptions) -> std::result::Result<(Vec<f64>, SolveReport), Box<SolveFailure>> {
    let n = a.nrows();
    assert_eq!(b.len(), n);
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let inv_diag: Vec<f64> = match opts.preconditioner {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Jacobi => a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect(),
    };

    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    let mut report = SolveReport {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        residual_history: Vec::new(),
    };
    if b_norm == 0.0 {
        return Ok((x, report));
    }

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    report.residual_history.push(rz.sqrt());
    let mut rel = 1.0;

    for k in 0..max_iter {
        if rel <= opts.tol {
            break;
        }
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            report.iterations = k;
            report.relative_residual = rel;
            report.converged = false;
            return Err(Box::new(SolveFailure {
                error: Error::IndefiniteMatrix { iteration: k, curvature },
                solution: x,
                report,
            }));
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        report.residual_history.push(rz_next.sqrt());
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        report.iterations = k + 1;
        rel = dot(&r, &r).sqrt() / b_norm;
    }

    // report the true residual rather than the recursively updated one
    let ax = a.mul_vec(&x);
    let true_res = b.iter().zip(&ax).map(|(b, ax)| (b - ax) * (b - ax)).sum::<f64>().sqrt() / b_norm;
    report.relative_residual = true_res;
    report.converged = rel <= opts.tol;
    if report.converged {
        Ok((x, report))
    } else {
        Err(Box::new(SolveFailure {
            error: Error::NoConvergence {
                what: "conjugate gradients",
                iterations: report.iterations,
                residual: rel,
            },
            solution: x,
            report,
        }))
    }
}
