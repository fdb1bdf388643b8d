//! Discrete error norms on `Gamma_h` against a known solution extended by
//! `u^e = u o p`, and DOF-based convergence orders.

use rayon::prelude::*;
use serde::Serialize;

use crate::cr_fem::{interpolate_cr, ProjectedQuadrature, ScalarCr, VectorCr};
use crate::error::Result;
use crate::geometry::{AmbientField, LevelSetSurface};
use crate::mesh::SurfaceMesh;
use crate::Vec3;

fn sum_faces(per_face: Vec<Result<f64>>) -> Result<f64> {
    let mut total = 0.0;
    for v in per_face {
        total += v?;
    }
    Ok(total)
}

/// `||u^e - u_h||^2_{L2(T)}` per face.
pub fn l2_error_squared_per_face(
    u: &AmbientField,
    u_h: &ScalarCr,
    mesh: &SurfaceMesh,
    quad: &ProjectedQuadrature,
) -> Vec<f64> {
    (0..mesh.face_count())
        .into_par_iter()
        .map(|t| {
            quad.face_range(t)
                .zip(&quad.rule.points)
                .map(|(k, l)| {
                    let d = u.value(&quad.projected[k]) - u_h.evaluate(mesh, t, l);
                    quad.weights[k] * d * d
                })
                .sum()
        })
        .collect()
}

pub fn l2_error(u: &AmbientField, u_h: &ScalarCr, mesh: &SurfaceMesh, quad: &ProjectedQuadrature) -> f64 {
    l2_error_squared_per_face(u, u_h, mesh, quad).iter().sum::<f64>().sqrt()
}

/// `|u^e - u_h|_{H1(Gamma_h; T_h)}` with the exact side `P_h (grad_Gamma u) o p`.
pub fn broken_h1_error(
    surface: &LevelSetSurface,
    u: &AmbientField,
    u_h: &ScalarCr,
    mesh: &SurfaceMesh,
    quad: &ProjectedQuadrature,
) -> Result<f64> {
    Ok(sum_faces(broken_h1_error_squared_per_face(surface, u, u_h, mesh, quad))?.sqrt())
}

pub fn broken_h1_error_squared_per_face(
    surface: &LevelSetSurface,
    u: &AmbientField,
    u_h: &ScalarCr,
    mesh: &SurfaceMesh,
    quad: &ProjectedQuadrature,
) -> Vec<Result<f64>> {
    (0..mesh.face_count())
        .into_par_iter()
        .map(|t| {
            let gh = u_h.face_gradient(mesh, t)?;
            let n = mesh.face_normal(t);
            let mut acc = 0.0;
            for k in quad.face_range(t) {
                let exact = surface.tangential_gradient(u, &quad.projected[k])?;
                let exact_h = exact - exact.dot(&n) * n;
                acc += quad.weights[k] * (exact_h - gh).norm_squared();
            }
            Ok(acc)
        })
        .collect()
}

/// `|Pi_h u^e - u_h|_{H1(Gamma_h; T_h)}` where `Pi_h` takes edge averages.
pub fn interpolant_gradient_error(
    surface: &LevelSetSurface,
    u: &AmbientField,
    u_h: &ScalarCr,
    mesh: &SurfaceMesh,
) -> Result<f64> {
    let pi = interpolate_cr(mesh, |x| Ok(u.value(&surface.closest_point(x)?)))?;
    broken_h1_distance(&pi, u_h, mesh)
}

/// Broken H1 seminorm of the difference of two CR functions.
pub fn broken_h1_distance(a: &ScalarCr, b: &ScalarCr, mesh: &SurfaceMesh) -> Result<f64> {
    let diff = ScalarCr::new(a.dofs.iter().zip(&b.dofs).map(|(x, y)| x - y).collect());
    let per_face: Vec<Result<f64>> = (0..mesh.face_count())
        .into_par_iter()
        .map(|t| Ok(mesh.area(t) * diff.face_gradient(mesh, t)?.norm_squared()))
        .collect();
    Ok(sum_faces(per_face)?.sqrt())
}

/// `||(grad_Gamma u) o p - G_h u_h||^2_{L2(T)}` per face, componentwise in R^3.
pub fn recovered_gradient_error_squared_per_face(
    surface: &LevelSetSurface,
    u: &AmbientField,
    g_h: &VectorCr,
    mesh: &SurfaceMesh,
    quad: &ProjectedQuadrature,
) -> Vec<Result<f64>> {
    (0..mesh.face_count())
        .into_par_iter()
        .map(|t| {
            let mut acc = 0.0;
            for (k, l) in quad.face_range(t).zip(&quad.rule.points) {
                let exact = surface.tangential_gradient(u, &quad.projected[k])?;
                let rec: Vec3 = g_h.evaluate(mesh, t, l);
                acc += quad.weights[k] * (exact - rec).norm_squared();
            }
            Ok(acc)
        })
        .collect()
}

pub fn recovered_gradient_error(
    surface: &LevelSetSurface,
    u: &AmbientField,
    g_h: &VectorCr,
    mesh: &SurfaceMesh,
    quad: &ProjectedQuadrature,
) -> Result<f64> {
    Ok(sum_faces(recovered_gradient_error_squared_per_face(surface, u, g_h, mesh, quad))?.sqrt())
}

/// The four reported error quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorSet {
    pub e: f64,
    pub de: f64,
    pub die: f64,
    pub dre: f64,
}

pub fn compute_errors(
    surface: &LevelSetSurface,
    u: &AmbientField,
    u_h: &ScalarCr,
    g_h: &VectorCr,
    mesh: &SurfaceMesh,
    quad: &ProjectedQuadrature,
) -> Result<ErrorSet> {
    Ok(ErrorSet {
        e: l2_error(u, u_h, mesh, quad),
        de: broken_h1_error(surface, u, u_h, mesh, quad)?,
        die: interpolant_gradient_error(surface, u, u_h, mesh)?,
        dre: recovered_gradient_error(surface, u, g_h, mesh, quad)?,
    })
}

/// One line of a convergence table; orders are absent on the first row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub dof: usize,
    pub errors: ErrorSet,
    pub orders: Option<ErrorSet>,
}

/// `log(err_prev / err_cur) / log(dof_cur / dof_prev)`.
pub fn dof_order(dof_prev: usize, err_prev: f64, dof_cur: usize, err_cur: f64) -> f64 {
    (err_prev / err_cur).ln() / (dof_cur as f64 / dof_prev as f64).ln()
}

/// Builds table rows with consecutive-row orders.
pub fn convergence_table(levels: &[(usize, ErrorSet)]) -> Vec<ConvergenceRow> {
    levels
        .iter()
        .enumerate()
        .map(|(i, &(dof, errors))| {
            let orders = (i > 0).then(|| {
                let (pd, pe) = levels[i - 1];
                ErrorSet {
                    e: dof_order(pd, pe.e, dof, errors.e),
                    de: dof_order(pd, pe.de, dof, errors.de),
                    die: dof_order(pd, pe.die, dof, errors.die),
                    dre: dof_order(pd, pe.dre, dof, errors.dre),
                }
            });
            ConvergenceRow { dof, errors, orders }
        })
        .collect()
}

/// Negative least-squares slope of `log err` against `log dof`.
pub fn fitted_order(dofs: &[usize], errs: &[f64]) -> f64 {
    assert_eq!(dofs.len(), errs.len());
    assert!(dofs.len() >= 2, "need two points for a slope");
    let xs: Vec<f64> = dofs.iter().map(|&d| (d as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -sxy / sxx
}
