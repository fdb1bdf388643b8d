//! CSV tables and traces, per-edge field dumps and legacy VTK face exports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cr_fem::{CrFunction, ScalarCr, VectorCr};
use crate::error::Result;
use crate::error_norms::ConvergenceRow;
use crate::estimator::AdaptiveTrace;
use crate::mesh::SurfaceMesh;
use crate::Vec3;

pub const TABLE_HEADER: &str = "dof,e,order_e,De,order_De,Die,order_Die,Dre,order_Dre";
pub const TRACE_HEADER: &str = "round,dof,eta,e,De,Die,Dre,kappa";
pub const TRACE_HEADER_NO_EXACT: &str = "round,dof,eta";

fn num(x: f64) -> String {
    format!("{x:.6e}")
}

fn order(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}

pub fn table_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        let o = r.orders;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.dof,
            num(r.errors.e),
            order(o.map(|o| o.e)),
            num(r.errors.de),
            order(o.map(|o| o.de)),
            num(r.errors.die),
            order(o.map(|o| o.die)),
            num(r.errors.dre),
            order(o.map(|o| o.dre)),
        );
    }
    out
}

pub fn trace_csv(trace: &AdaptiveTrace) -> String {
    let with_errors = trace.rows.iter().all(|r| r.errors.is_some()) && !trace.rows.is_empty();
    let mut out = String::from(if with_errors { TRACE_HEADER } else { TRACE_HEADER_NO_EXACT });
    out.push('\n');
    for r in &trace.rows {
        match (with_errors, r.errors) {
            (true, Some(e)) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.round,
                    r.dof,
                    num(r.eta),
                    num(e.e),
                    num(e.de),
                    num(e.die),
                    num(e.dre),
                    order(r.kappa),
                );
            }
            _ => {
                let _ = writeln!(out, "{},{},{}", r.round, r.dof, num(r.eta));
            }
        }
    }
    out
}

pub fn solution_csv(mesh: &SurfaceMesh, u_h: &ScalarCr) -> String {
    let mut out = String::from("edge_id,v0,v1,mx,my,mz,value\n");
    for (e, edge) in mesh.edges().iter().enumerate() {
        let m = mesh.edge_midpoint(e);
        let _ = writeln!(
            out,
            "{e},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            edge.vertices[0], edge.vertices[1], m[0], m[1], m[2], u_h.dofs[e]
        );
    }
    out
}

pub fn recovered_csv(g_h: &VectorCr) -> String {
    let mut out = String::from("edge_id,gx,gy,gz\n");
    for (e, g) in g_h.dofs.iter().enumerate() {
        let _ = writeln!(out, "{e},{:.16e},{:.16e},{:.16e}", g[0], g[1], g[2]);
    }
    out
}

/// Values of a CR function at the three vertices of face `t`.
fn vertex_values<T>(f: &CrFunction<T>, mesh: &SurfaceMesh, t: usize) -> [T; 3]
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|l| f.evaluate(mesh, t, &l))
}

/// Legacy VTK unstructured grid with unshared vertices per face, so the
/// per-face linear fields are shown discontinuously.
pub fn vtk_faces(mesh: &SurfaceMesh, scalar: Option<(&str, &ScalarCr)>, vector: Option<(&str, &VectorCr)>) -> String {
    let nf = mesh.face_count();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nsurface CR field\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", 3 * nf);
    for tri in mesh.triangles() {
        for &v in tri {
            let p = mesh.vertices()[v];
            let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
        }
    }
    let _ = writeln!(out, "CELLS {} {}", nf, 4 * nf);
    for t in 0..nf {
        let _ = writeln!(out, "3 {} {} {}", 3 * t, 3 * t + 1, 3 * t + 2);
    }
    let _ = writeln!(out, "CELL_TYPES {nf}");
    for _ in 0..nf {
        out.push_str("5\n");
    }
    if scalar.is_some() || vector.is_some() {
        let _ = writeln!(out, "POINT_DATA {}", 3 * nf);
    }
    if let Some((name, u)) = scalar {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for t in 0..nf {
            for v in vertex_values(u, mesh, t) {
                let _ = writeln!(out, "{v:.16e}");
            }
        }
    }
    if let Some((name, g)) = vector {
        let _ = writeln!(out, "VECTORS {name} double");
        for t in 0..nf {
            for v in vertex_values::<Vec3>(g, mesh, t) {
                let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
            }
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}
