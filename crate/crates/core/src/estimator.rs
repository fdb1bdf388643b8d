//! Recovery-based error indicators, Dörfler marking and the adaptive loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cr_fem::{self, ProjectedQuadrature, ScalarCr, VectorCr};
use crate::error::{Error, Result};
use crate::error_norms::{compute_errors, ErrorSet};
use crate::geometry::Problem;
use crate::mesh::{bisect, ProjectionMode, SurfaceMesh};
use crate::quadrature::TriangleRule;
use crate::recovery::RecoveryOperator;
use crate::solver::{CgOptions, SolveReport};

/// Per-triangle indicators `eta_T = ||G_h u_h - grad u_h||_{L2(T)}` and their l2 sum.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    pub eta_t: Vec<f64>,
    pub eta_global: f64,
}

impl IndicatorField {
    pub fn from_local(eta_t: Vec<f64>) -> Self {
        let eta_global = eta_t.iter().map(|e| e * e).sum::<f64>().sqrt();
        Self { eta_t, eta_global }
    }
}

/// Which part of the recovered gradient enters `eta_T`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorMode {
    /// Component of `G_h u_h` in the plane of `T`, matching the broken
    /// gradient error, which compares face-tangential vectors.
    #[default]
    Tangential,
    /// Full 3-vector difference; includes the `O(h)` normal component of
    /// `G_h u_h` relative to the flat face.
    Full,
}

pub fn indicators(u_h: &ScalarCr, g_h: &VectorCr, mesh: &SurfaceMesh, rule: &TriangleRule) -> Result<IndicatorField> {
    indicators_with(u_h, g_h, mesh, rule, IndicatorMode::Tangential)
}

pub fn indicators_with(
    u_h: &ScalarCr,
    g_h: &VectorCr,
    mesh: &SurfaceMesh,
    rule: &TriangleRule,
    mode: IndicatorMode,
) -> Result<IndicatorField> {
    let eta_t = (0..mesh.face_count())
        .into_par_iter()
        .map(|t| {
            let grad = u_h.face_gradient(mesh, t)?;
            let area = mesh.area(t);
            let n = mesh.face_normal(t);
            let sq: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(l, w)| {
                    let mut g = g_h.evaluate(mesh, t, l);
                    if mode == IndicatorMode::Tangential {
                        g -= g.dot(&n) * n;
                    }
                    w * (g - grad).norm_squared()
                })
                .sum();
            Ok((area * sq).sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IndicatorField::from_local(eta_t))
}

/// Smallest set of triangles, taken in order of decreasing `eta_T` (ties by
/// index), whose squared indicators sum to at least `theta^2 eta^2`.
pub fn dorfler_mark(ind: &IndicatorField, theta: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ind.eta_t.len()).collect();
    order.sort_by(|&a, &b| ind.eta_t[b].total_cmp(&ind.eta_t[a]).then(a.cmp(&b)));
    let target = theta * theta * ind.eta_global * ind.eta_global;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for t in order {
        if acc >= target && !marked.is_empty() {
            break;
        }
        if ind.eta_t[t] == 0.0 && acc >= target {
            break;
        }
        acc += ind.eta_t[t] * ind.eta_t[t];
        marked.push(t);
    }
    marked
}

/// Numerical settings shared by uniform and adaptive runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretization {
    pub load_degree: usize,
    pub error_degree: usize,
    pub indicator_degree: usize,
    pub indicator_mode: IndicatorMode,
    pub projection: ProjectionMode,
    pub cg: CgOptions,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            load_degree: 4,
            error_degree: 4,
            indicator_degree: 4,
            indicator_mode: IndicatorMode::Tangential,
            projection: ProjectionMode::Exact,
            cg: CgOptions::default(),
        }
    }
}

/// Everything computed on one mesh.
#[derive(Clone, Debug)]
pub struct Step {
    pub dof: usize,
    pub u_h: ScalarCr,
    pub g_h: VectorCr,
    pub indicators: IndicatorField,
    pub errors: Option<ErrorSet>,
    pub report: SolveReport,
}

impl Step {
    /// Effectivity `eta / |u^e - u_h|_{H1(Gamma_h; T_h)}`.
    pub fn effectivity(&self) -> Option<f64> {
        self.errors.map(|e| self.indicators.eta_global / e.de)
    }
}

/// Assemble, solve, recover, estimate and (with a known solution) measure errors.
pub fn solve_and_estimate(problem: &Problem, mesh: &SurfaceMesh, disc: &Discretization) -> Result<Step> {
    let load_quad = ProjectedQuadrature::new(mesh, &problem.surface, TriangleRule::for_degree(disc.load_degree))?;
    let solution = cr_fem::solve(mesh, &problem.source, &load_quad, &disc.cg)?;
    let g_h = RecoveryOperator::new(mesh)?.apply(&solution.u_h);
    let indicators = indicators_with(
        &solution.u_h,
        &g_h,
        mesh,
        &TriangleRule::for_degree(disc.indicator_degree),
        disc.indicator_mode,
    )?;
    let errors = match &problem.exact {
        Some(u) => {
            let err_quad = if disc.error_degree == disc.load_degree {
                load_quad
            } else {
                ProjectedQuadrature::new(mesh, &problem.surface, TriangleRule::for_degree(disc.error_degree))?
            };
            Some(compute_errors(&problem.surface, u, &solution.u_h, &g_h, mesh, &err_quad)?)
        }
        None => None,
    };
    Ok(Step {
        dof: mesh.edge_count(),
        u_h: solution.u_h,
        g_h,
        indicators,
        errors,
        report: solution.report,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub round: usize,
    pub dof: usize,
    pub eta: f64,
    pub errors: Option<ErrorSet>,
    pub kappa: Option<f64>,
    pub cg_iterations: usize,
}

#[derive(Clone, Debug, Default)]
pub struct AdaptiveTrace {
    pub rows: Vec<TraceRow>,
}

/// Result of an adaptive run; `failure` is set when a round aborted.
#[derive(Clone, Debug)]
pub struct AdaptiveOutcome {
    pub trace: AdaptiveTrace,
    /// Mesh after the last completed refinement.
    pub final_mesh: SurfaceMesh,
    /// Mesh on which the last recorded round was solved, with its marked set.
    pub last_solved_mesh: SurfaceMesh,
    pub last_marked: Vec<usize>,
    /// Mesh of every solved round, when requested.
    pub meshes: Vec<SurfaceMesh>,
    pub failure: Option<String>,
}

/// Solve, estimate, mark and bisect for `rounds` rounds.
pub fn adapt_loop(
    problem: &Problem,
    initial: &SurfaceMesh,
    rounds: usize,
    theta: f64,
    disc: &Discretization,
    keep_meshes: bool,
    mut on_round: impl FnMut(&TraceRow),
) -> AdaptiveOutcome {
    let mut mesh = initial.clone();
    let mut out = AdaptiveOutcome {
        trace: AdaptiveTrace::default(),
        final_mesh: mesh.clone(),
        last_solved_mesh: mesh.clone(),
        last_marked: Vec::new(),
        meshes: Vec::new(),
        failure: None,
    };
    for round in 0..rounds {
        let step = match solve_and_estimate(problem, &mesh, disc) {
            Ok(s) => s,
            Err(e) => {
                out.failure = Some(format!("round {round}: {e}"));
                break;
            }
        };
        let row = TraceRow {
            round,
            dof: step.dof,
            eta: step.indicators.eta_global,
            errors: step.errors,
            kappa: step.effectivity(),
            cg_iterations: step.report.iterations,
        };
        on_round(&row);
        out.trace.rows.push(row);
        let marked = dorfler_mark(&step.indicators, theta);
        if keep_meshes {
            out.meshes.push(mesh.clone());
        }
        let next = bisect(&mesh, &marked, &problem.surface, disc.projection);
        out.last_solved_mesh = mesh.clone();
        out.last_marked = marked;
        match next {
            Ok(m) => mesh = m,
            Err(e) => {
                out.failure = Some(format!("round {round}: {e}"));
                break;
            }
        }
        out.final_mesh = mesh.clone();
    }
    out
}

/// Rejects marking parameters outside `(0, 1]`.
pub fn validate_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("theta must lie in (0, 1], got {theta}")))
    }
}
