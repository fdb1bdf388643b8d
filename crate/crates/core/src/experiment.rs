//! Uniform convergence studies and adaptive runs driven by an `ExperimentConfig`.

use std::path::Path;

use crate::config::{ExperimentConfig, RefinementMode};
use crate::error::{Error, Result};
use crate::error_norms::{convergence_table, ConvergenceRow};
use crate::estimator::{adapt_loop, solve_and_estimate, AdaptiveOutcome, Step};
use crate::export::{recovered_csv, solution_csv, table_csv, trace_csv, vtk_faces, write_text};
use crate::mesh::{uniform_refine, write_off, SurfaceMesh};

pub const TABLE_FILE: &str = "convergence.csv";
pub const TRACE_FILE: &str = "adaptive_trace.csv";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";

#[derive(Clone, Debug)]
pub struct ConvergenceOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub final_mesh: SurfaceMesh,
    pub final_step: Step,
}

fn write_fields(out: &Path, cfg: &ExperimentConfig, mesh: &SurfaceMesh, step: &Step) -> Result<()> {
    if cfg.output.solution {
        write_text(&out.join("solution.csv"), &solution_csv(mesh, &step.u_h))?;
        write_text(&out.join("recovered_gradient.csv"), &recovered_csv(&step.g_h))?;
    }
    if cfg.output.vtk {
        write_text(
            &out.join("solution.vtk"),
            &vtk_faces(mesh, Some(("u_h", &step.u_h)), Some(("G_h", &step.g_h))),
        )?;
    }
    Ok(())
}

/// One row per uniformly refined level; writes the table when `out` is given.
pub fn run_convergence(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    mut progress: impl FnMut(&str),
) -> Result<ConvergenceOutcome> {
    cfg.validate()?;
    if cfg.refinement.mode != RefinementMode::Uniform {
        return Err(Error::Config("convergence runs need refinement.mode = \"uniform\"".into()));
    }
    let problem = cfg.problem()?;
    if problem.exact.is_none() {
        return Err(Error::Config("convergence runs need a known solution".into()));
    }
    let disc = cfg.discretization();
    let mut mesh = cfg.initial_mesh(&problem.surface)?;
    let mut levels = Vec::new();
    let mut last = None;
    for level in 0..cfg.refinement.rounds {
        if level > 0 {
            mesh = uniform_refine(&mesh, &problem.surface, disc.projection)?;
        }
        let step = solve_and_estimate(&problem, &mesh, &disc)?;
        let errors = step.errors.expect("exact solution present");
        progress(&format!(
            "level {level}: dof {} e {:.3e} De {:.3e} Die {:.3e} Dre {:.3e} (cg {})",
            step.dof, errors.e, errors.de, errors.die, errors.dre, step.report.iterations
        ));
        levels.push((step.dof, errors));
        last = Some(step);
    }
    let rows = convergence_table(&levels);
    let final_step = last.expect("at least one round");
    if let Some(out) = out {
        write_text(&out.join(EFFECTIVE_CONFIG_FILE), &cfg.to_toml_string())?;
        write_text(&out.join(TABLE_FILE), &table_csv(&rows))?;
        write_fields(out, cfg, &mesh, &final_step)?;
    }
    Ok(ConvergenceOutcome {
        rows,
        final_mesh: mesh,
        final_step,
    })
}

/// Adaptive loop; the partial trace is written even when a round fails,
/// after which the failure is returned as an error.
pub fn run_adaptive(
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    mut progress: impl FnMut(&str),
) -> Result<AdaptiveOutcome> {
    cfg.validate()?;
    if cfg.refinement.mode != RefinementMode::Adaptive {
        return Err(Error::Config("adaptive runs need refinement.mode = \"adaptive\"".into()));
    }
    let problem = cfg.problem()?;
    let disc = cfg.discretization();
    let initial = cfg.initial_mesh(&problem.surface)?;
    let outcome = adapt_loop(
        &problem,
        &initial,
        cfg.refinement.rounds,
        cfg.refinement.theta,
        &disc,
        cfg.output.mesh_snapshots,
        |row| {
            let mut line = format!("round {}: dof {} eta {:.3e}", row.round, row.dof, row.eta);
            if let (Some(e), Some(k)) = (row.errors, row.kappa) {
                line += &format!(" De {:.3e} Dre {:.3e} kappa {k:.3}", e.de, e.dre);
            }
            progress(&line);
        },
    );
    if let Some(out) = out {
        write_text(&out.join(EFFECTIVE_CONFIG_FILE), &cfg.to_toml_string())?;
        write_text(&out.join(TRACE_FILE), &trace_csv(&outcome.trace))?;
        for (k, m) in outcome.meshes.iter().enumerate() {
            write_text(&out.join(format!("mesh_round_{k:02}.off")), &write_off(m))?;
        }
        if (cfg.output.solution || cfg.output.vtk) && outcome.failure.is_none() {
            let step = solve_and_estimate(&problem, &outcome.last_solved_mesh, &disc)?;
            write_fields(out, cfg, &outcome.last_solved_mesh, &step)?;
        }
    }
    if let Some(msg) = &outcome.failure {
        return Err(Error::Config(format!("adaptive run aborted at {msg}; partial trace kept")));
    }
    Ok(outcome)
}
