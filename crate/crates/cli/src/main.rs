use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use surface_cr::config::{ExperimentConfig, RefinementMode};
use surface_cr::experiment::{run_adaptive, run_convergence};
use surface_cr::geometry::LevelSetSurface;
use surface_cr::mesh::{load_mesh, save_mesh, MeshFormat, ProjectionMode};

#[derive(Parser, Debug)]
#[command(name = "surfcr", version, about = "Surface Crouzeix-Raviart FEM with gradient recovery and adaptivity")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Uniform refinement study; writes convergence.csv.
    Convergence {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adaptive run; writes adaptive_trace.csv.
    Adaptive {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Projects the vertices of an OFF/OBJ mesh onto a surface.
    ProjectMesh {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "sphere")]
        surface: String,
        #[arg(long, value_enum, default_value_t = Projection::Exact)]
        projection: Projection,
    },
    /// Prints the effective configuration and initial-mesh statistics.
    Info {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report on this mesh file instead of the configured one.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Projection {
    Exact,
    FirstOrder,
    None,
}

impl From<Projection> for ProjectionMode {
    fn from(p: Projection) -> Self {
        match p {
            Projection::Exact => ProjectionMode::Exact,
            Projection::FirstOrder => ProjectionMode::FirstOrder,
            Projection::None => ProjectionMode::None,
        }
    }
}

fn load_config(path: Option<&Path>, mode: Option<RefinementMode>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(mode) = mode {
        if path.is_none() {
            cfg.refinement.mode = mode;
        }
    }
    Ok(cfg)
}

fn mesh_format(path: &Path) -> Result<MeshFormat> {
    MeshFormat::from_path(path).with_context(|| format!("{}: expected a .off or .obj file", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let quiet = cli.quiet;
    let log = |line: &str| {
        if !quiet {
            eprintln!("{line}");
        }
    };
    match cli.command {
        Command::Convergence { config, out } => {
            let mut cfg = load_config(config.as_deref(), Some(RefinementMode::Uniform))?;
            if let Some(out) = out {
                cfg.output.dir = out;
            }
            let dir = cfg.output.dir.clone();
            let result = run_convergence(&cfg, Some(&dir), log)?;
            if !quiet {
                println!("{} levels written to {}", result.rows.len(), dir.display());
            }
        }
        Command::Adaptive { config, out } => {
            let mut cfg = load_config(config.as_deref(), Some(RefinementMode::Adaptive))?;
            if let Some(out) = out {
                cfg.output.dir = out;
            }
            let dir = cfg.output.dir.clone();
            let result = run_adaptive(&cfg, Some(&dir), log)?;
            if !quiet {
                println!("{} rounds written to {}", result.trace.rows.len(), dir.display());
            }
        }
        Command::ProjectMesh {
            input,
            output,
            surface,
            projection,
        } => {
            let surface = LevelSetSurface::by_name(&surface)?;
            let mesh = load_mesh(&input, mesh_format(&input)?)?;
            let projected = mesh.project_vertices(&surface, projection.into())?;
            save_mesh(&projected, &output, mesh_format(&output)?)?;
            let worst = projected
                .vertices()
                .iter()
                .map(|x| surface.phi(x).abs())
                .fold(0.0, f64::max);
            if !quiet {
                println!("{} vertices projected; max |phi| = {worst:.3e}", projected.vertex_count());
            }
        }
        Command::Info { config, mesh } => {
            let cfg = load_config(config.as_deref(), None)?;
            let surface = cfg.surface()?;
            let mesh = match mesh {
                Some(p) => load_mesh(&p, mesh_format(&p)?)?,
                None => cfg.initial_mesh(&surface)?,
            };
            println!("{}", cfg.to_toml_string());
            println!("# surface: {}", surface.name());
            println!("# vertices: {}", mesh.vertex_count());
            println!("# triangles: {}", mesh.face_count());
            println!("# edges (dof): {}", mesh.edge_count());
            println!("# euler characteristic: {}", mesh.euler_characteristic());
            println!("# mesh size h: {:.6e}", mesh.mesh_size());
            println!("# max shape ratio: {:.4}", mesh.max_shape_ratio());
            println!("# area: {:.10}", mesh.total_area());
            let worst = mesh.vertices().iter().map(|x| surface.phi(x).abs()).fold(0.0, f64::max);
            println!("# max |phi| at vertices: {worst:.3e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
