use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wgfem::mesh::write_mesh;
use wgfem::study::{run_study_with, sci, ConfigFile, MeshFamily, Overrides, StudyConfig, StudyReport};
use wgfem::WgError;

/// Weak Galerkin convergence studies on polygonal meshes.
#[derive(Parser)]
#[command(name = "wgfem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write its tables.
    Study {
        /// TOML config file; command-line flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        /// `a..b` or a comma-separated list.
        #[arg(long)]
        levels: Option<String>,
        /// Quadrature degree for both cell and edge integrals.
        #[arg(long)]
        quad_degree: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated list of `csv` and `md`.
        #[arg(long)]
        format: Option<String>,
    },
    /// Write a generated mesh in the text mesh format.
    Mesh {
        #[arg(long)]
        family: String,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

const CONFIG_ERROR: u8 = 2;
const SOLVER_ERROR: u8 = 3;
const MESH_ERROR: u8 = 4;

fn exit_code(e: &WgError) -> u8 {
    match e {
        WgError::Topology(_) | WgError::Geometry(_) | WgError::Parse { .. } => MESH_ERROR,
        WgError::Config(_) | WgError::Input(_) | WgError::QuadratureDegree { .. } | WgError::Io(_) => CONFIG_ERROR,
        WgError::Singular { .. } | WgError::Convergence { .. } | WgError::NotPositiveDefinite { .. } => SOLVER_ERROR,
    }
}

fn fail(e: &WgError) -> ExitCode {
    eprintln!("wgfem: {e}");
    ExitCode::from(exit_code(e))
}

fn configure_threads() -> Result<(), WgError> {
    let Ok(v) = std::env::var("WGFEM_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| WgError::Config(format!("WGFEM_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| WgError::Config(format!("cannot configure thread pool: {e}")))
}

fn emit(report: &StudyReport) -> Result<(), WgError> {
    match &report.config.out_dir {
        Some(dir) => {
            for p in report.write(dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => print!("{}", report.to_markdown()),
    }
    Ok(())
}

fn study(config_path: Option<PathBuf>, cli: Overrides) -> ExitCode {
    let file = match config_path {
        Some(p) => match ConfigFile::read(&p) {
            Ok(f) => f,
            Err(e) => return fail(&e),
        },
        None => ConfigFile::default(),
    };
    let config = match StudyConfig::resolve(&file, &cli) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let result = run_study_with(&config, |r| {
        eprintln!(
            "level {:>4}  h {}  cells {:>7}  |||e||| {}  |e0| {}  cg {:>5}  {:.2}s",
            r.level,
            sci(r.h),
            r.cells,
            sci(r.triple_bar),
            sci(r.l2_cell),
            r.iterations,
            r.seconds
        );
    });
    match result {
        Ok(report) => match emit(&report) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        },
        Err(failure) => {
            if !failure.partial.rows.is_empty() {
                if let Err(e) = emit(&failure.partial) {
                    eprintln!("wgfem: could not write partial report: {e}");
                }
            }
            eprintln!("wgfem: study aborted at level {}", failure.level);
            fail(&failure.error)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    match cli.command {
        Command::Study { config, problem, family, k, rho, levels, quad_degree, tol, out, format } => {
            let family = match family.map(|f| f.parse::<MeshFamily>()).transpose() {
                Ok(f) => f,
                Err(e) => return fail(&e),
            };
            let overrides =
                Overrides { problem, family, levels, order: k, rho, quad_degree, tol, out_dir: out, formats: format };
            study(config, overrides)
        }
        Command::Mesh { family, level, out } => {
            let family = match family.parse::<MeshFamily>() {
                Ok(f) => f,
                Err(e) => return fail(&e),
            };
            let mesh = match family.generate(level) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("wgfem: {e}");
                    return ExitCode::from(MESH_ERROR);
                }
            };
            match write_mesh(&mesh, &out) {
                Ok(()) => {
                    eprintln!("wrote {} ({} cells, {} edges)", out.display(), mesh.num_cells(), mesh.num_edges());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
