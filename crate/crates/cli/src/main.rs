use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ihdg::analysis::{run_convergence, sci, state_errors, AnalysisError};
use ihdg::config::{MeshLoadError, MeshSource, RunConfig};
use ihdg::export::export_state;
use ihdg::problems::by_name;
use ihdg::solver::{Solver, SolverError};

#[derive(Parser)]
#[command(name = "ihdg", version, about = "Interpolatory HDG solver for semilinear reaction-diffusion problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study over structured square meshes and print the error table.
    Converge {
        config: PathBuf,
        /// Comma-separated resolutions overriding `levels` in the config.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run a single simulation and export the requested snapshots.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Suppress the per-step log.
        #[arg(long)]
        quiet: bool,
    },
    /// Print mesh statistics for `square:N` or a mesh file.
    MeshInfo { mesh: String },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Self { code: 2, message: message.to_string() }
    }

    fn solver(message: impl ToString) -> Self {
        Self { code: 3, message: message.to_string() }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Self { code: 4, message: format!("{}: {err}", path.display()) }
    }
}

impl From<MeshLoadError> for Failure {
    fn from(e: MeshLoadError) -> Self {
        match e {
            MeshLoadError::Io(path, err) => Failure::io(&path, err),
            MeshLoadError::Mesh(err) => Failure::config(err),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidConfig(_)
            | SolverError::FieldCountMismatch { .. }
            | SolverError::MissingExactFlux { .. }
            | SolverError::InvalidDiffusion { .. } => Failure::config(e),
            _ => Failure::solver(e),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Level { n, source } => {
                let inner = Failure::from(source);
                Failure { code: inner.code, message: format!("at level n = {n}: {}", inner.message) }
            }
            AnalysisError::NoExactSolution(_) | AnalysisError::Mesh(_) => Failure::config(e),
            AnalysisError::Fe(_) => Failure::solver(e),
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    RunConfig::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn converge(config: &Path, levels: Option<Vec<usize>>, csv: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(levels) = levels {
        if levels.is_empty() || levels.contains(&0) {
            return Err(Failure::config("--levels needs positive resolutions"));
        }
        cfg.levels = levels;
    }
    let problem = by_name(&cfg.problem).expect("validated by the config parser");
    let table = run_convergence(&problem, cfg.k, &cfg.levels, &cfg.convergence_settings())?;
    print!("{}", table.to_text());
    if let Some(path) = csv {
        fs::write(&path, table.to_csv()).map_err(|e| Failure::io(&path, e))?;
    }
    Ok(())
}

fn run(config: &Path, output_dir: Option<PathBuf>, quiet: bool) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let out_dir = output_dir.unwrap_or_else(|| cfg.output_dir.clone());
    let problem = by_name(&cfg.problem).expect("validated by the config parser");
    let mesh = cfg.mesh.load()?;
    let solver = Solver::new(problem, mesh.clone(), cfg.k, cfg.solver_config(&mesh))?;
    fs::create_dir_all(&out_dir).map_err(|e| Failure::io(&out_dir, e))?;

    if cfg.dump_matrices {
        for (name, m) in solver.system().named() {
            let path = out_dir.join(format!("{name}.txt"));
            let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
            m.write_triplets(std::io::BufWriter::new(file)).map_err(|e| Failure::io(&path, e))?;
        }
    }

    let output = solver.run_with(&cfg.snapshots, |rec| {
        if !quiet {
            println!("{rec}");
        }
    })?;

    let mut index = String::from("index,requested_time,time\n");
    for (i, (requested, state)) in output.snapshots.iter().enumerate() {
        export_state(&solver, state, &out_dir, &format!("snap{i:03}")).map_err(|e| Failure::io(&out_dir, e))?;
        index.push_str(&format!("{i},{requested},{}\n", state.time));
    }
    let index_path = out_dir.join("snapshots.csv");
    fs::write(&index_path, index).map_err(|e| Failure::io(&index_path, e))?;
    export_state(&solver, &output.final_state, &out_dir, "final").map_err(|e| Failure::io(&out_dir, e))?;

    let t = output.final_state.time;
    if solver.problem().has_exact_solution() {
        for f in 0..solver.num_fields() {
            let [q, u, us] = state_errors(&solver, &output.final_state, f)?;
            println!("final t={t} field={} err_q={} err_u={} err_ustar={}", solver.problem().fields[f].name, sci(q), sci(u), sci(us));
        }
    } else {
        println!("final t={t} steps={}", output.records.len());
    }
    Ok(())
}

fn mesh_info(source: &str) -> Result<(), Failure> {
    let mesh = MeshSource::parse(source).map_err(Failure::config)?.load()?;
    let m = mesh.metrics();
    println!("vertices {}", mesh.vertices().len());
    println!("elements {}", mesh.num_elements());
    println!("faces {}", mesh.num_faces());
    println!("interior_faces {}", mesh.num_interior_faces());
    println!("boundary_faces {}", mesh.num_faces() - mesh.num_interior_faces());
    println!("euler_characteristic {}", mesh.euler_characteristic());
    println!("area {}", mesh.area());
    println!("h_max {}", m.h_max);
    println!("h_min {}", m.h_min);
    println!("shape_regularity {}", m.shape_regularity);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Converge { config, levels, csv } => converge(&config, levels, csv),
        Command::Run { config, output_dir, quiet } => run(&config, output_dir, quiet),
        Command::MeshInfo { mesh } => mesh_info(&mesh),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
