use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use esbp::cases::{run_case, run_study, setup, write_study, OutputPaths};
use esbp::config::CaseConfig;
use esbp::diagnostics::study_csv;
use esbp::verify::{verify_all, VerifyOptions, DEFAULT_TOLERANCE};
use esbp::SolverError;

const EXIT_FAILURE: u8 = 1;
const EXIT_INADMISSIBLE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

/// Entropy-stable spectral-element Navier-Stokes solver.
///
/// Exit codes: 0 success, 1 failure (including failed verification),
/// 2 loss of positivity, 3 configuration error.
#[derive(Debug, Parser)]
#[command(name = "esbp", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ESBP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a case and write the entropy time series, wall forces and
    /// final fields.
    ///
    /// Config defaults: gamma = 1.4, prandtl = 0.72, r = 1, mu = 0,
    /// mode = conservative, beta = auto (1/h), rtol = atol = 1e-10,
    /// safety = 0.9, k_p = 0.08, k_i = 0.14, t_end = 1,
    /// output dir = "output".
    Run {
        config: PathBuf,
        /// Overrides `[output] dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check the pointwise entropy identities on random states.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Negative control: drop the velocity flip of the wall mirror state.
        #[arg(long, hide = true)]
        corrupt_mirror: bool,
    },
    /// Run the `[study]` refinement sweep of a case and write the rate table.
    Study {
        config: PathBuf,
        /// Overrides `[study] output` (relative to the output dir).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn exit_code(err: &SolverError) -> u8 {
    match err {
        SolverError::Config(_) | SolverError::InvalidGas(_) | SolverError::InvalidMesh(_) | SolverError::WallVelocityNotTangent { .. } => EXIT_CONFIG,
        e if e.is_admissibility() => EXIT_INADMISSIBLE,
        _ => EXIT_FAILURE,
    }
}

fn run(cli: Cli) -> Result<u8, SolverError> {
    match cli.command {
        Command::Run { config, output_dir } => {
            let cfg = CaseConfig::from_file(&config)?;
            let case = setup(&cfg)?;
            let outputs = OutputPaths::from_config(&cfg, output_dir.as_deref());
            eprintln!("{}: {} elements, order {}", cfg.name, case.disc.mesh.elements.len(), case.disc.mesh.order());
            let out = run_case(&cfg, &case, &outputs)?;
            println!(
                "t = {}, accepted = {}, rejected = {}, max |residual|/scale = {:.3e}",
                out.outcome.t,
                out.outcome.accepted,
                out.outcome.rejected,
                out.worst_relative_residual()
            );
            Ok(0)
        }
        Command::Verify { trials, seed, tolerance, corrupt_mirror } => {
            let report = verify_all(seed, trials, VerifyOptions { corrupt_mirror, tolerance: Some(tolerance) })?;
            println!("{report}");
            Ok(if report.passed() { 0 } else { EXIT_FAILURE })
        }
        Command::Study { config, output } => {
            let cfg = CaseConfig::from_file(&config)?;
            let study = cfg
                .study
                .as_ref()
                .ok_or_else(|| SolverError::Config("the configuration has no [study] section".into()))?;
            let path = PathBuf::from(&cfg.output.dir).join(output.unwrap_or_else(|| PathBuf::from(&study.output)));
            let rows = run_study(&cfg)?;
            write_study(&path, &rows)?;
            print!("{}", study_csv(&rows));
            Ok(if rows.iter().any(|r| r.flagged) { EXIT_FAILURE } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
