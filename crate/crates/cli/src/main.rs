use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use interpmor::cli::{self, Command, JobSpec};
use interpmor::interp::BasisMode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Reduce,
    Irka,
    Tfirka,
    DaeReduce,
    ParamReduce,
    Bode,
    Norms,
    Check,
    GenDelay,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Reduce => Command::Reduce,
            Cmd::Irka => Command::Irka,
            Cmd::Tfirka => Command::TfIrka,
            Cmd::DaeReduce => Command::DaeReduce,
            Cmd::ParamReduce => Command::ParamReduce,
            Cmd::Bode => Command::Bode,
            Cmd::Norms => Command::Norms,
            Cmd::Check => Command::Check,
            Cmd::GenDelay => Command::GenDelay,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Basis {
    Orthonormal,
    Raw,
}

/// Interpolatory model order reduction.
///
/// Exit codes: 0 success, 2 input error, 3 numerical failure,
/// 4 no convergence (results are still written).
#[derive(Debug, Parser)]
#[command(name = "interpmor", version)]
struct Args {
    command: Cmd,
    /// Model manifest (JSON); repeat for `bode` to compare several models.
    #[arg(long = "system")]
    systems: Vec<PathBuf>,
    /// Reduced model manifest for `check` and `norms`.
    #[arg(long)]
    reduced: Option<PathBuf>,
    /// Input weight (descriptor manifest) for `norms`.
    #[arg(long)]
    weight: Option<PathBuf>,
    /// Tangential data (JSON).
    #[arg(long)]
    tangent: Option<PathBuf>,
    #[arg(long)]
    order: Option<usize>,
    /// Relative shift-change tolerance for IRKA and TF-IRKA.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-2)]
    freq_min: f64,
    #[arg(long, default_value_t = 1e2)]
    freq_max: f64,
    #[arg(long, default_value_t = 200)]
    freq_points: usize,
    #[arg(long, value_enum, default_value = "orthonormal")]
    basis: Basis,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `gen-delay`: state dimension.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// `gen-delay`: kappa.
    #[arg(long, default_value_t = 3.0)]
    kappa: f64,
    /// `gen-delay`: delay tau.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_INPUT as u8 } else { 0 });
        }
    };
    let mut job = JobSpec::new(args.command.into(), args.out);
    job.systems = args.systems;
    job.reduced = args.reduced;
    job.weight = args.weight;
    job.tangent = args.tangent;
    job.order = args.order;
    job.tol = args.tol;
    job.max_iters = args.max_iters;
    job.seed = args.seed;
    job.freq_min = args.freq_min;
    job.freq_max = args.freq_max;
    job.freq_points = args.freq_points;
    job.basis = match args.basis {
        Basis::Orthonormal => BasisMode::Orthonormal,
        Basis::Raw => BasisMode::Raw,
    };
    job.delay_n = args.n;
    job.delay_kappa = args.kappa;
    job.delay_tau = args.tau;
    let outcome = cli::run(&job);
    for path in &outcome.artifacts {
        println!("{}", path.display());
    }
    if let Some(msg) = &outcome.error {
        eprintln!("interpmor {}: {msg}", job.command);
    }
    ExitCode::from(outcome.exit_code as u8)
}
