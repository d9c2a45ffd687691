use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qtomo::commands::{
    analyze_pom, estimate_process, estimate_state, simulate, CommandOutput, EstimateArgs, ProcessMethod, SimulateArgs,
    StateMethod,
};
use qtomo::config::FlagOverrides;
use qtomo::error::{CliError, CliResult};

/// Maximum-likelihood state and process tomography.
#[derive(Parser)]
#[command(name = "qtomo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Estimation {
    /// Entropy weight λ (MLME only).
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Initial step size ε.
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Defect tolerance for convergence.
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// JSON file with estimation settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exit 0 even if the iteration did not converge.
    #[arg(long)]
    allow_nonconverged: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Estimation {
    fn args(&self) -> EstimateArgs<'_> {
        EstimateArgs {
            config_file: self.config.as_deref(),
            flags: FlagOverrides { lambda: self.lambda, eps: self.eps, max_iters: self.max_iters, tol: self.tol },
            out: self.out.as_deref(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StateMethodArg {
    Ml,
    Mlme,
    ClosedForm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProcessMethodArg {
    Ml,
    Mlme,
}

#[derive(Subcommand)]
enum Command {
    /// Gram-matrix spectrum and classification of a POM.
    AnalyzePom {
        /// POM file or builtin name (builtin:trine, builtin:six, builtin:z, builtin:qutrit-two-outcome).
        pom: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample counts for a state, or a process dataset for a channel.
    Simulate {
        #[arg(long, conflicts_with_all = ["channel", "inputs"], required_unless_present = "channel")]
        state: Option<PathBuf>,
        #[arg(long, requires = "inputs")]
        channel: Option<PathBuf>,
        #[arg(long, requires = "channel")]
        inputs: Option<PathBuf>,
        #[arg(long)]
        pom: String,
        /// Copies (per input for channels).
        #[arg(short = 'N', long = "copies")]
        copies: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate a state from a counts file.
    EstimateState {
        #[arg(long)]
        counts: PathBuf,
        /// Overrides the POM named in the counts file.
        #[arg(long)]
        pom: Option<String>,
        #[arg(long, value_enum)]
        method: StateMethodArg,
        #[command(flatten)]
        est: Estimation,
    },
    /// Estimate a channel from a process dataset.
    EstimateProcess {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        method: ProcessMethodArg,
        #[command(flatten)]
        est: Estimation,
    },
}

fn init_logging() {
    let level = match std::env::var("QTOMO_LOG").as_deref() {
        Ok("info") => log::LevelFilter::Info,
        Ok("trace") => log::LevelFilter::Trace,
        Ok("quiet") | Err(_) => log::LevelFilter::Off,
        Ok(other) => {
            eprintln!("warning: QTOMO_LOG={other:?} not recognized; use quiet, info or trace");
            log::LevelFilter::Off
        }
    };
    env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).init();
}

fn run(cli: Cli) -> CliResult<()> {
    let (out, allow) = match cli.command {
        Command::AnalyzePom { pom, out } => (analyze_pom(&pom, out.as_deref())?, false),
        Command::Simulate { state, channel, inputs, pom, copies, seed, out } => {
            let a = SimulateArgs {
                state: state.as_deref(),
                channel: channel.as_deref(),
                inputs: inputs.as_deref(),
                pom_ref: &pom,
                copies,
                seed,
                out: out.as_deref(),
            };
            (simulate(&a)?, false)
        }
        Command::EstimateState { counts, pom, method, est } => {
            let m = match method {
                StateMethodArg::Ml => StateMethod::Ml,
                StateMethodArg::Mlme => StateMethod::Mlme,
                StateMethodArg::ClosedForm => StateMethod::ClosedForm,
            };
            (estimate_state(&counts, pom.as_deref(), m, &est.args())?, est.allow_nonconverged)
        }
        Command::EstimateProcess { dataset, method, est } => {
            let m = match method {
                ProcessMethodArg::Ml => ProcessMethod::Ml,
                ProcessMethodArg::Mlme => ProcessMethod::Mlme,
            };
            (estimate_process(&dataset, m, &est.args())?, est.allow_nonconverged)
        }
    };
    let CommandOutput { summary, not_converged } = out;
    print!("{summary}");
    match not_converged {
        Some((residual, iterations)) if !allow => Err(CliError::NotConverged { residual, iterations }),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    init_logging();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
