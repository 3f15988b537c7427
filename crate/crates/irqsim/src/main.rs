use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use irqsim::cli::{cmd_gen, cmd_inspect_pcap, cmd_run, cmd_sweep, CliError, GlobalOpts};
use irqsim::config::{ExperimentConfig, OutputFormat, CONFIG_SCHEMA};

#[derive(Parser)]
#[command(
    name = "irqsim",
    version,
    about = "Simulate NIC interrupt moderation stealing CPU time from a real-time workload"
)]
struct Cli {
    /// Experiment configuration file (JSON); see --print-schema.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Result file path (overrides the config's output.path).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Result format (overrides the config's output.format).
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Generator seed override (Poisson loads).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps; output is identical for any value.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Print the JSON schema of the configuration file and exit.
    #[arg(long)]
    print_schema: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write the result file.
    Run,
    /// Run a parameter sweep and write one row per grid point.
    Sweep,
    /// Generate a synthetic load and write it as a canonical trace file.
    Gen,
    /// Summarize a classic PCAP capture and print an inter-arrival histogram.
    InspectPcap {
        /// Capture file to inspect.
        path: PathBuf,
        /// Histogram bin edges in nanoseconds, ascending (default:
        /// log-spaced from 1us to 10s).
        #[arg(long, value_delimiter = ',')]
        edges: Option<Vec<u64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    let path = path
        .as_ref()
        .ok_or_else(|| CliError::Config("missing --config <path>".into()))?;
    Ok(ExperimentConfig::from_path(path)?)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if cli.print_schema {
        print!("{CONFIG_SCHEMA}");
        return Ok(());
    }
    let opts = GlobalOpts {
        out: cli.out,
        format: cli.format.map(Into::into),
        seed: cli.seed,
        jobs: cli.jobs,
    };
    match cli.command {
        None => Err(CliError::Config(
            "missing command (run, sweep, gen, inspect-pcap); see --help".into(),
        )),
        Some(Command::Run) => cmd_run(&load_config(&cli.config)?, &opts),
        Some(Command::Sweep) => cmd_sweep(&load_config(&cli.config)?, &opts),
        Some(Command::Gen) => cmd_gen(&load_config(&cli.config)?, &opts),
        Some(Command::InspectPcap { path, edges }) => {
            cmd_inspect_pcap(&path, edges.as_deref(), &opts)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            eprintln!("irqsim: {err}");
            return ExitCode::from(1);
        }
    };

    // Internal invariant violations (overflow guards, broken engine
    // assumptions) surface as panics; map them to exit code 3 with a
    // one-line diagnostic.
    std::panic::set_hook(Box::new(|info| {
        let msg = info
            .payload()
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| info.payload().downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        eprintln!("irqsim: internal invariant violation: {msg}");
    }));

    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("irqsim: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
