use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use layerfuse::cli::{cmd_compare, cmd_merge, cmd_run, cmd_validate, into_report, OutputFormat};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Parser)]
#[command(name = "layerfuse", version, about = "Layer-wise CNN feature ensembles")]
struct Args {
    /// Report format on stdout.
    #[arg(long, value_enum, global = true, default_value = "table")]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest and every tensor file it references.
    Validate { manifest: PathBuf },
    /// Cross-validate the method rows of a pipeline config.
    Run { config: PathBuf },
    /// Wilcoxon signed-rank test between two results files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Row of `a` to compare; ids become dataset names.
        #[arg(long, requires = "method_b")]
        method_a: Option<String>,
        #[arg(long, requires = "method_a")]
        method_b: Option<String>,
    },
    /// Merge single-dataset results files into one.
    Merge {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(jobs) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let format = match args.format {
        Format::Json => OutputFormat::Json,
        Format::Table => OutputFormat::Table,
    };
    let report = match args.command {
        Command::Validate { manifest } => cmd_validate(manifest),
        Command::Run { config } => into_report(cmd_run(config)),
        Command::Compare {
            a,
            b,
            method_a,
            method_b,
        } => into_report(cmd_compare(a, b, method_a.as_deref(), method_b.as_deref())),
        Command::Merge { inputs, output } => into_report(cmd_merge(&inputs, output)),
    };
    let text = report.render(format);
    if report.ok {
        print!("{text}");
        ExitCode::SUCCESS
    } else {
        eprint!("{text}");
        ExitCode::FAILURE
    }
}
