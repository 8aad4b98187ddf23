use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use csl_modes::commands::{run, Command, GlobalOptions};
use csl_modes::config::Format;

#[derive(Debug, Parser)]
#[command(
    name = "csl-modes",
    version,
    about = "Collapse-modified cosmological perturbation modes"
)]
struct Cli {
    /// TOML configuration, or a manifest.json from an earlier run to replay it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Random seed for the stochastic ensemble.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with physical constants (defaults to the built-in CODATA set).
    #[arg(long, global = true)]
    constants: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set csl.p_index=1`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Evolve one Fourier mode through inflation and radiation.
    ModeEvolve,
    /// Power spectrum and correction index over a k-grid.
    Spectrum,
    /// Stochastic trajectory ensemble with a deterministic reference.
    Ensemble,
    /// CMB versus laboratory exclusion map in the (r_c, lambda) plane.
    Exclusion,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cmd = match cli.command {
        Cmd::ModeEvolve => Command::ModeEvolve,
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Ensemble => Command::Ensemble,
        Cmd::Exclusion => Command::Exclusion,
    };
    let g = GlobalOptions {
        config: cli.config,
        out: cli.out,
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        seed: cli.seed,
        threads: cli.threads,
        constants: cli.constants,
        set: cli.set,
    };
    match run(cmd, &g) {
        Ok(report) => {
            // a closed pipe (e.g. `| head`) is not an error of the run
            let mut out = std::io::stdout().lock();
            for l in &report.lines {
                let _ = writeln!(out, "{l}");
            }
            let _ = writeln!(out, "wrote {} to {}", report.files.join(", "), report.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
