use clap::{Args, Parser, Subcommand};
use qsrc::cli::{run, CliRequest, CmdKind};
use std::path::PathBuf;

/// Quantum source-compression experiment driver.
#[derive(Parser)]
#[command(name = "qsrc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (overrides the config's 'out').
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for Monte Carlo estimation and property sweeps.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Holevo information report for an ensemble.
    Holevo(Common),
    /// Binary-source minimal purified entropy report.
    BinarySmin(Common),
    /// Rate-distortion sweep over block lengths and rates.
    RdSweep(Common),
    /// Property suites: contractivity, monotonicity, entropy estimates.
    Props(Common),
    /// Single protocol run.
    Protocol(Common),
}

fn main() {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Holevo(c) => (CmdKind::Holevo, c),
        Command::BinarySmin(c) => (CmdKind::BinarySmin, c),
        Command::RdSweep(c) => (CmdKind::RdSweep, c),
        Command::Props(c) => (CmdKind::Props, c),
        Command::Protocol(c) => (CmdKind::Protocol, c),
    };
    let code = run(&CliRequest {
        kind,
        config: common.config,
        out: common.out,
        seed: common.seed,
        threads: common.threads,
    });
    std::process::exit(code);
}
