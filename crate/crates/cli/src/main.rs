//! `multibump` batch front end.

mod manifest;
mod run;

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "multibump", version, about = "Ground states and multibump minimizers from a TOML manifest")]
struct Cli {
    /// Run manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; overrides `out` in the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and searches (0 = all cores).
    #[arg(long, env = "MULTIBUMP_THREADS")]
    threads: Option<usize>,
    /// Overrides `seed` in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = run::Invocation { manifest: cli.manifest, out: cli.out, threads: cli.threads, seed: cli.seed, verbose: cli.verbose };
    match run::run(&opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
