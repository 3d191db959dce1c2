use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use optomag::config;
use optomag::io::fmt_e;
use optomag::run::{self, Command, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Butterfly,
    Ldos,
    Transport,
    Abscan,
    Ladder,
    Validate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Butterfly => Command::Butterfly,
            Cmd::Ldos => Command::Ldos,
            Cmd::Transport => Command::Transport,
            Cmd::Abscan => Command::Abscan,
            Cmd::Ladder => Command::Ladder,
            Cmd::Validate => Command::Validate,
        }
    }
}

/// Photonic gauge fields in optomechanical lattices.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    command: Cmd,
    /// TOML configuration; optional when a preset is given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides run.output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides run.threads and OPTOMAG_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Bundled parameter set the configuration is merged onto.
    #[arg(long)]
    preset: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None if cli.preset.is_some() => String::new(),
        None if matches!(cli.command, Cmd::Validate) => {
            "scheme = \"ideal\"\n[lattice]\nrows = 1\ncols = 1\n[params]\nj_eff = 0.1\nkappa = 0.01\n[flux]\nvalue = 0.0\n".into()
        }
        None => {
            eprintln!("error: give --config or --preset");
            return ExitCode::from(2);
        }
    };
    let cfg = match config::parse_with_preset(&text, cli.preset.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { out: cli.out, threads: cli.threads };
    let report = match run::run(&cfg, cli.command.into(), &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(run::exit_code(&e) as u8);
        }
    };
    for o in &report.manifest.outputs {
        println!("wrote {} ({} bytes, sha256 {})", o.file, o.bytes, o.sha256);
    }
    for (name, value) in &report.metrics {
        println!("{name} = {}", fmt_e(*value));
    }
    if matches!(cli.command, Cmd::Validate) {
        println!("{:>12}  {:>18}  {:>18}  {:>18}", "epsilon", "splitting_exact", "2*j_eff", "rel_err");
        for r in &report.convergence {
            println!("{:>12}  {:>18}  {:>18}  {:>18}", fmt_e(r.epsilon), fmt_e(r.splitting_exact), fmt_e(r.two_jeff), fmt_e(r.rel_err));
        }
        for c in &report.checks {
            println!("{} {} value={} tol={}", if c.passed { "PASS" } else { "FAIL" }, c.name, fmt_e(c.value), fmt_e(c.tolerance));
        }
        if !report.passed() {
            return ExitCode::from(1);
        }
    }
    ExitCode::SUCCESS
}
