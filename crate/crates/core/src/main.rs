use clap::Parser;
use fraclab::config::{format_issues, parse_config, RunKind};
use fraclab::runner::run;
use std::path::PathBuf;
use std::process::ExitCode;

/// Monte Carlo and grid experiments for fractional Schrödinger semigroups.
///
/// Exit status: 0 pass or ok, 1 predicate fail, 2 inconclusive, 3 error.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    /// sample | eigen | kernel | iu-check | counterexample | validate
    #[arg(value_parser = |s: &str| s.parse::<RunKind>())]
    kind: RunKind,
    /// Sectioned key = value config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides [run] seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides [run] out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replica batches; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.config.display());
            return ExitCode::from(3);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(issues) => {
            eprintln!("{}: invalid config\n{}", cli.config.display(), format_issues(&issues));
            return ExitCode::from(3);
        }
    };
    if cfg.kind != cli.kind {
        eprintln!("run kind {} does not match [run] kind = {} in {}", cli.kind, cfg.kind, cli.config.display());
        return ExitCode::from(3);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("--jobs must be at least 1");
            return ExitCode::from(3);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("cannot start worker pool: {e}");
            return ExitCode::from(3);
        }
    }
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.out));
    match run(&cfg, &out) {
        Ok(o) => {
            println!("{} {:?} -> {}", cfg.kind, o.status, out.display());
            ExitCode::from(o.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
