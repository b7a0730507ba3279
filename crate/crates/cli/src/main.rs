use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use stifflwr_cli::acceptance::{run_suite, Suite};
use stifflwr_cli::{compare, parse_config, run, sweep, versioned_dir, Config};

#[derive(Parser)]
#[command(name = "stifflwr", version, about = "Stiff congestion-limit laboratory")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Output directory; a non-empty one is left alone and `<dir>.vN` used.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps and the limit-entropy pairings.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for the randomized acceptance scenarios.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Verb {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Run the cartesian product of the file's sweep axes.
    Sweep { config: PathBuf },
    /// Front tracking against a stiff finite-volume run.
    Compare { config: PathBuf },
    /// Run an acceptance suite: core or quick.
    Acceptance { suite: String },
}

fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        // ignore the error if the global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match cli.verb {
        Verb::Run { config } => {
            let cfg = load(&config)?;
            let dir = versioned_dir(&cli.out)?;
            let outcome = run(&cfg, &dir)?;
            print!("{}", outcome.to_text());
            println!("output: {}", dir.display());
            Ok(outcome.ok())
        }
        Verb::Sweep { config } => {
            let cfg = load(&config)?;
            let jobs = cli.jobs.unwrap_or(cfg.manifest.jobs);
            let dir = versioned_dir(&cli.out)?;
            let report = sweep(&cfg, &dir, jobs)?;
            for (p, r) in &report.points {
                let status = match r {
                    Ok(o) if o.ok() => "ok".to_string(),
                    Ok(o) => format!("fail ({})", o.failures.join("; ")),
                    Err(e) => format!("error ({e})"),
                };
                println!("{}: {status}", p.name);
            }
            println!("output: {}", dir.display());
            Ok(report.ok())
        }
        Verb::Compare { config } => {
            let cfg = load(&config)?;
            let dir = versioned_dir(&cli.out)?;
            let report = compare(&cfg, &dir)?;
            print!("{}", report.to_text());
            println!("output: {}", dir.display());
            Ok(true)
        }
        Verb::Acceptance { suite } => {
            let suite: Suite = suite.parse().map_err(anyhow::Error::msg)?;
            let results = run_suite(suite, cli.seed, |r| eprintln!("{r}"));
            let failed = results.iter().filter(|r| !r.passed).count();
            for r in &results {
                println!("{r}");
            }
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            Ok(failed == 0)
        }
    }
}
