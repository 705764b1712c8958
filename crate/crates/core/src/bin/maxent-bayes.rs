use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use maxent_bayes::harness::{self, Command, Diagnostic, ExperimentConfig, OutputFormat};
use maxent_bayes::{Error, Result};

/// Maximum-entropy inference experiments driven by JSON configs.
///
/// Exit status: 0 on success, 2 validation, 3 infeasible, 4 numerical, 5 resource.
#[derive(Debug, Parser)]
#[command(name = "maxent-bayes", version)]
struct Cli {
    /// One of bayes, tilt, project, necessity, sanov, gibbs, rate, meta, corr; or `validate`.
    command: String,
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for result files and manifest.json; without it results go to stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or both. Overrides the config format.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads (0 or unset: one per core).
    #[arg(long, env = "MAXENT_BAYES_THREADS")]
    threads: Option<usize>,
    /// Diagnostics on stderr.
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.family().exit_code() as u8)
        }
    }
}

fn load(cli: &Cli, expected: Option<Command>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::Io(format!("reading {}: {e}", cli.config.display())))?;
    let mut config = ExperimentConfig::parse(&text, expected)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = Some(out.clone());
    }
    if let Some(f) = &cli.format {
        config.format = f.parse::<OutputFormat>()?;
    }
    Ok(config)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Io(format!("starting thread pool: {e}")))
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    if cli.command == "validate" {
        let diagnostics = match load(cli, None) {
            Ok(config) => pool(cli.threads)?.install(|| harness::validate(&config)),
            Err(e) => vec![Diagnostic::from(&e)],
        };
        let text = serde_json::to_string(&diagnostics).map_err(|e| Error::Io(e.to_string()))?;
        println!("{text}");
        return Ok(match diagnostics.first() {
            None => ExitCode::SUCCESS,
            Some(d) => {
                if cli.verbose {
                    eprintln!("{}: {}", d.code, d.message);
                }
                ExitCode::from(d.exit_code as u8)
            }
        });
    }

    let command: Command = cli.command.parse()?;
    let config = load(cli, Some(command))?;
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
    let clock = Instant::now();
    let workers = pool(cli.threads)?;
    if cli.verbose {
        eprintln!(
            "{command}: seed {}, {} worker threads, config sha256 {}",
            config.seed,
            workers.current_num_threads(),
            harness::sha256_hex(&config.canonical_bytes())
        );
    }
    let outcome = workers.install(|| harness::execute(&config))?;
    if cli.verbose {
        eprintln!("{command}: computed in {:.3} s", clock.elapsed().as_secs_f64());
    }
    if let Some(dir) = &config.output_dir {
        let manifest = harness::write_outputs(&config, &outcome, dir, started_at)?;
        if cli.verbose {
            for rec in &manifest.outputs {
                eprintln!("wrote {} ({} bytes, sha256 {})", dir.join(&rec.file).display(), rec.bytes, rec.sha256);
            }
            eprintln!("wrote {}", dir.join(harness::MANIFEST_FILE).display());
        }
    }
    let mut stdout = std::io::stdout().lock();
    let payload = if config.format == OutputFormat::Csv { &outcome.csv } else { &outcome.json };
    stdout
        .write_all(payload)
        .and_then(|_| stdout.flush())
        .map_err(|e| Error::Io(format!("writing stdout: {e}")))?;
    Ok(ExitCode::SUCCESS)
}
