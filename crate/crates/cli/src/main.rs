//! `closing-lab`: runs one experiment described by a TOML file.
//!
//! Exit codes: 0 all checks passed, 1 a check failed, 2 bad configuration or
//! usage, 3 a numerical failure (details in `diagnostics.json`).

use clap::Parser;
use closing_lab::config::ExperimentConfig;
use closing_lab::experiments::{run, RunError};
use closing_lab::output::Writer;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "closing-lab",
    version,
    about = "Closing-lemma experiments on Finsler surfaces"
)]
struct Args {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `results/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Also write gnuplot scripts next to the data files.
    #[arg(long)]
    emit_gnuplot: bool,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("closing-lab: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            return usage(e);
        }
    }

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return usage(format!("{}: {e}", args.config.display())),
    };
    let mut cfg: ExperimentConfig = match toml::from_str(&text) {
        Ok(c) => c,
        Err(e) => return usage(format!("{}: {e}", args.config.display())),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let name = cfg.experiment.name();
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(name));
    let writer = match Writer::new(&dir, args.emit_gnuplot) {
        Ok(w) => w,
        Err(e) => return usage(format!("{}: {e}", dir.display())),
    };
    log::info!("running {name} with seed {}", cfg.seed);

    let report = match run(&cfg) {
        Ok(r) => r,
        Err(RunError::Usage(msg)) => return usage(msg),
        Err(RunError::Numeric(e)) => {
            eprintln!("closing-lab: {name} failed: {e}");
            let diag = json!({ "experiment": name, "seed": cfg.seed, "error": e.to_string(), "debug": format!("{e:?}") });
            if let Err(w) = writer.json("diagnostics.json", &diag) {
                eprintln!("closing-lab: could not write diagnostics: {w}");
            }
            return ExitCode::from(3);
        }
    };

    let passed = report.passed();
    let doc = json!({ "experiment": name, "seed": cfg.seed, "passed": passed, "checks": report.checks, "result": report.result });
    let written = writer
        .json(&format!("{name}.json"), &doc)
        .and_then(|_| report.tables.iter().try_for_each(|t| writer.table(t)));
    if let Err(e) = written {
        eprintln!("closing-lab: writing results: {e}");
        return ExitCode::from(3);
    }
    for c in &report.checks {
        let limit = c
            .limit
            .map(|l| format!(" (limit {l:e})"))
            .unwrap_or_default();
        println!(
            "[{}] {}: {:e}{limit}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value
        );
    }
    println!(
        "{name}: {} -> {}",
        if passed { "passed" } else { "FAILED" },
        dir.display()
    );
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
