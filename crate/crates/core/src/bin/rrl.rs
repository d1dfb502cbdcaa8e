//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use clap::{Parser, Subcommand};
use rrl_core::harness::{
    build_report, read_run, run_selftest, run_sweep, summary_to_csv, write_run, FileConfig,
};
use rrl_core::protocol::{run_experiment, Scheme};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rrl",
    about = "Communication-constrained remote reinforcement learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run from a config file; writes ledger.csv and meta.json.
    Run {
        /// Path to a TOML run configuration.
        #[arg(long, short)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a scheme x seed cross product off one base config; writes
    /// per-cell run directories plus summary.csv.
    Sweep {
        #[arg(long, short)]
        config: PathBuf,
        /// Comma-separated scheme list, e.g. grasp,asc,fr.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        /// Seeds: comma list (1,2,3) and/or ranges (0..10).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Render SVG panels and a markdown summary from run directories.
    Report {
        /// Run directories (or ledger.csv paths), all from the same
        /// environment.
        #[arg(required = true)]
        ledgers: Vec<PathBuf>,
        /// Output directory for report.svg and report.md.
        #[arg(long, short, default_value = "report")]
        output: PathBuf,
    },
    /// Quick codec / gradient / sampler property checks.
    Selftest,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

type CmdResult = Result<(), (u8, String)>;

fn config_err<E: std::fmt::Display>(e: E) -> (u8, String) {
    (EXIT_CONFIG, e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> (u8, String) {
    (EXIT_RUNTIME, e.to_string())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Run { config, output } => cmd_run(&config, output),
        Command::Sweep {
            config,
            schemes,
            seeds,
            output,
        } => cmd_sweep(&config, &schemes, &seeds, output),
        Command::Report { ledgers, output } => cmd_report(&ledgers, &output),
        Command::Selftest => cmd_selftest(),
    }
}

fn cmd_run(config: &PathBuf, output: Option<PathBuf>) -> CmdResult {
    let fc = FileConfig::load(config).map_err(config_err)?;
    let (cfg, out_dir) = fc.resolve().map_err(config_err)?;
    let out_dir = output.unwrap_or(out_dir);
    let ledger = run_experiment(&cfg).map_err(runtime_err)?;
    write_run(&out_dir, &ledger, &cfg).map_err(runtime_err)?;
    let last = ledger.final_eval().expect("final eval");
    println!(
        "{} on {} seed {}: final return {:.4}, total bits ideal {:.1} wire {}",
        cfg.scheme,
        cfg.env,
        cfg.run_seed,
        last.controller_return_mean,
        ledger.total_ideal_bits(),
        ledger.total_wire_bits()
    );
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn parse_seeds(parts: &[String]) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for p in parts {
        let p = p.trim();
        if let Some((a, b)) = p.split_once("..") {
            let a: u64 = a.parse().map_err(|_| format!("bad seed range '{p}'"))?;
            let b: u64 = b.parse().map_err(|_| format!("bad seed range '{p}'"))?;
            if b <= a {
                return Err(format!("empty seed range '{p}'"));
            }
            seeds.extend(a..b);
        } else if !p.is_empty() {
            seeds.push(p.parse().map_err(|_| format!("bad seed '{p}'"))?);
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}

fn cmd_sweep(
    config: &PathBuf,
    schemes: &[String],
    seeds: &[String],
    output: Option<PathBuf>,
) -> CmdResult {
    let fc = FileConfig::load(config).map_err(config_err)?;
    let (base, out_dir) = fc.resolve().map_err(config_err)?;
    let out_dir = output.unwrap_or(out_dir);
    let schemes: Vec<Scheme> = if schemes.is_empty() {
        Scheme::ALL.to_vec()
    } else {
        schemes
            .iter()
            .map(|s| Scheme::parse(s))
            .collect::<Result<_, _>>()
            .map_err(config_err)?
    };
    let seeds = parse_seeds(seeds).map_err(|m| (EXIT_CONFIG, m))?;

    let summary = run_sweep(&base, &schemes, &seeds, Some(&out_dir)).map_err(runtime_err)?;
    std::fs::create_dir_all(&out_dir).map_err(runtime_err)?;
    let path = out_dir.join("summary.csv");
    std::fs::write(&path, summary_to_csv(&summary)).map_err(runtime_err)?;

    for row in &summary.rows {
        let status = if row.seeds_failed > 0 {
            format!("{} ok, {} failed", row.seeds_ok, row.seeds_failed)
        } else {
            format!("{} ok", row.seeds_ok)
        };
        println!(
            "{:>6}: return {:8.4} ({:.4}), score {:6.1}, savings vs fr x{:.1}  [{status}]",
            row.scheme.name(),
            row.final_return_mean,
            row.final_return_std,
            row.normalized_score,
            row.savings_vs_fr
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(ledger_paths: &[PathBuf], output: &PathBuf) -> CmdResult {
    let mut runs = Vec::new();
    for p in ledger_paths {
        runs.push(read_run(p).map_err(runtime_err)?);
    }
    let report = build_report(&runs).map_err(config_err)?;
    std::fs::create_dir_all(output).map_err(runtime_err)?;
    let svg = output.join("report.svg");
    std::fs::write(&svg, &report.svg).map_err(runtime_err)?;
    let md = output.join("report.md");
    std::fs::write(&md, &report.markdown).map_err(runtime_err)?;
    println!("wrote {} and {}", svg.display(), md.display());
    Ok(())
}

fn cmd_selftest() -> CmdResult {
    let results = run_selftest();
    let mut all_ok = true;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:<42} {}", r.name, r.detail);
        all_ok &= r.passed;
    }
    if all_ok {
        println!("{} checks passed", results.len());
        Ok(())
    } else {
        Err((EXIT_RUNTIME, "selftest failures".into()))
    }
}
