use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use enskog::config::ScenarioConfig;
use enskog::refine::{refinement_study, write_table};
use enskog::runner::{eos_scan, run_scenario, write_eos, EOS_SCAN_DENSITIES};
use enskog::verify::{summarize, verify_suite};
use enskog::Error;

#[derive(Parser)]
#[command(name = "enskog", version, about = "Enskog and Enskog-Vlasov kinetic solver with entropy-budget diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (`section.key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, overriding `run.threads` (0 uses every core).
    #[arg(long)]
    threads: Option<usize>,
    /// Reject unknown configuration keys.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Drive a scenario and write its ledger, frames and final snapshot.
    Run {
        #[command(flatten)]
        common: Common,
        /// Built-in scenario used when no config file is given.
        #[arg(long, default_value = "relaxation")]
        scenario: String,
    },
    /// Run the invariant battery and print a per-check table.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Convergence table of the balance, advection and closure residuals.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Compressibility against the closed-form equation of state.
    EosScan {
        #[command(flatten)]
        common: Common,
    },
}

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse { .. } | Error::UnsupportedOrder(_) | Error::Potential(_) => EXIT_CONFIG,
        Error::Invariant(_) | Error::Consistency(_) => EXIT_INVARIANT,
        Error::ModelDomain { .. } | Error::Numerical(_) | Error::Io(_) => EXIT_NUMERICAL,
    }
}

fn load(common: &Common, fallback: impl FnOnce() -> Result<ScenarioConfig, Error>) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let (cfg, warnings) = ScenarioConfig::parse_config(path, common.strict)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            cfg
        }
        None => fallback()?,
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn echo(cfg: &ScenarioConfig) -> Result<(), Error> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("resolved.cfg"), cfg.echo())?;
    Ok(())
}

fn execute(cmd: Command) -> Result<u8, (u8, Error)> {
    let cfg_err = |e: Error| (EXIT_CONFIG, e);
    let run_err = |e: Error| (exit_code(&e), e);
    match cmd {
        Command::Run { common, scenario } => {
            let cfg = load(&common, || ScenarioConfig::library(&scenario)).map_err(cfg_err)?;
            let summary = run_scenario(&cfg).map_err(run_err)?;
            let last = summary.series.last().copied().unwrap_or_default();
            println!(
                "{} steps of {:.4e} to t = {:.4e}; H = {:.8e}, F~ = {:.8e}",
                summary.steps, summary.dt, last.t, last.h, last.free_tilde
            );
            if let Some(a) = summary.audit {
                println!(
                    "closure max {:.3e}, rms {:.3e}; H increase {:.3e}; F~ increase {:.3e}",
                    a.closure_max, a.closure_rms, a.h_increase, a.free_tilde_increase
                );
            }
            println!("outputs in {}", cfg.out_dir.display());
            Ok(0)
        }
        Command::Verify { common } => {
            let cfg = load(&common, || Ok(ScenarioConfig::default())).map_err(cfg_err)?;
            let results = verify_suite(&cfg).map_err(run_err)?;
            for r in &results {
                println!("{r}");
            }
            let verdicts = summarize(&results);
            for (c, pass) in &verdicts {
                println!("criterion {c:>2}: {}", if *pass { "pass" } else { "FAIL" });
            }
            if common.out.is_some() || common.config.is_some() {
                echo(&cfg).map_err(run_err)?;
                let lines: Vec<String> = results.iter().map(|r| r.to_string()).collect();
                std::fs::write(cfg.out_dir.join("verify.txt"), lines.join("\n") + "\n").map_err(|e| run_err(e.into()))?;
            }
            Ok(if verdicts.iter().all(|(_, p)| *p) { 0 } else { EXIT_INVARIANT })
        }
        Command::Refine { common, levels } => {
            let cfg = load(&common, || Ok(ScenarioConfig::default())).map_err(cfg_err)?;
            let rows = refinement_study(&cfg, levels).map_err(run_err)?;
            echo(&cfg).map_err(run_err)?;
            write_table(&cfg.out_dir.join("convergence.csv"), &rows).map_err(run_err)?;
            for r in &rows {
                let flag = if r.monotone { "" } else { "  (non-monotone: tolerance floor reached?)" };
                println!("{:<22} order {:>6.3}  constant {:.3e}{}", r.quantity, r.order, r.constant, flag);
            }
            Ok(0)
        }
        Command::EosScan { common } => {
            let cfg = load(&common, || ScenarioConfig::library("eos-scan")).map_err(cfg_err)?;
            let points = eos_scan(&cfg, &EOS_SCAN_DENSITIES).map_err(run_err)?;
            echo(&cfg).map_err(run_err)?;
            write_eos(&cfg.out_dir.join("eos.csv"), &points).map_err(run_err)?;
            println!("{:>8} {:>12} {:>12} {:>10}", "b rho", "measured", "closed form", "rel err");
            for p in &points {
                println!("{:>8.3} {:>12.6} {:>12.6} {:>10.2e}", p.b_rho, p.measured, p.expected, p.rel_error);
            }
            Ok(if points.iter().all(|p| p.rel_error <= 0.02) { 0 } else { EXIT_INVARIANT })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
