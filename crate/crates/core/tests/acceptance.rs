//! Acceptance battery: every criterion at its stated tolerance, one verdict
//! line per criterion. Grids are sized for a single core.
//!
//! Criterion numbers given after `--` restrict the run, e.g.
//! `cargo test --release --test acceptance -- 4 5`.

use std::process::ExitCode;
use std::time::Instant;

use enskog::config::ScenarioConfig;
use enskog::verify::{self, CheckResult};
use enskog::Result;

fn desk() -> ScenarioConfig {
    ScenarioConfig {
        n_x: 8,
        n_v: 8,
        xi_max: 4.5,
        sphere_order: 14,
        threads: 1,
        ..ScenarioConfig::default()
    }
}

fn narrow() -> ScenarioConfig {
    ScenarioConfig { n_x: 4, ..desk() }
}

type Check = fn(&ScenarioConfig) -> Result<Vec<CheckResult>>;

fn main() -> ExitCode {
    let plan: [(u8, &str, Check, ScenarioConfig); 10] = [
        (1, "discrete local inequality", verify::check_local_inequality, desk()),
        (2, "exchange form equivalence", verify::check_exchange_forms, desk()),
        (3, "equation of state recovery", verify::check_equation_of_state, desk()),
        (4, "conservation", verify::check_conservation, narrow()),
        (5, "local H theorem along trajectories", verify::check_h_theorem, narrow()),
        (6, "collisional balance identity", verify::check_collisional_balance, desk()),
        (7, "global recoveries", verify::check_recoveries, desk()),
        (8, "mean-field sector", verify::check_vlasov, desk()),
        (9, "Boltzmann reduction oracle", verify::check_boltzmann_reduction, desk()),
        (10, "free energy identity", verify::check_free_energy_forms, desk()),
    ];
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all = true;
    let mut verdicts = Vec::new();
    for (id, name, check, cfg) in plan {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let pass = match check(&cfg) {
            Ok(results) => {
                for r in &results {
                    println!("    {r}");
                }
                results.iter().all(|r| r.pass)
            }
            Err(e) => {
                println!("    error: {e}");
                false
            }
        };
        let line = format!(
            "criterion {id:>2} {:<36} {} ({:.1} s)",
            name,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        verdicts.push(line);
        all &= pass;
    }
    println!("\nsummary");
    for v in verdicts {
        println!("{v}");
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
